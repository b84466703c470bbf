#pragma once

/// \file semantic_filter.hpp
/// Restricts every score vector and similarity matrix of a query to the top-l
/// documents by text score, l = min(nnz(s_t), m_cap), reindexed densely to
/// [0, l) in rank order.

#include <algorithm>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fusegraph/collection_store.hpp"
#include "fusegraph/error.hpp"
#include "fusegraph/sparse.hpp"

namespace fusegraph {

inline constexpr std::size_t kDefaultMCap = 1000;

struct FilteredContext {
    std::string query_id;
    std::vector<std::size_t> selected;                     // global doc indices, rank order
    std::unordered_map<std::size_t, std::size_t> index_map; // global -> local
    ScoreVector s_t_f;
    ScoreVector s_v_f;  // empty when no visual query scores exist
    SimMatrix S_t_f;
    SimMatrix S_v_f;
    std::size_t m_cap = kDefaultMCap;
    bool has_visual_query = false;

    std::size_t size() const noexcept { return selected.size(); }
};

/// Top min(nnz, m_cap) documents: descending score, ascending doc_id on ties
/// (ascending index when no table is given).
inline std::vector<std::size_t> select_top_l(const ScoreVector& s_t, std::size_t m_cap,
                                             const DocTable* docs = nullptr) {
    if (m_cap == 0) fail(ErrorCode::InvalidConfig, "m_cap must be >= 1");
    if (s_t.nnz() == 0) fail(ErrorCode::EmptyTextResult, "text query matched no document");
    std::vector<Entry> entries(s_t.entries().begin(), s_t.entries().end());
    auto better = [docs](const Entry& a, const Entry& b) {
        if (a.value != b.value) return a.value > b.value;
        if (docs != nullptr) return docs->id(a.index) < docs->id(b.index);
        return a.index < b.index;
    };
    const std::size_t l = std::min(entries.size(), m_cap);
    std::partial_sort(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(l), entries.end(), better);
    std::vector<std::size_t> out;
    out.reserve(l);
    for (std::size_t i = 0; i < l; ++i) out.push_back(entries[i].index);
    return out;
}

inline std::unordered_map<std::size_t, std::size_t> make_index_map(const std::vector<std::size_t>& selected) {
    std::unordered_map<std::size_t, std::size_t> map;
    map.reserve(selected.size());
    for (std::size_t i = 0; i < selected.size(); ++i) map.emplace(selected[i], i);
    return map;
}

/// Keeps the entries of s on selected documents, reindexed to local order.
inline ScoreVector filter_vector(const ScoreVector& s, const FilteredContext& ctx) {
    std::vector<Entry> out;
    for (const auto& e : s.entries()) {
        auto it = ctx.index_map.find(e.index);
        if (it != ctx.index_map.end()) out.push_back({it->second, e.value});
    }
    return ScoreVector::from_entries(ctx.size(), std::move(out));
}

/// l x l submatrix of S on the selected documents; values are copied as is.
inline SimMatrix filter_matrix(const SimMatrix& S, const FilteredContext& ctx) {
    SimMatrix out(ctx.size());
    for (std::size_t local = 0; local < ctx.size(); ++local) {
        const std::size_t global = ctx.selected[local];
        if (global >= S.dimension()) fail(ErrorCode::DimensionMismatch, "selected doc outside matrix");
        std::vector<Entry> row;
        for (const auto& e : S.row(global).entries()) {
            auto it = ctx.index_map.find(e.index);
            if (it != ctx.index_map.end()) row.push_back({it->second, e.value});
        }
        out.set_row(local, ScoreVector::from_entries(ctx.size(), std::move(row)));
    }
    return out;
}

/// Builds the per-query workspace. s_v may be absent (text-only query).
inline FilteredContext build_context(std::string query_id, const ScoreVector& s_t,
                                     const ScoreVector* s_v, const SimMatrix& S_t, const SimMatrix& S_v,
                                     std::size_t m_cap = kDefaultMCap, const DocTable* docs = nullptr) {
    if (S_t.dimension() != s_t.dimension() || S_v.dimension() != s_t.dimension() ||
        (s_v != nullptr && s_v->dimension() != s_t.dimension())) {
        fail(ErrorCode::DimensionMismatch, "scores and matrices must range over the same documents");
    }
    FilteredContext ctx;
    ctx.query_id = std::move(query_id);
    ctx.m_cap = m_cap;
    ctx.selected = select_top_l(s_t, m_cap, docs);
    ctx.index_map = make_index_map(ctx.selected);
    ctx.s_t_f = filter_vector(s_t, ctx);
    ctx.has_visual_query = s_v != nullptr;
    ctx.s_v_f = s_v != nullptr ? filter_vector(*s_v, ctx) : ScoreVector(ctx.size());
    ctx.S_t_f = filter_matrix(S_t, ctx);
    ctx.S_v_f = filter_matrix(S_v, ctx);
    return ctx;
}

}  // namespace fusegraph
