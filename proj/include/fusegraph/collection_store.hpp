#pragma once

/// \file collection_store.hpp
/// Documents, queries, judgments and their on-disk formats.
///
/// All formats are line oriented, UTF-8, LF terminated:
///   score vectors   query_id \t doc_id \t score
///   sim matrices    doc_id \t doc_id \t score
///   qrels           query_id 0 doc_id rel            (rel in {0,1})
///   runs            query_id Q0 doc_id rank score tag
///   documents       doc_id \t space separated tokens
///   descriptors     doc_id \t x \t y \t v1,...,vD     (x, y may be empty)
/// Scores are written with the shortest representation that parses back to
/// the same double.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fusegraph/error.hpp"
#include "fusegraph/sparse.hpp"

namespace fusegraph {

struct Descriptor {
    std::optional<std::array<double, 2>> location;  // normalized (x, y) in [0,1]^2
    std::vector<double> values;
};

struct Document {
    std::string doc_id;
    std::vector<std::string> text_tokens;
    std::vector<Descriptor> visual_descriptors;
};

struct Query {
    std::string query_id;
    std::vector<std::string> text_tokens;
    std::vector<Descriptor> visual_descriptors;  // empty in the text-only scenario
};

/// Bidirectional doc_id <-> dense index map.
class DocTable {
public:
    DocTable() = default;
    explicit DocTable(std::vector<std::string> ids) : ids_(std::move(ids)) {
        index_.reserve(ids_.size());
        for (std::size_t i = 0; i < ids_.size(); ++i) {
            if (!index_.emplace(ids_[i], i).second) {
                fail(ErrorCode::DuplicateEntry, "document id '" + ids_[i] + "' repeated");
            }
        }
    }

    std::size_t size() const noexcept { return ids_.size(); }
    const std::string& id(std::size_t index) const { return ids_.at(index); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }

    std::optional<std::size_t> find(std::string_view id) const {
        auto it = index_.find(std::string(id));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t index_of(std::string_view id) const {
        auto idx = find(id);
        if (!idx) fail(ErrorCode::UnknownDocument, "unknown document id '" + std::string(id) + "'");
        return *idx;
    }

private:
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Binary judgments, query_id -> doc_id -> relevant.
class Qrels {
public:
    void set(const std::string& query_id, const std::string& doc_id, bool relevant) {
        judgments_[query_id][doc_id] = relevant;
    }

    bool is_relevant(const std::string& query_id, const std::string& doc_id) const {
        auto q = judgments_.find(query_id);
        if (q == judgments_.end()) return false;
        auto d = q->second.find(doc_id);
        return d != q->second.end() && d->second;
    }

    std::size_t relevant_count(const std::string& query_id) const {
        auto q = judgments_.find(query_id);
        if (q == judgments_.end()) return 0;
        return static_cast<std::size_t>(std::count_if(
            q->second.begin(), q->second.end(), [](const auto& kv) { return kv.second; }));
    }

    std::vector<std::string> query_ids() const {
        std::vector<std::string> out;
        for (const auto& [q, _] : judgments_) out.push_back(q);
        return out;
    }

    const std::map<std::string, std::map<std::string, bool>>& judgments() const noexcept {
        return judgments_;
    }

private:
    std::map<std::string, std::map<std::string, bool>> judgments_;
};

struct RankedDoc {
    std::string doc_id;
    double score = 0.0;
};

/// query_id -> ranked list (best first once passed through sort_ranking).
using Run = std::map<std::string, std::vector<RankedDoc>>;

/// Descending score, ascending doc_id on ties. NaN scores are rejected.
inline void sort_ranking(std::vector<RankedDoc>& docs) {
    for (const auto& d : docs) {
        if (std::isnan(d.score)) fail(ErrorCode::NonFiniteScore, "NaN score for " + d.doc_id);
    }
    std::sort(docs.begin(), docs.end(), [](const RankedDoc& a, const RankedDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
}

// --- text helpers -----------------------------------------------------------

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot open '" + path + "' for writing");
    return out;
}

inline std::string where(const std::string& path, std::size_t line_no) {
    return path + ":" + std::to_string(line_no);
}

/// Calls fn(line, line_no) for every non-blank line; strips a trailing CR.
template <class Fn>
void for_each_line(const std::string& path, Fn&& fn) {
    auto in = open_in(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        fn(std::string_view(line), line_no);
    }
}

}  // namespace detail

inline std::string format_score(double value) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) fail(ErrorCode::NonFiniteScore, "cannot format score");
    return std::string(buf.data(), ptr);
}

inline std::optional<double> parse_double(std::string_view text) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || first == last) return std::nullopt;
    return value;
}

namespace detail {

inline double parse_score(std::string_view field, const std::string& path, std::size_t line_no) {
    auto v = parse_double(field);
    if (!v) fail(ErrorCode::MalformedLine, where(path, line_no) + ": bad score '" + std::string(field) + "'");
    if (!std::isfinite(*v)) fail(ErrorCode::NonFiniteScore, where(path, line_no));
    if (*v < 0.0) {
        fail(ErrorCode::NegativeScore, where(path, line_no) + ": score " + std::string(field));
    }
    return *v;
}

}  // namespace detail

// --- score vectors ----------------------------------------------------------

/// Reads "query_id \t doc_id \t score" lines. Zero scores are accepted and
/// dropped; every returned vector has dimension docs.size().
inline std::map<std::string, ScoreVector> load_score_vectors(const std::string& path,
                                                             const DocTable& docs) {
    std::map<std::string, std::vector<Entry>> pending;
    detail::for_each_line(path, [&](std::string_view line, std::size_t line_no) {
        auto f = detail::split(line, '\t');
        if (f.size() != 3 || f[0].empty() || f[1].empty()) {
            fail(ErrorCode::MalformedLine, detail::where(path, line_no) + ": expected 3 tab-separated fields");
        }
        double score = detail::parse_score(f[2], path, line_no);
        auto idx = docs.find(f[1]);
        if (!idx) {
            fail(ErrorCode::UnknownDocument,
                 detail::where(path, line_no) + ": unknown document '" + std::string(f[1]) + "'");
        }
        pending[std::string(f[0])].push_back({*idx, score});
    });
    std::map<std::string, ScoreVector> out;
    for (auto& [q, entries] : pending) {
        try {
            out.emplace(q, ScoreVector::from_entries(docs.size(), std::move(entries)));
        } catch (const Error& e) {
            fail(e.code(), path + ": query '" + q + "': " + e.what());
        }
    }
    return out;
}

inline void save_score_vectors(const std::map<std::string, ScoreVector>& vectors,
                               const DocTable& docs, const std::string& path) {
    auto out = detail::open_out(path);
    for (const auto& [q, v] : vectors) {
        for (const auto& e : v.entries()) {
            out << q << '\t' << docs.id(e.index) << '\t' << format_score(e.value) << '\n';
        }
    }
}

// --- similarity matrices ----------------------------------------------------

inline SimMatrix load_sim_matrix(const std::string& path, const DocTable& docs) {
    std::vector<Triplet> triplets;
    detail::for_each_line(path, [&](std::string_view line, std::size_t line_no) {
        auto f = detail::split(line, '\t');
        if (f.size() != 3) {
            fail(ErrorCode::MalformedLine, detail::where(path, line_no) + ": expected 3 tab-separated fields");
        }
        double score = detail::parse_score(f[2], path, line_no);
        auto r = docs.find(f[0]);
        auto c = docs.find(f[1]);
        if (!r || !c) {
            fail(ErrorCode::UnknownDocument, detail::where(path, line_no) + ": unknown document");
        }
        triplets.push_back({*r, *c, score});
    });
    try {
        return SimMatrix::from_triplets(docs.size(), triplets);
    } catch (const Error& e) {
        fail(e.code(), path + ": " + e.what());
    }
}

inline void save_sim_matrix(const SimMatrix& m, const DocTable& docs, const std::string& path) {
    if (m.dimension() != docs.size()) fail(ErrorCode::DimensionMismatch, "matrix/doc table size");
    auto out = detail::open_out(path);
    for (std::size_t r = 0; r < m.dimension(); ++r) {
        for (const auto& e : m.row(r).entries()) {
            out << docs.id(r) << '\t' << docs.id(e.index) << '\t' << format_score(e.value) << '\n';
        }
    }
}

// --- qrels and runs ---------------------------------------------------------

inline Qrels load_qrels(const std::string& path) {
    Qrels qrels;
    detail::for_each_line(path, [&](std::string_view line, std::size_t line_no) {
        auto f = detail::split_ws(line);
        if (f.size() != 4) fail(ErrorCode::MalformedLine, detail::where(path, line_no) + ": expected 4 fields");
        if (f[3] != "0" && f[3] != "1") {
            fail(ErrorCode::MalformedLine, detail::where(path, line_no) + ": relevance must be 0 or 1");
        }
        qrels.set(std::string(f[0]), std::string(f[2]), f[3] == "1");
    });
    return qrels;
}

inline void save_qrels(const Qrels& qrels, const std::string& path) {
    auto out = detail::open_out(path);
    for (const auto& [q, docs] : qrels.judgments()) {
        for (const auto& [d, rel] : docs) out << q << " 0 " << d << ' ' << (rel ? 1 : 0) << '\n';
    }
}

/// Writes a TREC run. Each list is re-sorted (descending score, ascending
/// doc_id) before ranks are assigned.
inline void save_run(const Run& run, const std::string& path, std::string_view tag = "fusegraph") {
    auto out = detail::open_out(path);
    for (const auto& [q, docs] : run) {
        std::vector<RankedDoc> sorted = docs;
        sort_ranking(sorted);
        for (std::size_t r = 0; r < sorted.size(); ++r) {
            out << q << " Q0 " << sorted[r].doc_id << ' ' << (r + 1) << ' '
                << format_score(sorted[r].score) << ' ' << tag << '\n';
        }
    }
}

/// Reads a TREC run; lists come back ordered by rank.
inline Run load_run(const std::string& path) {
    std::map<std::string, std::vector<std::pair<long, RankedDoc>>> pending;
    detail::for_each_line(path, [&](std::string_view line, std::size_t line_no) {
        auto f = detail::split_ws(line);
        if (f.size() != 6) fail(ErrorCode::MalformedLine, detail::where(path, line_no) + ": expected 6 fields");
        long rank = 0;
        auto [p, ec] = std::from_chars(f[3].data(), f[3].data() + f[3].size(), rank);
        auto score = parse_double(f[4]);
        if (ec != std::errc{} || p != f[3].data() + f[3].size() || !score) {
            fail(ErrorCode::MalformedLine, detail::where(path, line_no) + ": bad rank or score");
        }
        pending[std::string(f[0])].push_back({rank, {std::string(f[2]), *score}});
    });
    Run run;
    for (auto& [q, rows] : pending) {
        std::stable_sort(rows.begin(), rows.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        auto& list = run[q];
        for (auto& [_, d] : rows) list.push_back(std::move(d));
    }
    return run;
}

// --- documents and descriptors ----------------------------------------------

/// Lines "id \t tok tok tok". Returns (id, tokens) pairs in file order.
inline std::vector<std::pair<std::string, std::vector<std::string>>> load_token_file(
    const std::string& path) {
    std::vector<std::pair<std::string, std::vector<std::string>>> out;
    detail::for_each_line(path, [&](std::string_view line, std::size_t line_no) {
        auto tab = line.find('\t');
        std::string_view id = line.substr(0, tab);
        if (id.empty()) fail(ErrorCode::MalformedLine, detail::where(path, line_no) + ": empty id");
        std::vector<std::string> tokens;
        if (tab != std::string_view::npos) {
            for (auto t : detail::split_ws(line.substr(tab + 1))) tokens.emplace_back(t);
        }
        out.emplace_back(std::string(id), std::move(tokens));
    });
    return out;
}

inline void save_token_file(const std::vector<std::pair<std::string, std::vector<std::string>>>& rows,
                            const std::string& path) {
    auto out = detail::open_out(path);
    for (const auto& [id, tokens] : rows) {
        out << id << '\t';
        for (std::size_t i = 0; i < tokens.size(); ++i) out << (i ? " " : "") << tokens[i];
        out << '\n';
    }
}

/// Descriptor lines grouped by owner id, file order preserved within an id.
/// All descriptors in one file must share the same dimension.
inline std::map<std::string, std::vector<Descriptor>> load_descriptors(const std::string& path) {
    std::map<std::string, std::vector<Descriptor>> out;
    std::size_t dim = 0;
    detail::for_each_line(path, [&](std::string_view line, std::size_t line_no) {
        auto f = detail::split(line, '\t');
        if (f.size() != 4 || f[0].empty()) {
            fail(ErrorCode::MalformedLine, detail::where(path, line_no) + ": expected 4 tab-separated fields");
        }
        Descriptor d;
        if (!f[1].empty() || !f[2].empty()) {
            auto x = parse_double(f[1]);
            auto y = parse_double(f[2]);
            if (!x || !y) fail(ErrorCode::MalformedLine, detail::where(path, line_no) + ": bad location");
            d.location = std::array<double, 2>{*x, *y};
        }
        for (auto v : detail::split(f[3], ',')) {
            auto value = parse_double(v);
            if (!value || !std::isfinite(*value)) {
                fail(ErrorCode::MalformedLine, detail::where(path, line_no) + ": bad descriptor value");
            }
            d.values.push_back(*value);
        }
        if (dim == 0) dim = d.values.size();
        if (d.values.size() != dim) {
            fail(ErrorCode::DimensionMismatch, detail::where(path, line_no) + ": descriptor dimension");
        }
        out[std::string(f[0])].push_back(std::move(d));
    });
    return out;
}

inline void save_descriptors(const std::vector<std::pair<std::string, std::vector<Descriptor>>>& rows,
                             const std::string& path) {
    auto out = detail::open_out(path);
    for (const auto& [id, descs] : rows) {
        for (const auto& d : descs) {
            out << id << '\t';
            if (d.location) {
                out << format_score((*d.location)[0]) << '\t' << format_score((*d.location)[1]);
            } else {
                out << '\t';
            }
            out << '\t';
            for (std::size_t i = 0; i < d.values.size(); ++i) {
                out << (i ? "," : "") << format_score(d.values[i]);
            }
            out << '\n';
        }
    }
}

/// Stopword list, one term per line.
inline std::vector<std::string> load_stopwords(const std::string& path) {
    std::vector<std::string> out;
    detail::for_each_line(path, [&](std::string_view line, std::size_t) {
        for (auto t : detail::split_ws(line)) out.emplace_back(t);
    });
    return out;
}

}  // namespace fusegraph
