#pragma once

/// \file text_expert.hpp
/// Monomedia text scoring: a Dirichlet-smoothed query likelihood model and a
/// lexical entailment (term translation) model on top of it.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fusegraph/collection_store.hpp"
#include "fusegraph/error.hpp"
#include "fusegraph/sparse.hpp"

namespace fusegraph::text {

using TermId = std::size_t;

/// Lowercases and strips ASCII punctuation; returns the non-empty pieces.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else if (!std::ispunct(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

struct TextModelParams {
    double dirichlet_mu = 1000.0;
    std::size_t entailment_neighbors = 10;  // K_le, including the term itself

    void validate() const {
        if (!(dirichlet_mu > 0.0) || !std::isfinite(dirichlet_mu)) {
            fail(ErrorCode::InvalidConfig, "dirichlet_mu must be > 0");
        }
        if (entailment_neighbors == 0) fail(ErrorCode::InvalidConfig, "entailment_neighbors must be >= 1");
    }
};

struct TermCount {
    TermId term = 0;
    std::size_t count = 0;
};

class TextIndex {
public:
    std::size_t num_docs() const noexcept { return doc_lengths_.size(); }
    std::size_t num_terms() const noexcept { return terms_.size(); }
    std::size_t total_tokens() const noexcept { return total_tokens_; }

    std::optional<TermId> term_id(std::string_view term) const {
        auto it = vocabulary_.find(std::string(term));
        if (it == vocabulary_.end()) return std::nullopt;
        return it->second;
    }
    const std::string& term(TermId id) const { return terms_.at(id); }
    const std::vector<std::string>& terms() const noexcept { return terms_; }

    std::size_t doc_length(std::size_t doc) const { return doc_lengths_.at(doc); }
    std::span<const TermCount> doc_terms(std::size_t doc) const { return doc_terms_.at(doc); }
    std::size_t collection_count(TermId t) const { return collection_counts_.at(t); }
    std::span<const std::size_t> postings(TermId t) const { return postings_.at(t); }

    std::size_t term_frequency(TermId t, std::size_t doc) const {
        const auto& row = doc_terms_.at(doc);
        auto it = std::lower_bound(row.begin(), row.end(), t,
                                   [](const TermCount& tc, TermId id) { return tc.term < id; });
        return (it != row.end() && it->term == t) ? it->count : 0;
    }

    /// p(v|C), the maximum likelihood collection model.
    double collection_prob(TermId t) const {
        return static_cast<double>(collection_counts_.at(t)) / static_cast<double>(total_tokens_);
    }

    /// Query tokens mapped to term ids; tokens outside the vocabulary
    /// (stopwords, unseen words) are skipped.
    std::vector<TermId> map_query(std::span<const std::string> tokens) const {
        std::vector<TermId> out;
        for (const auto& t : tokens) {
            if (auto id = term_id(t)) out.push_back(*id);
        }
        return out;
    }

private:
    friend TextIndex build_index(std::span<const std::vector<std::string>> docs,
                                 const std::unordered_set<std::string>& stopwords);

    std::unordered_map<std::string, TermId> vocabulary_;
    std::vector<std::string> terms_;
    std::vector<std::vector<TermCount>> doc_terms_;
    std::vector<std::size_t> collection_counts_;
    std::vector<std::vector<std::size_t>> postings_;
    std::vector<std::size_t> doc_lengths_;
    std::size_t total_tokens_ = 0;
};

/// Tokens are expected lowercased already. Term ids follow first occurrence.
inline TextIndex build_index(std::span<const std::vector<std::string>> docs,
                             const std::unordered_set<std::string>& stopwords) {
    TextIndex index;
    index.doc_terms_.resize(docs.size());
    index.doc_lengths_.assign(docs.size(), 0);
    for (std::size_t d = 0; d < docs.size(); ++d) {
        std::map<TermId, std::size_t> counts;
        for (const auto& tok : docs[d]) {
            if (tok.empty() || stopwords.contains(tok)) continue;
            auto [it, inserted] = index.vocabulary_.emplace(tok, index.terms_.size());
            if (inserted) {
                index.terms_.push_back(tok);
                index.collection_counts_.push_back(0);
                index.postings_.emplace_back();
            }
            ++counts[it->second];
        }
        auto& row = index.doc_terms_[d];
        for (const auto& [term, count] : counts) {
            row.push_back({term, count});
            index.collection_counts_[term] += count;
            index.postings_[term].push_back(d);
            index.doc_lengths_[d] += count;
        }
        index.total_tokens_ += index.doc_lengths_[d];
    }
    if (index.total_tokens_ == 0) fail(ErrorCode::EmptyInput, "corpus has no indexable tokens");
    return index;
}

inline TextIndex build_index(std::span<const Document> docs,
                             const std::unordered_set<std::string>& stopwords) {
    std::vector<std::vector<std::string>> tokens;
    tokens.reserve(docs.size());
    for (const auto& d : docs) tokens.push_back(d.text_tokens);
    return build_index(std::span<const std::vector<std::string>>(tokens), stopwords);
}

/// Dirichlet-smoothed p_mu(v|d) = (tf(v,d) + mu p(v|C)) / (|d| + mu).
inline double smoothed_prob(const TextIndex& index, const TextModelParams& params, TermId term,
                            std::size_t doc) {
    const double tf = static_cast<double>(index.term_frequency(term, doc));
    const double len = static_cast<double>(index.doc_length(doc));
    return (tf + params.dirichlet_mu * index.collection_prob(term)) / (len + params.dirichlet_mu);
}

inline double lm_log_score(const TextIndex& index, const TextModelParams& params,
                           std::span<const TermId> query, std::size_t doc) {
    double log_score = 0.0;
    for (TermId v : query) log_score += std::log(smoothed_prob(index, params, v, doc));
    return log_score;
}

/// Query likelihood prod_v p_mu(v|d); out-of-vocabulary query tokens are skipped.
inline double lm_score(const TextIndex& index, const TextModelParams& params,
                       std::span<const std::string> query_tokens, std::size_t doc) {
    if (doc >= index.num_docs()) fail(ErrorCode::UnknownDocument, "document index out of range");
    auto q = index.map_query(query_tokens);
    return std::max(0.0, std::exp(lm_log_score(index, params, q, doc)));
}

// --- lexical entailment -----------------------------------------------------

/// Sparse p(v|u): row u is a distribution over at most K target terms.
class EntailmentTable {
public:
    EntailmentTable() = default;
    EntailmentTable(std::size_t num_terms, std::size_t max_neighbors)
        : rows_(num_terms), max_neighbors_(max_neighbors) {}

    static EntailmentTable identity(std::size_t num_terms) {
        EntailmentTable t(num_terms, 1);
        for (TermId u = 0; u < num_terms; ++u) t.rows_[u] = {{u, 1.0}};
        t.rebuild_columns();
        return t;
    }

    std::size_t num_terms() const noexcept { return rows_.size(); }
    std::size_t max_neighbors() const noexcept { return max_neighbors_; }

    /// Row u: (v, p(v|u)) sorted by v.
    std::span<const Entry> row(TermId u) const { return rows_.at(u); }

    /// Column v: (u, p(v|u)) sorted by u, i.e. the source terms entailing v.
    std::span<const Entry> sources(TermId v) const { return columns_.at(v); }

    void set_row(TermId u, std::vector<Entry> row) {
        std::sort(row.begin(), row.end(), [](const Entry& a, const Entry& b) { return a.index < b.index; });
        rows_.at(u) = std::move(row);
    }

    void rebuild_columns() {
        columns_.assign(rows_.size(), {});
        for (TermId u = 0; u < rows_.size(); ++u) {
            for (const auto& e : rows_[u]) columns_.at(e.index).push_back({u, e.value});
        }
    }

private:
    std::vector<std::vector<Entry>> rows_;
    std::vector<std::vector<Entry>> columns_;
    std::size_t max_neighbors_ = 0;
};

/// Expected mutual information between the presence indicators of two
/// terms over documents, from the 2x2 contingency table.
inline double expected_mutual_information(std::size_t n_docs, std::size_t df_u, std::size_t df_v,
                                          std::size_t df_uv) {
    const double n = static_cast<double>(n_docs);
    const double cells[2][2] = {
        {n - static_cast<double>(df_u + df_v - df_uv), static_cast<double>(df_v - df_uv)},
        {static_cast<double>(df_u - df_uv), static_cast<double>(df_uv)},
    };
    const double pu[2] = {1.0 - df_u / n, df_u / n};
    const double pv[2] = {1.0 - df_v / n, df_v / n};
    double emi = 0.0;
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            const double joint = cells[a][b] / n;
            if (joint > 0.0) emi += joint * std::log(joint / (pu[a] * pv[b]));
        }
    }
    return std::max(0.0, emi);
}

/// For every term u keeps u plus the K-1 co-occurring, positively associated
/// terms with the highest expected mutual information, weights by that
/// score and normalizes. u's own weight is its presence entropy, which
/// upper-bounds any association score. Rows with no usable mass fall back
/// to the identity.
inline EntailmentTable estimate_entailment(const TextIndex& index, const TextModelParams& params) {
    params.validate();
    const std::size_t V = index.num_terms();
    const std::size_t N = index.num_docs();
    EntailmentTable table(V, params.entailment_neighbors);

    std::vector<std::size_t> df(V);
    for (TermId t = 0; t < V; ++t) df[t] = index.postings(t).size();

    std::vector<std::size_t> co(V, 0);
    std::vector<TermId> touched;
    for (TermId u = 0; u < V; ++u) {
        touched.clear();
        for (std::size_t d : index.postings(u)) {
            for (const auto& tc : index.doc_terms(d)) {
                if (tc.term == u) continue;
                if (co[tc.term]++ == 0) touched.push_back(tc.term);
            }
        }
        std::sort(touched.begin(), touched.end());

        struct Candidate {
            TermId term;
            double score;
        };
        std::vector<Candidate> candidates;
        for (TermId v : touched) {
            const double expected = static_cast<double>(df[u]) * static_cast<double>(df[v]) / N;
            if (static_cast<double>(co[v]) > expected) {
                double s = expected_mutual_information(N, df[u], df[v], co[v]);
                if (s > 0.0) candidates.push_back({v, s});
            }
            co[v] = 0;
        }
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
        if (candidates.size() + 1 > params.entailment_neighbors) {
            candidates.resize(params.entailment_neighbors - 1);
        }

        const double self = expected_mutual_information(N, df[u], df[u], df[u]);
        double total = self;
        for (const auto& c : candidates) total += c.score;

        std::vector<Entry> row;
        if (!(self > 0.0) || !(total > 0.0)) {
            row.push_back({u, 1.0});
        } else {
            row.push_back({u, self / total});
            for (const auto& c : candidates) row.push_back({c.term, c.score / total});
        }
        table.set_row(u, std::move(row));
    }
    table.rebuild_columns();
    return table;
}

inline double le_log_score(const TextIndex& index, const EntailmentTable& table,
                           const TextModelParams& params, std::span<const TermId> query,
                           std::size_t doc) {
    double log_score = 0.0;
    for (TermId v : query) {
        double p = 0.0;
        for (const auto& src : table.sources(v)) {
            p += src.value * smoothed_prob(index, params, src.index, doc);
        }
        log_score += std::log(p);
    }
    return log_score;
}

/// prod_{v in q} sum_u p(v|u) p_mu(u|d).
inline double le_score(const TextIndex& index, const EntailmentTable& table,
                       const TextModelParams& params, std::span<const std::string> query_tokens,
                       std::size_t doc) {
    if (doc >= index.num_docs()) fail(ErrorCode::UnknownDocument, "document index out of range");
    if (table.num_terms() != index.num_terms()) {
        fail(ErrorCode::DimensionMismatch, "entailment table built over a different index");
    }
    auto q = index.map_query(query_tokens);
    return std::max(0.0, std::exp(le_log_score(index, table, params, q, doc)));
}

// --- retrieval helpers used by the pipeline ---------------------------------

enum class TextModel { lm, le };

/// Scores every document that contains at least one term able to generate a
/// query term (the term itself for lm, any entailment source for le).
/// Documents outside that candidate set get no score.
inline ScoreVector retrieve(const TextIndex& index, const TextModelParams& params,
                            std::span<const std::string> query_tokens, TextModel model,
                            const EntailmentTable* table = nullptr) {
    params.validate();
    if (model == TextModel::le && table == nullptr) {
        fail(ErrorCode::InvalidConfig, "lexical entailment scoring needs an entailment table");
    }
    auto q = index.map_query(query_tokens);
    std::set<std::size_t> candidates;
    for (TermId v : q) {
        if (model == TextModel::lm) {
            for (auto d : index.postings(v)) candidates.insert(d);
        } else {
            for (const auto& src : table->sources(v)) {
                for (auto d : index.postings(src.index)) candidates.insert(d);
            }
        }
    }
    std::vector<Entry> entries;
    entries.reserve(candidates.size());
    for (auto d : candidates) {
        double log_s = model == TextModel::lm ? lm_log_score(index, params, q, d)
                                              : le_log_score(index, *table, params, q, d);
        entries.push_back({d, std::exp(log_s)});
    }
    return ScoreVector::from_entries(index.num_docs(), std::move(entries));
}

/// Document-document text similarity: the per-token geometric mean of the
/// likelihood of d's tokens under d''s smoothed model,
/// exp((1/|d|) sum_{v in d} log p(v|d')), for pairs sharing a term.
/// Length normalization keeps long documents from underflowing.
inline SimMatrix similarity_matrix(const TextIndex& index, const TextModelParams& params,
                                   TextModel model, const EntailmentTable* table = nullptr) {
    params.validate();
    if (model == TextModel::le && table == nullptr) {
        fail(ErrorCode::InvalidConfig, "lexical entailment scoring needs an entailment table");
    }
    const std::size_t n = index.num_docs();
    SimMatrix out(n);
    std::vector<TermId> query;
    for (std::size_t d = 0; d < n; ++d) {
        query.clear();
        for (const auto& tc : index.doc_terms(d)) {
            for (std::size_t c = 0; c < tc.count; ++c) query.push_back(tc.term);
        }
        if (query.empty()) continue;
        std::set<std::size_t> candidates;
        for (const auto& tc : index.doc_terms(d)) {
            for (auto other : index.postings(tc.term)) candidates.insert(other);
        }
        std::vector<Entry> row;
        for (auto other : candidates) {
            double log_s = model == TextModel::lm ? lm_log_score(index, params, query, other)
                                                  : le_log_score(index, *table, params, query, other);
            row.push_back({other, std::exp(log_s / static_cast<double>(query.size()))});
        }
        out.set_row(d, ScoreVector::from_entries(n, std::move(row)));
    }
    return out;
}

/// Persists the table in the sim-matrix triplet format with terms as ids.
inline void save_entailment(const EntailmentTable& table, const TextIndex& index,
                            const std::string& path) {
    auto out = detail::open_out(path);
    for (TermId u = 0; u < table.num_terms(); ++u) {
        for (const auto& e : table.row(u)) {
            out << index.term(u) << '\t' << index.term(e.index) << '\t' << format_score(e.value) << '\n';
        }
    }
}

inline EntailmentTable load_entailment(const std::string& path, const TextIndex& index,
                                       std::size_t max_neighbors) {
    DocTable terms(index.terms());
    SimMatrix m = load_sim_matrix(path, terms);
    EntailmentTable table(index.num_terms(), max_neighbors);
    for (TermId u = 0; u < index.num_terms(); ++u) {
        auto row = m.row(u).entries();
        if (row.size() > max_neighbors) {
            fail(ErrorCode::MalformedLine, "entailment row for '" + index.term(u) + "' exceeds K");
        }
        table.set_row(u, {row.begin(), row.end()});
    }
    table.rebuild_columns();
    return table;
}

}  // namespace fusegraph::text
