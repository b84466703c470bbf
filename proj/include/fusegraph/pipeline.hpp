#pragma once

/// \file pipeline.hpp
/// End-to-end batch runs: collection ingestion, monomedia scoring, semantic
/// filtering, diffusion, late fusion, ranking and evaluation, plus parameter
/// grid sweeps.
///
/// Collection directory layout:
///   docs.tsv                 doc_id \t tokens
///   queries.tsv              query_id \t tokens
///   qrels.txt                TREC qrels
///   descriptors.tsv          optional, document descriptors
///   query_descriptors.tsv    optional, visual part of the queries
///   stopwords.txt            optional
/// Derived files written by the scoring stages:
///   text_scores.tsv  text_sim.tsv  visual_scores.tsv  visual_sim.tsv  gmm.tsv

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "fusegraph/collection_store.hpp"
#include "fusegraph/error.hpp"
#include "fusegraph/evaluation.hpp"
#include "fusegraph/graph_fusion.hpp"
#include "fusegraph/semantic_filter.hpp"
#include "fusegraph/text_expert.hpp"
#include "fusegraph/visual_expert.hpp"

namespace fusegraph {

namespace files {
inline constexpr const char* docs = "docs.tsv";
inline constexpr const char* queries = "queries.tsv";
inline constexpr const char* qrels = "qrels.txt";
inline constexpr const char* descriptors = "descriptors.tsv";
inline constexpr const char* query_descriptors = "query_descriptors.tsv";
inline constexpr const char* stopwords = "stopwords.txt";
inline constexpr const char* text_scores = "text_scores.tsv";
inline constexpr const char* text_sim = "text_sim.tsv";
inline constexpr const char* visual_scores = "visual_scores.tsv";
inline constexpr const char* visual_sim = "visual_sim.tsv";
inline constexpr const char* gmm = "gmm.tsv";
}  // namespace files

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware).
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    if (threads == 0) threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < threads; ++w) {
        workers.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += threads) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    workers.clear();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

// --- ingestion --------------------------------------------------------------

struct RawCollection {
    DocTable table;
    std::vector<Document> docs;
    std::vector<Query> queries;
    Qrels qrels;
    std::unordered_set<std::string> stopwords;

    bool has_visual() const {
        return std::any_of(docs.begin(), docs.end(), [](const Document& d) { return !d.visual_descriptors.empty(); });
    }
    bool has_visual_queries() const {
        return std::any_of(queries.begin(), queries.end(),
                           [](const Query& q) { return !q.visual_descriptors.empty(); });
    }
};

inline RawCollection load_collection(const std::filesystem::path& dir, bool read_query_visuals = true) {
    namespace fs = std::filesystem;
    RawCollection c;
    std::vector<std::string> ids;
    for (auto& [id, tokens] : load_token_file((dir / files::docs).string())) {
        ids.push_back(id);
        Document d;
        d.doc_id = id;
        for (const auto& t : tokens) {
            for (auto& piece : text::tokenize(t)) d.text_tokens.push_back(std::move(piece));
        }
        c.docs.push_back(std::move(d));
    }
    if (c.docs.empty()) fail(ErrorCode::EmptyInput, "collection has no documents");
    c.table = DocTable(std::move(ids));
    for (auto& [id, tokens] : load_token_file((dir / files::queries).string())) {
        Query q;
        q.query_id = id;
        for (const auto& t : tokens) {
            for (auto& piece : text::tokenize(t)) q.text_tokens.push_back(std::move(piece));
        }
        if (q.text_tokens.empty()) fail(ErrorCode::EmptyInput, "query '" + id + "' has no text");
        c.queries.push_back(std::move(q));
    }
    c.qrels = load_qrels((dir / files::qrels).string());
    if (fs::exists(dir / files::stopwords)) {
        for (auto& w : load_stopwords((dir / files::stopwords).string())) c.stopwords.insert(w);
    }
    if (fs::exists(dir / files::descriptors)) {
        for (auto& [id, descs] : load_descriptors((dir / files::descriptors).string())) {
            c.docs[c.table.index_of(id)].visual_descriptors = std::move(descs);
        }
    }
    if (read_query_visuals && fs::exists(dir / files::query_descriptors)) {
        std::map<std::string, std::size_t> qindex;
        for (std::size_t i = 0; i < c.queries.size(); ++i) qindex[c.queries[i].query_id] = i;
        for (auto& [id, descs] : load_descriptors((dir / files::query_descriptors).string())) {
            auto it = qindex.find(id);
            if (it == qindex.end()) fail(ErrorCode::UnknownDocument, "descriptors for unknown query '" + id + "'");
            c.queries[it->second].visual_descriptors = std::move(descs);
        }
    }
    return c;
}

// --- monomedia scoring ------------------------------------------------------

struct TextScoringOptions {
    text::TextModel model = text::TextModel::lm;
    text::TextModelParams params;
};

struct TextScores {
    std::map<std::string, ScoreVector> query_scores;
    SimMatrix doc_similarity;
};

inline TextScores score_text(const RawCollection& c, const TextScoringOptions& opts) {
    opts.params.validate();
    auto index = text::build_index(std::span<const Document>(c.docs), c.stopwords);
    std::optional<text::EntailmentTable> table;
    if (opts.model == text::TextModel::le) table = text::estimate_entailment(index, opts.params);
    const text::EntailmentTable* tp = table ? &*table : nullptr;
    TextScores out;
    for (const auto& q : c.queries) {
        out.query_scores.emplace(q.query_id, text::retrieve(index, opts.params, q.text_tokens, opts.model, tp));
    }
    out.doc_similarity = text::similarity_matrix(index, opts.params, opts.model, tp);
    return out;
}

struct VisualScoringOptions {
    std::size_t components = 8;
    std::uint64_t seed = 7;
    bool pyramid = true;
    std::size_t max_fit_descriptors = 20000;
    std::size_t neighbors_per_row = 0;  // keep the top-n similarities per row, 0 keeps all
};

struct VisualScores {
    visual::GmmModel gmm;
    std::map<std::string, ScoreVector> query_scores;
    SimMatrix doc_similarity;
};

namespace detail {

inline visual::FisherVector signature(const visual::GmmModel& gmm, std::span<const Descriptor> descs, bool pyramid) {
    if (pyramid) return visual::spatial_pyramid_fv(gmm, descs);
    auto values = visual::descriptor_values(descs);
    return visual::fisher_vector(gmm, values);
}

inline ScoreVector keep_top(ScoreVector row, std::size_t n) {
    if (n == 0 || row.nnz() <= n) return row;
    std::vector<Entry> e(row.entries().begin(), row.entries().end());
    std::stable_sort(e.begin(), e.end(), [](const Entry& a, const Entry& b) { return a.value > b.value; });
    e.resize(n);
    return ScoreVector::from_entries(row.dimension(), std::move(e));
}

}  // namespace detail

/// Fisher kernel similarities clipped at zero: anti-correlated signatures
/// count as unrelated. Documents without descriptors get no visual scores.
inline VisualScores score_visual(const RawCollection& c, const VisualScoringOptions& opts) {
    std::vector<std::vector<double>> pooled;
    std::size_t total = 0;
    for (const auto& d : c.docs) total += d.visual_descriptors.size();
    if (total == 0) fail(ErrorCode::EmptyInput, "collection has no visual descriptors");
    const std::size_t stride = std::max<std::size_t>(1, (total + opts.max_fit_descriptors - 1) / opts.max_fit_descriptors);
    std::size_t counter = 0;
    for (const auto& d : c.docs) {
        for (const auto& u : d.visual_descriptors) {
            if (counter++ % stride == 0) pooled.push_back(u.values);
        }
    }
    VisualScores out;
    out.gmm = visual::fit_gmm(pooled, opts.components, opts.seed).model;

    const std::size_t n = c.docs.size();
    std::vector<std::optional<visual::FisherVector>> fvs(n);
    parallel_for(n, 0, [&](std::size_t i) {
        if (!c.docs[i].visual_descriptors.empty()) {
            fvs[i] = detail::signature(out.gmm, c.docs[i].visual_descriptors, opts.pyramid);
        }
    });

    auto scores_against = [&](const visual::FisherVector& probe) {
        std::vector<Entry> row;
        for (std::size_t j = 0; j < n; ++j) {
            if (!fvs[j]) continue;
            const double k = visual::fisher_kernel(probe, *fvs[j]);
            if (k > 0.0) row.push_back({j, k});
        }
        return ScoreVector::from_entries(n, std::move(row));
    };

    out.doc_similarity = SimMatrix(n);
    std::vector<ScoreVector> rows(n, ScoreVector(n));
    parallel_for(n, 0, [&](std::size_t i) {
        if (fvs[i]) rows[i] = detail::keep_top(scores_against(*fvs[i]), opts.neighbors_per_row);
    });
    for (std::size_t i = 0; i < n; ++i) out.doc_similarity.set_row(i, std::move(rows[i]));

    for (const auto& q : c.queries) {
        if (q.visual_descriptors.empty()) continue;
        out.query_scores.emplace(q.query_id,
                                 scores_against(detail::signature(out.gmm, q.visual_descriptors, opts.pyramid)));
    }
    return out;
}

// --- scored collection ------------------------------------------------------

/// Everything a run needs, independent of how the scores were produced.
struct ScoredCollection {
    DocTable table;
    std::vector<std::string> query_ids;
    Qrels qrels;
    std::map<std::string, ScoreVector> text_scores;
    std::map<std::string, ScoreVector> visual_scores;
    SimMatrix text_sim;
    SimMatrix visual_sim;
};

inline ScoredCollection prepare_collection(const RawCollection& c, const TextScoringOptions& text_opts,
                                           const VisualScoringOptions& visual_opts) {
    ScoredCollection s;
    s.table = c.table;
    for (const auto& q : c.queries) s.query_ids.push_back(q.query_id);
    s.qrels = c.qrels;
    auto t = score_text(c, text_opts);
    s.text_scores = std::move(t.query_scores);
    s.text_sim = std::move(t.doc_similarity);
    if (c.has_visual()) {
        auto v = score_visual(c, visual_opts);
        s.visual_scores = std::move(v.query_scores);
        s.visual_sim = std::move(v.doc_similarity);
    } else {
        s.visual_sim = SimMatrix(c.docs.size());
    }
    return s;
}

/// Reads the derived score files from a collection directory. Visual files
/// are optional; query visual scores are only read when `with_visual_queries`.
inline ScoredCollection load_scored_collection(const std::filesystem::path& dir, bool with_visual_queries) {
    namespace fs = std::filesystem;
    ScoredCollection s;
    std::vector<std::string> ids;
    for (auto& [id, _] : load_token_file((dir / files::docs).string())) ids.push_back(id);
    s.table = DocTable(std::move(ids));
    for (auto& [id, _] : load_token_file((dir / files::queries).string())) s.query_ids.push_back(id);
    s.qrels = load_qrels((dir / files::qrels).string());
    if (!fs::exists(dir / files::text_scores) || !fs::exists(dir / files::text_sim)) {
        fail(ErrorCode::IoError, "missing text scores in '" + dir.string() + "' (run score-text first)");
    }
    s.text_scores = load_score_vectors((dir / files::text_scores).string(), s.table);
    s.text_sim = load_sim_matrix((dir / files::text_sim).string(), s.table);
    s.visual_sim = fs::exists(dir / files::visual_sim) ? load_sim_matrix((dir / files::visual_sim).string(), s.table)
                                                       : SimMatrix(s.table.size());
    if (with_visual_queries && fs::exists(dir / files::visual_scores)) {
        s.visual_scores = load_score_vectors((dir / files::visual_scores).string(), s.table);
    }
    return s;
}

// --- pipeline ---------------------------------------------------------------

enum class Scenario { asymmetric, symmetric };

struct PipelineConfig {
    Scenario scenario = Scenario::symmetric;
    DiffusionConfig diffusion = presets::cm_default();
    FusionWeights weights{0.25, 0.25, 0.25, 0.25};
    std::size_t m_cap = kDefaultMCap;
    std::size_t threads = 0;

    void validate() const {
        diffusion.validate();
        weights.validate();
        if (m_cap == 0) fail(ErrorCode::InvalidConfig, "m_cap must be >= 1");
        if (scenario == Scenario::asymmetric && (weights.alpha_v != 0.0 || weights.alpha_vt != 0.0)) {
            fail(ErrorCode::InvalidConfig, "text-only (asymmetric) runs require alpha_v = alpha_vt = 0");
        }
    }
};

struct QueryFailure {
    std::string query_id;
    ErrorCode code;
    std::string message;
};

struct PipelineResult {
    Run run;
    eval::EvalReport report;
    std::vector<QueryFailure> failures;
    std::size_t unconverged = 0;  // queries whose open-ended diffusion hit max_iter
};

namespace detail {

inline ScoreVector normalized_or_zero(const ScoreVector& v, Normalization norm) {
    if (v.empty()) return v;
    return renormalize(v, norm);
}

}  // namespace detail

/// Scores one query; throws fusegraph::Error on per-query failure.
inline std::vector<RankedDoc> rank_query(const ScoredCollection& c, const std::string& query_id,
                                         const PipelineConfig& cfg, bool* unconverged = nullptr) {
    auto st = c.text_scores.find(query_id);
    if (st == c.text_scores.end()) fail(ErrorCode::EmptyTextResult, "no text scores for query");
    const ScoreVector* sv = nullptr;
    ScoreVector empty_visual(c.table.size());
    if (cfg.scenario == Scenario::symmetric) {
        auto it = c.visual_scores.find(query_id);
        sv = it == c.visual_scores.end() ? &empty_visual : &it->second;
    }
    FilteredContext ctx = build_context(query_id, st->second, sv, c.text_sim, c.visual_sim, cfg.m_cap, &c.table);

    const Normalization norm = cfg.diffusion.normalization;
    const ScoreVector s_t = detail::normalized_or_zero(ctx.s_t_f, norm);
    const ScoreVector s_v = detail::normalized_or_zero(ctx.s_v_f, norm);
    std::optional<ScoreVector> tv, vt;
    auto run_direction = [&](Direction dir) {
        DiffusionConfig d = cfg.diffusion;
        d.direction = dir;
        auto r = diffuse(ctx, d);
        if (!d.iterations && !r.trace.converged && unconverged) *unconverged = true;
        return std::move(r.scores);
    };
    if (cfg.weights.alpha_tv > 0.0) tv = run_direction(Direction::tv);
    if (cfg.weights.alpha_vt > 0.0) vt = run_direction(Direction::vt);
    const bool sym = cfg.scenario == Scenario::symmetric;
    ScoreVector fused = late_fuse(cfg.weights, &s_t, sym ? &s_v : nullptr, tv ? &*tv : nullptr, vt ? &*vt : nullptr);

    std::vector<RankedDoc> ranked;
    ranked.reserve(ctx.size());
    for (std::size_t local = 0; local < ctx.size(); ++local) {
        ranked.push_back({c.table.id(ctx.selected[local]), fused[local]});
    }
    sort_ranking(ranked);
    return ranked;
}

/// Per-query filter -> diffuse -> fuse -> rank (capped at l), then MAP.
/// Per-query data failures are collected; configuration errors throw.
inline PipelineResult run_pipeline(const ScoredCollection& c, const PipelineConfig& cfg) {
    cfg.validate();
    if (cfg.scenario == Scenario::symmetric && c.visual_scores.empty() &&
        (cfg.weights.alpha_v > 0.0 || cfg.weights.alpha_vt > 0.0)) {
        fail(ErrorCode::InvalidConfig, "symmetric scenario needs visual query scores");
    }
    const std::size_t nq = c.query_ids.size();
    std::vector<std::optional<std::vector<RankedDoc>>> lists(nq);
    std::vector<std::optional<QueryFailure>> failures(nq);
    std::vector<char> unconverged(nq, 0);
    parallel_for(nq, cfg.threads, [&](std::size_t i) {
        const auto& q = c.query_ids[i];
        try {
            bool flag = false;
            lists[i] = rank_query(c, q, cfg, &flag);
            unconverged[i] = flag;
        } catch (const Error& e) {
            if (e.is_config_error()) throw;
            failures[i] = QueryFailure{q, e.code(), e.what()};
        }
    });
    PipelineResult out;
    for (std::size_t i = 0; i < nq; ++i) {
        if (lists[i]) out.run[c.query_ids[i]] = std::move(*lists[i]);
        if (failures[i]) out.failures.push_back(std::move(*failures[i]));
        out.unconverged += unconverged[i] ? 1 : 0;
    }
    out.report = eval::evaluate(out.run, c.qrels);
    return out;
}

// --- sweeps -----------------------------------------------------------------

struct SweepGrid {
    std::vector<std::size_t> k{10};
    std::vector<double> gamma{0.3};
    std::vector<double> beta{0.0};
    std::vector<std::optional<std::size_t>> iterations{std::size_t{1}};
    std::vector<Normalization> normalization{Normalization::probability};
    std::vector<FusionWeights> weights{FusionWeights{0.25, 0.25, 0.25, 0.25}};

    std::size_t size() const {
        return k.size() * gamma.size() * beta.size() * iterations.size() * normalization.size() * weights.size();
    }
};

enum class Baseline { text, visual, first_cell };

struct SweepCell {
    PipelineConfig config;
    std::optional<double> map;  // absent when the cell failed as a whole
    std::string failure;
    std::size_t failed_queries = 0;
    std::optional<eval::TTestResult> vs_baseline;
    std::map<std::string, double> per_query_ap;
};

struct SweepTable {
    std::string baseline_name;
    double baseline_map = 0.0;
    std::vector<SweepCell> cells;
};

inline std::string format_k(std::size_t k) { return k == kAllNeighbors ? "l" : std::to_string(k); }
inline std::string format_iterations(const std::optional<std::size_t>& i) {
    return i ? std::to_string(*i) : "inf";
}
inline std::string to_string(Normalization n) { return n == Normalization::probability ? "probability" : "minmax"; }
inline std::string to_string(Baseline b) {
    switch (b) {
        case Baseline::text: return "text";
        case Baseline::visual: return "visual";
        case Baseline::first_cell: return "first-cell";
    }
    return "";
}

/// Evaluates the cartesian grid on top of `base` (scenario, m_cap, epsilon,
/// max_iter come from it) and tests each cell against the baseline.
inline SweepTable run_sweep(const ScoredCollection& c, const SweepGrid& grid, const PipelineConfig& base,
                            Baseline baseline = Baseline::text) {
    if (grid.size() == 0) fail(ErrorCode::InvalidConfig, "sweep grid is empty");
    SweepTable table;
    table.baseline_name = to_string(baseline);
    for (const auto& w : grid.weights)
        for (auto norm : grid.normalization)
            for (auto k : grid.k)
                for (double g : grid.gamma)
                    for (double b : grid.beta)
                        for (const auto& it : grid.iterations) {
                            SweepCell cell;
                            cell.config = base;
                            cell.config.weights = w;
                            cell.config.diffusion.normalization = norm;
                            cell.config.diffusion.k = k;
                            cell.config.diffusion.gamma = g;
                            cell.config.diffusion.beta = b;
                            cell.config.diffusion.iterations = it;
                            table.cells.push_back(std::move(cell));
                        }
    for (auto& cell : table.cells) {
        try {
            auto r = run_pipeline(c, cell.config);
            cell.map = r.report.map;
            cell.per_query_ap = std::move(r.report.per_query_ap);
            cell.failed_queries = r.failures.size();
        } catch (const Error& e) {
            cell.failure = e.what();
        }
    }

    std::map<std::string, double> base_ap;
    if (baseline == Baseline::first_cell) {
        base_ap = table.cells.front().per_query_ap;
        table.baseline_map = table.cells.front().map.value_or(0.0);
    } else {
        PipelineConfig bc = base;
        bc.weights = baseline == Baseline::text ? FusionWeights{1, 0, 0, 0} : FusionWeights{0, 1, 0, 0};
        if (baseline == Baseline::visual) bc.scenario = Scenario::symmetric;
        auto r = run_pipeline(c, bc);
        base_ap = std::move(r.report.per_query_ap);
        table.baseline_map = r.report.map;
    }
    for (auto& cell : table.cells) {
        if (!cell.map || cell.per_query_ap.size() != base_ap.size() || base_ap.size() < 2) continue;
        cell.vs_baseline = eval::paired_ttest(cell.per_query_ap, base_ap);
    }
    return table;
}

namespace detail {

inline std::vector<std::vector<std::string>> sweep_rows(const SweepTable& t) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"alpha", "norm", "k", "gamma", "beta", "i", "MAP", "delta", "t", "significant", "status"});
    auto fixed = [](double v, int digits) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(digits) << v;
        return os.str();
    };
    for (const auto& cell : t.cells) {
        const auto& w = cell.config.weights;
        const auto& d = cell.config.diffusion;
        std::vector<std::string> r{
            fixed(w.alpha_t, 2) + "," + fixed(w.alpha_v, 2) + "," + fixed(w.alpha_tv, 2) + "," + fixed(w.alpha_vt, 2),
            to_string(d.normalization), format_k(d.k), fixed(d.gamma, 2), fixed(d.beta, 2),
            format_iterations(d.iterations)};
        if (cell.map) {
            r.push_back(fixed(100.0 * *cell.map, 2));
            r.push_back(fixed(100.0 * (*cell.map - t.baseline_map), 2));
        } else {
            r.push_back("-");
            r.push_back("-");
        }
        if (cell.vs_baseline) {
            r.push_back(fixed(cell.vs_baseline->t, 3));
            r.push_back(cell.vs_baseline->significant ? "yes" : "no");
        } else {
            r.push_back("-");
            r.push_back("-");
        }
        if (!cell.failure.empty()) {
            r.push_back("failed: " + cell.failure);
        } else if (cell.failed_queries > 0) {
            r.push_back(std::to_string(cell.failed_queries) + " queries failed");
        } else {
            r.push_back("ok");
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace detail

inline std::string sweep_to_tsv(const SweepTable& t) {
    std::ostringstream os;
    os << "# baseline\t" << t.baseline_name << "\t" << format_score(t.baseline_map) << '\n';
    for (const auto& row : detail::sweep_rows(t)) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "\t" : "") << row[i];
        os << '\n';
    }
    return os.str();
}

inline std::string sweep_to_text(const SweepTable& t) {
    auto rows = detail::sweep_rows(t);
    std::vector<std::size_t> width(rows.front().size(), 0);
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    std::ostringstream os;
    os << "baseline " << t.baseline_name << ": MAP " << std::fixed << std::setprecision(2) << 100.0 * t.baseline_map
       << '\n';
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            os << std::left << std::setw(static_cast<int>(width[i])) << r[i] << (i + 1 < r.size() ? "  " : "");
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace fusegraph
