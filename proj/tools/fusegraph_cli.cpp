// fusegraph command line: synthetic collections, monomedia scoring, filtered
// diffusion, late fusion, evaluation and parameter sweeps.
//
// Exit codes: 0 ok, 1 configuration error, 2 data error.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fusegraph/fusegraph.hpp"

namespace fs = std::filesystem;
using namespace fusegraph;

namespace {

[[noreturn]] void config_error(const std::string& msg) { fail(ErrorCode::InvalidConfig, msg); }

std::size_t parse_k(const std::string& s) {
    if (s == "l" || s == "all") return kAllNeighbors;
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(s, &pos);
    } catch (const std::exception&) {
        config_error("bad k '" + s + "' (positive integer or l)");
    }
    if (pos != s.size() || v == 0) config_error("bad k '" + s + "' (positive integer or l)");
    return static_cast<std::size_t>(v);
}

std::optional<std::size_t> parse_iters(const std::string& s) {
    if (s == "inf") return std::nullopt;
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(s, &pos);
    } catch (const std::exception&) {
        config_error("bad iteration count '" + s + "' (positive integer or inf)");
    }
    if (pos != s.size() || v == 0) config_error("bad iteration count '" + s + "' (positive integer or inf)");
    return static_cast<std::size_t>(v);
}

double parse_unit(const std::string& s, const char* what) {
    auto v = parse_double(s);
    if (!v) config_error(std::string("bad ") + what + " '" + s + "'");
    return *v;
}

FusionWeights parse_alpha(const std::string& s) {
    std::vector<double> w;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) w.push_back(parse_unit(part, "alpha weight"));
    if (w.size() != 4) config_error("--alpha expects four weights t,v,tv,vt");
    FusionWeights out{w[0], w[1], w[2], w[3]};
    out.validate();
    return out;
}

Normalization parse_norm(const std::string& s) {
    if (s == "probability") return Normalization::probability;
    if (s == "minmax") return Normalization::minmax;
    config_error("--norm must be probability or minmax");
}

Scenario parse_scenario(const std::string& s) {
    if (s == "symmetric") return Scenario::symmetric;
    if (s == "asymmetric") return Scenario::asymmetric;
    config_error("--scenario must be symmetric or asymmetric");
}

Direction parse_direction(const std::string& s) {
    if (s == "tv") return Direction::tv;
    if (s == "vt") return Direction::vt;
    config_error("--direction must be tv or vt");
}

// Options shared by every stage that runs the diffusion.
struct RunOptions {
    std::string dir;
    std::string preset = "cm-default";
    std::string k, gamma, beta, iters, norm, alpha;
    std::string scenario = "symmetric";
    std::size_t m_cap = kDefaultMCap;
    std::size_t threads = 0;

    void attach(CLI::App* app, bool with_alpha = true) {
        app->add_option("--dir", dir, "collection directory")->required();
        app->add_option("--preset", preset, "cm-default | rw-classic | gd-default");
        app->add_option("--k", k, "neighbours kept per step (integer or l)");
        app->add_option("--gamma", gamma, "prior weight in [0,1]");
        app->add_option("--beta", beta, "same-modality weight in [0,1]");
        app->add_option("--iters", iters, "iterations (integer or inf)");
        app->add_option("--norm", norm, "probability | minmax");
        app->add_option("--scenario", scenario, "symmetric | asymmetric");
        app->add_option("--m-cap", m_cap, "semantic filter size cap");
        app->add_option("--threads", threads, "worker threads, 0 = all cores");
        if (with_alpha) app->add_option("--alpha", alpha, "fusion weights t,v,tv,vt");
    }

    PipelineConfig config() const {
        PipelineConfig c;
        auto p = presets::by_name(preset);
        if (!p) config_error("unknown preset '" + preset + "'");
        c.diffusion = *p;
        if (!k.empty()) c.diffusion.k = parse_k(k);
        if (!gamma.empty()) c.diffusion.gamma = parse_unit(gamma, "gamma");
        if (!beta.empty()) c.diffusion.beta = parse_unit(beta, "beta");
        if (!iters.empty()) c.diffusion.iterations = parse_iters(iters);
        if (!norm.empty()) c.diffusion.normalization = parse_norm(norm);
        c.scenario = parse_scenario(scenario);
        if (!alpha.empty()) {
            c.weights = parse_alpha(alpha);
        } else if (c.scenario == Scenario::asymmetric) {
            c.weights = {0.5, 0.0, 0.5, 0.0};
        }
        c.m_cap = m_cap;
        c.threads = threads;
        c.validate();
        return c;
    }

    bool symmetric() const { return parse_scenario(scenario) == Scenario::symmetric; }
};

void report_failures(const PipelineResult& r) {
    for (const auto& f : r.failures) {
        std::cerr << "warning: query " << f.query_id << " skipped: " << f.message << '\n';
    }
    if (r.unconverged > 0) {
        std::cerr << "warning: " << r.unconverged << " queries hit max_iter before converging\n";
    }
}

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write '" + path.string() + "'");
    out << text;
}

// --- subcommands ------------------------------------------------------------

int cmd_synth(const fs::path& out, const std::string& spec_name, std::uint64_t seed, synth::SynthSpec overrides,
              bool custom) {
    synth::SynthSpec spec;
    if (spec_name == "bundled") {
        spec = synth::bundled_spec();
    } else if (spec_name == "noisy-second-hop") {
        spec = synth::noisy_second_hop_spec();
    } else {
        config_error("--spec must be bundled or noisy-second-hop");
    }
    if (custom) spec = overrides;
    synth::make_synthetic(spec, seed, out);
    std::cout << "wrote " << spec.topics * spec.docs_per_topic << " documents and "
              << spec.topics * spec.queries_per_topic << " queries to " << out.string() << '\n';
    return 0;
}

int cmd_ingest(const fs::path& dir, bool text_only) {
    auto c = load_collection(dir, !text_only);
    std::size_t descs = 0, dim = 0, with_visual = 0;
    for (const auto& d : c.docs) {
        descs += d.visual_descriptors.size();
        if (!d.visual_descriptors.empty()) {
            ++with_visual;
            dim = d.visual_descriptors.front().values.size();
        }
    }
    std::size_t judged = 0, relevant = 0;
    for (const auto& [q, docs] : c.qrels.judgments()) {
        judged += docs.size();
        relevant += c.qrels.relevant_count(q);
    }
    std::cout << "documents\t" << c.docs.size() << '\n'
              << "queries\t" << c.queries.size() << '\n'
              << "judgments\t" << judged << " (" << relevant << " relevant)\n"
              << "documents with descriptors\t" << with_visual << '\n'
              << "descriptors\t" << descs << " (dimension " << dim << ")\n"
              << "visual queries\t" << (text_only ? std::string("not read") : c.has_visual_queries() ? "yes" : "no")
              << '\n';
    return 0;
}

int cmd_score_text(const fs::path& dir, const std::string& model, double mu, std::size_t le_k) {
    TextScoringOptions opts;
    if (model == "lm") {
        opts.model = text::TextModel::lm;
    } else if (model == "le") {
        opts.model = text::TextModel::le;
    } else {
        config_error("--model must be lm or le");
    }
    opts.params.dirichlet_mu = mu;
    opts.params.entailment_neighbors = le_k;
    opts.params.validate();
    auto c = load_collection(dir, false);
    auto t = score_text(c, opts);
    save_score_vectors(t.query_scores, c.table, (dir / files::text_scores).string());
    save_sim_matrix(t.doc_similarity, c.table, (dir / files::text_sim).string());
    std::cout << "text scores for " << t.query_scores.size() << " queries, " << t.doc_similarity.nnz()
              << " document similarities\n";
    return 0;
}

int cmd_score_visual(const fs::path& dir, const VisualScoringOptions& opts, bool text_only) {
    if (opts.components == 0) config_error("--components must be >= 1");
    if (opts.max_fit_descriptors == 0) config_error("--max-fit must be >= 1");
    auto c = load_collection(dir, !text_only);
    auto v = score_visual(c, opts);
    save_sim_matrix(v.doc_similarity, c.table, (dir / files::visual_sim).string());
    visual::save_gmm(v.gmm, (dir / files::gmm).string());
    if (!text_only) save_score_vectors(v.query_scores, c.table, (dir / files::visual_scores).string());
    std::cout << "gmm with " << v.gmm.components() << " components, " << v.doc_similarity.nnz()
              << " document similarities";
    if (!text_only) std::cout << ", visual scores for " << v.query_scores.size() << " queries";
    std::cout << '\n';
    return 0;
}

const ScoreVector* visual_query(const ScoredCollection& c, const std::string& q, const ScoreVector& empty,
                                bool symmetric) {
    if (!symmetric) return nullptr;
    auto it = c.visual_scores.find(q);
    return it == c.visual_scores.end() ? &empty : &it->second;
}

std::vector<std::string> selected_queries(const ScoredCollection& c, const std::string& query) {
    if (query.empty()) return c.query_ids;
    if (std::find(c.query_ids.begin(), c.query_ids.end(), query) == c.query_ids.end()) {
        fail(ErrorCode::UnknownDocument, "unknown query '" + query + "'");
    }
    return {query};
}

// Filtered context written back in global doc ids.
int cmd_filter(const RunOptions& ro, const std::string& query, const fs::path& out) {
    if (ro.m_cap == 0) config_error("--m-cap must be >= 1");
    const bool sym = ro.symmetric();
    auto c = load_scored_collection(ro.dir, sym);
    ScoreVector empty(c.table.size());
    std::map<std::string, ScoreVector> st, sv;
    std::vector<std::tuple<std::string, std::string, std::string, double>> mt, mv;
    for (const auto& q : selected_queries(c, query)) {
        auto it = c.text_scores.find(q);
        if (it == c.text_scores.end()) {
            std::cerr << "warning: query " << q << " has no text scores\n";
            continue;
        }
        auto ctx = build_context(q, it->second, visual_query(c, q, empty, sym), c.text_sim, c.visual_sim, ro.m_cap,
                                 &c.table);
        auto to_global = [&](const ScoreVector& v) {
            std::vector<Entry> e;
            for (const auto& x : v.entries()) e.push_back({ctx.selected[x.index], x.value});
            return ScoreVector::from_entries(c.table.size(), std::move(e));
        };
        st.emplace(q, to_global(ctx.s_t_f));
        if (sym) sv.emplace(q, to_global(ctx.s_v_f));
        auto dump = [&](const SimMatrix& m, auto& rows) {
            for (std::size_t r = 0; r < m.dimension(); ++r) {
                for (const auto& e : m.row(r).entries()) {
                    rows.emplace_back(q, c.table.id(ctx.selected[r]), c.table.id(ctx.selected[e.index]), e.value);
                }
            }
        };
        dump(ctx.S_t_f, mt);
        dump(ctx.S_v_f, mv);
        std::cout << q << "\tl=" << ctx.size() << '\n';
    }
    fs::create_directories(out);
    save_score_vectors(st, c.table, (out / "s_t.tsv").string());
    if (sym) save_score_vectors(sv, c.table, (out / "s_v.tsv").string());
    auto write_rows = [](const fs::path& p, const auto& rows) {
        std::ostringstream os;
        for (const auto& [q, a, b, v] : rows) os << q << '\t' << a << '\t' << b << '\t' << format_score(v) << '\n';
        write_text(p, os.str());
    };
    write_rows(out / "S_t.tsv", mt);
    write_rows(out / "S_v.tsv", mv);
    return 0;
}

int cmd_diffuse(const RunOptions& ro, const std::string& query, const std::string& direction, const fs::path& out) {
    PipelineConfig cfg = ro.config();
    cfg.diffusion.direction = parse_direction(direction);
    cfg.diffusion.validate();
    const bool sym = cfg.scenario == Scenario::symmetric;
    if (!sym && cfg.diffusion.direction == Direction::vt) {
        config_error("direction vt needs the symmetric scenario");
    }
    auto c = load_scored_collection(ro.dir, sym);
    ScoreVector empty(c.table.size());
    std::map<std::string, ScoreVector> result;
    std::size_t failures = 0, unconverged = 0;
    for (const auto& q : selected_queries(c, query)) {
        try {
            auto it = c.text_scores.find(q);
            if (it == c.text_scores.end()) fail(ErrorCode::EmptyTextResult, "no text scores");
            auto ctx = build_context(q, it->second, visual_query(c, q, empty, sym), c.text_sim, c.visual_sim,
                                     cfg.m_cap, &c.table);
            auto r = diffuse(ctx, cfg.diffusion);
            if (!cfg.diffusion.iterations && !r.trace.converged) ++unconverged;
            std::vector<Entry> e;
            for (const auto& x : r.scores.entries()) e.push_back({ctx.selected[x.index], x.value});
            result.emplace(q, ScoreVector::from_entries(c.table.size(), std::move(e)));
        } catch (const Error& e) {
            if (e.is_config_error()) throw;
            ++failures;
            std::cerr << "warning: query " << q << " skipped: " << e.what() << '\n';
        }
    }
    save_score_vectors(result, c.table, out.string());
    std::cout << "diffused " << result.size() << " queries (" << failures << " failed, " << unconverged
              << " unconverged)\n";
    return 0;
}

int cmd_fuse(const RunOptions& ro, const fs::path& out) {
    PipelineConfig cfg = ro.config();
    auto c = load_scored_collection(ro.dir, cfg.scenario == Scenario::symmetric);
    auto r = run_pipeline(c, cfg);
    report_failures(r);
    save_run(r.run, out.string());
    std::cout << "MAP\t" << fixed(r.report.map, 4) << "\tqueries\t" << r.report.per_query_ap.size() << '\n';
    return 0;
}

int cmd_evaluate(const std::string& qrels_path, const std::string& run_path, const std::string& baseline_path,
                 bool per_query) {
    auto qrels = load_qrels(qrels_path);
    auto report = eval::evaluate(load_run(run_path), qrels);
    if (per_query) {
        for (const auto& [q, ap] : report.per_query_ap) std::cout << "AP\t" << q << '\t' << fixed(ap, 4) << '\n';
    }
    for (const auto& q : report.excluded) std::cerr << "note: query " << q << " has no relevant document\n";
    std::cout << "MAP\t" << fixed(report.map, 4) << "\tqueries\t" << report.per_query_ap.size() << '\n';
    if (!baseline_path.empty()) {
        auto base = eval::evaluate(load_run(baseline_path), qrels);
        auto t = eval::paired_ttest(report.per_query_ap, base.per_query_ap);
        std::cout << "baseline MAP\t" << fixed(base.map, 4) << '\n'
                  << "t\t" << fixed(t.t, 4) << "\tdof\t" << t.dof << "\tcritical\t" << fixed(t.critical, 4)
                  << "\tp\t" << fixed(t.p_value, 6) << "\tsignificant\t" << (t.significant ? "yes" : "no")
                  << (t.degenerate ? "\t(zero variance)" : "") << '\n';
    }
    return 0;
}

struct SweepOptions {
    std::vector<std::string> k, gamma, beta, iters, norm, alpha;
    std::string baseline = "text";
    std::string out;
};

int cmd_sweep(const RunOptions& ro, const SweepOptions& so) {
    PipelineConfig base = ro.config();
    SweepGrid grid;
    grid.k = {base.diffusion.k};
    grid.gamma = {base.diffusion.gamma};
    grid.beta = {base.diffusion.beta};
    grid.iterations = {base.diffusion.iterations};
    grid.normalization = {base.diffusion.normalization};
    grid.weights = {base.weights};
    if (!so.k.empty()) {
        grid.k.clear();
        for (const auto& s : so.k) grid.k.push_back(parse_k(s));
    }
    if (!so.gamma.empty()) {
        grid.gamma.clear();
        for (const auto& s : so.gamma) grid.gamma.push_back(parse_unit(s, "gamma"));
    }
    if (!so.beta.empty()) {
        grid.beta.clear();
        for (const auto& s : so.beta) grid.beta.push_back(parse_unit(s, "beta"));
    }
    if (!so.iters.empty()) {
        grid.iterations.clear();
        for (const auto& s : so.iters) grid.iterations.push_back(parse_iters(s));
    }
    if (!so.norm.empty()) {
        grid.normalization.clear();
        for (const auto& s : so.norm) grid.normalization.push_back(parse_norm(s));
    }
    if (!so.alpha.empty()) {
        grid.weights.clear();
        for (const auto& s : so.alpha) grid.weights.push_back(parse_alpha(s));
    }
    // reject bad cells up front rather than per cell
    for (const auto& w : grid.weights) {
        PipelineConfig probe = base;
        probe.weights = w;
        probe.validate();
    }
    for (double g : grid.gamma) {
        if (!(g >= 0.0 && g <= 1.0)) config_error("gamma must be in [0,1]");
    }
    for (double b : grid.beta) {
        if (!(b >= 0.0 && b <= 1.0)) config_error("beta must be in [0,1]");
    }

    Baseline baseline;
    if (so.baseline == "text") {
        baseline = Baseline::text;
    } else if (so.baseline == "visual") {
        baseline = Baseline::visual;
        if (base.scenario == Scenario::asymmetric) config_error("visual baseline needs the symmetric scenario");
    } else if (so.baseline == "first-cell") {
        baseline = Baseline::first_cell;
    } else {
        config_error("--baseline must be text, visual or first-cell");
    }

    auto c = load_scored_collection(ro.dir, base.scenario == Scenario::symmetric);
    auto table = run_sweep(c, grid, base, baseline);
    std::cout << sweep_to_text(table);
    if (!so.out.empty()) {
        fs::path out(so.out);
        fs::create_directories(out);
        write_text(out / "sweep.tsv", sweep_to_tsv(table));
        write_text(out / "sweep.txt", sweep_to_text(table));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fusegraph: graph-based fusion of text and visual retrieval scores"};
    app.require_subcommand(1);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a seeded synthetic collection");
    std::string synth_out, synth_spec = "bundled";
    std::uint64_t synth_seed = 42;
    synth::SynthSpec custom;
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--spec", synth_spec, "bundled | noisy-second-hop");
    synth_cmd->add_option("--seed", synth_seed, "generator seed");
    auto* o_topics = synth_cmd->add_option("--topics", custom.topics);
    auto* o_docs = synth_cmd->add_option("--docs-per-topic", custom.docs_per_topic);
    auto* o_queries = synth_cmd->add_option("--queries-per-topic", custom.queries_per_topic);
    auto* o_tnoise = synth_cmd->add_option("--text-noise", custom.text_noise);
    auto* o_vnoise = synth_cmd->add_option("--visual-noise", custom.visual_noise);
    auto* o_overlap = synth_cmd->add_option("--overlap", custom.visual_overlap, "visual overlap of paired topics");
    auto* o_hubs = synth_cmd->add_option("--hub-fraction", custom.hub_fraction);
    auto* o_share = synth_cmd->add_option("--hub-share", custom.hub_share);

    // ingest
    auto* ingest_cmd = app.add_subcommand("ingest", "load and validate a collection directory");
    std::string ingest_dir;
    bool ingest_text_only = false;
    ingest_cmd->add_option("--dir", ingest_dir)->required();
    ingest_cmd->add_flag("--text-only", ingest_text_only, "do not read visual query descriptors");

    // score-text
    auto* text_cmd = app.add_subcommand("score-text", "text scores and document text similarities");
    std::string text_dir, text_model = "lm";
    double text_mu = 1000.0;
    std::size_t text_le_k = 10;
    text_cmd->add_option("--dir", text_dir)->required();
    text_cmd->add_option("--model", text_model, "lm | le");
    text_cmd->add_option("--mu", text_mu, "Dirichlet prior");
    text_cmd->add_option("--le-k", text_le_k, "entailment neighbours per term");

    // score-visual
    auto* vis_cmd = app.add_subcommand("score-visual", "fit the GMM, Fisher vectors and visual similarities");
    std::string vis_dir;
    VisualScoringOptions vis_opts;
    bool vis_flat = false, vis_text_only = false;
    vis_cmd->add_option("--dir", vis_dir)->required();
    vis_cmd->add_option("--components", vis_opts.components, "GMM components");
    vis_cmd->add_option("--seed", vis_opts.seed, "GMM initialization seed");
    vis_cmd->add_option("--max-fit", vis_opts.max_fit_descriptors, "descriptors used to fit the GMM");
    vis_cmd->add_option("--neighbors", vis_opts.neighbors_per_row, "keep top-n similarities per row, 0 = all");
    vis_cmd->add_flag("--no-pyramid", vis_flat, "single global Fisher vector");
    vis_cmd->add_flag("--text-only", vis_text_only, "skip visual query scores");

    // filter / diffuse / fuse / sweep
    RunOptions filter_ro, diffuse_ro, fuse_ro, sweep_ro;
    auto* filter_cmd = app.add_subcommand("filter", "write the semantically filtered scores and matrices");
    std::string filter_query, filter_out;
    filter_ro.attach(filter_cmd, false);
    filter_cmd->add_option("--query", filter_query, "single query, default all");
    filter_cmd->add_option("--out", filter_out, "output directory")->required();

    auto* diffuse_cmd = app.add_subcommand("diffuse", "graph diffusion scores for one direction");
    std::string diffuse_query, diffuse_dir = "tv", diffuse_out;
    diffuse_ro.attach(diffuse_cmd, false);
    diffuse_cmd->add_option("--query", diffuse_query, "single query, default all");
    diffuse_cmd->add_option("--direction", diffuse_dir, "tv | vt");
    diffuse_cmd->add_option("--out", diffuse_out, "score vector file")->required();

    auto* fuse_cmd = app.add_subcommand("fuse", "full pipeline: filter, diffuse, late fusion, ranking");
    std::string fuse_out;
    fuse_ro.attach(fuse_cmd);
    fuse_cmd->add_option("--out", fuse_out, "TREC run file")->required();

    auto* eval_cmd = app.add_subcommand("evaluate", "MAP of a run, optionally against a baseline run");
    std::string eval_qrels, eval_run, eval_base;
    bool eval_per_query = false;
    eval_cmd->add_option("--qrels", eval_qrels)->required();
    eval_cmd->add_option("--run", eval_run)->required();
    eval_cmd->add_option("--baseline-run", eval_base, "paired t-test against this run");
    eval_cmd->add_flag("--per-query", eval_per_query);

    auto* sweep_cmd = app.add_subcommand("sweep", "evaluate a parameter grid");
    SweepOptions so;
    sweep_cmd->add_option("--dir", sweep_ro.dir)->required();
    sweep_cmd->add_option("--preset", sweep_ro.preset);
    sweep_cmd->add_option("--k", so.k, "list, e.g. 1,10,l")->delimiter(',');
    sweep_cmd->add_option("--gamma", so.gamma, "list")->delimiter(',');
    sweep_cmd->add_option("--beta", so.beta, "list")->delimiter(',');
    sweep_cmd->add_option("--iters", so.iters, "list, e.g. 1,2,5,inf")->delimiter(',');
    sweep_cmd->add_option("--norm", so.norm, "list")->delimiter(',');
    sweep_cmd->add_option("--alpha", so.alpha, "t,v,tv,vt; repeat for several");
    sweep_cmd->add_option("--scenario", sweep_ro.scenario);
    sweep_cmd->add_option("--m-cap", sweep_ro.m_cap);
    sweep_cmd->add_option("--threads", sweep_ro.threads);
    sweep_cmd->add_option("--baseline", so.baseline, "text | visual | first-cell");
    sweep_cmd->add_option("--out", so.out, "directory for sweep.tsv and sweep.txt");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*synth_cmd) {
            bool changed = false;
            for (auto* o : {o_topics, o_docs, o_queries, o_tnoise, o_vnoise, o_overlap, o_hubs, o_share}) {
                changed = changed || o->count() > 0;
            }
            if (changed) {
                // explicit knobs apply on top of the named spec
                synth::SynthSpec s = synth_spec == "noisy-second-hop" ? synth::noisy_second_hop_spec()
                                                                      : synth::bundled_spec();
                if (o_topics->count()) s.topics = custom.topics;
                if (o_docs->count()) s.docs_per_topic = custom.docs_per_topic;
                if (o_queries->count()) s.queries_per_topic = custom.queries_per_topic;
                if (o_tnoise->count()) s.text_noise = custom.text_noise;
                if (o_vnoise->count()) s.visual_noise = custom.visual_noise;
                if (o_overlap->count()) s.visual_overlap = custom.visual_overlap;
                if (o_hubs->count()) s.hub_fraction = custom.hub_fraction;
                if (o_share->count()) s.hub_share = custom.hub_share;
                custom = s;
            }
            return cmd_synth(synth_out, synth_spec, synth_seed, custom, changed);
        }
        if (*ingest_cmd) return cmd_ingest(ingest_dir, ingest_text_only);
        if (*text_cmd) return cmd_score_text(text_dir, text_model, text_mu, text_le_k);
        if (*vis_cmd) {
            vis_opts.pyramid = !vis_flat;
            return cmd_score_visual(vis_dir, vis_opts, vis_text_only);
        }
        if (*filter_cmd) return cmd_filter(filter_ro, filter_query, filter_out);
        if (*diffuse_cmd) return cmd_diffuse(diffuse_ro, diffuse_query, diffuse_dir, diffuse_out);
        if (*fuse_cmd) return cmd_fuse(fuse_ro, fuse_out);
        if (*eval_cmd) return cmd_evaluate(eval_qrels, eval_run, eval_base, eval_per_query);
        if (*sweep_cmd) return cmd_sweep(sweep_ro, so);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.is_config_error() ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
