#pragma once

/// \file graph_fusion.hpp
/// Transmedia diffusion over a semantically filtered document graph.
///
/// One engine covers the three families studied in the literature:
///   cross-media similarity   k small, one iteration, gamma = 0, beta = 0
///   random walk with prior   k = l, iterate to the fixed point
///   generalized diffusion    k small, iterate to stability
///
/// Update for direction tv (vt swaps the roles of text and visual):
///   x_i  ~  K(x_{i-1}, k) . [ (1-gamma) P + gamma e s ]
///   P     = rownorm( beta S_t + (1-beta) S_v )
///   x_0   = s = normalized s_t
/// which is evaluated as (1-gamma) K(x)P + gamma (K(x).e) s and renormalized.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fusegraph/error.hpp"
#include "fusegraph/semantic_filter.hpp"
#include "fusegraph/sparse.hpp"

namespace fusegraph {

enum class Direction { tv, vt };
enum class Normalization { probability, minmax };

inline constexpr std::size_t kAllNeighbors = std::numeric_limits<std::size_t>::max();

struct DiffusionConfig {
    Direction direction = Direction::tv;
    std::size_t k = 10;           // kAllNeighbors disables thresholding (k = l)
    double gamma = 0.3;
    double beta = 0.0;
    std::optional<std::size_t> iterations = 1;  // nullopt: until convergence
    double epsilon = 1e-9;
    std::size_t max_iter = 1000;
    Normalization normalization = Normalization::probability;

    void validate() const {
        if (k == 0) fail(ErrorCode::InvalidConfig, "k must be >= 1");
        if (!(gamma >= 0.0 && gamma <= 1.0)) fail(ErrorCode::InvalidConfig, "gamma must be in [0,1]");
        if (!(beta >= 0.0 && beta <= 1.0)) fail(ErrorCode::InvalidConfig, "beta must be in [0,1]");
        if (iterations && *iterations == 0) fail(ErrorCode::InvalidConfig, "iterations must be >= 1");
        if (!(epsilon > 0.0)) fail(ErrorCode::InvalidConfig, "epsilon must be > 0");
        if (max_iter == 0) fail(ErrorCode::InvalidConfig, "max_iter must be >= 1");
    }
};

namespace presets {

/// k = 10, gamma = 0.3, beta = 0, one step.
inline DiffusionConfig cm_default() { return {}; }

/// k = l, gamma = 0.3, beta = 0, to convergence.
inline DiffusionConfig rw_classic() {
    DiffusionConfig c;
    c.k = kAllNeighbors;
    c.iterations = std::nullopt;
    return c;
}

/// k = 10, gamma = 0.3, beta = 0, to convergence.
inline DiffusionConfig gd_default() {
    DiffusionConfig c;
    c.iterations = std::nullopt;
    return c;
}

inline std::optional<DiffusionConfig> by_name(const std::string& name) {
    if (name == "cm-default") return cm_default();
    if (name == "rw-classic") return rw_classic();
    if (name == "gd-default") return gd_default();
    return std::nullopt;
}

}  // namespace presets

struct FusionWeights {
    double alpha_t = 1.0;
    double alpha_v = 0.0;
    double alpha_tv = 0.0;
    double alpha_vt = 0.0;

    void validate() const {
        for (double a : {alpha_t, alpha_v, alpha_tv, alpha_vt}) {
            if (!(a >= 0.0) || !std::isfinite(a)) fail(ErrorCode::InvalidConfig, "fusion weights must be >= 0");
        }
        const double s = alpha_t + alpha_v + alpha_tv + alpha_vt;
        if (std::abs(s - 1.0) > 1e-9) fail(ErrorCode::InvalidConfig, "fusion weights must sum to 1");
    }
};

struct DiffusionTrace {
    std::vector<double> deltas;       // L1 change per iteration
    std::vector<double> raw_mass;     // iterate mass before renormalization
    std::size_t iterations = 0;
    bool converged = false;
};

struct DiffusionResult {
    ScoreVector scores;
    DiffusionTrace trace;
};

// --- primitives -------------------------------------------------------------

/// Zeroes entries strictly below the k-th highest value; ties with the k-th
/// value survive, so the support may exceed k.
inline ScoreVector knn_threshold(const ScoreVector& v, std::size_t k) {
    if (k == 0) fail(ErrorCode::InvalidConfig, "k must be >= 1");
    if (k >= v.nnz()) return v;
    std::vector<double> values;
    values.reserve(v.nnz());
    for (const auto& e : v.entries()) values.push_back(e.value);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k - 1), values.end(),
                     std::greater<>());
    const double kth = values[k - 1];
    std::vector<Entry> kept;
    for (const auto& e : v.entries()) {
        if (e.value >= kth) kept.push_back(e);
    }
    return ScoreVector::from_entries(v.dimension(), std::move(kept));
}

inline ScoreVector l1_normalize(const ScoreVector& v) {
    const double s = v.sum();
    if (!(s > 0.0)) fail(ErrorCode::ZeroMass, "cannot normalize a zero vector");
    std::vector<Entry> out(v.entries().begin(), v.entries().end());
    for (auto& e : out) e.value /= s;
    return ScoreVector::from_entries(v.dimension(), std::move(out));
}

/// (1-beta) a + beta b, entrywise. The endpoints return an operand unchanged.
inline SimMatrix mix_matrices(const SimMatrix& a, const SimMatrix& b, double beta) {
    if (a.dimension() != b.dimension()) fail(ErrorCode::DimensionMismatch, "matrix dimensions differ");
    if (!(beta >= 0.0 && beta <= 1.0)) fail(ErrorCode::InvalidConfig, "beta must be in [0,1]");
    if (beta == 0.0) return a;
    if (beta == 1.0) return b;
    const std::size_t n = a.dimension();
    SimMatrix out(n);
    for (std::size_t r = 0; r < n; ++r) {
        auto ea = a.row(r).entries();
        auto eb = b.row(r).entries();
        std::vector<Entry> row;
        row.reserve(ea.size() + eb.size());
        std::size_t i = 0, j = 0;
        while (i < ea.size() || j < eb.size()) {
            if (j == eb.size() || (i < ea.size() && ea[i].index < eb[j].index)) {
                row.push_back({ea[i].index, (1.0 - beta) * ea[i].value});
                ++i;
            } else if (i == ea.size() || eb[j].index < ea[i].index) {
                row.push_back({eb[j].index, beta * eb[j].value});
                ++j;
            } else {
                row.push_back({ea[i].index, (1.0 - beta) * ea[i].value + beta * eb[j].value});
                ++i;
                ++j;
            }
        }
        out.set_row(r, ScoreVector::from_entries(n, std::move(row)));
    }
    return out;
}

struct StochasticMatrix {
    SimMatrix P;
    std::vector<std::size_t> dangling;  // rows left all-zero
};

/// D.C with D(i,i) = 1 / sum_j C(i,j). All-zero rows stay zero and are reported.
inline StochasticMatrix row_stochastic(const SimMatrix& C) {
    StochasticMatrix out{SimMatrix(C.dimension()), {}};
    for (std::size_t r = 0; r < C.dimension(); ++r) {
        const auto& row = C.row(r);
        const double s = row.sum();
        if (!(s > 0.0)) {
            out.dangling.push_back(r);
            continue;
        }
        std::vector<Entry> entries(row.entries().begin(), row.entries().end());
        for (auto& e : entries) e.value /= s;
        out.P.set_row(r, ScoreVector::from_entries(C.dimension(), std::move(entries)));
    }
    return out;
}

struct MinMaxResult {
    ScoreVector values;
    bool degenerate = false;  // max == min over the candidates; values are zero
};

/// (s - min) / (max - min) over all `dimension()` candidates, absent entries
/// counting as zeros.
inline MinMaxResult minmax_normalize(const ScoreVector& v) {
    if (v.dimension() == 0) return {v, true};
    double hi = v.max_value();
    double lo = v.nnz() < v.dimension() ? 0.0 : std::numeric_limits<double>::infinity();
    for (const auto& e : v.entries()) lo = std::min(lo, e.value);
    if (!(hi > lo)) return {ScoreVector(v.dimension()), true};
    std::vector<Entry> out;
    out.reserve(v.nnz());
    const double range = hi - lo;
    for (const auto& e : v.entries()) out.push_back({e.index, (e.value - lo) / range});
    return {ScoreVector::from_entries(v.dimension(), std::move(out)), false};
}

inline SimMatrix minmax_rows(const SimMatrix& m) {
    SimMatrix out(m.dimension());
    for (std::size_t r = 0; r < m.dimension(); ++r) out.set_row(r, minmax_normalize(m.row(r)).values);
    return out;
}

// --- diffusion --------------------------------------------------------------

namespace detail {

inline const ScoreVector& prior_source(const FilteredContext& ctx, Direction dir) {
    return dir == Direction::tv ? ctx.s_t_f : ctx.s_v_f;
}

/// L1 for probability mode. Min-max otherwise; a flat positive vector (every
/// candidate tied) maps to all ones instead of all zeros.
inline ScoreVector renormalize(const ScoreVector& v, Normalization norm) {
    if (norm == Normalization::probability) return l1_normalize(v);
    auto mm = minmax_normalize(v);
    if (!mm.degenerate) return mm.values;
    if (v.empty()) fail(ErrorCode::ZeroMass, "vector has no mass");
    std::vector<Entry> flat(v.entries().begin(), v.entries().end());
    for (auto& e : flat) e.value = 1.0;
    return ScoreVector::from_entries(v.dimension(), std::move(flat));
}

/// Normalized prior / starting vector for a direction.
inline ScoreVector normalized_prior(const FilteredContext& ctx, Direction dir, Normalization norm) {
    const ScoreVector& s = prior_source(ctx, dir);
    if (dir == Direction::vt && !ctx.has_visual_query) {
        fail(ErrorCode::InvalidConfig, "direction vt needs visual query scores");
    }
    return renormalize(s, norm);
}

/// Cross-modality matrix (weight 1-beta) and same-modality matrix (weight beta).
inline std::pair<const SimMatrix*, const SimMatrix*> matrix_roles(const FilteredContext& ctx, Direction dir) {
    return dir == Direction::tv ? std::pair{&ctx.S_v_f, &ctx.S_t_f} : std::pair{&ctx.S_t_f, &ctx.S_v_f};
}


inline std::size_t effective_k(std::size_t k, std::size_t l) { return std::min(k, l); }

}  // namespace detail

/// The transition matrix for a configuration: row-stochastic for the
/// probability normalization, min-max normalized rows otherwise.
inline SimMatrix transition_matrix(const FilteredContext& ctx, Direction dir, double beta, Normalization norm) {
    auto [cross, same] = detail::matrix_roles(ctx, dir);
    if (norm == Normalization::probability) return row_stochastic(mix_matrices(*cross, *same, beta)).P;
    return mix_matrices(minmax_rows(*cross), minmax_rows(*same), beta);
}

/// One update: (1-gamma) K(x)P + gamma (K(x).e) prior, before renormalization.
inline ScoreVector diffusion_step(const ScoreVector& x, const SimMatrix& P, const ScoreVector& prior,
                                  std::size_t k, double gamma) {
    const ScoreVector kx = knn_threshold(x, k);
    const ScoreVector walk = multiply(kx, P);
    if (gamma == 0.0) return walk;
    const double mass = kx.sum();
    std::vector<double> acc(P.dimension(), 0.0);
    for (const auto& e : walk.entries()) acc[e.index] = (1.0 - gamma) * e.value;
    for (const auto& e : prior.entries()) acc[e.index] += gamma * mass * e.value;
    return ScoreVector::from_dense(acc);
}

/// Runs the generalized diffusion on a filtered context. With a fixed
/// iteration count exactly that many steps are taken; otherwise iteration
/// stops once the L1 change drops below epsilon or max_iter is reached
/// (trace.converged tells which).
inline DiffusionResult diffuse(const FilteredContext& ctx, const DiffusionConfig& cfg) {
    cfg.validate();
    const std::size_t l = ctx.size();
    if (l == 0) fail(ErrorCode::EmptyTextResult, "empty filtered context");
    const ScoreVector prior = detail::normalized_prior(ctx, cfg.direction, cfg.normalization);
    const SimMatrix P = transition_matrix(ctx, cfg.direction, cfg.beta, cfg.normalization);
    const std::size_t k = detail::effective_k(cfg.k, l);

    DiffusionResult result;
    ScoreVector x = prior;
    const std::size_t budget = cfg.iterations.value_or(cfg.max_iter);
    for (std::size_t it = 0; it < budget; ++it) {
        ScoreVector raw = diffusion_step(x, P, prior, k, cfg.gamma);
        result.trace.raw_mass.push_back(raw.sum());
        if (raw.empty()) fail(ErrorCode::ZeroMass, "diffusion iterate collapsed to zero");
        ScoreVector next = detail::renormalize(raw, cfg.normalization);
        const double delta = l1_distance(next, x);
        result.trace.deltas.push_back(delta);
        x = std::move(next);
        ++result.trace.iterations;
        if (!cfg.iterations && delta < cfg.epsilon) {
            result.trace.converged = true;
            break;
        }
    }
    if (cfg.iterations) {
        result.trace.converged = !result.trace.deltas.empty() && result.trace.deltas.back() < cfg.epsilon;
    }
    result.scores = std::move(x);
    return result;
}

/// One-shot transmedia propagation K(s, k) . S_other under the same
/// normalization conventions as diffuse().
inline ScoreVector cross_media(const FilteredContext& ctx, std::size_t k, Direction direction,
                               Normalization norm = Normalization::probability) {
    if (k == 0) fail(ErrorCode::InvalidConfig, "k must be >= 1");
    if (ctx.size() == 0) fail(ErrorCode::EmptyTextResult, "empty filtered context");
    const ScoreVector s = detail::normalized_prior(ctx, direction, norm);
    const SimMatrix& other = direction == Direction::tv ? ctx.S_v_f : ctx.S_t_f;
    const SimMatrix P = norm == Normalization::probability ? row_stochastic(other).P : minmax_rows(other);
    const ScoreVector propagated = multiply(knn_threshold(s, detail::effective_k(k, ctx.size())), P);
    if (propagated.empty()) fail(ErrorCode::ZeroMass, "cross-media scores are all zero");
    return detail::renormalize(propagated, norm);
}

/// Stationary distribution of the prior-biased walk (k = l, iterate to the
/// fixed point x = (1-gamma) xP + gamma s). Throws NotConverged.
inline DiffusionResult random_walk(const FilteredContext& ctx, DiffusionConfig cfg) {
    cfg.k = kAllNeighbors;
    cfg.iterations = std::nullopt;
    auto result = diffuse(ctx, cfg);
    if (!result.trace.converged) {
        fail(ErrorCode::NotConverged, "random walk did not converge in " + std::to_string(cfg.max_iter) +
                                          " iterations");
    }
    return result;
}

/// alpha_t s_t + alpha_v s_v + alpha_tv tv + alpha_vt vt. A component may be
/// missing (nullptr) only if its weight is zero.
inline ScoreVector late_fuse(const FusionWeights& w, const ScoreVector* s_t, const ScoreVector* s_v,
                             const ScoreVector* score_tv, const ScoreVector* score_vt) {
    w.validate();
    const std::pair<double, const ScoreVector*> parts[] = {
        {w.alpha_t, s_t}, {w.alpha_v, s_v}, {w.alpha_tv, score_tv}, {w.alpha_vt, score_vt}};
    std::size_t dim = 0;
    bool have_dim = false;
    for (const auto& [a, v] : parts) {
        if (v == nullptr) {
            if (a != 0.0) fail(ErrorCode::InvalidConfig, "non-zero weight on a missing score component");
            continue;
        }
        if (have_dim && v->dimension() != dim) fail(ErrorCode::DimensionMismatch, "fused vectors differ in size");
        dim = v->dimension();
        have_dim = true;
    }
    std::vector<double> acc(dim, 0.0);
    for (const auto& [a, v] : parts) {
        if (v == nullptr || a == 0.0) continue;
        for (const auto& e : v->entries()) acc[e.index] += a * e.value;
    }
    return ScoreVector::from_dense(acc);
}

}  // namespace fusegraph
