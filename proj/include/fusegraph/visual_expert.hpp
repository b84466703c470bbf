#pragma once

/// \file visual_expert.hpp
/// Monomedia visual scoring with a diagonal GMM visual vocabulary: soft
/// bag-of-visual-words, Fisher Vectors (whitened, signed square root, L2),
/// a 1x1 + 1x3 + 2x2 spatial pyramid and the linear Fisher kernel.
///
/// Fisher gradient layout for N components and descriptor dimension D:
///   [ d/d alpha_i  (N) | d/d mu_id  (N*D) | d/d sigma_id (N*D) ]
/// where w = softmax(alpha) and sigma is the per-dimension standard deviation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fusegraph/collection_store.hpp"
#include "fusegraph/error.hpp"

namespace fusegraph::visual {

inline constexpr double kVarianceFloor = 1e-6;

struct GmmModel {
    std::vector<double> weights;                // N, on the simplex
    std::vector<std::vector<double>> means;     // N x D
    std::vector<std::vector<double>> variances; // N x D, diagonal

    std::size_t components() const noexcept { return weights.size(); }
    std::size_t dimension() const noexcept { return means.empty() ? 0 : means.front().size(); }
    std::size_t gradient_size() const noexcept { return components() * (2 * dimension() + 1); }

    bool operator==(const GmmModel&) const = default;
};

struct GmmFitOptions {
    std::size_t max_iterations = 200;
    double tolerance = 1e-6;  // on the mean per-descriptor log-likelihood gain
    double variance_floor = kVarianceFloor;
};

struct GmmFit {
    GmmModel model;
    std::vector<double> log_likelihood;  // mean per descriptor, one per EM iteration
    bool converged = false;
};

namespace detail {

inline double log_gaussian(const GmmModel& gmm, std::size_t i, std::span<const double> u) {
    const auto& mu = gmm.means[i];
    const auto& var = gmm.variances[i];
    double acc = 0.0;
    for (std::size_t d = 0; d < u.size(); ++d) {
        const double diff = u[d] - mu[d];
        acc += std::log(2.0 * std::numbers::pi * var[d]) + diff * diff / var[d];
    }
    return -0.5 * acc;
}

/// Fills log(w_i N(u|i)) and returns log p(u).
inline double joint_log(const GmmModel& gmm, std::span<const double> u, std::vector<double>& out) {
    out.resize(gmm.components());
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < gmm.components(); ++i) {
        out[i] = std::log(gmm.weights[i]) + log_gaussian(gmm, i, u);
        m = std::max(m, out[i]);
    }
    double s = 0.0;
    for (double v : out) s += std::exp(v - m);
    return m + std::log(s);
}

inline void check_dimension(const GmmModel& gmm, std::span<const double> u) {
    if (u.size() != gmm.dimension()) {
        fail(ErrorCode::DimensionMismatch, "descriptor dimension " + std::to_string(u.size()) +
                                               " vs model " + std::to_string(gmm.dimension()));
    }
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return s;
}

}  // namespace detail

inline double log_likelihood(const GmmModel& gmm, std::span<const double> u) {
    detail::check_dimension(gmm, u);
    std::vector<double> scratch;
    return detail::joint_log(gmm, u, scratch);
}

/// Mean per-descriptor log-likelihood.
inline double mean_log_likelihood(const GmmModel& gmm, std::span<const std::vector<double>> data) {
    if (data.empty()) fail(ErrorCode::EmptyInput, "no descriptors");
    std::vector<double> scratch;
    double total = 0.0;
    for (const auto& u : data) {
        detail::check_dimension(gmm, u);
        total += detail::joint_log(gmm, u, scratch);
    }
    return total / static_cast<double>(data.size());
}

/// Soft assignment gamma_i(u), computed through log-sum-exp.
inline std::vector<double> posterior(const GmmModel& gmm, std::span<const double> u) {
    detail::check_dimension(gmm, u);
    std::vector<double> lj;
    const double lp = detail::joint_log(gmm, u, lj);
    for (double& v : lj) v = std::exp(v - lp);
    return lj;
}

/// EM for a diagonal GMM. Seeding is k-means++ style (D^2 sampling with a
/// seeded mt19937_64), so the fit is a pure function of (data, N, seed).
inline GmmFit fit_gmm(std::span<const std::vector<double>> data, std::size_t n_components,
                      std::uint64_t seed, const GmmFitOptions& options = {}) {
    if (n_components == 0) fail(ErrorCode::InvalidConfig, "GMM needs at least one component");
    if (data.empty()) fail(ErrorCode::EmptyInput, "no descriptors to fit");
    const std::size_t D = data.front().size();
    if (D == 0) fail(ErrorCode::DimensionMismatch, "zero-dimensional descriptors");
    for (const auto& u : data) {
        if (u.size() != D) fail(ErrorCode::DimensionMismatch, "descriptors of mixed dimension");
    }
    {
        std::set<std::vector<double>> distinct;
        for (const auto& u : data) {
            distinct.insert(u);
            if (distinct.size() >= n_components) break;
        }
        if (distinct.size() < n_components) {
            fail(ErrorCode::EmptyInput, "fewer distinct descriptors than components");
        }
    }

    const std::size_t T = data.size();
    std::mt19937_64 rng(seed);

    // seeding
    std::vector<std::size_t> centers;
    centers.push_back(std::uniform_int_distribution<std::size_t>(0, T - 1)(rng));
    std::vector<double> dist(T, std::numeric_limits<double>::infinity());
    while (centers.size() < n_components) {
        const auto& c = data[centers.back()];
        double total = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            dist[t] = std::min(dist[t], detail::squared_distance(data[t], c));
            total += dist[t];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double r = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (pick = 0; pick + 1 < T; ++pick) {
                r -= dist[pick];
                if (r < 0.0 && dist[pick] > 0.0) break;
            }
            while (dist[pick] == 0.0) pick = (pick + 1) % T;
        }
        centers.push_back(pick);
    }

    std::vector<double> global_mean(D, 0.0), global_var(D, 0.0);
    for (const auto& u : data) {
        for (std::size_t d = 0; d < D; ++d) global_mean[d] += u[d];
    }
    for (double& m : global_mean) m /= static_cast<double>(T);
    for (const auto& u : data) {
        for (std::size_t d = 0; d < D; ++d) global_var[d] += (u[d] - global_mean[d]) * (u[d] - global_mean[d]);
    }
    for (double& v : global_var) v = std::max(v / static_cast<double>(T), options.variance_floor);

    GmmFit fit;
    GmmModel& gmm = fit.model;
    gmm.weights.assign(n_components, 1.0 / static_cast<double>(n_components));
    for (auto c : centers) {
        gmm.means.push_back(data[c]);
        gmm.variances.push_back(global_var);
    }

    std::vector<std::vector<double>> resp(T, std::vector<double>(n_components));
    std::vector<double> scratch;
    double previous = -std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
        // E step
        double ll = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            const double lp = detail::joint_log(gmm, data[t], scratch);
            ll += lp;
            for (std::size_t i = 0; i < n_components; ++i) resp[t][i] = std::exp(scratch[i] - lp);
        }
        ll /= static_cast<double>(T);
        fit.log_likelihood.push_back(ll);
        if (iter > 0 && ll - previous < options.tolerance) {
            fit.converged = true;
            break;
        }
        previous = ll;

        // M step
        for (std::size_t i = 0; i < n_components; ++i) {
            double nk = 0.0;
            std::vector<double> mean(D, 0.0), sq(D, 0.0);
            for (std::size_t t = 0; t < T; ++t) {
                const double r = resp[t][i];
                nk += r;
                for (std::size_t d = 0; d < D; ++d) mean[d] += r * data[t][d];
            }
            if (nk <= std::numeric_limits<double>::min()) {
                // empty component: keep its parameters, give it negligible mass
                gmm.weights[i] = std::numeric_limits<double>::min();
                continue;
            }
            for (double& m : mean) m /= nk;
            for (std::size_t t = 0; t < T; ++t) {
                const double r = resp[t][i];
                for (std::size_t d = 0; d < D; ++d) sq[d] += r * (data[t][d] - mean[d]) * (data[t][d] - mean[d]);
            }
            for (std::size_t d = 0; d < D; ++d) sq[d] = std::max(sq[d] / nk, options.variance_floor);
            gmm.weights[i] = nk / static_cast<double>(T);
            gmm.means[i] = std::move(mean);
            gmm.variances[i] = std::move(sq);
        }
        double wsum = 0.0;
        for (double w : gmm.weights) wsum += w;
        for (double& w : gmm.weights) w /= wsum;
    }
    return fit;
}

inline std::vector<std::vector<double>> descriptor_values(std::span<const Descriptor> descriptors) {
    std::vector<std::vector<double>> out;
    out.reserve(descriptors.size());
    for (const auto& d : descriptors) out.push_back(d.values);
    return out;
}

/// Soft BOV: component i accumulates gamma_i(u_t) over the descriptors.
inline std::vector<double> bov_vector(const GmmModel& gmm, std::span<const std::vector<double>> descriptors) {
    if (descriptors.empty()) fail(ErrorCode::EmptyInput, "no descriptors");
    std::vector<double> out(gmm.components(), 0.0);
    for (const auto& u : descriptors) {
        auto g = posterior(gmm, u);
        for (std::size_t i = 0; i < g.size(); ++i) out[i] += g[i];
    }
    return out;
}

/// (1/T) sum_t grad log p(u_t | lambda) in the layout documented above.
inline std::vector<double> fisher_gradient(const GmmModel& gmm,
                                           std::span<const std::vector<double>> descriptors) {
    if (descriptors.empty()) fail(ErrorCode::EmptyInput, "no descriptors");
    const std::size_t N = gmm.components();
    const std::size_t D = gmm.dimension();
    std::vector<double> g(gmm.gradient_size(), 0.0);
    double* ga = g.data();
    double* gm = g.data() + N;
    double* gs = g.data() + N + N * D;
    for (const auto& u : descriptors) {
        auto gamma = posterior(gmm, u);
        for (std::size_t i = 0; i < N; ++i) {
            ga[i] += gamma[i] - gmm.weights[i];
            if (gamma[i] == 0.0) continue;
            for (std::size_t d = 0; d < D; ++d) {
                const double var = gmm.variances[i][d];
                const double sigma = std::sqrt(var);
                const double diff = u[d] - gmm.means[i][d];
                gm[i * D + d] += gamma[i] * diff / var;
                gs[i * D + d] += gamma[i] * (diff * diff / (var * sigma) - 1.0 / sigma);
            }
        }
    }
    const double inv_t = 1.0 / static_cast<double>(descriptors.size());
    for (double& v : g) v *= inv_t;
    return g;
}

/// Diagonal approximation of the per-descriptor Fisher information in the
/// gradient layout: w_i for alpha, w_i / sigma^2 for mu, 2 w_i / sigma^2
/// for sigma.
inline std::vector<double> fisher_diag(const GmmModel& gmm) {
    const std::size_t N = gmm.components();
    const std::size_t D = gmm.dimension();
    std::vector<double> f(gmm.gradient_size());
    for (std::size_t i = 0; i < N; ++i) {
        f[i] = gmm.weights[i];
        for (std::size_t d = 0; d < D; ++d) {
            f[N + i * D + d] = gmm.weights[i] / gmm.variances[i][d];
            f[N + N * D + i * D + d] = 2.0 * gmm.weights[i] / gmm.variances[i][d];
        }
    }
    return f;
}

enum class Layout { single, pyramid };

struct FisherVector {
    std::vector<double> values;
    Layout layout = Layout::single;
    std::size_t channels = 1;
    /// One flag per region block (per channel); true when the block is zero.
    std::vector<bool> empty_blocks;
    bool zero = false;

    std::size_t size() const noexcept { return values.size(); }
};

namespace detail {

inline bool l2_normalize(std::vector<double>& v) {
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    if (!(n2 > 0.0)) {
        std::fill(v.begin(), v.end(), 0.0);
        return false;
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : v) x *= inv;
    return true;
}

}  // namespace detail

/// Whitening by 1/sqrt(fisher_diag), signed square root, then L2.
inline FisherVector normalize_fv(std::span<const double> gradient, std::span<const double> diag) {
    if (gradient.size() != diag.size()) fail(ErrorCode::DimensionMismatch, "gradient vs fisher diagonal");
    FisherVector fv;
    fv.values.resize(gradient.size());
    for (std::size_t j = 0; j < gradient.size(); ++j) {
        if (!(diag[j] > 0.0)) fail(ErrorCode::InvalidConfig, "fisher diagonal must be strictly positive");
        const double x = gradient[j] / std::sqrt(diag[j]);
        fv.values[j] = std::copysign(std::sqrt(std::abs(x)), x);
    }
    fv.zero = !detail::l2_normalize(fv.values);
    fv.empty_blocks = {fv.zero};
    return fv;
}

inline FisherVector fisher_vector(const GmmModel& gmm, std::span<const std::vector<double>> descriptors) {
    auto diag = fisher_diag(gmm);
    return normalize_fv(fisher_gradient(gmm, descriptors), diag);
}

inline constexpr std::size_t kPyramidRegions = 8;

/// Region membership for a normalized location: region 0 is the whole image,
/// 1..3 the top/middle/bottom bands (by y), 4..7 the quadrants
/// (top-left, top-right, bottom-left, bottom-right). Returns the band and
/// quadrant indices; region 0 always applies.
inline std::pair<std::size_t, std::size_t> pyramid_cells(double x, double y) {
    const auto band = static_cast<std::size_t>(std::clamp(std::floor(3.0 * y), 0.0, 2.0));
    const std::size_t col = x < 0.5 ? 0 : 1;
    const std::size_t row = y < 0.5 ? 0 : 1;
    return {1 + band, 4 + 2 * row + col};
}

/// Concatenated region Fisher Vectors (1x1, 1x3, 2x2). Each non-empty block
/// is normalized on its own, empty regions contribute flagged zero blocks,
/// and the whole vector is rescaled to unit L2 norm.
inline FisherVector spatial_pyramid_fv(const GmmModel& gmm, std::span<const Descriptor> descriptors) {
    if (descriptors.empty()) fail(ErrorCode::EmptyInput, "no descriptors");
    std::array<std::vector<std::vector<double>>, kPyramidRegions> regions;
    for (const auto& d : descriptors) {
        if (!d.location) fail(ErrorCode::MissingLocation, "descriptor without location");
        auto [band, quad] = pyramid_cells((*d.location)[0], (*d.location)[1]);
        regions[0].push_back(d.values);
        regions[band].push_back(d.values);
        regions[quad].push_back(d.values);
    }
    const auto diag = fisher_diag(gmm);
    const std::size_t block = gmm.gradient_size();
    FisherVector fv;
    fv.layout = Layout::pyramid;
    fv.values.assign(block * kPyramidRegions, 0.0);
    fv.empty_blocks.assign(kPyramidRegions, true);
    for (std::size_t r = 0; r < kPyramidRegions; ++r) {
        if (regions[r].empty()) continue;
        auto part = normalize_fv(fisher_gradient(gmm, regions[r]), diag);
        if (part.zero) continue;
        fv.empty_blocks[r] = false;
        std::copy(part.values.begin(), part.values.end(), fv.values.begin() + r * block);
    }
    fv.zero = !detail::l2_normalize(fv.values);
    return fv;
}

/// Joins per-channel vectors (e.g. two descriptor types) and renormalizes.
inline FisherVector concat_channels(std::span<const FisherVector> channels) {
    if (channels.empty()) fail(ErrorCode::EmptyInput, "no channels");
    FisherVector fv;
    fv.layout = channels.front().layout;
    fv.channels = 0;
    for (const auto& c : channels) {
        if (c.layout != fv.layout) fail(ErrorCode::DimensionMismatch, "channels use different layouts");
        fv.values.insert(fv.values.end(), c.values.begin(), c.values.end());
        fv.empty_blocks.insert(fv.empty_blocks.end(), c.empty_blocks.begin(), c.empty_blocks.end());
        fv.channels += c.channels;
    }
    fv.zero = !detail::l2_normalize(fv.values);
    return fv;
}

/// Linear kernel between two normalized Fisher Vectors.
inline double fisher_kernel(const FisherVector& a, const FisherVector& b) {
    if (a.size() != b.size() || a.layout != b.layout || a.channels != b.channels) {
        fail(ErrorCode::DimensionMismatch, "fisher vectors differ in size or layout");
    }
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += a.values[j] * b.values[j];
    return s;
}

// --- persistence ------------------------------------------------------------

/// Labeled TSV: "weight\ti\tw", "mean\ti\tv1,...", "variance\ti\tv1,...".
inline void save_gmm(const GmmModel& gmm, const std::string& path) {
    auto out = fusegraph::detail::open_out(path);
    auto row = [&](const char* label, std::size_t i, std::span<const double> v) {
        out << label << '\t' << i << '\t';
        for (std::size_t d = 0; d < v.size(); ++d) out << (d ? "," : "") << format_score(v[d]);
        out << '\n';
    };
    for (std::size_t i = 0; i < gmm.components(); ++i) {
        row("weight", i, std::span<const double>(&gmm.weights[i], 1));
        row("mean", i, gmm.means[i]);
        row("variance", i, gmm.variances[i]);
    }
}

inline GmmModel load_gmm(const std::string& path) {
    GmmModel gmm;
    auto ensure = [&](std::size_t i) {
        if (i >= gmm.weights.size()) {
            gmm.weights.resize(i + 1, 0.0);
            gmm.means.resize(i + 1);
            gmm.variances.resize(i + 1);
        }
    };
    fusegraph::detail::for_each_line(path, [&](std::string_view line, std::size_t line_no) {
        auto f = fusegraph::detail::split(line, '\t');
        std::size_t i = 0;
        auto [p, ec] = std::from_chars(f.size() == 3 ? f[1].data() : nullptr,
                                       f.size() == 3 ? f[1].data() + f[1].size() : nullptr, i);
        if (f.size() != 3 || ec != std::errc{}) {
            fail(ErrorCode::MalformedLine, fusegraph::detail::where(path, line_no));
        }
        std::vector<double> values;
        for (auto v : fusegraph::detail::split(f[2], ',')) {
            auto x = parse_double(v);
            if (!x) fail(ErrorCode::MalformedLine, fusegraph::detail::where(path, line_no));
            values.push_back(*x);
        }
        ensure(i);
        if (f[0] == "weight" && values.size() == 1) {
            gmm.weights[i] = values[0];
        } else if (f[0] == "mean") {
            gmm.means[i] = std::move(values);
        } else if (f[0] == "variance") {
            gmm.variances[i] = std::move(values);
        } else {
            fail(ErrorCode::MalformedLine, fusegraph::detail::where(path, line_no) + ": unknown label");
        }
    });
    if (gmm.weights.empty()) fail(ErrorCode::EmptyInput, path + ": empty model");
    const std::size_t D = gmm.means.front().size();
    for (std::size_t i = 0; i < gmm.components(); ++i) {
        if (gmm.means[i].size() != D || gmm.variances[i].size() != D || D == 0) {
            fail(ErrorCode::DimensionMismatch, path + ": inconsistent component " + std::to_string(i));
        }
    }
    return gmm;
}

}  // namespace fusegraph::visual
