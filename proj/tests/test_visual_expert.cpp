#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"

using namespace fusegraph;
using namespace fusegraph::visual;

namespace {

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Mean log-likelihood under weights softmax(alpha), means mu, std sigma,
// written from scratch in long double.
long double ref_mean_ll(const std::vector<long double>& alpha, const std::vector<std::vector<long double>>& mu,
                        const std::vector<std::vector<long double>>& sigma,
                        const std::vector<std::vector<double>>& data) {
    const std::size_t N = alpha.size();
    long double amax = *std::max_element(alpha.begin(), alpha.end());
    long double z = 0;
    for (auto a : alpha) z += std::exp(a - amax);
    long double total = 0;
    for (const auto& u : data) {
        long double p = 0;
        for (std::size_t i = 0; i < N; ++i) {
            long double w = std::exp(alpha[i] - amax) / z;
            long double lg = 0;
            for (std::size_t d = 0; d < u.size(); ++d) {
                long double x = (u[d] - mu[i][d]) / sigma[i][d];
                lg += -0.5L * x * x - std::log(sigma[i][d]) - 0.5L * std::log(2.0L * 3.14159265358979323846264338327950288L);
            }
            p += w * std::exp(lg);
        }
        total += std::log(p);
    }
    return total / static_cast<long double>(data.size());
}

}  // namespace

TEST(Gmm, SingleGaussianRecoversSampleMean) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<std::vector<double>> data(2000, std::vector<double>(3));
    std::vector<double> mean(3, 0.0);
    for (auto& u : data) {
        for (std::size_t d = 0; d < 3; ++d) {
            u[d] = 1.5 + 2.0 * n(rng) + static_cast<double>(d);
            mean[d] += u[d] / 2000.0;
        }
    }
    auto fit = fit_gmm(data, 1, 7);
    for (std::size_t d = 0; d < 3; ++d) {
        const double se = std::sqrt(fit.model.variances[0][d] / 2000.0);
        EXPECT_LT(std::abs(fit.model.means[0][d] - mean[d]), 3.0 * se);
    }
    EXPECT_EQ(fit.model.weights[0], 1.0);
}

TEST(Gmm, TwoSeparatedClustersArePartitioned) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<std::vector<double>> data;
    for (int i = 0; i < 300; ++i) data.push_back({n(rng) - 10.0, n(rng)});
    for (int i = 0; i < 300; ++i) data.push_back({n(rng) + 10.0, n(rng)});
    auto fit = fit_gmm(data, 2, 3);
    // k-means oracle: the sign of x decides the cluster
    double mass_left[2] = {0, 0}, mass_right[2] = {0, 0};
    for (const auto& u : data) {
        auto g = posterior(fit.model, u);
        for (int i = 0; i < 2; ++i) (u[0] < 0 ? mass_left : mass_right)[i] += g[i];
    }
    const int left = mass_left[0] > mass_left[1] ? 0 : 1;
    EXPECT_GT(mass_left[left] / 300.0, 0.99);
    EXPECT_GT(mass_right[1 - left] / 300.0, 0.99);
}

TEST(Gmm, SameSeedSameModel) {
    std::mt19937_64 rng(5);
    auto data = fgtest::sample_gmm(rng, fgtest::random_gmm(rng, 3, 4), 500);
    auto a = fit_gmm(data, 3, 99);
    auto b = fit_gmm(data, 3, 99);
    EXPECT_TRUE(a.model == b.model);
    EXPECT_EQ(a.log_likelihood, b.log_likelihood);
}

TEST(Gmm, TooFewDistinctDescriptors) {
    std::vector<std::vector<double>> data(10, std::vector<double>{1.0, 2.0});
    data.push_back({3.0, 4.0});
    EXPECT_THROW(fit_gmm(data, 3, 1), Error);
    EXPECT_NO_THROW(fit_gmm(data, 2, 1));
}

TEST(Gmm, EmLogLikelihoodNonDecreasing) {
    std::mt19937_64 rng(6);
    auto data = fgtest::sample_gmm(rng, fgtest::random_gmm(rng, 4, 3), 800);
    auto fit = fit_gmm(data, 4, 1);
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
        EXPECT_GE(fit.log_likelihood[i], fit.log_likelihood[i - 1] - 1e-9);
    }
    double w = 0.0;
    for (double x : fit.model.weights) w += x;
    EXPECT_NEAR(w, 1.0, 1e-9);
    for (const auto& v : fit.model.variances)
        for (double x : v) EXPECT_GE(x, kVarianceFloor);
}

TEST(Gmm, VarianceFloorClamps) {
    std::vector<std::vector<double>> data;
    for (int i = 0; i < 50; ++i) data.push_back({1.0, static_cast<double>(i % 2)});
    auto fit = fit_gmm(data, 2, 4);
    for (const auto& v : fit.model.variances)
        for (double x : v) EXPECT_GE(x, kVarianceFloor);
}

TEST(Posterior, SingleComponentIsOne) {
    std::mt19937_64 rng(7);
    auto g = fgtest::random_gmm(rng, 1, 3);
    EXPECT_EQ(posterior(g, std::vector<double>{100.0, -3.0, 2.0})[0], 1.0);
}

TEST(Posterior, PointAtMeanOfSeparatedComponent) {
    GmmModel g{{0.5, 0.5}, {{0.0, 0.0}, {20.0, 20.0}}, {{1.0, 1.0}, {1.0, 1.0}}};
    EXPECT_GT(posterior(g, g.means[0])[0], 0.999);
}

TEST(Posterior, SimplexOnRandomPoints) {
    std::mt19937_64 rng(8);
    auto g = fgtest::random_gmm(rng, 4, 5);
    std::normal_distribution<double> n(0.0, 30.0);
    for (int t = 0; t < 500; ++t) {
        std::vector<double> u(5);
        for (double& x : u) x = n(rng);
        auto p = posterior(g, u);
        double s = 0.0;
        for (double x : p) {
            EXPECT_GE(x, 0.0);
            s += x;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Bov, SingleDescriptorEqualsPosterior) {
    std::mt19937_64 rng(9);
    auto g = fgtest::random_gmm(rng, 3, 2);
    std::vector<std::vector<double>> one{{0.3, -0.2}};
    EXPECT_EQ(bov_vector(g, one), posterior(g, one[0]));
}

TEST(Bov, MassEqualsDescriptorCountAndAccumulates) {
    std::mt19937_64 rng(10);
    auto g = fgtest::random_gmm(rng, 4, 3);
    auto data = fgtest::sample_gmm(rng, g, 37);
    auto b = bov_vector(g, data);
    std::vector<double> oracle(4, 0.0);
    for (const auto& u : data) {
        auto p = posterior(g, u);
        for (int i = 0; i < 4; ++i) oracle[i] += p[i];
    }
    double s = 0.0;
    for (int i = 0; i < 4; ++i) {
        EXPECT_NEAR(b[i], oracle[i], 1e-12);
        s += b[i];
    }
    EXPECT_NEAR(s, 37.0, 1e-12);
    EXPECT_THROW(bov_vector(g, std::vector<std::vector<double>>{}), Error);
}

TEST(FisherGradient, MeanBlockZeroAtTheMean) {
    GmmModel g{{1.0}, {{0.5, -1.0, 2.0}}, {{1.0, 4.0, 0.25}}};
    std::vector<std::vector<double>> one{g.means[0]};
    auto grad = fisher_gradient(g, one);
    ASSERT_EQ(grad.size(), g.gradient_size());
    for (std::size_t d = 0; d < 3; ++d) EXPECT_EQ(grad[1 + d], 0.0);
}

TEST(FisherGradient, MatchesFiniteDifferences) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t N = 1 + trial % 3, D = 2 + trial;
        auto g = fgtest::random_gmm(rng, N, D);
        auto data = fgtest::sample_gmm(rng, g, 6);
        auto grad = fisher_gradient(g, data);

        std::vector<long double> alpha(N);
        std::vector<std::vector<long double>> mu(N, std::vector<long double>(D)), sigma = mu;
        for (std::size_t i = 0; i < N; ++i) {
            alpha[i] = std::log(static_cast<long double>(g.weights[i]));
            for (std::size_t d = 0; d < D; ++d) {
                mu[i][d] = g.means[i][d];
                sigma[i][d] = std::sqrt(static_cast<long double>(g.variances[i][d]));
            }
        }
        const long double h = 1e-6L;
        auto check = [&](long double& param, double analytic) {
            const long double saved = param;
            param = saved + h;
            const long double up = ref_mean_ll(alpha, mu, sigma, data);
            param = saved - h;
            const long double down = ref_mean_ll(alpha, mu, sigma, data);
            param = saved;
            const double fd = static_cast<double>((up - down) / (2 * h));
            const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-6});
            EXPECT_LT(std::abs(fd - analytic) / denom, 1e-4) << "fd " << fd << " analytic " << analytic;
        };
        for (std::size_t i = 0; i < N; ++i) check(alpha[i], grad[i]);
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t d = 0; d < D; ++d) check(mu[i][d], grad[N + i * D + d]);
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t d = 0; d < D; ++d) check(sigma[i][d], grad[N + N * D + i * D + d]);
    }
}

TEST(FisherDiag, Layout) {
    GmmModel g{{0.25, 0.75}, {{0.0}, {1.0}}, {{2.0}, {0.5}}};
    auto f = fisher_diag(g);
    ASSERT_EQ(f.size(), 6u);
    EXPECT_EQ(f[0], 0.25);
    EXPECT_EQ(f[1], 0.75);
    EXPECT_EQ(f[2], 0.25 / 2.0);
    EXPECT_EQ(f[3], 0.75 / 0.5);
    EXPECT_EQ(f[4], 2 * 0.25 / 2.0);
    EXPECT_EQ(f[5], 2 * 0.75 / 0.5);
}

TEST(NormalizeFv, ZeroInputFlagged) {
    std::vector<double> z(6, 0.0), diag(6, 1.0);
    auto fv = normalize_fv(z, diag);
    EXPECT_TRUE(fv.zero);
    for (double x : fv.values) EXPECT_EQ(x, 0.0);
}

TEST(NormalizeFv, ScaleInvariantAndUnitNorm) {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> pos(0.1, 3.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> v(40), v2(40), diag(40);
        for (std::size_t j = 0; j < 40; ++j) {
            v[j] = n(rng);
            v2[j] = 2.0 * v[j];
            diag[j] = pos(rng);
        }
        auto a = normalize_fv(v, diag);
        auto b = normalize_fv(v2, diag);
        EXPECT_NEAR(norm2(a.values), 1.0, 1e-12);
        for (std::size_t j = 0; j < 40; ++j) EXPECT_NEAR(a.values[j], b.values[j], 1e-15);
    }
}

TEST(NormalizeFv, RequiresPositiveDiagonal) {
    std::vector<double> v{1.0, 2.0}, diag{1.0, 0.0};
    EXPECT_THROW(normalize_fv(v, diag), Error);
}

TEST(Pyramid, TopBandOnlyLeavesOtherBandsEmpty) {
    std::mt19937_64 rng(14);
    auto g = fgtest::random_gmm(rng, 2, 3);
    auto vals = fgtest::sample_gmm(rng, g, 40);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Descriptor> descs;
    for (auto& v : vals) descs.push_back({std::array<double, 2>{unit(rng), unit(rng) / 3.0 * 0.999}, v});
    auto fv = spatial_pyramid_fv(g, descs);
    ASSERT_EQ(fv.empty_blocks.size(), kPyramidRegions);
    EXPECT_FALSE(fv.empty_blocks[0]);
    EXPECT_FALSE(fv.empty_blocks[1]);
    EXPECT_TRUE(fv.empty_blocks[2]);
    EXPECT_TRUE(fv.empty_blocks[3]);
    EXPECT_TRUE(fv.empty_blocks[6]);  // bottom quadrants
    EXPECT_TRUE(fv.empty_blocks[7]);
    const std::size_t block = g.gradient_size();
    for (std::size_t j = 2 * block; j < 4 * block; ++j) EXPECT_EQ(fv.values[j], 0.0);
    EXPECT_NEAR(norm2(fv.values), 1.0, 1e-12);
}

TEST(Pyramid, WholeImageBlockIsPooledFisherVector) {
    std::mt19937_64 rng(15);
    auto g = fgtest::random_gmm(rng, 3, 2);
    auto vals = fgtest::sample_gmm(rng, g, 200);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Descriptor> descs;
    for (auto& v : vals) descs.push_back({std::array<double, 2>{unit(rng), unit(rng)}, v});
    auto fv = spatial_pyramid_fv(g, descs);
    auto pooled = fisher_vector(g, vals);
    const std::size_t block = g.gradient_size();
    std::vector<double> first(fv.values.begin(), fv.values.begin() + block);
    const double n = norm2(first);
    for (std::size_t j = 0; j < block; ++j) EXPECT_NEAR(first[j] / n, pooled.values[j], 1e-12);
}

TEST(Pyramid, RegionAssignmentMatchesRectangles) {
    std::mt19937_64 rng(16);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int t = 0; t < 1000; ++t) {
        const double x = unit(rng), y = unit(rng);
        auto [band, quad] = pyramid_cells(x, y);
        std::size_t expect_band = 0, expect_quad = 0;
        const double bands[3][2] = {{0.0, 1.0 / 3}, {1.0 / 3, 2.0 / 3}, {2.0 / 3, 1.0 + 1e-12}};
        for (std::size_t b = 0; b < 3; ++b) {
            if (y >= bands[b][0] && y < bands[b][1]) expect_band = 1 + b;
        }
        const double qx[2][2] = {{0.0, 0.5}, {0.5, 1.0 + 1e-12}};
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t c = 0; c < 2; ++c)
                if (y >= qx[r][0] && y < qx[r][1] && x >= qx[c][0] && x < qx[c][1]) expect_quad = 4 + 2 * r + c;
        ASSERT_EQ(band, expect_band) << y;
        ASSERT_EQ(quad, expect_quad) << x << "," << y;
    }
    EXPECT_EQ(pyramid_cells(1.0, 1.0), std::make_pair(std::size_t{3}, std::size_t{7}));
}

TEST(Pyramid, MissingLocationRejected) {
    GmmModel g{{1.0}, {{0.0}}, {{1.0}}};
    std::vector<Descriptor> descs{{std::nullopt, {0.5}}};
    try {
        spatial_pyramid_fv(g, descs);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingLocation);
    }
}

TEST(FisherKernel, SelfOrthogonalAndExplicitSum) {
    std::mt19937_64 rng(17);
    auto g = fgtest::random_gmm(rng, 2, 3);
    auto a = fisher_vector(g, fgtest::sample_gmm(rng, g, 30));
    auto b = fisher_vector(g, fgtest::sample_gmm(rng, g, 30));
    EXPECT_NEAR(fisher_kernel(a, a), 1.0, 1e-12);
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += a.values[j] * b.values[j];
    EXPECT_EQ(fisher_kernel(a, b), s);
    EXPECT_LE(std::abs(fisher_kernel(a, b)), 1.0 + 1e-12);

    FisherVector e1, e2;
    e1.values = {1.0, 0.0};
    e2.values = {0.0, 1.0};
    EXPECT_EQ(fisher_kernel(e1, e2), 0.0);
    FisherVector e3;
    e3.values = {1.0, 0.0, 0.0};
    EXPECT_THROW(fisher_kernel(e1, e3), Error);
    e3.values = {1.0, 0.0};
    e3.layout = Layout::pyramid;
    EXPECT_THROW(fisher_kernel(e1, e3), Error);
}

TEST(ConcatChannels, UnitNormAndLayout) {
    std::mt19937_64 rng(18);
    auto g = fgtest::random_gmm(rng, 2, 2);
    auto a = fisher_vector(g, fgtest::sample_gmm(rng, g, 10));
    auto b = fisher_vector(g, fgtest::sample_gmm(rng, g, 10));
    std::vector<FisherVector> both{a, b};
    auto c = concat_channels(both);
    EXPECT_EQ(c.channels, 2u);
    EXPECT_EQ(c.size(), a.size() + b.size());
    EXPECT_NEAR(norm2(c.values), 1.0, 1e-12);
}

TEST(GmmIo, RoundTripExact) {
    std::mt19937_64 rng(19);
    auto g = fgtest::random_gmm(rng, 3, 4);
    fgtest::TempDir dir("gmm");
    save_gmm(g, dir.file("g.tsv"));
    EXPECT_TRUE(load_gmm(dir.file("g.tsv")) == g);
}
