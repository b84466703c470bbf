#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "test_support.hpp"

using namespace fusegraph;

TEST(SelectTopL, SortsAndCaps) {
    auto docs = fgtest::make_table(4);
    auto s = ScoreVector::from_entries(4, {{1, 0.5}, {2, 0.9}, {3, 0.1}});
    EXPECT_EQ(select_top_l(s, 2, &docs), (std::vector<std::size_t>{2, 1}));
    EXPECT_EQ(select_top_l(s, 1000, &docs).size(), 3u);
}

TEST(SelectTopL, TiesCutByDocId) {
    DocTable docs({"zeta", "alpha", "mid"});
    auto s = ScoreVector::from_entries(3, {{0, 0.5}, {1, 0.5}, {2, 0.5}});
    EXPECT_EQ(select_top_l(s, 2, &docs), (std::vector<std::size_t>{1, 2}));
    EXPECT_EQ(select_top_l(s, 2), (std::vector<std::size_t>{0, 1}));
}

TEST(SelectTopL, EmptyAndZeroCap) {
    ScoreVector s(5);
    try {
        select_top_l(s, 10);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyTextResult);
    }
    auto one = ScoreVector::from_entries(5, {{0, 1.0}});
    EXPECT_THROW(select_top_l(one, 0), Error);
}

TEST(SelectTopL, FullSortOracle) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Entry> e;
    for (std::size_t i = 0; i < 5000; ++i) e.push_back({i, unit(rng)});
    auto s = ScoreVector::from_entries(5000, e);
    auto top = select_top_l(s, 1000);
    ASSERT_EQ(top.size(), 1000u);
    std::vector<double> sorted;
    for (const auto& x : e) sorted.push_back(x.value);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    for (std::size_t i = 0; i < 1000; ++i) {
        EXPECT_EQ(s[top[i]], sorted[i]);
        EXPECT_GE(s[top[i]], sorted[1000]);
    }
}

TEST(FilterVector, SelfFilterIsTopScores) {
    std::mt19937_64 rng(2);
    auto s = fgtest::random_vector(rng, 200, 0.4);
    SimMatrix S(200);
    auto ctx = build_context("q", s, nullptr, S, S, 30);
    ASSERT_EQ(ctx.size(), std::min<std::size_t>(30, s.nnz()));
    EXPECT_EQ(ctx.s_t_f.nnz(), ctx.size());
    for (std::size_t i = 0; i < ctx.size(); ++i) EXPECT_EQ(ctx.s_t_f[i], s[ctx.selected[i]]);
    for (std::size_t i = 1; i < ctx.size(); ++i) EXPECT_GE(ctx.s_t_f[i - 1], ctx.s_t_f[i]);
    EXPECT_FALSE(ctx.has_visual_query);
    EXPECT_EQ(ctx.s_v_f.dimension(), ctx.size());
    EXPECT_TRUE(ctx.s_v_f.empty());
}

TEST(FilterVector, DropsUnselectedDocs) {
    std::mt19937_64 rng(3);
    auto s_t = fgtest::random_vector(rng, 300, 0.5);
    auto s_v = fgtest::random_vector(rng, 300, 0.5);
    SimMatrix S(300);
    auto ctx = build_context("q", s_t, &s_v, S, S, 50);
    for (std::size_t local = 0; local < ctx.size(); ++local) {
        EXPECT_EQ(ctx.s_v_f[local], s_v[ctx.selected[local]]);
    }
    std::size_t expect_nnz = 0;
    for (std::size_t g : ctx.selected) expect_nnz += s_v[g] != 0.0;
    EXPECT_EQ(ctx.s_v_f.nnz(), expect_nnz);
}

TEST(FilterMatrix, SubmatrixOracleAndIdempotence) {
    std::mt19937_64 rng(4);
    const std::size_t n = 150;
    auto s = fgtest::random_vector(rng, n, 0.6);
    auto S_t = fgtest::random_matrix(rng, n, 0.1, false);
    auto S_v = fgtest::random_matrix(rng, n, 0.1, false);
    auto ctx = build_context("q", s, nullptr, S_t, S_v, 40);
    const std::size_t l = ctx.size();
    ASSERT_EQ(ctx.S_t_f.dimension(), l);
    for (std::size_t a = 0; a < l; ++a)
        for (std::size_t b = 0; b < l; ++b) {
            EXPECT_EQ(ctx.S_t_f.at(a, b), S_t.at(ctx.selected[a], ctx.selected[b]));
            EXPECT_EQ(ctx.S_v_f.at(a, b), S_v.at(ctx.selected[a], ctx.selected[b]));
        }
    // filtering a filtered context with the identity selection changes nothing
    FilteredContext id;
    for (std::size_t i = 0; i < l; ++i) id.selected.push_back(i);
    id.index_map = make_index_map(id.selected);
    EXPECT_TRUE(filter_matrix(ctx.S_t_f, id) == ctx.S_t_f);
    EXPECT_TRUE(filter_vector(ctx.s_t_f, id) == ctx.s_t_f);
}

TEST(BuildContext, DimensionMismatch) {
    auto s = ScoreVector::from_entries(3, {{0, 1.0}});
    SimMatrix S3(3), S4(4);
    EXPECT_THROW(build_context("q", s, nullptr, S4, S3), Error);
    auto v4 = ScoreVector(4);
    EXPECT_THROW(build_context("q", s, &v4, S3, S3), Error);
}

TEST(BuildContext, IndexMapInverse) {
    std::mt19937_64 rng(5);
    auto s = fgtest::random_vector(rng, 100, 0.5);
    SimMatrix S(100);
    auto ctx = build_context("q", s, nullptr, S, S, 1000);
    EXPECT_EQ(ctx.size(), s.nnz());
    for (std::size_t i = 0; i < ctx.size(); ++i) EXPECT_EQ(ctx.index_map.at(ctx.selected[i]), i);
}
