#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <cstring>
#include <random>
#include <set>

#include "test_support.hpp"

using namespace fusegraph;
using fgtest::TempDir;

namespace {

template <class Fn>
ErrorCode code_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected a fusegraph::Error";
    return ErrorCode::IoError;
}

}  // namespace

TEST(ScoreVector, DropsZerosAndSorts) {
    auto v = ScoreVector::from_entries(5, {{3, 0.5}, {1, 0.0}, {0, 2.0}});
    ASSERT_EQ(v.nnz(), 2u);
    EXPECT_EQ(v.entries()[0].index, 0u);
    EXPECT_EQ(v.entries()[1].index, 3u);
    EXPECT_EQ(v[1], 0.0);
    EXPECT_EQ(v[3], 0.5);
}

TEST(ScoreVector, RejectsBadEntries) {
    EXPECT_EQ(code_of([] { ScoreVector::from_entries(3, {{0, -1.0}}); }), ErrorCode::NegativeScore);
    EXPECT_EQ(code_of([] { ScoreVector::from_entries(3, {{0, std::nan("")}}); }), ErrorCode::NonFiniteScore);
    EXPECT_EQ(code_of([] { ScoreVector::from_entries(3, {{0, HUGE_VAL}}); }), ErrorCode::NonFiniteScore);
    EXPECT_EQ(code_of([] { ScoreVector::from_entries(3, {{3, 1.0}}); }), ErrorCode::DimensionMismatch);
    EXPECT_EQ(code_of([] { ScoreVector::from_entries(3, {{1, 1.0}, {1, 2.0}}); }), ErrorCode::DuplicateEntry);
}

TEST(DocTable, DuplicateIdsRejected) {
    EXPECT_EQ(code_of([] { DocTable({"a", "b", "a"}); }), ErrorCode::DuplicateEntry);
    DocTable t({"a", "b"});
    EXPECT_EQ(t.index_of("b"), 1u);
    EXPECT_EQ(code_of([&] { t.index_of("zz"); }), ErrorCode::UnknownDocument);
}

TEST(LoadScoreVectors, SingleLine) {
    TempDir dir("sv");
    fgtest::write_file(dir.file("s.tsv"), "q1\td7\t0.83\n");
    auto docs = fgtest::make_table(10);
    auto m = load_score_vectors(dir.file("s.tsv"), docs);
    ASSERT_EQ(m.size(), 1u);
    const auto& v = m.at("q1");
    EXPECT_EQ(v.dimension(), 10u);
    ASSERT_EQ(v.nnz(), 1u);
    EXPECT_EQ(v.entries()[0].index, 7u);
    EXPECT_EQ(v.entries()[0].value, 0.83);
}

TEST(LoadScoreVectors, NegativeScoreIsError) {
    TempDir dir("sv");
    fgtest::write_file(dir.file("s.tsv"), "q1\td7\t-0.1\n");
    auto docs = fgtest::make_table(10);
    EXPECT_EQ(code_of([&] { load_score_vectors(dir.file("s.tsv"), docs); }), ErrorCode::NegativeScore);
}

TEST(LoadScoreVectors, EmptyFileGivesEmptyMap) {
    TempDir dir("sv");
    fgtest::write_file(dir.file("s.tsv"), "");
    EXPECT_TRUE(load_score_vectors(dir.file("s.tsv"), fgtest::make_table(3)).empty());
}

TEST(LoadScoreVectors, MalformedLineReportsLineNumber) {
    TempDir dir("sv");
    fgtest::write_file(dir.file("s.tsv"), "q1\td1\t0.5\nq1 d2 0.5\n");
    try {
        load_score_vectors(dir.file("s.tsv"), fgtest::make_table(3));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedLine);
        EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
    }
}

TEST(LoadScoreVectors, UnknownDocumentAndNonFinite) {
    TempDir dir("sv");
    fgtest::write_file(dir.file("a.tsv"), "q1\tnope\t0.5\n");
    fgtest::write_file(dir.file("b.tsv"), "q1\td1\tnan\n");
    fgtest::write_file(dir.file("c.tsv"), "q1\td1\t0.5\nq1\td1\t0.7\n");
    auto docs = fgtest::make_table(3);
    EXPECT_EQ(code_of([&] { load_score_vectors(dir.file("a.tsv"), docs); }), ErrorCode::UnknownDocument);
    EXPECT_EQ(code_of([&] { load_score_vectors(dir.file("b.tsv"), docs); }), ErrorCode::NonFiniteScore);
    EXPECT_EQ(code_of([&] { load_score_vectors(dir.file("c.tsv"), docs); }), ErrorCode::DuplicateEntry);
}

TEST(LoadScoreVectors, CrlfAndBlankLinesTolerated) {
    TempDir dir("sv");
    fgtest::write_file(dir.file("s.tsv"), "q1\td1\t0.5\r\n\nq1\td2\t0.25\r\n");
    auto m = load_score_vectors(dir.file("s.tsv"), fgtest::make_table(3));
    EXPECT_EQ(m.at("q1").nnz(), 2u);
}

TEST(SimMatrixIo, DuplicatePairIsError) {
    TempDir dir("sm");
    fgtest::write_file(dir.file("m.tsv"), "d0\td1\t0.5\nd1\td0\t0.2\nd0\td1\t0.3\n");
    EXPECT_EQ(code_of([&] { load_sim_matrix(dir.file("m.tsv"), fgtest::make_table(2)); }), ErrorCode::DuplicateEntry);
}

TEST(SimMatrixIo, AsymmetryStoredAsIs) {
    TempDir dir("sm");
    fgtest::write_file(dir.file("m.tsv"), "a\tb\t0.5\nb\ta\t0.2\n");
    auto m = load_sim_matrix(dir.file("m.tsv"), DocTable({"a", "b"}));
    EXPECT_EQ(m.at(0, 1), 0.5);
    EXPECT_EQ(m.at(1, 0), 0.2);
    EXPECT_EQ(m.at(0, 0), 0.0);
    EXPECT_EQ(m.nnz(), 2u);
}

TEST(SimMatrixIo, NegativeScoreIsError) {
    TempDir dir("sm");
    fgtest::write_file(dir.file("m.tsv"), "d0\td1\t-0.5\n");
    EXPECT_EQ(code_of([&] { load_sim_matrix(dir.file("m.tsv"), fgtest::make_table(2)); }), ErrorCode::NegativeScore);
}

TEST(SimMatrixIo, RoundTripTenThousandTripletsByteIdentical) {
    std::mt19937_64 rng(11);
    const std::size_t n = 400;
    auto docs = fgtest::make_table(n);
    std::uniform_int_distribution<std::size_t> idx(0, n - 1);
    std::uniform_real_distribution<double> exponent(-12.0, 3.0);
    std::uniform_real_distribution<double> mant(1.0, 10.0);
    std::set<std::pair<std::size_t, std::size_t>> used;
    std::vector<Triplet> triplets;
    while (triplets.size() < 10000) {
        auto r = idx(rng), c = idx(rng);
        if (!used.insert({r, c}).second) continue;
        // awkward decimal expansions on purpose
        triplets.push_back({r, c, mant(rng) * std::pow(10.0, exponent(rng))});
    }
    auto m = SimMatrix::from_triplets(n, triplets);
    TempDir dir("rt");
    save_sim_matrix(m, docs, dir.file("a.tsv"));
    auto back = load_sim_matrix(dir.file("a.tsv"), docs);
    EXPECT_TRUE(back == m);
    save_sim_matrix(back, docs, dir.file("b.tsv"));
    EXPECT_EQ(fgtest::read_file(dir.file("a.tsv")), fgtest::read_file(dir.file("b.tsv")));
    for (const auto& t : triplets) ASSERT_EQ(back.at(t.row, t.col), t.value);
}

TEST(ScoreVectorIo, RoundTripExact) {
    std::mt19937_64 rng(5);
    auto docs = fgtest::make_table(300);
    std::map<std::string, ScoreVector> vs;
    for (int q = 0; q < 20; ++q) vs.emplace("q" + std::to_string(q), fgtest::random_vector(rng, 300, 0.3));
    TempDir dir("svrt");
    save_score_vectors(vs, docs, dir.file("s.tsv"));
    auto back = load_score_vectors(dir.file("s.tsv"), docs);
    EXPECT_EQ(back, vs);
}

TEST(FormatScore, ShortestRoundTrip) {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<std::uint64_t> bits;
    for (int i = 0; i < 20000; ++i) {
        std::uint64_t b = bits(rng) & 0x7fefffffffffffffULL;  // finite, non-negative
        double v;
        std::memcpy(&v, &b, sizeof v);
        auto parsed = parse_double(format_score(v));
        ASSERT_TRUE(parsed);
        ASSERT_EQ(*parsed, v);
    }
    EXPECT_EQ(format_score(0.9), "0.9");
    EXPECT_EQ(format_score(0.3), "0.3");
}

TEST(SaveRun, TrecLines) {
    fusegraph::Run run;
    run["q1"] = {{"d2", 0.3}, {"d1", 0.9}};
    TempDir dir("run");
    save_run(run, dir.file("r.txt"));
    EXPECT_EQ(fgtest::read_file(dir.file("r.txt")), "q1 Q0 d1 1 0.9 fusegraph\nq1 Q0 d2 2 0.3 fusegraph\n");
}

TEST(SaveRun, EmptyListWritesNothing) {
    fusegraph::Run run;
    run["q1"] = {};
    TempDir dir("run");
    save_run(run, dir.file("r.txt"));
    EXPECT_EQ(fgtest::read_file(dir.file("r.txt")), "");
}

TEST(SaveRun, TiesBrokenByDocId) {
    fusegraph::Run run;
    run["q1"] = {{"d2", 0.5}, {"d1", 0.5}, {"d0", 0.1}};
    TempDir dir("run");
    save_run(run, dir.file("r.txt"));
    auto back = load_run(dir.file("r.txt"));
    const auto& list = back.at("q1");
    ASSERT_EQ(list.size(), 3u);
    // re-sorting oracle: ranks must already be in (score desc, id asc) order
    auto copy = list;
    std::stable_sort(copy.begin(), copy.end(), [](const RankedDoc& a, const RankedDoc& b) {
        return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
    });
    for (std::size_t i = 0; i < list.size(); ++i) EXPECT_EQ(list[i].doc_id, copy[i].doc_id);
    EXPECT_EQ(list[0].doc_id, "d1");
    EXPECT_EQ(list[1].doc_id, "d2");
}

TEST(SaveRun, NanRejected) {
    fusegraph::Run run;
    run["q1"] = {{"d1", std::nan("")}};
    TempDir dir("run");
    EXPECT_EQ(code_of([&] { save_run(run, dir.file("r.txt")); }), ErrorCode::NonFiniteScore);
}

TEST(Qrels, RoundTripAndValidation) {
    Qrels q;
    q.set("q1", "d1", true);
    q.set("q1", "d2", false);
    q.set("q2", "d3", true);
    TempDir dir("qrels");
    save_qrels(q, dir.file("qrels.txt"));
    auto back = load_qrels(dir.file("qrels.txt"));
    EXPECT_EQ(back.judgments(), q.judgments());
    EXPECT_EQ(back.relevant_count("q1"), 1u);
    fgtest::write_file(dir.file("bad.txt"), "q1 0 d1 2\n");
    EXPECT_EQ(code_of([&] { load_qrels(dir.file("bad.txt")); }), ErrorCode::MalformedLine);
}

TEST(Descriptors, RoundTripWithAndWithoutLocation) {
    std::vector<std::pair<std::string, std::vector<Descriptor>>> rows;
    Descriptor a{std::array<double, 2>{0.25, 0.75}, {1.5, -2.0, 0.1}};
    Descriptor b{std::nullopt, {0.0, 3.0, 1e-7}};
    rows.push_back({"d1", {a, b}});
    TempDir dir("desc");
    save_descriptors(rows, dir.file("x.tsv"));
    auto back = load_descriptors(dir.file("x.tsv"));
    ASSERT_EQ(back.at("d1").size(), 2u);
    EXPECT_EQ(back.at("d1")[0].location, a.location);
    EXPECT_EQ(back.at("d1")[0].values, a.values);
    EXPECT_FALSE(back.at("d1")[1].location);
    EXPECT_EQ(back.at("d1")[1].values, b.values);
}

TEST(Descriptors, MixedDimensionRejected) {
    TempDir dir("desc");
    fgtest::write_file(dir.file("x.tsv"), "d1\t\t\t1,2,3\nd2\t\t\t1,2\n");
    EXPECT_EQ(code_of([&] { load_descriptors(dir.file("x.tsv")); }), ErrorCode::DimensionMismatch);
}

TEST(Io, MissingFileIsIoError) {
    EXPECT_EQ(code_of([] { load_qrels("/nonexistent/fusegraph/qrels.txt"); }), ErrorCode::IoError);
}

TEST(Run, LoadRunOrdersByRank) {
    TempDir dir("run");
    fgtest::write_file(dir.file("r.txt"), "q1 Q0 b 2 0.5 x\nq1 Q0 a 1 0.7 x\n");
    auto run = load_run(dir.file("r.txt"));
    ASSERT_EQ(run.at("q1").size(), 2u);
    EXPECT_EQ(run.at("q1")[0].doc_id, "a");
}
