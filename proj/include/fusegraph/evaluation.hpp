#pragma once

/// \file evaluation.hpp
/// Average Precision / MAP under binary relevance and the two-sided paired
/// t-test used to compare runs.

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "fusegraph/collection_store.hpp"
#include "fusegraph/error.hpp"

namespace fusegraph::eval {

struct ApResult {
    double ap = 0.0;
    std::size_t relevant = 0;  // R, judged relevant documents for the query
    bool excluded = false;     // R == 0: not part of MAP
};

namespace detail {

// Double-double accumulator: keeps the AP sum exact enough that the final
// division rounds like the exact rational would.
struct Compensated {
    double hi = 0.0;
    double lo = 0.0;

    void add_ratio(double num, double den) {
        const double q = num / den;
        const double r = std::fma(-q, den, num) / den;
        const double s = hi + q;
        const double bb = s - hi;
        lo += (hi - (s - bb)) + (q - bb) + r;
        hi = s;
    }

    double divided_by(double den) const {
        const double s = hi + lo;
        const double rest = lo - (s - hi);
        const double q = s / den;
        return q + (std::fma(-q, den, s) + rest) / den;
    }
};

}  // namespace detail

/// AP = (1/R) sum over relevant ranks r of precision@r. Relevant documents
/// never retrieved contribute zero.
inline ApResult average_precision(std::span<const std::string> ranked, const Qrels& qrels,
                                  const std::string& query_id) {
    ApResult out;
    out.relevant = qrels.relevant_count(query_id);
    std::unordered_set<std::string> seen;
    std::size_t hits = 0;
    detail::Compensated sum;
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        if (!seen.insert(ranked[r]).second) {
            fail(ErrorCode::DuplicateEntry, "document '" + ranked[r] + "' ranked twice for " + query_id);
        }
        if (qrels.is_relevant(query_id, ranked[r])) {
            ++hits;
            sum.add_ratio(static_cast<double>(hits), static_cast<double>(r + 1));
        }
    }
    if (out.relevant == 0) {
        out.excluded = true;
        return out;
    }
    out.ap = sum.divided_by(static_cast<double>(out.relevant));
    return out;
}

struct TTestResult {
    double t = 0.0;
    std::size_t dof = 0;
    double critical = 0.0;  // two-sided 0.05 critical value for dof
    double p_value = 1.0;
    bool significant = false;
    bool degenerate = false;  // differences have zero variance
};

/// Two-sided 0.975 quantile of Student's t.
inline double t_critical_95(std::size_t dof) {
    boost::math::students_t dist(static_cast<double>(dof));
    return boost::math::quantile(dist, 0.975);
}

/// Paired t-test on per-query AP differences a - b, at the 95% level.
inline TTestResult paired_ttest(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
    if (a.size() != b.size()) fail(ErrorCode::DimensionMismatch, "paired t-test over different query sets");
    if (a.size() < 2) fail(ErrorCode::EmptyInput, "paired t-test needs at least two queries");
    std::vector<double> diffs;
    diffs.reserve(a.size());
    for (const auto& [q, va] : a) {
        auto it = b.find(q);
        if (it == b.end()) fail(ErrorCode::DimensionMismatch, "query '" + q + "' missing from second run");
        diffs.push_back(va - it->second);
    }
    const double n = static_cast<double>(diffs.size());
    double mean = 0.0;
    for (double d : diffs) mean += d;
    mean /= n;
    double ss = 0.0;
    for (double d : diffs) ss += (d - mean) * (d - mean);
    const double sd = std::sqrt(ss / (n - 1.0));

    TTestResult out;
    out.dof = diffs.size() - 1;
    out.critical = t_critical_95(out.dof);
    if (!(sd > 0.0)) {
        out.degenerate = true;
        out.t = mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean);
        out.p_value = mean == 0.0 ? 1.0 : 0.0;
        return out;
    }
    out.t = mean / (sd / std::sqrt(n));
    boost::math::students_t dist(static_cast<double>(out.dof));
    out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t)));
    out.significant = std::abs(out.t) > out.critical;
    return out;
}

struct EvalReport {
    std::map<std::string, double> per_query_ap;
    std::vector<std::string> excluded;  // queries with no relevant document
    double map = 0.0;
};

/// Evaluates every judged query that has at least one relevant document;
/// a query missing from the run scores AP 0.
inline EvalReport evaluate(const Run& run, const Qrels& qrels) {
    EvalReport report;
    static const std::vector<RankedDoc> kEmpty;
    for (const auto& q : qrels.query_ids()) {
        auto it = run.find(q);
        const auto& list = it == run.end() ? kEmpty : it->second;
        std::vector<std::string> ids;
        ids.reserve(list.size());
        for (const auto& d : list) ids.push_back(d.doc_id);
        auto ap = average_precision(ids, qrels, q);
        if (ap.excluded) {
            report.excluded.push_back(q);
            continue;
        }
        report.per_query_ap[q] = ap.ap;
    }
    double sum = 0.0;
    for (const auto& [_, ap] : report.per_query_ap) sum += ap;
    report.map = report.per_query_ap.empty() ? 0.0 : sum / static_cast<double>(report.per_query_ap.size());
    return report;
}

}  // namespace fusegraph::eval
