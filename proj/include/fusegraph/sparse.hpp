#pragma once

/// \file sparse.hpp
/// Sparse non-negative score vectors and similarity matrices.
///
/// Every stored value is finite and strictly positive; zeros are implicit.
/// Entries are kept sorted by index so iteration order, and therefore every
/// floating point reduction over a vector, is deterministic.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fusegraph/error.hpp"

namespace fusegraph {

struct Entry {
    std::size_t index = 0;
    double value = 0.0;

    bool operator==(const Entry&) const = default;
};

class ScoreVector {
public:
    ScoreVector() = default;
    explicit ScoreVector(std::size_t dimension) : dimension_(dimension) {}

    /// Builds from arbitrary-order entries. Zeros are dropped; negative,
    /// non-finite, out of range or repeated indices are rejected.
    static ScoreVector from_entries(std::size_t dimension, std::vector<Entry> entries) {
        std::sort(entries.begin(), entries.end(),
                  [](const Entry& a, const Entry& b) { return a.index < b.index; });
        ScoreVector out(dimension);
        out.entries_.reserve(entries.size());
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const Entry& e = entries[i];
            check_value(e.value);
            if (e.index >= dimension) {
                fail(ErrorCode::DimensionMismatch, "index " + std::to_string(e.index) +
                                                       " out of range for dimension " +
                                                       std::to_string(dimension));
            }
            if (i > 0 && entries[i - 1].index == e.index) {
                fail(ErrorCode::DuplicateEntry, "index " + std::to_string(e.index) + " repeated");
            }
            if (e.value > 0.0) out.entries_.push_back(e);
        }
        return out;
    }

    static ScoreVector from_dense(std::span<const double> values) {
        ScoreVector out(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            check_value(values[i]);
            if (values[i] > 0.0) out.entries_.push_back({i, values[i]});
        }
        return out;
    }

    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t nnz() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::span<const Entry> entries() const noexcept { return entries_; }

    double operator[](std::size_t index) const {
        auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                                   [](const Entry& e, std::size_t i) { return e.index < i; });
        return (it != entries_.end() && it->index == index) ? it->value : 0.0;
    }

    std::vector<double> to_dense() const {
        std::vector<double> out(dimension_, 0.0);
        for (const auto& e : entries_) out[e.index] = e.value;
        return out;
    }

    double sum() const noexcept {
        double s = 0.0;
        for (const auto& e : entries_) s += e.value;
        return s;
    }

    double max_value() const noexcept {
        double m = 0.0;
        for (const auto& e : entries_) m = std::max(m, e.value);
        return m;
    }

    bool operator==(const ScoreVector&) const = default;

private:
    static void check_value(double v) {
        if (!std::isfinite(v)) fail(ErrorCode::NonFiniteScore, "score is not finite");
        if (v < 0.0) fail(ErrorCode::NegativeScore, "score " + std::to_string(v) + " is negative");
    }

    std::size_t dimension_ = 0;
    std::vector<Entry> entries_;
};

struct Triplet {
    std::size_t row = 0;
    std::size_t col = 0;
    double value = 0.0;
};

/// Square sparse matrix stored as one ScoreVector per row.
class SimMatrix {
public:
    SimMatrix() = default;
    explicit SimMatrix(std::size_t dimension)
        : dimension_(dimension), rows_(dimension, ScoreVector(dimension)) {}

    /// Duplicated (row, col) pairs are an error; no symmetry is imposed.
    static SimMatrix from_triplets(std::size_t dimension, std::span<const Triplet> triplets) {
        std::vector<std::vector<Entry>> buckets(dimension);
        for (const auto& t : triplets) {
            if (t.row >= dimension || t.col >= dimension) {
                fail(ErrorCode::DimensionMismatch, "triplet outside " + std::to_string(dimension) +
                                                       "x" + std::to_string(dimension));
            }
            buckets[t.row].push_back({t.col, t.value});
        }
        SimMatrix out(dimension);
        for (std::size_t r = 0; r < dimension; ++r) {
            out.rows_[r] = ScoreVector::from_entries(dimension, std::move(buckets[r]));
        }
        return out;
    }

    static SimMatrix identity(std::size_t dimension) {
        SimMatrix out(dimension);
        for (std::size_t r = 0; r < dimension; ++r) {
            out.rows_[r] = ScoreVector::from_entries(dimension, {{r, 1.0}});
        }
        return out;
    }

    std::size_t dimension() const noexcept { return dimension_; }
    const ScoreVector& row(std::size_t r) const { return rows_.at(r); }

    void set_row(std::size_t r, ScoreVector values) {
        if (values.dimension() != dimension_) {
            fail(ErrorCode::DimensionMismatch, "row dimension does not match matrix");
        }
        rows_.at(r) = std::move(values);
    }

    double at(std::size_t r, std::size_t c) const { return rows_.at(r)[c]; }

    std::size_t nnz() const noexcept {
        std::size_t n = 0;
        for (const auto& r : rows_) n += r.nnz();
        return n;
    }

    bool operator==(const SimMatrix&) const = default;

private:
    std::size_t dimension_ = 0;
    std::vector<ScoreVector> rows_;
};

/// Row vector times matrix, x·M. Accumulates densely in row order of x.
inline ScoreVector multiply(const ScoreVector& x, const SimMatrix& m) {
    if (x.dimension() != m.dimension()) {
        fail(ErrorCode::DimensionMismatch, "vector/matrix dimensions differ");
    }
    std::vector<double> acc(m.dimension(), 0.0);
    for (const auto& xe : x.entries()) {
        for (const auto& me : m.row(xe.index).entries()) acc[me.index] += xe.value * me.value;
    }
    return ScoreVector::from_dense(acc);
}

inline double l1_distance(const ScoreVector& a, const ScoreVector& b) {
    if (a.dimension() != b.dimension()) {
        fail(ErrorCode::DimensionMismatch, "vector dimensions differ");
    }
    auto ea = a.entries();
    auto eb = b.entries();
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < ea.size() || j < eb.size()) {
        if (j == eb.size() || (i < ea.size() && ea[i].index < eb[j].index)) {
            d += ea[i++].value;
        } else if (i == ea.size() || eb[j].index < ea[i].index) {
            d += eb[j++].value;
        } else {
            d += std::abs(ea[i++].value - eb[j++].value);
        }
    }
    return d;
}

}  // namespace fusegraph
