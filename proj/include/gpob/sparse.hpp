#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace gpob {

using Vec = std::vector<double>;
using CVec = std::vector<std::complex<double>>;

/// Compressed-row sparse matrix. Column indices within a row are sorted and
/// unique; the object is immutable once built.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<std::size_t> row_ptr,
                 std::vector<std::size_t> col_idx, std::vector<double> values);

    std::size_t n_rows() const noexcept { return n_rows_; }
    std::size_t n_cols() const noexcept { return n_cols_; }
    std::size_t nnz() const noexcept { return values_.size(); }

    const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
    const std::vector<std::size_t>& col_idx() const noexcept { return col_idx_; }
    const std::vector<double>& values() const noexcept { return values_; }

    /// y = A x
    void multiply(std::span<const double> x, std::span<double> y) const;
    Vec operator*(std::span<const double> x) const;
    /// y = A^T x
    Vec multiply_transpose(std::span<const double> x) const;

    /// Stored value at (row, col), zero if absent.
    double coeff(std::size_t row, std::size_t col) const;

    static SparseMatrix identity(std::size_t n);

private:
    std::size_t n_rows_ = 0;
    std::size_t n_cols_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> col_idx_;
    std::vector<double> values_;
};

/// Accumulates (row, col, value) triples; duplicates are summed on build.
class TripletBuilder {
public:
    TripletBuilder(std::size_t n_rows, std::size_t n_cols) : n_rows_(n_rows), n_cols_(n_cols) {}

    void reserve(std::size_t n) { entries_.reserve(n); }
    void add(std::size_t row, std::size_t col, double value);
    SparseMatrix build() const;

    std::size_t n_rows() const noexcept { return n_rows_; }
    std::size_t n_cols() const noexcept { return n_cols_; }

private:
    struct Entry {
        std::size_t row, col;
        double value;
    };
    std::size_t n_rows_, n_cols_;
    std::vector<Entry> entries_;
};

double norm2(std::span<const double> x);
double norm_inf(std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b);

/// Interleave a complex vector as (re0, im0, re1, im1, ...).
Vec interleave(const CVec& z);
CVec deinterleave(std::span<const double> x);

}  // namespace gpob
