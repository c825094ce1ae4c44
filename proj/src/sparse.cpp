#include "gpob/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gpob/errors.hpp"

namespace gpob {

SparseMatrix::SparseMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<std::size_t> row_ptr,
                           std::vector<std::size_t> col_idx, std::vector<double> values)
    : n_rows_(n_rows), n_cols_(n_cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
    if (row_ptr_.size() != n_rows_ + 1 || row_ptr_.front() != 0 || row_ptr_.back() != col_idx_.size() ||
        col_idx_.size() != values_.size())
        throw InvalidArgument("inconsistent CSR arrays");
    for (std::size_t r = 0; r < n_rows_; ++r) {
        if (row_ptr_[r + 1] < row_ptr_[r]) throw InvalidArgument("row pointers not monotone");
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
            if (col_idx_[k] >= n_cols_) throw InvalidArgument("column index out of range");
            if (k > row_ptr_[r] && col_idx_[k] <= col_idx_[k - 1])
                throw InvalidArgument("columns not strictly increasing within a row");
        }
    }
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
    if (x.size() != n_cols_ || y.size() != n_rows_) throw InvalidArgument("multiply: size mismatch");
    for (std::size_t r = 0; r < n_rows_; ++r) {
        double s = 0.0;
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += values_[k] * x[col_idx_[k]];
        y[r] = s;
    }
}

Vec SparseMatrix::operator*(std::span<const double> x) const {
    Vec y(n_rows_);
    multiply(x, y);
    return y;
}

Vec SparseMatrix::multiply_transpose(std::span<const double> x) const {
    if (x.size() != n_rows_) throw InvalidArgument("multiply_transpose: size mismatch");
    Vec y(n_cols_, 0.0);
    for (std::size_t r = 0; r < n_rows_; ++r)
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) y[col_idx_[k]] += values_[k] * x[r];
    return y;
}

double SparseMatrix::coeff(std::size_t row, std::size_t col) const {
    auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row]);
    auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row + 1]);
    auto it = std::lower_bound(first, last, col);
    if (it == last || *it != col) return 0.0;
    return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
    std::vector<std::size_t> rp(n + 1), ci(n);
    std::iota(rp.begin(), rp.end(), 0);
    std::iota(ci.begin(), ci.end(), 0);
    return SparseMatrix(n, n, std::move(rp), std::move(ci), std::vector<double>(n, 1.0));
}

void TripletBuilder::add(std::size_t row, std::size_t col, double value) {
    if (row >= n_rows_ || col >= n_cols_) throw InvalidArgument("triplet index out of range");
    entries_.push_back({row, col, value});
}

SparseMatrix TripletBuilder::build() const {
    // counting sort by row, then sort each row by column and merge duplicates
    std::vector<std::size_t> count(n_rows_ + 1, 0);
    for (const auto& e : entries_) ++count[e.row + 1];
    std::partial_sum(count.begin(), count.end(), count.begin());
    std::vector<std::pair<std::size_t, double>> sorted(entries_.size());
    {
        auto next = count;
        for (const auto& e : entries_) sorted[next[e.row]++] = {e.col, e.value};
    }
    std::vector<std::size_t> row_ptr(n_rows_ + 1, 0), col_idx;
    std::vector<double> values;
    col_idx.reserve(entries_.size());
    values.reserve(entries_.size());
    for (std::size_t r = 0; r < n_rows_; ++r) {
        auto first = sorted.begin() + static_cast<std::ptrdiff_t>(count[r]);
        auto last = sorted.begin() + static_cast<std::ptrdiff_t>(count[r + 1]);
        std::stable_sort(first, last, [](const auto& a, const auto& b) { return a.first < b.first; });
        for (auto it = first; it != last; ++it) {
            if (col_idx.size() > row_ptr[r] && col_idx.back() == it->first)
                values.back() += it->second;
            else {
                col_idx.push_back(it->first);
                values.push_back(it->second);
            }
        }
        row_ptr[r + 1] = col_idx.size();
    }
    return SparseMatrix(n_rows_, n_cols_, std::move(row_ptr), std::move(col_idx), std::move(values));
}

double norm2(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

double norm_inf(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Vec interleave(const CVec& z) {
    Vec x(2 * z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        x[2 * i] = z[i].real();
        x[2 * i + 1] = z[i].imag();
    }
    return x;
}

CVec deinterleave(std::span<const double> x) {
    CVec z(x.size() / 2);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = {x[2 * i], x[2 * i + 1]};
    return z;
}

}  // namespace gpob
