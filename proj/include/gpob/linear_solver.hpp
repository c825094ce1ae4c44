#pragma once

#include <memory>

#include "gpob/sparse.hpp"

namespace gpob {

enum class LinearSolverKind {
    Gmres,     ///< restarted GMRES, right-preconditioned by ILU(0)
    DirectLU,  ///< sparse LU (UMFPACK)
    Auto,      ///< GMRES, falling back to sparse LU when it fails
};

struct LinearSolverOptions {
    LinearSolverKind kind = LinearSolverKind::Gmres;
    double tol = 1e-8;
    int max_iters = 2000;
    int restart = 60;
};

struct LinearSolveStats {
    int iterations = 0;
    double relative_residual = 0.0;
    bool used_direct = false;
};

/// Zero-fill incomplete LU factorization sharing the sparsity of A.
class Ilu0 {
public:
    explicit Ilu0(const SparseMatrix& a);
    /// Solve (LU) z = r in place.
    void apply(std::span<double> r) const;

private:
    std::vector<std::size_t> rp_, ci_, diag_pos_;
    std::vector<double> v_;
};

/// Solve A x = b with ‖Ax − b‖₂ ≤ tol·‖b‖₂.
Vec solve_sparse_linear(const SparseMatrix& a, std::span<const double> b, double tol = 1e-8,
                        int max_iters = 2000);

Vec solve_sparse_linear(const SparseMatrix& a, std::span<const double> b, const LinearSolverOptions& opts,
                        LinearSolveStats* stats = nullptr);

/// Complex right-hand side against an interleaved real 2N matrix.
CVec solve_sparse_linear(const SparseMatrix& a_interleaved, const CVec& b, const LinearSolverOptions& opts,
                         LinearSolveStats* stats = nullptr);

/// Sparse LU factorization kept alive for repeated solves.
class SparseLU {
public:
    explicit SparseLU(const SparseMatrix& a);
    ~SparseLU();
    SparseLU(SparseLU&&) noexcept;
    SparseLU& operator=(SparseLU&&) noexcept;
    SparseLU(const SparseLU&) = delete;
    SparseLU& operator=(const SparseLU&) = delete;

    Vec solve(std::span<const double> b) const;
    /// Solve A^T x = b.
    Vec solve_transpose(std::span<const double> b) const;
    std::size_t size() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace gpob
