#include "gpob/linear_solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/UmfPackSupport>
#include <algorithm>
#include <cmath>
#include <optional>

#include "gpob/errors.hpp"

namespace gpob {

Ilu0::Ilu0(const SparseMatrix& a)
    : rp_(a.row_ptr()), ci_(a.col_idx()), diag_pos_(a.n_rows()), v_(a.values()) {
    if (a.n_rows() != a.n_cols()) throw InvalidArgument("ILU0 needs a square matrix");
    const auto& rp = rp_;
    const auto& ci = ci_;
    auto& v = v_;
    const std::size_t n = a.n_rows();
    for (std::size_t i = 0; i < n; ++i) {
        auto first = ci.begin() + static_cast<std::ptrdiff_t>(rp[i]);
        auto last = ci.begin() + static_cast<std::ptrdiff_t>(rp[i + 1]);
        auto it = std::lower_bound(first, last, i);
        if (it == last || *it != i) throw SingularPreconditioner("missing diagonal in row " + std::to_string(i));
        diag_pos_[i] = static_cast<std::size_t>(it - ci.begin());
    }
    // IKJ variant restricted to the pattern of A
    std::vector<std::ptrdiff_t> where(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) where[ci[k]] = static_cast<std::ptrdiff_t>(k);
        for (std::size_t k = rp[i]; k < diag_pos_[i]; ++k) {
            const std::size_t col = ci[k];
            const double piv = v[diag_pos_[col]];
            v[k] /= piv;
            const double lik = v[k];
            for (std::size_t m = diag_pos_[col] + 1; m < rp[col + 1]; ++m) {
                const auto w = where[ci[m]];
                if (w >= 0) v[static_cast<std::size_t>(w)] -= lik * v[m];
            }
        }
        const double d = v[diag_pos_[i]];
        if (!(std::abs(d) > 1e-300) || !std::isfinite(d))
            throw SingularPreconditioner("zero pivot in row " + std::to_string(i));
        for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) where[ci[k]] = -1;
    }
}

void Ilu0::apply(std::span<double> r) const {
    const auto& rp = rp_;
    const auto& ci = ci_;
    const auto& v = v_;
    const std::size_t n = diag_pos_.size();
    for (std::size_t i = 0; i < n; ++i) {
        double s = r[i];
        for (std::size_t k = rp[i]; k < diag_pos_[i]; ++k) s -= v[k] * r[ci[k]];
        r[i] = s;
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = r[ii];
        for (std::size_t k = diag_pos_[ii] + 1; k < rp[ii + 1]; ++k) s -= v[k] * r[ci[k]];
        r[ii] = s / v[diag_pos_[ii]];
    }
}

namespace {

Vec gmres(const SparseMatrix& a, std::span<const double> b, const LinearSolverOptions& opts, LinearSolveStats& st) {
    const std::size_t n = a.n_rows();
    Vec x(n, 0.0);
    const double bnorm = norm2(b);
    st.iterations = 0;
    if (bnorm == 0.0) {
        st.relative_residual = 0.0;
        return x;
    }
    Ilu0 ilu(a);
    const int m = std::max(1, opts.restart);
    std::vector<Vec> v(static_cast<std::size_t>(m) + 1, Vec(n));
    std::vector<Vec> z(static_cast<std::size_t>(m), Vec(n));
    std::vector<double> h(static_cast<std::size_t>((m + 1) * m));
    std::vector<double> cs(static_cast<std::size_t>(m)), sn(static_cast<std::size_t>(m)),
        g(static_cast<std::size_t>(m) + 1), y(static_cast<std::size_t>(m));
    auto H = [&](int i, int j) -> double& { return h[static_cast<std::size_t>(i * m + j)]; };

    Vec r(n), w(n);
    double rel = 1.0;
    while (true) {
        a.multiply(x, r);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
        double beta = norm2(r);
        rel = beta / bnorm;
        if (rel <= opts.tol) break;
        if (st.iterations >= opts.max_iters) {
            st.relative_residual = rel;
            throw NonConvergence(st.iterations, rel, "GMRES");
        }
        for (std::size_t i = 0; i < n; ++i) v[0][i] = r[i] / beta;
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = beta;
        int k = 0;
        for (; k < m && st.iterations < opts.max_iters; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            z[ku] = v[ku];
            ilu.apply(z[ku]);
            a.multiply(z[ku], w);
            for (int j = 0; j <= k; ++j) {
                H(j, k) = dot(w, v[static_cast<std::size_t>(j)]);
                const double hjk = H(j, k);
                const auto& vj = v[static_cast<std::size_t>(j)];
                for (std::size_t i = 0; i < n; ++i) w[i] -= hjk * vj[i];
            }
            const double hn = norm2(w);
            H(k + 1, k) = hn;
            if (hn > 0.0)
                for (std::size_t i = 0; i < n; ++i) v[ku + 1][i] = w[i] / hn;
            for (int j = 0; j < k; ++j) {
                const auto ju = static_cast<std::size_t>(j);
                const double t = cs[ju] * H(j, k) + sn[ju] * H(j + 1, k);
                H(j + 1, k) = -sn[ju] * H(j, k) + cs[ju] * H(j + 1, k);
                H(j, k) = t;
            }
            const double den = std::hypot(H(k, k), H(k + 1, k));
            cs[ku] = den == 0.0 ? 1.0 : H(k, k) / den;
            sn[ku] = den == 0.0 ? 0.0 : H(k + 1, k) / den;
            H(k, k) = den;
            H(k + 1, k) = 0.0;
            g[ku + 1] = -sn[ku] * g[ku];
            g[ku] = cs[ku] * g[ku];
            ++st.iterations;
            if (std::abs(g[ku + 1]) <= 0.5 * opts.tol * bnorm || hn == 0.0) {
                ++k;
                break;
            }
        }
        for (int i = k - 1; i >= 0; --i) {
            double s = g[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < k; ++j) s -= H(i, j) * y[static_cast<std::size_t>(j)];
            y[static_cast<std::size_t>(i)] = H(i, i) == 0.0 ? 0.0 : s / H(i, i);
        }
        for (int j = 0; j < k; ++j) {
            const double yj = y[static_cast<std::size_t>(j)];
            const auto& zj = z[static_cast<std::size_t>(j)];
            for (std::size_t i = 0; i < n; ++i) x[i] += yj * zj[i];
        }
    }
    st.relative_residual = rel;
    return x;
}

using EigenSparse = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

EigenSparse to_eigen(const SparseMatrix& a, bool transpose) {
    std::vector<Eigen::Triplet<double, int>> t;
    t.reserve(a.nnz());
    const auto& rp = a.row_ptr();
    const auto& ci = a.col_idx();
    const auto& v = a.values();
    for (std::size_t r = 0; r < a.n_rows(); ++r)
        for (std::size_t k = rp[r]; k < rp[r + 1]; ++k) {
            const int i = static_cast<int>(r), j = static_cast<int>(ci[k]);
            if (transpose)
                t.emplace_back(j, i, v[k]);
            else
                t.emplace_back(i, j, v[k]);
        }
    EigenSparse m(static_cast<int>(transpose ? a.n_cols() : a.n_rows()),
                  static_cast<int>(transpose ? a.n_rows() : a.n_cols()));
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

}  // namespace

struct SparseLU::Impl {
    EigenSparse a;
    Eigen::UmfPackLU<EigenSparse> lu;
    mutable std::optional<EigenSparse> at;
    mutable std::unique_ptr<Eigen::UmfPackLU<EigenSparse>> lut;
};

SparseLU::SparseLU(const SparseMatrix& a) : impl_(std::make_unique<Impl>()) {
    if (a.n_rows() != a.n_cols()) throw InvalidArgument("SparseLU needs a square matrix");
    impl_->a = to_eigen(a, false);
    impl_->lu.compute(impl_->a);
    if (impl_->lu.info() != Eigen::Success) throw LinearSolveFailure("sparse LU factorization failed");
}

SparseLU::~SparseLU() = default;
SparseLU::SparseLU(SparseLU&&) noexcept = default;
SparseLU& SparseLU::operator=(SparseLU&&) noexcept = default;

std::size_t SparseLU::size() const noexcept { return static_cast<std::size_t>(impl_->a.rows()); }

Vec SparseLU::solve(std::span<const double> b) const {
    Eigen::Map<const Eigen::VectorXd> bm(b.data(), static_cast<Eigen::Index>(b.size()));
    Eigen::VectorXd x = impl_->lu.solve(bm);
    if (impl_->lu.info() != Eigen::Success || !x.allFinite()) throw LinearSolveFailure("sparse LU solve failed");
    return Vec(x.data(), x.data() + x.size());
}

Vec SparseLU::solve_transpose(std::span<const double> b) const {
    if (!impl_->lut) {
        impl_->at = EigenSparse(impl_->a.transpose());
        impl_->at->makeCompressed();
        impl_->lut = std::make_unique<Eigen::UmfPackLU<EigenSparse>>();
        impl_->lut->compute(*impl_->at);
        if (impl_->lut->info() != Eigen::Success) throw LinearSolveFailure("sparse LU factorization failed");
    }
    Eigen::Map<const Eigen::VectorXd> bm(b.data(), static_cast<Eigen::Index>(b.size()));
    Eigen::VectorXd x = impl_->lut->solve(bm);
    if (!x.allFinite()) throw LinearSolveFailure("sparse LU solve failed");
    return Vec(x.data(), x.data() + x.size());
}

Vec solve_sparse_linear(const SparseMatrix& a, std::span<const double> b, double tol, int max_iters) {
    LinearSolverOptions o;
    o.tol = tol;
    o.max_iters = max_iters;
    return solve_sparse_linear(a, b, o);
}

Vec solve_sparse_linear(const SparseMatrix& a, std::span<const double> b, const LinearSolverOptions& opts,
                        LinearSolveStats* stats) {
    if (a.n_rows() != a.n_cols()) throw InvalidArgument("solve_sparse_linear: matrix not square");
    if (b.size() != a.n_rows()) throw InvalidArgument("solve_sparse_linear: rhs size mismatch");
    if (!(opts.tol > 0.0)) throw InvalidArgument("solve_sparse_linear: tol must be positive");
    LinearSolveStats st;
    auto direct = [&]() {
        SparseLU lu(a);
        Vec x = lu.solve(b);
        Vec r = a * x;
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
        const double bn = norm2(b);
        st.used_direct = true;
        st.relative_residual = bn == 0.0 ? 0.0 : norm2(r) / bn;
        return x;
    };
    Vec x;
    switch (opts.kind) {
        case LinearSolverKind::Gmres:
            x = gmres(a, b, opts, st);
            break;
        case LinearSolverKind::DirectLU:
            x = direct();
            break;
        case LinearSolverKind::Auto:
            try {
                x = gmres(a, b, opts, st);
            } catch (const NonConvergence&) {
                x = direct();
            } catch (const SingularPreconditioner&) {
                x = direct();
            }
            break;
    }
    if (stats) *stats = st;
    return x;
}

CVec solve_sparse_linear(const SparseMatrix& a_interleaved, const CVec& b, const LinearSolverOptions& opts,
                         LinearSolveStats* stats) {
    Vec rb = interleave(b);
    return deinterleave(solve_sparse_linear(a_interleaved, rb, opts, stats));
}

}  // namespace gpob
