#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "qep/errors.hpp"
#include "qep/matrix.hpp"

namespace qep {

// How the empirical Hessian H = X^ X^T is stabilised before inversion.
// MeanDiagonal adds the mean of diag(H) to the diagonal; Fixed adds a
// caller-chosen constant (useful for deterministic tests).
struct DampingMode {
    enum class Kind { None, MeanDiagonal, Fixed };

    Kind kind = Kind::MeanDiagonal;
    double value = 0.0;

    static DampingMode none() { return {Kind::None, 0.0}; }
    static DampingMode mean_diagonal() { return {Kind::MeanDiagonal, 0.0}; }
    static DampingMode fixed(double v) { return {Kind::Fixed, v}; }

    bool operator==(const DampingMode&) const = default;
};

// Symmetric PSD Gram matrix plus its damping term. The effective matrix
// base + damping*I is what all solves run against.
class HessianMatrix {
public:
    HessianMatrix(Matrix base, DampingMode mode) : base_(std::move(base)), mode_(mode) {
        if (base_.rows() != base_.cols()) {
            throw DimensionError("HessianMatrix: base must be square");
        }
        check_symmetric();
        switch (mode.kind) {
            case DampingMode::Kind::None:
                damping_ = 0.0;
                break;
            case DampingMode::Kind::MeanDiagonal: {
                const double mean = trace(base_) / static_cast<double>(base_.rows());
                if (mean <= 0.0) {
                    throw SingularHessian("mean-diagonal damping is zero (all-zero activations?)");
                }
                damping_ = mean;
                break;
            }
            case DampingMode::Kind::Fixed:
                if (mode.value < 0.0) {
                    throw SingularHessian("fixed damping must be non-negative");
                }
                damping_ = mode.value;
                break;
        }
    }

    std::size_t dim() const { return base_.rows(); }
    const Matrix& base() const { return base_; }
    double damping() const { return damping_; }
    DampingMode mode() const { return mode_; }

    Matrix effective() const {
        Matrix h = base_;
        for (std::size_t i = 0; i < h.rows(); ++i) h(i, i) += damping_;
        return h;
    }

private:
    void check_symmetric() const {
        double diff2 = 0.0, norm2 = 0.0;
        for (std::size_t i = 0; i < base_.rows(); ++i) {
            for (std::size_t j = 0; j < base_.cols(); ++j) {
                const double d = base_(i, j) - base_(j, i);
                diff2 += d * d;
                norm2 += base_(i, j) * base_(i, j);
            }
        }
        if (std::sqrt(diff2) > 1e-12 * std::max(std::sqrt(norm2), 1.0)) {
            throw DimensionError("HessianMatrix: base is not symmetric");
        }
    }

    Matrix base_;
    double damping_ = 0.0;
    DampingMode mode_;
};

// H = x_hat * x_hat^T with the requested damping.
inline HessianMatrix damped_hessian(const Matrix& x_hat, DampingMode mode) {
    return HessianMatrix(multiply_transposed(x_hat, x_hat), mode);
}

struct SpectralNormResult {
    double value = 0.0;
    bool converged = false;
    int iterations = 0;

    operator double() const { return value; }
};

// Largest singular value via power iteration on M^T M (or M M^T, whichever
// is smaller). Deterministic all-ones start vector. Non-convergence is not
// fatal: the last iterate is returned with converged=false.
inline SpectralNormResult spectral_norm(const Matrix& m, double tol = 1e-10,
                                        int max_iter = 10000) {
    if (max_iter < 1) throw DimensionError("spectral_norm: max_iter must be >= 1");
    // Work with the Gram matrix of the smaller side.
    Matrix g(1, 1);
    if (m.cols() <= m.rows()) {
        const Matrix mt = m.transpose();
        g = multiply_transposed(mt, mt);  // M^T M
    } else {
        g = multiply_transposed(m, m);  // M M^T
    }
    const std::size_t n = g.rows();

    std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
    std::vector<double> gv(n, 0.0);
    SpectralNormResult result;
    double prev = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += g(i, j) * v[j];
            gv[i] = acc;
        }
        double norm = 0.0;
        for (double x : gv) norm += x * x;
        norm = std::sqrt(norm);
        result.iterations = it;
        if (norm == 0.0) {
            // v is in the null space; with an all-ones start this means the
            // Gram matrix itself is zero.
            result.value = 0.0;
            result.converged = true;
            return result;
        }
        double rayleigh = 0.0;
        for (std::size_t i = 0; i < n; ++i) rayleigh += v[i] * gv[i];
        const double sigma = std::sqrt(std::max(rayleigh, 0.0));
        for (std::size_t i = 0; i < n; ++i) v[i] = gv[i] / norm;
        result.value = sigma;
        if (it > 1 && std::abs(sigma - prev) <= tol * std::max(sigma, 1e-300)) {
            result.converged = true;
            return result;
        }
        prev = sigma;
    }
    result.converged = false;
    return result;
}

namespace detail {

// Lower-triangular Cholesky factor of an SPD matrix.
inline Matrix cholesky_lower(const Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("cholesky: matrix not square");
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
        if (!(diag > 0.0) || !std::isfinite(diag)) {
            throw SingularHessian("Cholesky failed: matrix is not positive definite (pivot " +
                                  std::to_string(j) + ")");
        }
        l(j, j) = std::sqrt(diag);
        for (std::size_t i = j + 1; i < n; ++i) {
            double acc = a(i, j);
            for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
            l(i, j) = acc / l(j, j);
        }
    }
    return l;
}

// Solves L L^T x = b in place for one right-hand side.
inline void cholesky_solve_vector(const Matrix& l, std::vector<double>& b) {
    const std::size_t n = l.rows();
    for (std::size_t i = 0; i < n; ++i) {
        double acc = b[i];
        for (std::size_t k = 0; k < i; ++k) acc -= l(i, k) * b[k];
        b[i] = acc / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double acc = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k) acc -= l(k, ii) * b[k];
        b[ii] = acc / l(ii, ii);
    }
}

}  // namespace detail

// Returns B * H_eff^{-1} via Cholesky. H_eff is symmetric, so each row of
// the result solves H_eff y = (row of B).
inline Matrix solve_right(const HessianMatrix& h, const Matrix& b) {
    if (b.cols() != h.dim()) {
        throw DimensionError("solve_right: b.cols must equal Hessian dimension");
    }
    const Matrix l = detail::cholesky_lower(h.effective());
    Matrix out(b.rows(), b.cols());
    std::vector<double> rhs(h.dim());
    for (std::size_t r = 0; r < b.rows(); ++r) {
        for (std::size_t c = 0; c < b.cols(); ++c) rhs[c] = b(r, c);
        detail::cholesky_solve_vector(l, rhs);
        for (std::size_t c = 0; c < b.cols(); ++c) out(r, c) = rhs[c];
    }
    return out;
}

// m x m Gram-space projection P = X^T (X X^T + rho I)^{-1} X. With no
// damping and full row rank this is the orthogonal projection onto the row
// space of X (symmetric and idempotent); with damping > 0 it is symmetric
// PSD with eigenvalues in [0, 1).
struct ProjectionMatrix {
    Matrix p;

    std::size_t dim() const { return p.rows(); }
};

inline ProjectionMatrix projection(const Matrix& x_hat, DampingMode mode) {
    const HessianMatrix h = damped_hessian(x_hat, mode);
    // X^T H^{-1} is (m x d); P = (X^T H^{-1}) X.
    Matrix p = solve_right(h, x_hat.transpose()) * x_hat;
    // The exact result is symmetric; symmetrise to remove solver round-off.
    for (std::size_t i = 0; i < p.rows(); ++i) {
        for (std::size_t j = i + 1; j < p.cols(); ++j) {
            const double s = 0.5 * (p(i, j) + p(j, i));
            p(i, j) = s;
            p(j, i) = s;
        }
    }
    return ProjectionMatrix{std::move(p)};
}

// Explicit inverse by Gauss-Jordan elimination with partial pivoting.
// Used by lstsq so that the least-squares oracle shares no code path with
// the Cholesky-based solves it is checked against.
inline Matrix gauss_jordan_inverse(const Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("gauss_jordan_inverse: matrix not square");
    const std::size_t n = a.rows();
    Matrix work = a;
    Matrix inv = Matrix::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(work(r, col)) > std::abs(work(pivot, col))) pivot = r;
        }
        const double pv = work(pivot, col);
        if (std::abs(pv) < 1e-300 || !std::isfinite(pv)) {
            throw SingularHessian("gauss_jordan_inverse: singular matrix");
        }
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) {
                std::swap(work(pivot, c), work(col, c));
                std::swap(inv(pivot, c), inv(col, c));
            }
        }
        const double d = work(col, col);
        for (std::size_t c = 0; c < n; ++c) {
            work(col, c) /= d;
            inv(col, c) /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = work(r, col);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c < n; ++c) {
                work(r, c) -= f * work(col, c);
                inv(r, c) -= f * inv(col, c);
            }
        }
    }
    return inv;
}

// argmin_W || B - W A ||_F via the normal equations W = B A^T (A A^T)^{-1}.
// Deliberately routed through gauss_jordan_inverse; see above.
inline Matrix lstsq(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("lstsq: A and B must have the same column count");
    }
    const Matrix gram = multiply_transposed(a, a);
    // Guard against silently inverting a rank-deficient Gram matrix.
    double max_diag = 0.0;
    for (std::size_t i = 0; i < gram.rows(); ++i) max_diag = std::max(max_diag, gram(i, i));
    Matrix inv = gauss_jordan_inverse(gram);
    const double residual = frobenius_norm(gram * inv - Matrix::identity(gram.rows()));
    if (!(residual <= 1e-6 * std::sqrt(static_cast<double>(gram.rows()))) || max_diag == 0.0) {
        throw SingularHessian("lstsq: A is rank deficient");
    }
    return multiply_transposed(b, a) * inv;
}

struct SymmetricEigen {
    std::vector<double> values;  // descending
    Matrix vectors;              // columns, same order as values
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Deterministic and
// accurate at desk scale; no attempt at large-n performance.
inline SymmetricEigen jacobi_eigen(const Matrix& sym, int max_sweeps = 64) {
    if (sym.rows() != sym.cols()) throw DimensionError("jacobi_eigen: matrix not square");
    const std::size_t n = sym.rows();
    Matrix a = sym;
    Matrix v = Matrix::identity(n);

    auto off_norm = [&]() {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) acc += a(i, j) * a(i, j);
        return std::sqrt(2.0 * acc);
    };

    const double scale = std::max(frobenius_norm(a), 1e-300);
    for (int sweep = 0; sweep < max_sweeps && off_norm() > 1e-14 * scale; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    SymmetricEigen result;
    result.values.resize(n);
    result.vectors = Matrix(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        result.values[c] = a(order[c], order[c]);
        for (std::size_t r = 0; r < n; ++r) result.vectors(r, c) = v(r, order[c]);
    }
    return result;
}

}  // namespace qep
