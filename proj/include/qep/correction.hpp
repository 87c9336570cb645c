#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "qep/errors.hpp"
#include "qep/matrix.hpp"
#include "qep/numerics.hpp"

namespace qep {

// Accumulated activation error delta = X - X^ for one layer. Construct via
// compute_delta so the identity holds by construction.
struct ErrorMatrix {
    Matrix delta;
};

inline ErrorMatrix compute_delta(const Matrix& x, const Matrix& x_hat) {
    if (!x.same_shape(x_hat)) {
        throw DimensionError("compute_delta: X and X^ have different shapes");
    }
    return ErrorMatrix{x - x_hat};
}

// Per-layer propagation strengths alpha_l in [0, 1]. alpha = 0 reproduces
// independent layer-wise quantization; alpha = 1 applies the full closed-form
// correction.
struct PropagationSchedule {
    std::vector<double> alphas;

    static PropagationSchedule uniform(std::size_t layers, double alpha) {
        PropagationSchedule s;
        s.alphas.assign(layers, alpha);
        s.validate();
        return s;
    }

    void validate() const {
        for (double a : alphas) {
            if (!(a >= 0.0 && a <= 1.0)) {
                throw DimensionError("PropagationSchedule: alpha must lie in [0, 1]");
            }
        }
    }
};

struct RidgeParam {
    double lambda = 0.0;
};

// Eigenvalues of a (damped) Hessian, descending and positive.
struct SpectrumResult {
    std::vector<double> eigenvalues;
};

// W*(alpha) = W + alpha * W * delta * X^T * H^{-1}, the tunable closed-form
// correction. alpha = 0 short-circuits: no Hessian work is done and W is
// returned unchanged.
inline Matrix correct_weights(const Matrix& w, const ErrorMatrix& delta, const Matrix& x_hat,
                              double alpha, const HessianMatrix& hessian) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw DimensionError("correct_weights: alpha must lie in [0, 1]");
    }
    if (w.cols() != delta.delta.rows() || !delta.delta.same_shape(x_hat)) {
        throw DimensionError("correct_weights: W is " + std::to_string(w.rows()) + "x" +
                             std::to_string(w.cols()) + " but delta is " +
                             std::to_string(delta.delta.rows()) + "x" +
                             std::to_string(delta.delta.cols()));
    }
    if (alpha == 0.0) {
        return w;
    }
    if (hessian.dim() != w.cols()) {
        throw DimensionError("correct_weights: Hessian dimension mismatch");
    }
    const Matrix correction = solve_right(hessian, multiply_transposed(w * delta.delta, x_hat));
    return w + alpha * correction;
}

inline Matrix correct_weights(const Matrix& w, const ErrorMatrix& delta, const Matrix& x_hat,
                              double alpha, DampingMode mode = DampingMode::mean_diagonal()) {
    if (alpha == 0.0) {
        // Skip building the Hessian entirely.
        if (w.cols() != delta.delta.rows() || !delta.delta.same_shape(x_hat)) {
            throw DimensionError("correct_weights: shape mismatch");
        }
        return w;
    }
    return correct_weights(w, delta, x_hat, alpha, damped_hessian(x_hat, mode));
}

// Minimiser of ||W X - W^ X^||_F^2 + lambda ||W - W^||_F^2 over continuous
// W^, i.e. W (I + delta X^T (H + lambda I)^{-1}).
inline Matrix ridge_correct(const Matrix& w, const ErrorMatrix& delta, const Matrix& x_hat,
                            RidgeParam lam) {
    if (lam.lambda < 0.0) {
        throw DimensionError("ridge_correct: lambda must be non-negative");
    }
    if (w.cols() != delta.delta.rows() || !delta.delta.same_shape(x_hat)) {
        throw DimensionError("ridge_correct: shape mismatch");
    }
    const HessianMatrix h = damped_hessian(x_hat, DampingMode::fixed(lam.lambda));
    const Matrix t = solve_right(h, multiply_transposed(delta.delta, x_hat));
    return w + w * t;
}

// Trace-matched scalar map alpha(lambda) = (1/d) sum_i gamma_i / (gamma_i +
// lambda). Strictly decreasing, alpha(0) = 1, alpha(inf) = 0.
inline double alpha_of_lambda(const SpectrumResult& spectrum, RidgeParam lam) {
    if (spectrum.eigenvalues.empty()) {
        throw DimensionError("alpha_of_lambda: empty spectrum");
    }
    double acc = 0.0;
    for (double g : spectrum.eigenvalues) {
        if (!(g > 0.0)) {
            throw DimensionError("alpha_of_lambda: eigenvalues must be positive");
        }
        acc += g / (g + lam.lambda);
    }
    return acc / static_cast<double>(spectrum.eigenvalues.size());
}

// Eigenvalues of the effective (damped) Hessian, descending.
inline SpectrumResult hessian_spectrum(const HessianMatrix& h) {
    SymmetricEigen eig = jacobi_eigen(h.effective());
    return SpectrumResult{std::move(eig.values)};
}

}  // namespace qep
