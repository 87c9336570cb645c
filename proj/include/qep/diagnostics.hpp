#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "qep/errors.hpp"
#include "qep/matrix.hpp"
#include "qep/network.hpp"
#include "qep/numerics.hpp"

namespace qep {

// Per-layer weight perturbations E_l = W^_l - W_l and the worst relative
// spectral ratio r = max_l ||E_l||_2 / ||W_l||_2.
struct WeightPerturbation {
    std::vector<Matrix> e;
    double ratio_r = 0.0;
};

inline std::vector<double> layer_spectral_norms(const NetworkSpec& net) {
    std::vector<double> norms;
    norms.reserve(net.layer_count());
    for (const Layer& layer : net.layers) {
        norms.push_back(spectral_norm(layer.weights).value);
    }
    return norms;
}

inline WeightPerturbation perturbation_between(const NetworkSpec& net,
                                               const NetworkSpec& net_hat) {
    require_same_structure(net, net_hat);
    WeightPerturbation p;
    p.e.reserve(net.layer_count());
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const double w_norm = spectral_norm(net.layers[l].weights).value;
        if (w_norm == 0.0) {
            throw DegenerateLayer("layer " + std::to_string(l + 1) +
                                  " has zero spectral norm");
        }
        Matrix e = net_hat.layers[l].weights - net.layers[l].weights;
        p.ratio_r = std::max(p.ratio_r, spectral_norm(e).value / w_norm);
        p.e.push_back(std::move(e));
    }
    return p;
}

// Delta_m = ||f_m(X) - f^_m(X)||_F^2 for m = 1..L; net_hat may carry a
// full-precision tail (partial quantization), the composition is whatever
// its layers hold.
inline std::vector<double> delta_series(const NetworkSpec& net, const NetworkSpec& net_hat,
                                        const Matrix& x) {
    require_same_structure(net, net_hat);
    const std::vector<Matrix> full = forward(net, x);
    const std::vector<Matrix> hat = forward(net_hat, x);
    std::vector<double> series;
    series.reserve(net.layer_count());
    for (std::size_t m = 1; m <= net.layer_count(); ++m) {
        series.push_back(frobenius_norm_squared(full[m] - hat[m]));
    }
    return series;
}

// Pre-activation residual ||W X - W^ X^||_F.
inline double layer_residual(const Matrix& w, const Matrix& x, const Matrix& w_hat,
                             const Matrix& x_hat) {
    return frobenius_norm(w * x - w_hat * x_hat);
}

// U = sum_k (prod_{s>k} gamma_s ||W_s||_2) gamma_k ||R_k||_F, the Lipschitz
// bound on the final output mismatch given per-layer residual norms.
inline double lipschitz_bound(const NetworkSpec& net, const std::vector<double>& residuals,
                              const std::vector<double>& w_spectral_norms) {
    const std::size_t depth = net.layer_count();
    if (residuals.size() != depth || w_spectral_norms.size() != depth) {
        throw DimensionError("lipschitz_bound: need one residual per layer");
    }
    double bound = 0.0;
    double tail_gain = 1.0;  // prod over s in (k, L] of gamma_s ||W_s||_2
    for (std::size_t k = depth; k-- > 0;) {
        bound += tail_gain * net.layers[k].activation.gamma() * residuals[k];
        tail_gain *= net.layers[k].activation.gamma() * w_spectral_norms[k];
    }
    return bound;
}

inline double lipschitz_bound(const NetworkSpec& net, const std::vector<double>& residuals) {
    return lipschitz_bound(net, residuals, layer_spectral_norms(net));
}

namespace detail {

inline double pow_int(double base, std::size_t exponent) {
    double out = 1.0;
    for (std::size_t i = 0; i < exponent; ++i) out *= base;
    return out;
}

}  // namespace detail

// Network gain G = prod_l gamma_l ||W_l||_2.
inline double gain_product(const NetworkSpec& net, const std::vector<double>& w_spectral_norms) {
    double gain = 1.0;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        if (w_spectral_norms[l] == 0.0) {
            throw DegenerateLayer("layer " + std::to_string(l + 1) +
                                  " has zero spectral norm");
        }
        gain *= net.layers[l].activation.gamma() * w_spectral_norms[l];
    }
    return gain;
}

inline double gain_product(const NetworkSpec& net) {
    return gain_product(net, layer_spectral_norms(net));
}

// ((1+r)^{L-1} - 1) * G_{L-1} * ||X||_F, stated with the index convention
// where the network has L-1 weight layers and L activation levels.
inline double uniform_error_bound_formula(std::size_t big_l, double r, double gain,
                                          double x_norm) {
    if (big_l < 1) throw DimensionError("uniform_error_bound_formula: L must be >= 1");
    return (detail::pow_int(1.0 + r, big_l - 1) - 1.0) * gain * x_norm;
}

// (L-1) * r * G_{L-1} * ||X||_F, same convention.
inline double first_order_bound_formula(std::size_t big_l, double r, double gain,
                                        double x_norm) {
    if (big_l < 1) throw DimensionError("first_order_bound_formula: L must be >= 1");
    return static_cast<double>(big_l - 1) * r * gain * x_norm;
}

// Bound on the final activation mismatch under the perturbation: holds for
// any gamma-Lipschitz activations with sigma(0) = 0.
inline double uniform_error_bound(const NetworkSpec& net, const WeightPerturbation& perturb,
                                  double x_norm) {
    const double gain = gain_product(net);
    return uniform_error_bound_formula(net.layer_count() + 1, perturb.ratio_r, gain, x_norm);
}

// Bound on the first-order component of the final mismatch.
inline double first_order_bound(const NetworkSpec& net, const WeightPerturbation& perturb,
                                double x_norm) {
    const double gain = gain_product(net);
    return first_order_bound_formula(net.layer_count() + 1, perturb.ratio_r, gain, x_norm);
}

struct ScalarLowerBound {
    double lower_bound = 0.0;
    double exact_mismatch = 0.0;
};

// Scalar worst case: identity activations, W_l = 1+eps, E_l = c_E, input C.
// exact = C ((1+eps+c_E)^{L-1} - (1+eps)^{L-1}) and the mean-value-theorem
// lower bound (L-1) c_E C (1+eps)^{L-2}; exact >= bound, with equality at
// L = 2.
inline ScalarLowerBound scalar_lower_bound(double epsilon, double c_e, std::size_t big_l,
                                           double c) {
    if (!(epsilon > 0.0) || !(c_e > 0.0) || big_l < 2 || !(c > 0.0)) {
        throw DimensionError("scalar_lower_bound: requires eps > 0, c_E > 0, L >= 2, C > 0");
    }
    const double base = 1.0 + epsilon;
    ScalarLowerBound out;
    out.lower_bound =
        static_cast<double>(big_l - 1) * c_e * c * detail::pow_int(base, big_l - 2);
    out.exact_mismatch =
        c * (detail::pow_int(base + c_e, big_l - 1) - detail::pow_int(base, big_l - 1));
    return out;
}

// Everything the CLI reports for a (net, quantized net) pair.
struct DiagnosticsReport {
    std::vector<double> delta_series;  // Delta_1..Delta_L
    std::vector<double> residual_fro;  // ||W_l X_l - W^_l X^_l||_F per layer
    double bound_u = 0.0;
    double uniform_bound = 0.0;
    double first_order_bound = 0.0;
    double gain_G = 0.0;
    double ratio_r = 0.0;
    std::vector<std::pair<std::string, std::string>> config;  // echo, in emit order
};

inline DiagnosticsReport build_report(const NetworkSpec& net, const NetworkSpec& net_hat,
                                      const Matrix& x) {
    require_same_structure(net, net_hat);
    DiagnosticsReport report;
    report.delta_series = delta_series(net, net_hat, x);

    const std::vector<Matrix> full = forward(net, x);
    const std::vector<Matrix> hat = forward(net_hat, x);
    report.residual_fro.reserve(net.layer_count());
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        report.residual_fro.push_back(
            layer_residual(net.layers[l].weights, full[l], net_hat.layers[l].weights, hat[l]));
    }

    const std::vector<double> norms = layer_spectral_norms(net);
    const WeightPerturbation perturb = perturbation_between(net, net_hat);
    const double x_norm = frobenius_norm(x);
    report.bound_u = lipschitz_bound(net, report.residual_fro, norms);
    report.gain_G = gain_product(net, norms);
    report.uniform_bound =
        uniform_error_bound_formula(net.layer_count() + 1, perturb.ratio_r, report.gain_G, x_norm);
    report.first_order_bound =
        first_order_bound_formula(net.layer_count() + 1, perturb.ratio_r, report.gain_G, x_norm);
    report.ratio_r = perturb.ratio_r;
    return report;
}

}  // namespace qep
