#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qep/correction.hpp"
#include "qep/errors.hpp"
#include "qep/matrix.hpp"
#include "qep/numerics.hpp"
#include "qep/quantize.hpp"

namespace qep {

// Element-wise activation with sigma(0) = 0 and a known Lipschitz constant.
struct ActivationSpec {
    enum class Kind { Identity, ReLU, ScaledTanh };

    Kind kind = Kind::Identity;
    double scale = 1.0;  // ScaledTanh only

    static ActivationSpec identity() { return {Kind::Identity, 1.0}; }
    static ActivationSpec relu() { return {Kind::ReLU, 1.0}; }
    static ActivationSpec scaled_tanh(double scale) {
        if (!(scale > 0.0)) throw DimensionError("scaled_tanh: scale must be positive");
        return {Kind::ScaledTanh, scale};
    }

    double gamma() const { return kind == Kind::ScaledTanh ? scale : 1.0; }

    Matrix apply(const Matrix& z) const {
        Matrix out = z;
        switch (kind) {
            case Kind::Identity:
                break;
            case Kind::ReLU:
                for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
                break;
            case Kind::ScaledTanh:
                for (double& v : out.data()) v = scale * std::tanh(v);
                break;
        }
        return out;
    }

    bool operator==(const ActivationSpec&) const = default;
};

struct Layer {
    Matrix weights;
    ActivationSpec activation;
};

// Ordered stack of linear layers with activations; layer l maps d_l -> n_l
// and n_l must equal d_{l+1}.
struct NetworkSpec {
    std::vector<Layer> layers;

    std::size_t layer_count() const { return layers.size(); }
    std::size_t input_dim() const { return layers.front().weights.cols(); }
    std::size_t output_dim() const { return layers.back().weights.rows(); }

    void validate() const {
        if (layers.empty()) throw DimensionError("NetworkSpec: needs at least one layer");
        for (std::size_t l = 1; l < layers.size(); ++l) {
            if (layers[l].weights.cols() != layers[l - 1].weights.rows()) {
                throw DimensionError("NetworkSpec: layer " + std::to_string(l + 1) +
                                     " input dim does not chain");
            }
        }
    }
};

// Throws StructureMismatch unless the two networks share layer count,
// weight shapes and activations.
inline void require_same_structure(const NetworkSpec& a, const NetworkSpec& b) {
    if (a.layer_count() != b.layer_count()) {
        throw StructureMismatch("networks have different depths");
    }
    for (std::size_t l = 0; l < a.layer_count(); ++l) {
        if (!a.layers[l].weights.same_shape(b.layers[l].weights)) {
            throw StructureMismatch("layer " + std::to_string(l + 1) + " shapes differ");
        }
        if (!(a.layers[l].activation == b.layers[l].activation)) {
            throw StructureMismatch("layer " + std::to_string(l + 1) + " activations differ");
        }
    }
}

// Calibration inputs X in R^{d_1 x m}.
struct CalibrationSet {
    Matrix x;

    std::size_t samples() const { return x.cols(); }
};

// Full-precision and quantized activations, X_1..X_{L+1} each. The two
// traces share the same input: full[0] == quantized[0].
struct ActivationTrace {
    std::vector<Matrix> full;
    std::vector<Matrix> quantized;
};

// Returns X_1 = x and X_{l+1} = sigma_l(W_l X_l); length L+1.
inline std::vector<Matrix> forward(const NetworkSpec& net, const Matrix& x) {
    net.validate();
    if (x.rows() != net.input_dim()) {
        throw DimensionError("forward: input has " + std::to_string(x.rows()) +
                             " rows, network expects " + std::to_string(net.input_dim()));
    }
    std::vector<Matrix> trace;
    trace.reserve(net.layer_count() + 1);
    trace.push_back(x);
    for (const Layer& layer : net.layers) {
        trace.push_back(layer.activation.apply(layer.weights * trace.back()));
    }
    return trace;
}

enum class PipelineMode { Base, Qep };

struct LayerStats {
    std::size_t layer = 0;               // 1-based
    double alpha = 0.0;                  // correction strength used
    double objective_uncorrected = 0.0;  // ||W X - Q(W) X^||_F^2, no correction
    double objective = 0.0;              // ||W X - W^ X^||_F^2 as quantized
    double wall_ms = 0.0;
};

struct PipelineResult {
    NetworkSpec net;
    ActivationTrace trace;
    std::vector<LayerStats> stats;
};

namespace detail {

inline double qep_objective(const Matrix& w, const Matrix& x, const Matrix& w_hat,
                            const Matrix& x_hat) {
    return frobenius_norm_squared(w * x - w_hat * x_hat);
}

// Sequential layer-by-layer pipeline. Quantizes layers 1..quantize_prefix
// and copies the rest at full precision. In QEP mode the weights are first
// replaced by the closed-form correction W*(alpha_l); alpha_l = 0 skips all
// Hessian work for that layer.
inline PipelineResult run_pipeline(const NetworkSpec& net, const CalibrationSet& calib,
                                   const QuantConfig& qcfg, const PropagationSchedule& schedule,
                                   PipelineMode mode, std::size_t quantize_prefix,
                                   bool base_full_activations) {
    net.validate();
    const std::size_t depth = net.layer_count();
    if (quantize_prefix < 1 || quantize_prefix > depth) {
        throw DimensionError("pipeline: quantized prefix must lie in [1, L]");
    }
    if (calib.x.rows() != net.input_dim()) {
        throw DimensionError("pipeline: calibration dim does not match network input");
    }
    if (mode == PipelineMode::Qep) {
        if (schedule.alphas.size() != depth) {
            throw DimensionError("pipeline: schedule has " +
                                 std::to_string(schedule.alphas.size()) + " alphas for " +
                                 std::to_string(depth) + " layers");
        }
        schedule.validate();
    }

    PipelineResult result;
    result.net.layers.reserve(depth);
    result.trace.full.push_back(calib.x);
    result.trace.quantized.push_back(calib.x);

    for (std::size_t l = 0; l < depth; ++l) {
        const Layer& layer = net.layers[l];
        const Matrix& x_full = result.trace.full[l];
        const Matrix& x_hat = result.trace.quantized[l];

        if (l >= quantize_prefix) {
            result.net.layers.push_back(layer);
            result.trace.full.push_back(layer.activation.apply(layer.weights * x_full));
            result.trace.quantized.push_back(layer.activation.apply(layer.weights * x_hat));
            continue;
        }

        const auto t0 = std::chrono::steady_clock::now();
        const double alpha = mode == PipelineMode::Qep ? schedule.alphas[l] : 0.0;
        const bool need_correction = mode == PipelineMode::Qep && alpha > 0.0;
        const bool need_hessian =
            need_correction || qcfg.quantizer == QuantizerKind::Compensated;

        std::optional<HessianMatrix> hessian;
        if (need_hessian) {
            // One Hessian serves both the correction solve and the
            // compensated quantizer. Qep mode always builds it from quantized
            // activations; Base mode can opt into the full-precision variant.
            const Matrix& source =
                (mode == PipelineMode::Base && base_full_activations) ? x_full : x_hat;
            try {
                hessian.emplace(damped_hessian(source, qcfg.damping));
            } catch (const SingularHessian& e) {
                throw SingularHessian("layer " + std::to_string(l + 1) + ": " + e.what());
            }
        }

        auto quantize = [&](const Matrix& w) {
            try {
                if (qcfg.quantizer == QuantizerKind::Compensated) {
                    return compensated_quantize(w, *hessian, qcfg);
                }
                return rtn_quantize(w, qcfg);
            } catch (const SingularHessian& e) {
                throw SingularHessian("layer " + std::to_string(l + 1) + ": " + e.what());
            }
        };

        Matrix corrected = layer.weights;
        if (need_correction) {
            const ErrorMatrix delta = compute_delta(x_full, x_hat);
            try {
                corrected = correct_weights(layer.weights, delta, x_hat, alpha, *hessian);
            } catch (const SingularHessian& e) {
                throw SingularHessian("layer " + std::to_string(l + 1) + ": " + e.what());
            }
        }

        QuantizedMatrix quantized = quantize(corrected);

        LayerStats stats;
        stats.layer = l + 1;
        stats.alpha = alpha;
        stats.objective = qep_objective(layer.weights, x_full, quantized.dequantized, x_hat);
        stats.objective_uncorrected =
            need_correction
                ? qep_objective(layer.weights, x_full, quantize(layer.weights).dequantized, x_hat)
                : stats.objective;
        stats.wall_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
        result.stats.push_back(stats);

        result.trace.full.push_back(layer.activation.apply(layer.weights * x_full));
        result.trace.quantized.push_back(
            layer.activation.apply(quantized.dequantized * x_hat));
        result.net.layers.push_back(Layer{std::move(quantized.dequantized), layer.activation});
    }
    return result;
}

}  // namespace detail

inline PipelineResult quantize_network(const NetworkSpec& net, const CalibrationSet& calib,
                                       const QuantConfig& qcfg,
                                       const PropagationSchedule& schedule, PipelineMode mode,
                                       bool base_full_activations = false) {
    return detail::run_pipeline(net, calib, qcfg, schedule, mode, net.layer_count(),
                                base_full_activations);
}

// Quantizes layers 1..n and keeps the tail at full precision.
inline NetworkSpec partial_quantize(const NetworkSpec& net, std::size_t n,
                                    const QuantConfig& qcfg, const CalibrationSet& calib,
                                    PipelineMode mode, const PropagationSchedule& schedule,
                                    bool base_full_activations = false) {
    return detail::run_pipeline(net, calib, qcfg, schedule, mode, n, base_full_activations).net;
}

}  // namespace qep
