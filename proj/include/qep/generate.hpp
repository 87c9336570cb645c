#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "qep/errors.hpp"
#include "qep/matrix.hpp"
#include "qep/network.hpp"
#include "qep/numerics.hpp"

namespace qep {

// Synthetic test networks with every layer's measured spectral norm at the
// target. Two weight styles:
//   Gaussian — iid normal entries rescaled to the target. The top singular
//     value hits the target but the bulk of the spectrum sits well below it,
//     so deep compositions typically attenuate.
//   Rotation — slices of random orthogonal matrices rescaled to the target:
//     all singular values equal the target, so a target above 1 yields the
//     per-layer error growth the accumulation experiments need.
struct GeneratorConfig {
    enum class WeightStyle { Gaussian, Rotation };

    std::vector<std::size_t> widths;  // d_1 .. d_{L+1}; layer l is widths[l+1] x widths[l]
    double target_spectral_norm = 1.1;
    ActivationSpec activation = ActivationSpec::identity();
    WeightStyle style = WeightStyle::Gaussian;
    std::uint64_t seed = 0;
};

inline Matrix random_gaussian(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                              double stddev = 1.0) {
    std::normal_distribution<double> normal(0.0, stddev);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = normal(rng);
    return m;
}

// Haar-like random orthogonal matrix: eigenvectors of a random symmetric
// draw.
inline Matrix random_orthogonal(std::mt19937_64& rng, std::size_t n) {
    const Matrix a = random_gaussian(rng, n, n);
    return jacobi_eigen(a + a.transpose()).vectors;
}

inline NetworkSpec generate_network(const GeneratorConfig& cfg) {
    if (cfg.widths.size() < 2) {
        throw DimensionError("generate_network: need at least two widths (one layer)");
    }
    if (!(cfg.target_spectral_norm > 0.0)) {
        throw DimensionError("generate_network: target spectral norm must be positive");
    }
    std::mt19937_64 rng(cfg.seed);
    NetworkSpec net;
    net.layers.reserve(cfg.widths.size() - 1);
    for (std::size_t l = 0; l + 1 < cfg.widths.size(); ++l) {
        const std::size_t rows = cfg.widths[l + 1];
        const std::size_t cols = cfg.widths[l];
        Matrix w(rows, cols);
        if (cfg.style == GeneratorConfig::WeightStyle::Gaussian) {
            w = random_gaussian(rng, rows, cols);
            const double sn = spectral_norm(w).value;
            if (sn == 0.0) {
                throw DegenerateLayer("generate_network: degenerate random draw");
            }
            w *= cfg.target_spectral_norm / sn;
        } else {
            // Orthonormal rows/columns: every singular value equals 1 before
            // scaling.
            const Matrix q = random_orthogonal(rng, std::max(rows, cols));
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) w(r, c) = q(r, c);
            w *= cfg.target_spectral_norm;
        }
        net.layers.push_back(Layer{std::move(w), cfg.activation});
    }
    net.validate();
    return net;
}

inline Matrix generate_calibration(std::size_t d1, std::size_t m, std::uint64_t seed) {
    // Decorrelated from the weight stream for the same seed.
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    return random_gaussian(rng, d1, m);
}

}  // namespace qep
