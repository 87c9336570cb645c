#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qep/errors.hpp"
#include "qep/matrix.hpp"
#include "qep/numerics.hpp"

namespace qep {

// Grid granularity: one grid per row, or one grid per contiguous column
// group within each row.
struct Granularity {
    enum class Kind { PerChannel, Group };

    Kind kind = Kind::PerChannel;
    std::size_t group_size = 0;

    static Granularity per_channel() { return {Kind::PerChannel, 0}; }
    static Granularity group(std::size_t size) { return {Kind::Group, size}; }

    bool operator==(const Granularity&) const = default;
};

enum class QuantizerKind { Rtn, Compensated };

struct QuantConfig {
    int bits = 4;
    Granularity granularity = Granularity::per_channel();
    bool symmetric = false;
    QuantizerKind quantizer = QuantizerKind::Rtn;
    DampingMode damping = DampingMode::mean_diagonal();

    int levels() const { return 1 << bits; }

    void validate(std::size_t weight_cols) const {
        if (bits < 2 || bits > 8) {
            throw DimensionError("QuantConfig: bits must lie in [2, 8]");
        }
        if (granularity.kind == Granularity::Kind::Group) {
            if (granularity.group_size == 0 || weight_cols % granularity.group_size != 0) {
                throw DimensionError("QuantConfig: group size " +
                                     std::to_string(granularity.group_size) +
                                     " does not divide column count " +
                                     std::to_string(weight_cols));
            }
        }
    }
};

// Affine grid: level(q) = scale * (q - zero_point) for q in [0, 2^bits - 1].
struct QuantGrid {
    double scale = 1.0;
    double zero_point = 0.0;

    double level(int code) const { return scale * (static_cast<double>(code) - zero_point); }

    int snap(double v, int levels) const {
        // Clamp before rounding so extreme ratios cannot overflow llround.
        const double q = std::clamp(v / scale + zero_point, 0.0,
                                    static_cast<double>(levels - 1));
        return static_cast<int>(std::llround(q));
    }
};

namespace detail {

// Clears the low 9 mantissa bits. Grid levels are scale * (code -
// zero_point) with an integer zero_point, so a truncated-mantissa scale
// makes every level an exact product (44 + 9 mantissa bits < 53). Together
// with the integer zero_point this makes round-to-nearest idempotent at the
// bit level: re-fitting a grid on already-quantized values reproduces the
// original scale and zero_point exactly.
inline double truncate_scale(double s) {
    auto bits = std::bit_cast<std::uint64_t>(s);
    bits &= ~0x1ffull;
    return std::bit_cast<double>(bits);
}

}  // namespace detail

// Min-max linear grid over one row or group slice. A constant slice gets an
// epsilon-floored scale chosen as a power-of-two multiple so the constant
// value round-trips exactly.
inline QuantGrid fit_grid(std::span<const double> values, int bits, bool symmetric) {
    if (values.empty()) throw DimensionError("fit_grid: empty slice");
    const int levels = 1 << bits;
    double lo = values[0], hi = values[0];
    double max_abs = 0.0;
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        max_abs = std::max(max_abs, std::abs(v));
    }
    const double raw_scale = symmetric ? max_abs / static_cast<double>(levels / 2 - 1)
                                       : (hi - lo) / static_cast<double>(levels - 1);
    if (lo == hi || !(detail::truncate_scale(raw_scale) > 0.0)) {
        // Constant (or sub-denormal) slice: exact round trip of the value.
        const double v = lo;
        QuantGrid g;
        g.scale = std::max(std::abs(v), 1.0) * std::numeric_limits<double>::epsilon();
        g.zero_point = -v / g.scale;
        return g;
    }
    QuantGrid g;
    g.scale = detail::truncate_scale(raw_scale);
    if (symmetric) {
        g.zero_point = static_cast<double>(levels / 2);
    } else {
        // Doubles at or beyond 2^52 are already integers; rounding there
        // would overflow llround without changing the value.
        const double zp = -lo / g.scale;
        g.zero_point = std::abs(zp) < 0x1p52 ? static_cast<double>(std::llround(zp)) : zp;
    }
    return g;
}

// Grids for a whole weight matrix: one per row (per-channel) or one per
// (row, column-group) cell.
class GridLayout {
public:
    GridLayout(std::size_t rows, std::size_t cols, Granularity granularity)
        : rows_(rows), cols_(cols), granularity_(granularity) {
        group_size_ = granularity.kind == Granularity::Kind::Group ? granularity.group_size : cols;
        if (group_size_ == 0 || cols % group_size_ != 0) {
            throw DimensionError("GridLayout: group size must divide column count");
        }
        groups_per_row_ = cols / group_size_;
        grids_.resize(rows_ * groups_per_row_);
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t groups_per_row() const { return groups_per_row_; }
    std::size_t group_size() const { return group_size_; }
    Granularity granularity() const { return granularity_; }

    QuantGrid& at(std::size_t row, std::size_t col) {
        return grids_[row * groups_per_row_ + col / group_size_];
    }
    const QuantGrid& at(std::size_t row, std::size_t col) const {
        return grids_[row * groups_per_row_ + col / group_size_];
    }

private:
    std::size_t rows_;
    std::size_t cols_;
    Granularity granularity_;
    std::size_t group_size_;
    std::size_t groups_per_row_;
    std::vector<QuantGrid> grids_;
};

inline GridLayout fit_grids(const Matrix& w, const QuantConfig& cfg) {
    cfg.validate(w.cols());
    GridLayout layout(w.rows(), w.cols(), cfg.granularity);
    const std::size_t gs = layout.group_size();
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const auto row = w.row(r);
        for (std::size_t g = 0; g < layout.groups_per_row(); ++g) {
            layout.at(r, g * gs) = fit_grid(row.subspan(g * gs, gs), cfg.bits, cfg.symmetric);
        }
    }
    return layout;
}

// Codes plus their grids; `dequantized` is the exact image of the codes
// under the grids (cached, never recomputed differently).
struct QuantizedMatrix {
    std::vector<int> codes;  // row-major, values in [0, 2^bits - 1]
    GridLayout grids;
    int bits = 4;
    Matrix dequantized;

    int code_at(std::size_t r, std::size_t c) const { return codes[r * grids.cols() + c]; }
};

inline QuantizedMatrix quantize_with_grids(const Matrix& w, GridLayout grids, int bits) {
    if (w.rows() != grids.rows() || w.cols() != grids.cols()) {
        throw DimensionError("quantize_with_grids: layout shape mismatch");
    }
    const int levels = 1 << bits;
    QuantizedMatrix out{{}, std::move(grids), bits, Matrix(w.rows(), w.cols())};
    out.codes.resize(w.rows() * w.cols());
    for (std::size_t r = 0; r < w.rows(); ++r) {
        for (std::size_t c = 0; c < w.cols(); ++c) {
            const QuantGrid& g = out.grids.at(r, c);
            const int code = g.snap(w(r, c), levels);
            out.codes[r * w.cols() + c] = code;
            out.dequantized(r, c) = g.level(code);
        }
    }
    return out;
}

// Round-to-nearest on freshly fitted grids.
inline QuantizedMatrix rtn_quantize(const Matrix& w, const QuantConfig& cfg) {
    return quantize_with_grids(w, fit_grids(w, cfg), cfg.bits);
}

namespace detail {

// Upper-triangular Cholesky factor U with A = U^T U.
inline Matrix cholesky_upper(const Matrix& a) {
    const std::size_t n = a.rows();
    Matrix u(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double diag = a(i, i);
        for (std::size_t k = 0; k < i; ++k) diag -= u(k, i) * u(k, i);
        if (!(diag > 0.0) || !std::isfinite(diag)) {
            throw SingularHessian("Cholesky failed: matrix is not positive definite (pivot " +
                                  std::to_string(i) + ")");
        }
        u(i, i) = std::sqrt(diag);
        for (std::size_t j = i + 1; j < n; ++j) {
            double acc = a(i, j);
            for (std::size_t k = 0; k < i; ++k) acc -= u(k, i) * u(k, j);
            u(i, j) = acc / u(i, i);
        }
    }
    return u;
}

}  // namespace detail

// GPTQ-style sequential quantizer: columns are processed left to right and
// each column's rounding error is pushed into the not-yet-quantized columns
// through the inverse Hessian of the remaining columns. Row j of the upper
// Cholesky factor of H^{-1} carries exactly those per-step inverse entries,
// so one factorization per layer suffices. Grids are fitted on the original
// weights; compensated values that leave the grid range clamp to its
// endpoints.
inline QuantizedMatrix compensated_quantize_with_grids(const Matrix& w, const HessianMatrix& h,
                                                       GridLayout grids, int bits) {
    if (h.dim() != w.cols()) {
        throw DimensionError("compensated_quantize: Hessian dimension must equal w.cols");
    }
    if (w.rows() != grids.rows() || w.cols() != grids.cols()) {
        throw DimensionError("compensated_quantize: layout shape mismatch");
    }
    const Matrix l = detail::cholesky_lower(h.effective());
    const std::size_t d = w.cols();
    Matrix h_inv(d, d);
    {
        std::vector<double> rhs(d, 0.0);
        for (std::size_t c = 0; c < d; ++c) {
            std::fill(rhs.begin(), rhs.end(), 0.0);
            rhs[c] = 1.0;
            detail::cholesky_solve_vector(l, rhs);
            for (std::size_t r = 0; r < d; ++r) h_inv(r, c) = rhs[r];
        }
    }
    const Matrix u = detail::cholesky_upper(h_inv);

    const int levels = 1 << bits;
    QuantizedMatrix out{{}, std::move(grids), bits, Matrix(w.rows(), w.cols())};
    out.codes.resize(w.rows() * w.cols());
    std::vector<double> work(d);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        for (std::size_t j = 0; j < d; ++j) work[j] = w(r, j);
        for (std::size_t j = 0; j < d; ++j) {
            const QuantGrid& g = out.grids.at(r, j);
            const int code = g.snap(work[j], levels);
            const double deq = g.level(code);
            out.codes[r * d + j] = code;
            out.dequantized(r, j) = deq;
            const double err = (work[j] - deq) / u(j, j);
            for (std::size_t k = j + 1; k < d; ++k) {
                work[k] -= err * u(j, k);
            }
        }
    }
    return out;
}

inline QuantizedMatrix compensated_quantize(const Matrix& w, const HessianMatrix& h,
                                            const QuantConfig& cfg) {
    return compensated_quantize_with_grids(w, h, fit_grids(w, cfg), cfg.bits);
}

}  // namespace qep
