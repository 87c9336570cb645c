#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qep/errors.hpp"
#include "qep/format.hpp"
#include "qep/matrix.hpp"
#include "qep/network.hpp"

// QEPNET v1 model format:
//
//   QEPNET v1 <L> <d1>
//   <rows> <cols> <activation-kind> <gamma>     (one line per layer)
//   <payload>
//
// The payload holds each layer's weights as row-major little-endian 64-bit
// floats, either inline as one base-16 line per layer, or concatenated in a
// sibling "<path>.bin" file (nothing follows the header lines in that case).
// Calibration files use the same payload rules under a "<d1> <m>" header.

namespace qep {

enum class PayloadMode { InlineHex, SiblingBinary };

namespace detail {

constexpr char kHexDigits[] = "0123456789abcdef";

inline void append_double_le(std::string& hex, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int byte = 0; byte < 8; ++byte) {
        const auto b = static_cast<unsigned>((bits >> (8 * byte)) & 0xffu);
        hex.push_back(kHexDigits[b >> 4]);
        hex.push_back(kHexDigits[b & 0xfu]);
    }
}

inline std::string matrix_hex(const Matrix& m) {
    std::string hex;
    hex.reserve(m.size() * 16);
    for (double v : m.data()) append_double_le(hex, v);
    return hex;
}

inline void append_bytes_le(std::string& bytes, const Matrix& m) {
    for (double v : m.data()) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int byte = 0; byte < 8; ++byte) {
            bytes.push_back(static_cast<char>((bits >> (8 * byte)) & 0xffu));
        }
    }
}

inline int hex_value(char c, const std::string& context) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw ParseError(context + ": invalid hex digit '" + std::string(1, c) + "'");
}

inline std::vector<double> decode_hex_doubles(const std::string& hex, std::size_t count,
                                              const std::string& context) {
    if (hex.size() != count * 16) {
        throw ParseError(context + ": expected " + std::to_string(count * 16) +
                         " hex digits, got " + std::to_string(hex.size()));
    }
    std::vector<double> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits = 0;
        for (int byte = 0; byte < 8; ++byte) {
            const int hi = hex_value(hex[i * 16 + 2 * byte], context);
            const int lo = hex_value(hex[i * 16 + 2 * byte + 1], context);
            bits |= static_cast<std::uint64_t>((hi << 4) | lo) << (8 * byte);
        }
        out.push_back(std::bit_cast<double>(bits));
    }
    return out;
}

inline std::vector<double> decode_binary_doubles(std::istream& in, std::size_t count,
                                                 const std::string& context) {
    std::vector<double> out;
    out.reserve(count);
    char buf[8];
    for (std::size_t i = 0; i < count; ++i) {
        if (!in.read(buf, 8)) {
            throw ParseError(context + ": binary payload truncated");
        }
        std::uint64_t bits = 0;
        for (int byte = 0; byte < 8; ++byte) {
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[byte]))
                    << (8 * byte);
        }
        out.push_back(std::bit_cast<double>(bits));
    }
    return out;
}

inline std::string activation_name(const ActivationSpec& a) {
    switch (a.kind) {
        case ActivationSpec::Kind::Identity: return "identity";
        case ActivationSpec::Kind::ReLU: return "relu";
        case ActivationSpec::Kind::ScaledTanh: return "scaled_tanh";
    }
    return "identity";
}

inline ActivationSpec parse_activation(const std::string& name, double gamma,
                                       const std::string& context) {
    if (name == "identity" || name == "relu") {
        if (gamma != 1.0) {
            throw ParseError(context + ": " + name + " requires gamma = 1");
        }
        return name == "identity" ? ActivationSpec::identity() : ActivationSpec::relu();
    }
    if (name == "scaled_tanh") {
        if (!(gamma > 0.0)) {
            throw ParseError(context + ": scaled_tanh requires gamma > 0");
        }
        return ActivationSpec::scaled_tanh(gamma);
    }
    throw ParseError(context + ": unknown activation '" + name + "'");
}

// Reads the next non-empty line; returns false at EOF.
inline bool next_line(std::istream& in, std::string& line) {
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) return true;
    }
    return false;
}

inline std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
    std::ofstream out(path, mode);
    if (!out) {
        throw ParseError("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

inline std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode) {
    std::ifstream in(path, mode);
    if (!in) {
        throw ParseError("cannot open '" + path.string() + "'");
    }
    return in;
}

}  // namespace detail

inline void write_model(const NetworkSpec& net, const std::filesystem::path& path,
                        PayloadMode mode = PayloadMode::InlineHex) {
    net.validate();
    std::ofstream out = detail::open_out(path, std::ios::out | std::ios::trunc);
    out << "QEPNET v1 " << net.layer_count() << ' ' << net.input_dim() << '\n';
    for (const Layer& layer : net.layers) {
        out << layer.weights.rows() << ' ' << layer.weights.cols() << ' '
            << detail::activation_name(layer.activation) << ' '
            << fmt_double(layer.activation.gamma()) << '\n';
    }
    if (mode == PayloadMode::InlineHex) {
        for (const Layer& layer : net.layers) {
            out << detail::matrix_hex(layer.weights) << '\n';
        }
    } else {
        std::string bytes;
        for (const Layer& layer : net.layers) detail::append_bytes_le(bytes, layer.weights);
        std::ofstream bin = detail::open_out(path.string() + ".bin",
                                             std::ios::out | std::ios::trunc | std::ios::binary);
        bin.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!bin) throw ParseError("failed writing '" + path.string() + ".bin'");
    }
    if (!out) throw ParseError("failed writing '" + path.string() + "'");
}

inline NetworkSpec read_model(const std::filesystem::path& path) {
    std::ifstream in = detail::open_in(path, std::ios::in);
    const std::string context = path.string();
    std::string line;
    if (!detail::next_line(in, line)) throw ParseError(context + ": empty file");
    std::istringstream header(line);
    std::string magic, version;
    std::size_t depth = 0, d1 = 0;
    header >> magic >> version >> depth >> d1;
    if (header.fail() || magic != "QEPNET" || version != "v1") {
        throw ParseError(context + ": bad header '" + line + "'");
    }
    if (depth == 0) throw ParseError(context + ": layer count must be positive");

    struct LayerDesc {
        std::size_t rows, cols;
        ActivationSpec activation;
    };
    std::vector<LayerDesc> descs;
    descs.reserve(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        if (!detail::next_line(in, line)) {
            throw ParseError(context + ": missing layer descriptor " + std::to_string(l + 1));
        }
        std::istringstream ls(line);
        std::size_t rows = 0, cols = 0;
        std::string kind, gamma_str;
        ls >> rows >> cols >> kind >> gamma_str;
        if (ls.fail() || rows == 0 || cols == 0) {
            throw ParseError(context + ": bad layer descriptor '" + line + "'");
        }
        const double gamma = parse_double(gamma_str, context);
        descs.push_back({rows, cols, detail::parse_activation(kind, gamma, context)});
    }
    if (descs.front().cols != d1) {
        throw ParseError(context + ": first layer does not match header input dim");
    }

    NetworkSpec net;
    net.layers.reserve(depth);
    try {
        if (std::string payload; detail::next_line(in, payload)) {
            // Inline hex payload, one line per layer.
            for (std::size_t l = 0; l < depth; ++l) {
                if (l > 0 && !detail::next_line(in, payload)) {
                    throw ParseError(context + ": missing payload line for layer " +
                                     std::to_string(l + 1));
                }
                const auto& d = descs[l];
                net.layers.push_back(Layer{
                    Matrix(d.rows, d.cols,
                           detail::decode_hex_doubles(payload, d.rows * d.cols, context)),
                    d.activation});
            }
        } else {
            std::ifstream bin =
                detail::open_in(path.string() + ".bin", std::ios::in | std::ios::binary);
            for (const auto& d : descs) {
                net.layers.push_back(Layer{
                    Matrix(d.rows, d.cols,
                           detail::decode_binary_doubles(bin, d.rows * d.cols,
                                                         context + ".bin")),
                    d.activation});
            }
        }
        net.validate();
    } catch (const DimensionError& e) {
        // Non-finite payload entries or non-chaining dims.
        throw ParseError(context + ": " + e.what());
    }
    return net;
}

inline void write_calibration(const Matrix& x, const std::filesystem::path& path,
                              PayloadMode mode = PayloadMode::InlineHex) {
    std::ofstream out = detail::open_out(path, std::ios::out | std::ios::trunc);
    out << x.rows() << ' ' << x.cols() << '\n';
    if (mode == PayloadMode::InlineHex) {
        out << detail::matrix_hex(x) << '\n';
    } else {
        std::string bytes;
        detail::append_bytes_le(bytes, x);
        std::ofstream bin = detail::open_out(path.string() + ".bin",
                                             std::ios::out | std::ios::trunc | std::ios::binary);
        bin.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!bin) throw ParseError("failed writing '" + path.string() + ".bin'");
    }
    if (!out) throw ParseError("failed writing '" + path.string() + "'");
}

inline Matrix read_calibration(const std::filesystem::path& path) {
    std::ifstream in = detail::open_in(path, std::ios::in);
    const std::string context = path.string();
    std::string line;
    if (!detail::next_line(in, line)) throw ParseError(context + ": empty file");
    std::istringstream header(line);
    std::size_t d1 = 0, m = 0;
    header >> d1 >> m;
    if (header.fail() || d1 == 0 || m == 0) {
        throw ParseError(context + ": bad calibration header '" + line + "'");
    }
    try {
        if (std::string payload; detail::next_line(in, payload)) {
            return Matrix(d1, m, detail::decode_hex_doubles(payload, d1 * m, context));
        }
        std::ifstream bin =
            detail::open_in(path.string() + ".bin", std::ios::in | std::ios::binary);
        return Matrix(d1, m, detail::decode_binary_doubles(bin, d1 * m, context + ".bin"));
    } catch (const DimensionError& e) {
        throw ParseError(context + ": " + e.what());
    }
}

}  // namespace qep
