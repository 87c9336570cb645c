// qep: synthetic-network quantization workbench.
//
// Subcommands:
//   generate   write a seeded random model + calibration pair
//   quantize   run the layer-wise pipeline (base or qep) over a model
//   diagnose   compare an original/quantized pair and emit a report
//   sweep      grid runs over alpha | bits | depth | r with one CSV row each
//
// Every run writes its resolved configuration next to the main output as
// "<out>.config" (flat "key = value" lines); re-running the same subcommand
// with --config <that file> reproduces the run. Command-line flags always
// override config-file values.
//
// Exit codes: 0 success, 2 parse/config error, 3 singular Hessian,
// 4 structural mismatch between models.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qep/qep.hpp"

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Flat key=value config files with CLI-override precedence.

std::map<std::string, std::string> load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw qep::ParseError("cannot open config '" + path + "'");
    std::map<std::string, std::string> map;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw qep::ParseError(path + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        map[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return map;
}

// Binds CLI options to string/number fields so that config-file values can
// fill anything the command line left unset, and so the resolved state can
// be echoed back out verbatim.
class ConfigBinder {
public:
    CLI::Option* bind(CLI::App& app, const std::string& flag, std::string& target,
                      const std::string& desc) {
        CLI::Option* opt = app.add_option(flag, target, desc);
        entries_.push_back({key_of(flag), opt, [&target](const std::string& v) { target = v; },
                            [&target] { return target; }});
        return opt;
    }
    CLI::Option* bind(CLI::App& app, const std::string& flag, std::uint64_t& target,
                      const std::string& desc) {
        CLI::Option* opt = app.add_option(flag, target, desc);
        entries_.push_back({key_of(flag), opt,
                            [&target](const std::string& v) { target = std::stoull(v); },
                            [&target] { return std::to_string(target); }});
        return opt;
    }
    CLI::Option* bind(CLI::App& app, const std::string& flag, int& target,
                      const std::string& desc) {
        CLI::Option* opt = app.add_option(flag, target, desc);
        entries_.push_back({key_of(flag), opt,
                            [&target](const std::string& v) { target = std::stoi(v); },
                            [&target] { return std::to_string(target); }});
        return opt;
    }
    CLI::Option* bind(CLI::App& app, const std::string& flag, double& target,
                      const std::string& desc) {
        CLI::Option* opt = app.add_option(flag, target, desc);
        entries_.push_back({key_of(flag), opt,
                            [&target](const std::string& v) { target = std::stod(v); },
                            [&target] { return qep::fmt_double(target); }});
        return opt;
    }
    CLI::Option* bind_flag(CLI::App& app, const std::string& flag, bool& target,
                           const std::string& desc) {
        CLI::Option* opt = app.add_flag(flag, target, desc);
        entries_.push_back({key_of(flag), opt,
                            [&target](const std::string& v) {
                                target = v == "true" || v == "1" || v == "yes";
                            },
                            [&target] { return target ? std::string("true") : std::string("false"); }});
        return opt;
    }

    void apply(const std::map<std::string, std::string>& config) {
        for (auto& entry : entries_) {
            if (entry.opt->count() > 0) continue;  // CLI wins
            const auto it = config.find(entry.key);
            if (it == config.end()) continue;
            try {
                entry.set(it->second);
            } catch (const std::exception&) {
                throw qep::ParseError("config key '" + entry.key + "': bad value '" +
                                      it->second + "'");
            }
        }
    }

    void write_echo(const std::string& command, const fs::path& path) const {
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw qep::ParseError("cannot write config echo '" + path.string() + "'");
        out << "command = " << command << '\n';
        for (const auto& entry : entries_) {
            out << entry.key << " = " << entry.get() << '\n';
        }
    }

    std::vector<std::pair<std::string, std::string>> snapshot(const std::string& command) const {
        std::vector<std::pair<std::string, std::string>> out{{"command", command}};
        for (const auto& entry : entries_) out.emplace_back(entry.key, entry.get());
        return out;
    }

private:
    static std::string key_of(const std::string& flag) {
        auto pos = flag.find_first_not_of('-');
        return flag.substr(pos == std::string::npos ? 0 : pos);
    }

    struct Entry {
        std::string key;
        CLI::Option* opt;
        std::function<void(const std::string&)> set;
        std::function<std::string()> get;
    };
    std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Small parsers shared by the commands.

qep::DampingMode parse_damping(const std::string& text) {
    if (text == "none") return qep::DampingMode::none();
    if (text == "mean") return qep::DampingMode::mean_diagonal();
    if (text.rfind("fixed:", 0) == 0) {
        return qep::DampingMode::fixed(qep::parse_double(text.substr(6), "--damping"));
    }
    throw UsageError("--damping must be none, mean, or fixed:<v>");
}

qep::PipelineMode parse_mode(const std::string& text) {
    if (text == "base") return qep::PipelineMode::Base;
    if (text == "qep") return qep::PipelineMode::Qep;
    throw UsageError("--mode must be base or qep");
}

qep::QuantizerKind parse_quantizer(const std::string& text) {
    if (text == "rtn") return qep::QuantizerKind::Rtn;
    if (text == "compensated") return qep::QuantizerKind::Compensated;
    throw UsageError("--quantizer must be rtn or compensated");
}

qep::ActivationSpec parse_activation(const std::string& text, double tanh_scale) {
    if (text == "identity") return qep::ActivationSpec::identity();
    if (text == "relu") return qep::ActivationSpec::relu();
    if (text == "scaled_tanh") return qep::ActivationSpec::scaled_tanh(tanh_scale);
    throw UsageError("--activation must be identity, relu, or scaled_tanh");
}

qep::GeneratorConfig::WeightStyle parse_weight_style(const std::string& text) {
    if (text == "gaussian") return qep::GeneratorConfig::WeightStyle::Gaussian;
    if (text == "rotation") return qep::GeneratorConfig::WeightStyle::Rotation;
    throw UsageError("--weights must be gaussian or rotation");
}

qep::PayloadMode parse_payload(const std::string& text) {
    if (text == "hex") return qep::PayloadMode::InlineHex;
    if (text == "bin") return qep::PayloadMode::SiblingBinary;
    throw UsageError("--payload must be hex or bin");
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        const auto e = item.find_last_not_of(" \t");
        out.push_back(qep::parse_double(item.substr(b, e - b + 1), what));
    }
    if (out.empty()) throw UsageError(what + ": empty list");
    return out;
}

std::vector<double> parse_alphas(const std::string& text, std::size_t depth) {
    std::vector<double> alphas = parse_double_list(text, "--alpha");
    if (alphas.size() == 1) alphas.assign(depth, alphas[0]);
    if (alphas.size() != depth) {
        throw UsageError("--alpha: got " + std::to_string(alphas.size()) + " values for " +
                         std::to_string(depth) + " layers");
    }
    for (double a : alphas) {
        if (!(a >= 0.0 && a <= 1.0)) throw UsageError("--alpha values must lie in [0, 1]");
    }
    return alphas;
}

std::size_t as_index(double v, const std::string& what) {
    if (v < 1.0 || v != std::floor(v)) throw UsageError(what + " requires positive integers");
    return static_cast<std::size_t>(v);
}

void require(bool ok, const std::string& message) {
    if (!ok) throw UsageError(message);
}

// ---------------------------------------------------------------------------
// Shared option block for commands that run the quantization pipeline.

struct PipelineOptions {
    std::string model;
    std::string calib;
    std::string out;
    int bits = 4;
    std::size_t group = 0;  // 0 = per-channel
    std::string quantizer = "rtn";
    std::string mode = "qep";
    std::string alpha = "0.5";
    std::string damping = "mean";
    bool symmetric = false;
    std::string base_activations = "quantized";
    std::string payload = "hex";
    std::uint64_t seed = 0;

    void bind_quant_flags(CLI::App& app, ConfigBinder& binder) {
        binder.bind(app, "--bits", bits, "quantization bit-width (2-8)");
        binder.bind(app, "--group", group, "group size (0 = per-channel)");
        binder.bind(app, "--quantizer", quantizer, "rtn | compensated");
        binder.bind(app, "--mode", mode, "base | qep");
        binder.bind(app, "--alpha", alpha, "propagation strength: scalar or comma list");
        binder.bind(app, "--damping", damping, "none | mean | fixed:<v>");
        binder.bind_flag(app, "--symmetric", symmetric, "symmetric grids");
        binder.bind(app, "--base-activations", base_activations,
                    "hessian activations in base mode: quantized | full");
        binder.bind(app, "--seed", seed, "seed echoed into outputs");
    }

    qep::QuantConfig quant_config() const {
        qep::QuantConfig cfg;
        cfg.bits = bits;
        cfg.granularity = group == 0 ? qep::Granularity::per_channel()
                                     : qep::Granularity::group(group);
        cfg.symmetric = symmetric;
        cfg.quantizer = parse_quantizer(quantizer);
        cfg.damping = parse_damping(damping);
        return cfg;
    }

    bool full_activations() const {
        require(base_activations == "quantized" || base_activations == "full",
                "--base-activations must be quantized or full");
        return base_activations == "full";
    }
};

// ---------------------------------------------------------------------------
// generate

struct GenerateCmd {
    std::string out;
    std::string calib;
    std::size_t depth = 4;
    std::size_t width = 8;
    std::string widths;  // optional comma list d1..d_{L+1}, overrides width
    std::size_t samples = 32;
    double target_norm = 1.1;
    std::string activation = "identity";
    double tanh_scale = 1.0;
    std::string weights = "gaussian";
    std::uint64_t seed = 0;
    std::string payload = "hex";
    std::string config_path;
    ConfigBinder binder;

    void bind(CLI::App& app) {
        binder.bind(app, "--out", out, "model output path");
        binder.bind(app, "--calib", calib, "calibration output path");
        binder.bind(app, "--depth", depth, "number of layers");
        binder.bind(app, "--width", width, "uniform layer width");
        binder.bind(app, "--widths", widths, "comma list of widths d1..d_{L+1}");
        binder.bind(app, "--samples", samples, "calibration sample count m");
        binder.bind(app, "--target-norm", target_norm, "target spectral norm per layer");
        binder.bind(app, "--activation", activation, "identity | relu | scaled_tanh");
        binder.bind(app, "--tanh-scale", tanh_scale, "scale for scaled_tanh");
        binder.bind(app, "--weights", weights, "gaussian | rotation");
        binder.bind(app, "--seed", seed, "generator seed");
        binder.bind(app, "--payload", payload, "hex | bin");
        app.add_option("--config", config_path, "flat key=value config file");
    }

    int run() {
        require(!out.empty() && !calib.empty(), "generate needs --out and --calib");
        qep::GeneratorConfig gen;
        if (!widths.empty()) {
            for (double v : parse_double_list(widths, "--widths")) {
                gen.widths.push_back(as_index(v, "--widths"));
            }
            require(gen.widths.size() >= 2, "--widths needs at least two entries");
            // Explicit widths must agree with --depth when both are given.
            require(gen.widths.size() == depth + 1,
                    "--widths lists " + std::to_string(gen.widths.size()) + " widths but --depth " +
                        std::to_string(depth) + " needs " + std::to_string(depth + 1));
        } else {
            require(depth >= 1 && width >= 1, "--depth and --width must be positive");
            gen.widths.assign(depth + 1, width);
        }
        require(samples >= 1, "--samples must be positive");
        require(target_norm > 0.0, "--target-norm must be positive");
        gen.target_spectral_norm = target_norm;
        gen.activation = parse_activation(activation, tanh_scale);
        gen.style = parse_weight_style(weights);
        gen.seed = seed;

        const qep::NetworkSpec net = qep::generate_network(gen);
        const qep::Matrix x = qep::generate_calibration(gen.widths.front(), samples, seed);
        const qep::PayloadMode pm = parse_payload(payload);
        qep::write_model(net, out, pm);
        qep::write_calibration(x, calib, pm);
        binder.write_echo("generate", out + ".config");
        return 0;
    }
};

// ---------------------------------------------------------------------------
// quantize

struct QuantizeCmd {
    PipelineOptions opts;
    std::string config_path;
    ConfigBinder binder;

    void bind(CLI::App& app) {
        binder.bind(app, "--model", opts.model, "input model path");
        binder.bind(app, "--calib", opts.calib, "calibration path");
        binder.bind(app, "--out", opts.out, "quantized model output path");
        opts.bind_quant_flags(app, binder);
        binder.bind(app, "--payload", opts.payload, "hex | bin");
        app.add_option("--config", config_path, "flat key=value config file");
    }

    int run() {
        require(!opts.model.empty() && !opts.calib.empty() && !opts.out.empty(),
                "quantize needs --model, --calib, and --out");
        const qep::NetworkSpec net = qep::read_model(opts.model);
        const qep::CalibrationSet calib{qep::read_calibration(opts.calib)};
        const qep::QuantConfig cfg = opts.quant_config();
        const qep::PipelineMode mode = parse_mode(opts.mode);
        qep::PropagationSchedule schedule;
        schedule.alphas = parse_alphas(opts.alpha, net.layer_count());

        const qep::PipelineResult result = qep::quantize_network(
            net, calib, cfg, schedule, mode, opts.full_activations());

        qep::write_model(result.net, opts.out, parse_payload(opts.payload));
        binder.write_echo("quantize", opts.out + ".config");

        std::ofstream stats(opts.out + ".stats.csv", std::ios::trunc);
        if (!stats) throw qep::ParseError("cannot write '" + opts.out + ".stats.csv'");
        for (const auto& [k, v] : binder.snapshot("quantize")) {
            stats << "# " << k << " = " << v << '\n';
        }
        stats << "layer,alpha,objective_before,objective_after,wall_ms\n";
        for (const auto& s : result.stats) {
            stats << s.layer << ',' << qep::fmt_double(s.alpha) << ','
                  << qep::fmt_double(s.objective_uncorrected) << ','
                  << qep::fmt_double(s.objective) << ',' << qep::fmt_double(s.wall_ms) << '\n';
        }
        return 0;
    }
};

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseCmd {
    std::string model;
    std::string quantized;
    std::string calib;
    std::string out;
    std::string format = "csv";
    ConfigBinder binder;
    std::string config_path;

    void bind(CLI::App& app) {
        binder.bind(app, "--model", model, "original model path");
        binder.bind(app, "--quantized", quantized, "quantized model path");
        binder.bind(app, "--calib", calib, "calibration path");
        binder.bind(app, "--out", out, "report output path");
        binder.bind(app, "--format", format, "csv | json");
        app.add_option("--config", config_path, "flat key=value config file");
    }

    int run() {
        require(!model.empty() && !quantized.empty() && !calib.empty() && !out.empty(),
                "diagnose needs --model, --quantized, --calib, and --out");
        require(format == "csv" || format == "json", "--format must be csv or json");
        const qep::NetworkSpec net = qep::read_model(model);
        const qep::NetworkSpec hat = qep::read_model(quantized);
        const qep::Matrix x = qep::read_calibration(calib);
        qep::DiagnosticsReport report = qep::build_report(net, hat, x);
        report.config = binder.snapshot("diagnose");

        std::ofstream file(out, std::ios::trunc);
        if (!file) throw qep::ParseError("cannot write '" + out + "'");
        if (format == "csv") {
            qep::write_report_csv(report, file);
        } else {
            qep::write_report_json(report, file);
        }
        binder.write_echo("diagnose", out + ".config");
        return 0;
    }
};

// ---------------------------------------------------------------------------
// sweep

struct SweepCmd {
    PipelineOptions opts;
    std::string axis;
    std::string grid;
    std::size_t depth = 4;
    std::size_t width = 8;
    std::size_t samples = 32;
    double target_norm = 1.1;
    double inject_r = 0.1;
    std::string weights = "gaussian";
    std::string config_path;
    ConfigBinder binder;

    void bind(CLI::App& app) {
        binder.bind(app, "--sweep", axis, "axis: alpha | bits | depth | r");
        binder.bind(app, "--grid", grid, "comma list of grid points");
        binder.bind(app, "--model", opts.model, "model path (alpha/bits axes)");
        binder.bind(app, "--calib", opts.calib, "calibration path (alpha/bits axes)");
        binder.bind(app, "--out", opts.out, "aggregate CSV output path");
        opts.bind_quant_flags(app, binder);
        binder.bind(app, "--depth", depth, "generated depth (depth/r axes)");
        binder.bind(app, "--width", width, "generated width (depth/r axes)");
        binder.bind(app, "--samples", samples, "generated calibration samples (depth/r axes)");
        binder.bind(app, "--target-norm", target_norm, "generated spectral norm (depth/r axes)");
        binder.bind(app, "--r", inject_r, "injected perturbation ratio (depth axis)");
        binder.bind(app, "--weights", weights, "gaussian | rotation (depth/r axes)");
        app.add_option("--config", config_path, "flat key=value config file");
    }

    struct Row {
        double value = 0.0;
        double delta_l = 0.0;
        double mismatch = 0.0;
        std::optional<double> prop_term;
        qep::DiagnosticsReport report;
    };

    // Full pipeline run -> diagnostics scalars for one grid point.
    Row pipeline_row(const qep::NetworkSpec& net, const qep::CalibrationSet& calib,
                     const qep::QuantConfig& cfg, const std::vector<double>& alphas,
                     qep::PipelineMode mode) const {
        const qep::PropagationSchedule schedule{alphas};
        const auto result =
            qep::quantize_network(net, calib, cfg, schedule, mode, opts.full_activations());
        Row row;
        row.report = qep::build_report(net, result.net, calib.x);
        row.delta_l = row.report.delta_series.back();
        row.mismatch = std::sqrt(row.delta_l);
        return row;
    }

    // Perturbation-injection run (depth / r axes): linear bound validation.
    Row injection_row(std::size_t net_depth, double ratio, std::uint64_t salt) const {
        qep::GeneratorConfig gen;
        gen.widths.assign(net_depth + 1, width);
        gen.target_spectral_norm = target_norm;
        gen.activation = qep::ActivationSpec::identity();
        gen.style = parse_weight_style(weights);
        gen.seed = opts.seed;
        const qep::NetworkSpec net = qep::generate_network(gen);
        const qep::Matrix x = qep::generate_calibration(width, samples, opts.seed);

        std::mt19937_64 rng(opts.seed ^ (0x5bd1e995ULL + salt));
        qep::NetworkSpec hat = net;
        for (auto& layer : hat.layers) {
            qep::Matrix e = qep::random_gaussian(rng, layer.weights.rows(), layer.weights.cols());
            e *= ratio * qep::spectral_norm(layer.weights).value / qep::spectral_norm(e).value;
            layer.weights += e;
        }
        Row row;
        row.report = qep::build_report(net, hat, x);
        row.delta_l = row.report.delta_series.back();
        row.mismatch = std::sqrt(row.delta_l);
        return row;
    }

    int run() {
        require(!axis.empty() && !grid.empty() && !opts.out.empty(),
                "sweep needs --sweep, --grid, and --out");
        require(axis == "alpha" || axis == "bits" || axis == "depth" || axis == "r",
                "--sweep must be alpha, bits, depth, or r");
        const std::vector<double> points = parse_double_list(grid, "--grid");
        const qep::QuantConfig cfg = opts.quant_config();

        std::vector<Row> rows;
        if (axis == "alpha" || axis == "bits") {
            require(!opts.model.empty() && !opts.calib.empty(),
                    "alpha/bits sweeps need --model and --calib");
            const qep::NetworkSpec net = qep::read_model(opts.model);
            const qep::CalibrationSet calib{qep::read_calibration(opts.calib)};
            const std::size_t layers = net.layer_count();

            if (axis == "alpha") {
                // Reference base run: alpha-independent delta_l and P_l for the
                // propagation-term column.
                const auto base = qep::quantize_network(
                    net, calib, cfg, qep::PropagationSchedule::uniform(layers, 0.0),
                    qep::PipelineMode::Base, opts.full_activations());
                std::vector<qep::Matrix> w_delta;
                std::vector<qep::Matrix> proj;
                for (std::size_t l = 0; l < layers; ++l) {
                    w_delta.push_back(net.layers[l].weights *
                                      (base.trace.full[l] - base.trace.quantized[l]));
                    proj.push_back(qep::projection(base.trace.quantized[l], cfg.damping).p);
                }
                for (double alpha : points) {
                    require(alpha >= 0.0 && alpha <= 1.0, "--grid alphas must lie in [0, 1]");
                    Row row = pipeline_row(net, calib, cfg,
                                           std::vector<double>(layers, alpha),
                                           qep::PipelineMode::Qep);
                    row.value = alpha;
                    double term = 0.0;
                    for (std::size_t l = 0; l < layers; ++l) {
                        const qep::Matrix eye = qep::Matrix::identity(proj[l].rows());
                        term += qep::frobenius_norm(w_delta[l] * (eye - alpha * proj[l]));
                    }
                    row.prop_term = term;
                    rows.push_back(std::move(row));
                }
            } else {
                const std::vector<double> alphas = parse_alphas(opts.alpha, layers);
                for (double b : points) {
                    qep::QuantConfig bcfg = cfg;
                    bcfg.bits = static_cast<int>(as_index(b, "--grid bits"));
                    Row row = pipeline_row(net, calib, bcfg, alphas, parse_mode(opts.mode));
                    row.value = b;
                    rows.push_back(std::move(row));
                }
            }
        } else if (axis == "depth") {
            for (std::size_t i = 0; i < points.size(); ++i) {
                Row row = injection_row(as_index(points[i], "--grid depth"), inject_r, i);
                row.value = points[i];
                rows.push_back(std::move(row));
            }
        } else {  // r axis
            for (std::size_t i = 0; i < points.size(); ++i) {
                require(points[i] > 0.0, "--grid r values must be positive");
                Row row = injection_row(depth, points[i], i);
                row.value = points[i];
                rows.push_back(std::move(row));
            }
        }

        std::ofstream out(opts.out, std::ios::trunc);
        if (!out) throw qep::ParseError("cannot write '" + opts.out + "'");
        for (const auto& [k, v] : binder.snapshot("sweep")) {
            out << "# " << k << " = " << v << '\n';
        }
        out << "i," << axis
            << ",delta_L,mismatch_fro,prop_term_fro,bound_u,uniform_bound,first_order_bound,"
               "gain_G,ratio_r\n";
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const Row& row = rows[i];
            out << i << ',' << qep::fmt_double(row.value) << ','
                << qep::fmt_double(row.delta_l) << ',' << qep::fmt_double(row.mismatch) << ','
                << (row.prop_term ? qep::fmt_double(*row.prop_term) : std::string()) << ','
                << qep::fmt_double(row.report.bound_u) << ','
                << qep::fmt_double(row.report.uniform_bound) << ','
                << qep::fmt_double(row.report.first_order_bound) << ','
                << qep::fmt_double(row.report.gain_G) << ','
                << qep::fmt_double(row.report.ratio_r) << '\n';
        }
        binder.write_echo("sweep", opts.out + ".config");
        return 0;
    }
};

template <typename Cmd>
int run_command(Cmd& cmd, const std::string& name) {
    if (!cmd.config_path.empty()) {
        const auto config = load_config_file(cmd.config_path);
        const auto it = config.find("command");
        if (it != config.end() && it->second != name) {
            throw qep::ParseError("config was written by '" + it->second +
                                  "', not '" + name + "'");
        }
        cmd.binder.apply(config);
    }
    return cmd.run();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"layer-wise quantization workbench with error propagation"};
    app.require_subcommand(1);

    GenerateCmd generate;
    QuantizeCmd quantize;
    DiagnoseCmd diagnose;
    SweepCmd sweep;
    generate.bind(*app.add_subcommand("generate", "write a seeded model + calibration pair"));
    quantize.bind(*app.add_subcommand("quantize", "run the quantization pipeline"));
    diagnose.bind(*app.add_subcommand("diagnose", "report on an original/quantized pair"));
    sweep.bind(*app.add_subcommand("sweep", "grid runs with one CSV row per point"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand("generate")) return run_command(generate, "generate");
        if (app.got_subcommand("quantize")) return run_command(quantize, "quantize");
        if (app.got_subcommand("diagnose")) return run_command(diagnose, "diagnose");
        return run_command(sweep, "sweep");
    } catch (const qep::StructureMismatch& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const qep::SingularHessian& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const qep::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const qep::DimensionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
