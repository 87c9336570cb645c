#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "qep/model_io.hpp"
#include "qep/network.hpp"
#include "qep/quantize.hpp"

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("qep_cli_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args) {
    const std::string cmd = std::string(QEP_CLI_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Parses a CSV with optional '#' comment lines into column -> values.
std::map<std::string, std::vector<std::string>> parse_csv(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::vector<std::string> header;
    std::map<std::string, std::vector<std::string>> table;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (header.empty()) {
            header = cells;
            continue;
        }
        if (cells.size() < header.size()) break;  // trailer section
        for (std::size_t i = 0; i < header.size(); ++i) table[header[i]].push_back(cells[i]);
    }
    return table;
}

std::vector<double> column(const std::map<std::string, std::vector<std::string>>& table,
                           const std::string& name) {
    std::vector<double> out;
    REQUIRE(table.count(name) == 1);
    for (const auto& cell : table.at(name)) out.push_back(std::stod(cell));
    return out;
}

double stats_objective_sum(const std::string& stats_path) {
    double sum = 0.0;
    for (double v : column(parse_csv(stats_path), "objective_after")) sum += v;
    return sum;
}

std::string generate_args(const TempDir& dir, const std::string& model,
                          const std::string& calib, int seed,
                          const std::string& extra = "") {
    return "generate --out " + dir.file(model) + " --calib " + dir.file(calib) +
           " --seed " + std::to_string(seed) + " " + extra;
}

}  // namespace

TEST_CASE("cli: generate is deterministic per seed") {
    TempDir dir;
    REQUIRE(run_cli(generate_args(dir, "a.qepnet", "a.qepcal", 7,
                                  "--depth 5 --width 6 --target-norm 1.1")) == 0);
    REQUIRE(run_cli(generate_args(dir, "b.qepnet", "b.qepcal", 7,
                                  "--depth 5 --width 6 --target-norm 1.1")) == 0);
    CHECK(slurp(dir.file("a.qepnet")) == slurp(dir.file("b.qepnet")));
    CHECK(slurp(dir.file("a.qepcal")) == slurp(dir.file("b.qepcal")));

    const qep::NetworkSpec net = qep::read_model(dir.file("a.qepnet"));
    REQUIRE(net.layer_count() == 5);
    for (const auto& layer : net.layers) {
        CHECK(qep::spectral_norm(layer.weights).value == Catch::Approx(1.1).epsilon(0.01));
    }
}

TEST_CASE("cli: generate validates width flags before writing") {
    TempDir dir;
    CHECK(run_cli(generate_args(dir, "bad.qepnet", "bad.qepcal", 0,
                                "--depth 3 --widths 4,4,4")) == 2);
    CHECK_FALSE(fs::exists(dir.file("bad.qepnet")));
    CHECK_FALSE(fs::exists(dir.file("bad.qepcal")));
    CHECK(run_cli(generate_args(dir, "ok.qepnet", "ok.qepcal", 0,
                                "--depth 3 --widths 4,5,6,4")) == 0);
    CHECK(qep::read_model(dir.file("ok.qepnet")).layers[1].weights.rows() == 6);
}

TEST_CASE("cli: quantize is a fixed point on grid-aligned models") {
    TempDir dir;
    REQUIRE(run_cli(generate_args(dir, "m.qepnet", "m.qepcal", 3, "--depth 3 --width 5")) == 0);
    REQUIRE(run_cli("quantize --model " + dir.file("m.qepnet") + " --calib " +
                    dir.file("m.qepcal") + " --out " + dir.file("q1.qepnet") +
                    " --mode base --quantizer rtn --bits 4") == 0);
    REQUIRE(run_cli("quantize --model " + dir.file("q1.qepnet") + " --calib " +
                    dir.file("m.qepcal") + " --out " + dir.file("q2.qepnet") +
                    " --mode base --quantizer rtn --bits 4") == 0);
    CHECK(slurp(dir.file("q1.qepnet")) == slurp(dir.file("q2.qepnet")));
    for (double v : column(parse_csv(dir.file("q2.qepnet.stats.csv")), "objective_after")) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("cli: qep with alpha 0 emits byte-identical models to base") {
    TempDir dir;
    REQUIRE(run_cli(generate_args(dir, "m.qepnet", "m.qepcal", 11, "--depth 4 --width 6")) == 0);
    REQUIRE(run_cli("quantize --model " + dir.file("m.qepnet") + " --calib " +
                    dir.file("m.qepcal") + " --out " + dir.file("base.qepnet") +
                    " --mode base --bits 3") == 0);
    REQUIRE(run_cli("quantize --model " + dir.file("m.qepnet") + " --calib " +
                    dir.file("m.qepcal") + " --out " + dir.file("qep0.qepnet") +
                    " --mode qep --alpha 0 --bits 3") == 0);
    CHECK(slurp(dir.file("base.qepnet")) == slurp(dir.file("qep0.qepnet")));
}

TEST_CASE("cli: full correction lowers the summed layer objectives") {
    TempDir dir;
    REQUIRE(run_cli(generate_args(dir, "m.qepnet", "m.qepcal", 17,
                                  "--depth 4 --width 8 --samples 32")) == 0);
    REQUIRE(run_cli("quantize --model " + dir.file("m.qepnet") + " --calib " +
                    dir.file("m.qepcal") + " --out " + dir.file("base.qepnet") +
                    " --mode base --bits 3") == 0);
    REQUIRE(run_cli("quantize --model " + dir.file("m.qepnet") + " --calib " +
                    dir.file("m.qepcal") + " --out " + dir.file("qep1.qepnet") +
                    " --mode qep --alpha 1 --bits 3") == 0);
    CHECK(stats_objective_sum(dir.file("qep1.qepnet.stats.csv")) <=
          stats_objective_sum(dir.file("base.qepnet.stats.csv")));
}

TEST_CASE("cli: per-layer alpha list and exit codes") {
    TempDir dir;
    REQUIRE(run_cli(generate_args(dir, "m.qepnet", "m.qepcal", 5, "--depth 3 --width 4")) == 0);
    CHECK(run_cli("quantize --model " + dir.file("m.qepnet") + " --calib " +
                  dir.file("m.qepcal") + " --out " + dir.file("q.qepnet") +
                  " --mode qep --alpha 0.5,0,1") == 0);
    // Wrong list length and out-of-range values are config errors.
    CHECK(run_cli("quantize --model " + dir.file("m.qepnet") + " --calib " +
                  dir.file("m.qepcal") + " --out " + dir.file("q.qepnet") +
                  " --mode qep --alpha 0.5,1") == 2);
    CHECK(run_cli("quantize --model " + dir.file("m.qepnet") + " --calib " +
                  dir.file("m.qepcal") + " --out " + dir.file("q.qepnet") +
                  " --mode qep --alpha 1.5") == 2);
    // Missing input file is a parse error.
    CHECK(run_cli("quantize --model " + dir.file("nope.qepnet") + " --calib " +
                  dir.file("m.qepcal") + " --out " + dir.file("q.qepnet")) == 2);
}

TEST_CASE("cli: singular hessian exits with code 3 and names the layer") {
    TempDir dir;
    // All-negative first layer + ReLU zeroes the second layer's activations.
    qep::NetworkSpec net{
        {qep::Layer{qep::Matrix::from_rows({{-1.0, -0.5}, {-0.75, -1.25}}),
                    qep::ActivationSpec::relu()},
         qep::Layer{qep::Matrix::identity(2), qep::ActivationSpec::identity()}}};
    qep::write_model(net, dir.file("m.qepnet"));
    qep::write_calibration(qep::Matrix::from_rows({{1.0, 2.0}, {0.5, 1.0}}),
                           dir.file("m.qepcal"));
    const std::string cmd = std::string(QEP_CLI_BIN) + " quantize --model " +
                            dir.file("m.qepnet") + " --calib " + dir.file("m.qepcal") +
                            " --out " + dir.file("q.qepnet") +
                            " --quantizer compensated --mode base 2> " + dir.file("err.txt");
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    CHECK(WEXITSTATUS(status) == 3);
    CHECK(slurp(dir.file("err.txt")).find("layer 2") != std::string::npos);
}

TEST_CASE("cli: diagnose on an identical pair reports an all-zero delta column") {
    TempDir dir;
    REQUIRE(run_cli(generate_args(dir, "m.qepnet", "m.qepcal", 23, "--depth 3 --width 5")) == 0);
    REQUIRE(run_cli("diagnose --model " + dir.file("m.qepnet") + " --quantized " +
                    dir.file("m.qepnet") + " --calib " + dir.file("m.qepcal") + " --out " +
                    dir.file("report.csv")) == 0);
    for (double v : column(parse_csv(dir.file("report.csv")), "delta_m")) CHECK(v == 0.0);
}

TEST_CASE("cli: diagnose with a full-precision first layer has delta_1 = 0") {
    TempDir dir;
    REQUIRE(run_cli(generate_args(dir, "m.qepnet", "m.qepcal", 29,
                                  "--depth 6 --width 6 --target-norm 1.2")) == 0);
    // Hybrid pair: layer 1 copied, layers 2..6 quantized.
    const qep::NetworkSpec net = qep::read_model(dir.file("m.qepnet"));
    qep::NetworkSpec hybrid = net;
    qep::QuantConfig cfg;
    cfg.bits = 3;
    for (std::size_t l = 1; l < hybrid.layer_count(); ++l) {
        hybrid.layers[l].weights = qep::rtn_quantize(hybrid.layers[l].weights, cfg).dequantized;
    }
    qep::write_model(hybrid, dir.file("h.qepnet"));
    REQUIRE(run_cli("diagnose --model " + dir.file("m.qepnet") + " --quantized " +
                    dir.file("h.qepnet") + " --calib " + dir.file("m.qepcal") + " --out " +
                    dir.file("report.csv")) == 0);
    const auto deltas = column(parse_csv(dir.file("report.csv")), "delta_m");
    REQUIRE(deltas.size() == 6);
    CHECK(deltas[0] == 0.0);
    for (std::size_t m = 1; m < deltas.size(); ++m) CHECK(deltas[m] > 0.0);
}

TEST_CASE("cli: diagnose json format carries the report fields") {
    TempDir dir;
    REQUIRE(run_cli(generate_args(dir, "m.qepnet", "m.qepcal", 31, "--depth 3 --width 5")) == 0);
    REQUIRE(run_cli("quantize --model " + dir.file("m.qepnet") + " --calib " +
                    dir.file("m.qepcal") + " --out " + dir.file("q.qepnet") + " --bits 3") == 0);
    REQUIRE(run_cli("diagnose --model " + dir.file("m.qepnet") + " --quantized " +
                    dir.file("q.qepnet") + " --calib " + dir.file("m.qepcal") + " --out " +
                    dir.file("report.json") + " --format json") == 0);
    const auto j = nlohmann::json::parse(slurp(dir.file("report.json")));
    CHECK(j["delta_series"].size() == 3);
    CHECK(j["config"]["command"] == "diagnose");
    for (const char* key :
         {"bound_u", "uniform_bound", "first_order_bound", "gain_G", "ratio_r"}) {
        CHECK(j[key].is_number());
    }
}

TEST_CASE("cli: diagnose rejects structurally different models with exit 4") {
    TempDir dir;
    REQUIRE(run_cli(generate_args(dir, "a.qepnet", "a.qepcal", 1, "--depth 3 --width 5")) == 0);
    REQUIRE(run_cli(generate_args(dir, "b.qepnet", "b.qepcal", 1, "--depth 4 --width 5")) == 0);
    CHECK(run_cli("diagnose --model " + dir.file("a.qepnet") + " --quantized " +
                  dir.file("b.qepnet") + " --calib " + dir.file("a.qepcal") + " --out " +
                  dir.file("r.csv")) == 4);
}

TEST_CASE("cli: qep beats base end to end on seeded diagnose runs") {
    for (int seed : {41, 43}) {
        TempDir dir;
        REQUIRE(run_cli(generate_args(dir, "m.qepnet", "m.qepcal", seed,
                                      "--depth 6 --width 8 --target-norm 1.15 --samples 32")) ==
                0);
        double final_delta[2] = {0.0, 0.0};
        int i = 0;
        for (const std::string mode : {"base", "qep"}) {
            REQUIRE(run_cli("quantize --model " + dir.file("m.qepnet") + " --calib " +
                            dir.file("m.qepcal") + " --out " + dir.file(mode + ".qepnet") +
                            " --mode " + mode + " --alpha 0.5 --bits 3") == 0);
            REQUIRE(run_cli("diagnose --model " + dir.file("m.qepnet") + " --quantized " +
                            dir.file(mode + ".qepnet") + " --calib " + dir.file("m.qepcal") +
                            " --out " + dir.file(mode + ".csv")) == 0);
            final_delta[i++] = column(parse_csv(dir.file(mode + ".csv")), "delta_m").back();
        }
        CHECK(final_delta[1] <= final_delta[0]);
    }
}

TEST_CASE("cli: alpha sweep has a non-increasing propagation-term column") {
    TempDir dir;
    REQUIRE(run_cli(generate_args(dir, "m.qepnet", "m.qepcal", 47,
                                  "--depth 4 --width 6 --samples 24")) == 0);
    REQUIRE(run_cli("sweep --sweep alpha --grid 0,0.25,0.5,0.75,1 --model " +
                    dir.file("m.qepnet") + " --calib " + dir.file("m.qepcal") + " --out " +
                    dir.file("sweep.csv") + " --bits 3") == 0);
    const auto table = parse_csv(dir.file("sweep.csv"));
    const auto terms = column(table, "prop_term_fro");
    REQUIRE(terms.size() == 5);
    for (std::size_t i = 1; i < terms.size(); ++i) CHECK(terms[i] <= terms[i - 1] + 1e-12);
    CHECK(column(table, "alpha") == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
}

TEST_CASE("cli: bits sweep mostly improves with more bits") {
    int improved = 0;
    const std::vector<int> seeds{53, 59, 61, 67, 71};
    for (int seed : seeds) {
        TempDir dir;
        REQUIRE(run_cli(generate_args(dir, "m.qepnet", "m.qepcal", seed,
                                      "--depth 4 --width 6 --samples 24")) == 0);
        REQUIRE(run_cli("sweep --sweep bits --grid 2,3,4 --model " + dir.file("m.qepnet") +
                        " --calib " + dir.file("m.qepcal") + " --out " + dir.file("s.csv") +
                        " --mode base") == 0);
        const auto deltas = column(parse_csv(dir.file("s.csv")), "delta_L");
        if (deltas[0] >= deltas[1] && deltas[1] >= deltas[2]) ++improved;
    }
    CHECK(improved >= 4);
}

TEST_CASE("cli: depth sweep stays under the uniform bound and grows with depth") {
    TempDir dir;
    REQUIRE(run_cli("sweep --sweep depth --grid 2,4,8 --out " + dir.file("s.csv") +
                    " --width 6 --samples 16 --target-norm 1.2 --r 0.05 --seed 5"
                    " --weights rotation") == 0);
    const auto table = parse_csv(dir.file("s.csv"));
    const auto mismatch = column(table, "mismatch_fro");
    const auto bound = column(table, "uniform_bound");
    REQUIRE(mismatch.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(mismatch[i] <= bound[i]);
    CHECK(mismatch[0] < mismatch[1]);
    CHECK(mismatch[1] < mismatch[2]);
}

TEST_CASE("cli: r sweep reports the injected ratio") {
    TempDir dir;
    REQUIRE(run_cli("sweep --sweep r --grid 0.05,0.1,0.2 --out " + dir.file("s.csv") +
                    " --depth 4 --width 6 --samples 16 --seed 9") == 0);
    const auto table = parse_csv(dir.file("s.csv"));
    const auto ratio = column(table, "ratio_r");
    const auto bound = column(table, "uniform_bound");
    REQUIRE(ratio.size() == 3);
    CHECK(ratio[0] == Catch::Approx(0.05).epsilon(1e-6));
    CHECK(ratio[2] == Catch::Approx(0.2).epsilon(1e-6));
    CHECK(bound[0] < bound[1]);
    CHECK(bound[1] < bound[2]);
}

TEST_CASE("cli: sweep rejects an empty or unknown grid") {
    TempDir dir;
    CHECK(run_cli("sweep --sweep alpha --grid , --out " + dir.file("s.csv")) == 2);
    CHECK(run_cli("sweep --sweep nope --grid 1,2 --out " + dir.file("s.csv")) == 2);
    REQUIRE(run_cli(generate_args(dir, "m.qepnet", "m.qepcal", 2, "--depth 2 --width 4")) == 0);
    CHECK(run_cli("sweep --sweep alpha --grid 0,1.5 --model " + dir.file("m.qepnet") +
                  " --calib " + dir.file("m.qepcal") + " --out " + dir.file("s.csv")) == 2);
}

TEST_CASE("cli: generate supports scaled_tanh activations") {
    TempDir dir;
    REQUIRE(run_cli(generate_args(dir, "t.qepnet", "t.qepcal", 3,
                                  "--depth 2 --width 4 --activation scaled_tanh"
                                  " --tanh-scale 2.5")) == 0);
    const qep::NetworkSpec net = qep::read_model(dir.file("t.qepnet"));
    for (const auto& layer : net.layers) {
        CHECK(layer.activation.kind == qep::ActivationSpec::Kind::ScaledTanh);
        CHECK(layer.activation.gamma() == 2.5);
    }
    CHECK(run_cli(generate_args(dir, "u.qepnet", "u.qepcal", 3, "--activation softmax")) == 2);
}

TEST_CASE("cli: base mode can fit the hessian on full-precision activations") {
    TempDir dir;
    REQUIRE(run_cli(generate_args(dir, "m.qepnet", "m.qepcal", 37,
                                  "--depth 3 --width 6 --samples 18")) == 0);
    const std::string common = "quantize --model " + dir.file("m.qepnet") + " --calib " +
                               dir.file("m.qepcal") + " --mode base --bits 2"
                               " --quantizer compensated --out ";
    REQUIRE(run_cli(common + dir.file("q-quant.qepnet")) == 0);
    REQUIRE(run_cli(common + dir.file("q-full.qepnet") + " --base-activations full") == 0);
    CHECK(slurp(dir.file("q-quant.qepnet")) != slurp(dir.file("q-full.qepnet")));
    CHECK(run_cli(common + dir.file("q.qepnet") + " --base-activations sometimes") == 2);
}

TEST_CASE("cli: config echo reproduces a run and flags override it") {
    TempDir dir;
    REQUIRE(run_cli(generate_args(dir, "m.qepnet", "m.qepcal", 73, "--depth 3 --width 5")) == 0);
    REQUIRE(run_cli("quantize --model " + dir.file("m.qepnet") + " --calib " +
                    dir.file("m.qepcal") + " --out " + dir.file("q.qepnet") +
                    " --mode qep --alpha 0.75 --bits 3") == 0);
    const std::string first = slurp(dir.file("q.qepnet"));

    // Replay purely from the echoed config.
    REQUIRE(run_cli("quantize --config " + dir.file("q.qepnet.config")) == 0);
    CHECK(slurp(dir.file("q.qepnet")) == first);

    // A flag given alongside the config wins.
    REQUIRE(run_cli("quantize --config " + dir.file("q.qepnet.config") + " --bits 2") == 0);
    CHECK(slurp(dir.file("q.qepnet")) != first);

    // Echo files belong to their command.
    CHECK(run_cli("diagnose --config " + dir.file("q.qepnet.config")) == 2);

    // generate echo replays byte-identically too.
    const std::string model_bytes = slurp(dir.file("m.qepnet"));
    REQUIRE(run_cli("generate --config " + dir.file("m.qepnet.config")) == 0);
    CHECK(slurp(dir.file("m.qepnet")) == model_bytes);
}

TEST_CASE("cli: help exits zero, missing subcommand is a usage error") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("") == 2);
    CHECK(run_cli("quantize") == 2);  // missing required flags
}
