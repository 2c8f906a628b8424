#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "ld/harness.hpp"

using namespace ld;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("ld_unit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string read_text(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string config_error_field(const json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "<accepted>";
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("config defaults and round trip") {
    ExperimentConfig c = parse_config(json::object());
    CHECK(c.mode == Mode::minimize_ld);
    CHECK(c.domain.h_grid == 0.0);
    CHECK(c.schedule.empty());
    json j = config_to_json(c);
    ExperimentConfig again = parse_config(j);
    CHECK(config_to_json(again) == j);
}

TEST_CASE("config errors name the offending field") {
    CHECK(config_error_field({{"mode", "minimise"}}) == "mode");
    CHECK(config_error_field({{"domian", json::object()}}) == "domian");
    CHECK(config_error_field({{"domain", {{"radius", -1.0}}}}) == "domain.radius");
    CHECK(config_error_field({{"solver", {{"grad_tl", 1e-6}}}}) == "solver.grad_tl");
    CHECK(config_error_field({{"schedule", json::array({{{"eps", 1.5}, {"N", 2}}})}}) == "schedule[0].eps");
    CHECK(config_error_field({{"model", {{"eps", "small"}}}}) == "model.eps");
    CHECK(config_error_field({{"field", "swirl"}}) == "field");
}

TEST_CASE("sweep schedules must increase s |ln eps|") {
    json j = {{"mode", "gamma-sweep"},
              {"domain", {{"L", 1.0}}},
              {"schedule", json::array({{{"eps", 0.1}, {"N", 2}}, {{"eps", 0.2}, {"N", 2}}})}};
    CHECK_THROWS_AS(run_gamma_sweep(parse_config(j)), ConfigError);
}

TEST_CASE("syntax errors carry line and column") {
    fs::path dir = scratch("syntax");
    std::ofstream(dir / "bad.json") << "{\n  \"seed\": 3,\n  \"h0\": ,\n}\n";
    try {
        load_config(dir / "bad.json");
        FAIL("accepted malformed JSON");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("default schedule") {
    ExperimentConfig c;
    c.domain.L = 4.2;
    c.schedule = default_schedule();
    const double expect[] = {1.61, 2.23, 3.15, 4.69};
    for (std::size_t k = 0; k < c.schedule.size(); ++k) {
        const auto& pt = c.schedule[k];
        double s = c.domain.L / pt.N;
        CHECK(s * std::abs(std::log(pt.eps)) == doctest::Approx(expect[k]).epsilon(0.005));
        CHECK(point_spec(c, pt).h_grid == doctest::Approx(pt.eps / 3));
    }
}

TEST_CASE("CSV quoting, CRLF and NaN") {
    CsvWriter w({"a", "b", "c"});
    w << 0.1 << std::nan("") << std::string("x,\"y\"");
    w.end_row();
    CHECK(w.str() == "a,b,c\r\n0.10000000000000001,,\"x,\"\"y\"\"\"\r\n");
    w << 1;
    CHECK_THROWS_AS(w.end_row(), std::logic_error);
}

TEST_CASE("numbers survive a text round trip") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(-1e6, 1e6);
    for (int k = 0; k < 200; ++k) {
        double x = U(rng) * std::pow(10.0, k % 40 - 20);
        CHECK(std::stod(format_number(x)) == x);
    }
    CHECK(format_number(std::nan("")).empty());
}

TEST_CASE("field dump round trip") {
    fs::path dir = scratch("field");
    std::vector<double> data{1.0, -2.5, 3.25, 1e-300, -0.0, 7.0};
    dump_field(dir / "f", data, {2, 3}, {{"name", "f"}});
    std::string bytes = read_text(dir / "f.bin");
    REQUIRE(bytes.size() == 48);
    CHECK(static_cast<unsigned char>(bytes[7]) == 0x3f); // 1.0, little-endian
    LoadedField f = load_field(dir / "f");
    CHECK(f.data == data);
    CHECK(f.shape == std::vector<std::size_t>{2, 3});
    CHECK(f.meta.at("name") == "f");
    CHECK(f.meta.at("byte_order") == "little");
    CHECK_THROWS(dump_field(dir / "g", data, {4, 2}));
}

TEST_CASE("state dump reproduces the energy") {
    Domain d = ldtest::small_disk(2, 0.2);
    std::mt19937_64 rng(4);
    ModelParams p;
    p.eps = 0.2;
    p.h_ex = 0.7;
    OrderParameterStack u = ldtest::random_u(d, rng);
    MagneticPotential A = applied_potential(d, p.h_ex);
    fs::path dir = scratch("state");
    dump_state(dir, d, p, u, A);
    LoadedState s = load_state(dir);
    CHECK(s.domain.box.n_nodes() == d.box.n_nodes());
    CHECK(s.params.eps == p.eps);
    CHECK(s.params.h_ex == p.h_ex);
    CHECK(ld_energy(s.domain, s.u, s.A, s.params).total == ld_energy(d, u, A, p).total);
}

TEST_CASE("svg output is well formed") {
    std::string svg = svg_plot({{"a", {0, 1, 2}, {1, 4, 9}}, {"b & c", {0, 2}, {0, std::nan("")}}}, "x", "y");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("b &amp; c") != std::string::npos);
    CHECK(svg.find("nan") == std::string::npos);
}

TEST_CASE("minimize-ld then diagnose agree") {
    fs::path dir = scratch("diagnose");
    ExperimentConfig c = parse_config({{"mode", "minimize-ld"},
                                       {"domain", {{"N", 2}, {"h_grid", 0.2}, {"R_box", 3.0}, {"h_box", 1.0}}},
                                       {"model", {{"eps", 0.3}}},
                                       {"h0", 0.5},
                                       {"init", "meissner"},
                                       {"out", (dir / "min").string()},
                                       {"dump_fields", true}});
    RunOutcome a = run_experiment(c);
    REQUIRE(a.converged);
    c.mode = Mode::diagnose;
    c.input = dir / "min" / "fields";
    c.out_dir = dir / "diag";
    RunOutcome b = run_experiment(c);
    CHECK(b.summary.at("energy") == a.summary.at("energy"));
    CHECK(fs::exists(dir / "diag" / "vortices.csv"));
}

TEST_CASE("sweep output is reproducible") {
    ExperimentConfig c = load_config(fs::path(LD_SOURCE_DIR) / "configs" / "sweep_quick.json");
    c.schedule.resize(1);
    c.out_dir = scratch("sweep1");
    run_gamma_sweep(c);
    std::string first = read_text(c.out_dir / "sweep.csv");
    c.out_dir = scratch("sweep2");
    run_gamma_sweep(c);
    CHECK(read_text(c.out_dir / "sweep.csv") == first);
    CHECK(first.find("\r\n") != std::string::npos);
}

}
