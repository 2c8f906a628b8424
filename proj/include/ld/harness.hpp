#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ld/approx.hpp"
#include "ld/recovery.hpp"

namespace ld {

enum class Mode { minimize_ld, minimize_limit, recover, gamma_sweep, diagnose, approx_check };

std::string mode_name(Mode m);
std::optional<Mode> parse_mode(const std::string& s);

struct SchedulePoint {
    double eps = 0.1;
    int N = 4;
};

// Error in a config file. `field` is the dotted path of the offending key,
// empty for syntax errors.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& what)
        : std::runtime_error(field.empty() ? what : "field '" + field + "': " + what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct ExperimentConfig {
    Mode mode = Mode::minimize_ld;
    DomainSpec domain{.h_grid = 0.0}; // h_grid = 0 selects eps / 3 per point
    ModelParams base;             // eps and lambda; h0 is copied from below
    std::optional<double> h_ex;   // default h0 |ln eps|
    double h0 = 0.0;
    std::vector<SchedulePoint> schedule;
    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 1;
    double resolution_scale = 1.0; // multiplies every layer grid spacing
    int threads = 0;               // 0 keeps the OpenMP default
    bool dump_fields = false;

    SolveOptions ld_solver;
    int random_start_iters = 2000; // second start in the sweep, 0 disables
    std::string init = "random";   // minimize-ld: random | meissner
    SolveOptions limit_solver;
    double limit_h_grid = 0.05;

    std::string field = "rotating"; // smooth planar field for recover, sweep, approx-check
    double approx_eps = 0.05;
    int approx_m = 0;
    std::filesystem::path input; // diagnose: directory of a minimize-ld dump
};

ExperimentConfig parse_config(const nlohmann::json& j);
// Syntax errors raise ConfigError with the line and column.
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& c);

// The default schedule for a cylinder of height 4.2: s |ln eps| in
// {1.61, 2.23, 3.15, 4.69}.
std::vector<SchedulePoint> default_schedule();

DomainSpec point_spec(const ExperimentConfig& c, const SchedulePoint& pt);
ModelParams point_params(const ExperimentConfig& c, const SchedulePoint& pt);

// rotating: (-x2, x1) / 2; zero; gradient: grad(x1 x2) / 2; shear: (x2, 0).
PlanarField named_field(const std::string& name);

struct SweepRow {
    double eps = 0.0, s = 0.0, s_ln_eps = 0.0;
    int N = 0;
    double scaled_ld_min = 0.0;
    double scaled_recovery = 0.0;
    double limit_value = 0.0;
    double josephson_scaled = 0.0;
    double trace_estimate = 0.0;   // slab trace quantity
    double jacobian_cauchy = 0.0;  // NaN on the first row
    double recovery_upper = 0.0;   // G_h0(v, A0) on the row grid
    double gap = 0.0;              // scaled_recovery - recovery_upper
    double josephson_bound = 0.0;  // 2 L |Omega| / (lambda^2 s |ln eps|^2)
    double slab_trace_ratio = 0.0; // trace_estimate / G_LD
    bool converged = false;
    bool out_of_theory = false;    // s < eps
    int n_vortices = 0;
    int iterations = 0;
    double grad_norm = 0.0;
    std::string start; // warm | random
};

struct SweepReport {
    std::vector<SweepRow> rows;
    double limit_value = 0.0;
    SolveReport limit_report;
    bool all_converged() const;
};

using Logger = std::function<void(const std::string&)>;

// Writes sweep.csv, sweep.json and sweep.svg into c.out_dir.
SweepReport run_gamma_sweep(const ExperimentConfig& c, const Logger& log = {});
std::string sweep_csv(const SweepReport& r);

struct RunOutcome {
    bool converged = true;
    nlohmann::json summary;
};

RunOutcome run_minimize_ld(const ExperimentConfig& c, const Logger& log = {});
RunOutcome run_minimize_limit(const ExperimentConfig& c, const Logger& log = {});
RunOutcome run_recover(const ExperimentConfig& c, const Logger& log = {});
RunOutcome run_diagnose(const ExperimentConfig& c, const Logger& log = {});
RunOutcome run_approx_check(const ExperimentConfig& c, const Logger& log = {});
RunOutcome run_experiment(const ExperimentConfig& c, const Logger& log = {});

// RFC 4180 with CRLF line ends; NaN is written as an empty field.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    CsvWriter& operator<<(double x);
    CsvWriter& operator<<(int x);
    CsvWriter& operator<<(bool x);
    CsvWriter& operator<<(const std::string& x);
    void end_row();
    const std::string& str() const { return buf_; }
    void save(const std::filesystem::path& path) const;

private:
    void sep();
    std::string buf_;
    std::size_t cols_ = 0, col_ = 0;
};

std::string format_number(double x);

// Little-endian float64, row-major, with `<stem>.json` next to `<stem>.bin`.
void dump_field(const std::filesystem::path& stem, const std::vector<double>& data,
                const std::vector<std::size_t>& shape, const nlohmann::json& meta = {});
struct LoadedField {
    std::vector<double> data;
    std::vector<std::size_t> shape;
    nlohmann::json meta;
};
LoadedField load_field(const std::filesystem::path& stem);

// u as [N + 1, ny, nx, 2] and A as three box arrays, plus state.json with
// the domain and model parameters.
void dump_state(const std::filesystem::path& dir, const Domain& d, const ModelParams& p,
                const OrderParameterStack& u, const MagneticPotential& A);
struct LoadedState {
    Domain domain;
    ModelParams params;
    OrderParameterStack u;
    MagneticPotential A;
};
LoadedState load_state(const std::filesystem::path& dir);

nlohmann::json domain_to_json(const DomainSpec& s);
DomainSpec domain_from_json(const nlohmann::json& j);

struct Curve {
    std::string label;
    std::vector<double> x, y;
};
// Static line plot with axes, ticks and a legend.
std::string svg_plot(const std::vector<Curve>& curves, const std::string& xlabel, const std::string& ylabel);

} // namespace ld
