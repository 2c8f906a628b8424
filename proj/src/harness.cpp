#include "ld/harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ld {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double NaN = std::numeric_limits<double>::quiet_NaN();

// Typed access to one JSON object; every key read is remembered so that
// finish() can reject the rest.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* find(const std::string& key) {
        used_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() || it->is_null() ? nullptr : &*it;
    }

    double number(const std::string& key, double def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_number()) throw ConfigError(at(key), "expected a number");
        return v->get<double>();
    }

    std::optional<double> optional_number(const std::string& key) {
        const json* v = find(key);
        if (!v) return std::nullopt;
        if (!v->is_number()) throw ConfigError(at(key), "expected a number");
        return v->get<double>();
    }

    long long integer(const std::string& key, long long def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_number_integer()) throw ConfigError(at(key), "expected an integer");
        return v->get<long long>();
    }

    bool boolean(const std::string& key, bool def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_boolean()) throw ConfigError(at(key), "expected true or false");
        return v->get<bool>();
    }

    std::string string(const std::string& key, const std::string& def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_string()) throw ConfigError(at(key), "expected a string");
        return v->get<std::string>();
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError(at(it.key()), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ConfigError(field, what);
}

DomainSpec read_domain(Reader& r, const std::string& path, DomainSpec s) {
    std::string shape = r.string("shape", s.shape == Shape::disk ? "disk" : "rectangle");
    if (shape == "disk") s.shape = Shape::disk;
    else if (shape == "rectangle") s.shape = Shape::rectangle;
    else throw ConfigError(r.at("shape"), "expected \"disk\" or \"rectangle\"");
    s.radius = r.number("radius", s.radius);
    s.width = r.number("width", s.width);
    s.height = r.number("height", s.height);
    s.h_grid = r.number("h_grid", s.h_grid);
    s.L = r.number("L", s.L);
    s.N = int(r.integer("N", s.N));
    s.R_box = r.number("R_box", s.R_box);
    s.h_box = r.number("h_box", s.h_box);
    s.z_cells = int(r.integer("z_cells", s.z_cells));
    s.growth = r.number("growth", s.growth);
    auto f = [&](const char* k) { return path + "." + k; };
    require(s.radius > 0, f("radius"), "must be positive");
    require(s.width > 0, f("width"), "must be positive");
    require(s.height > 0, f("height"), "must be positive");
    require(s.h_grid >= 0, f("h_grid"), "must be nonnegative (0 selects eps / 3)");
    require(s.L > 0, f("L"), "must be positive");
    require(s.N >= 1, f("N"), "must be at least 1");
    require(s.R_box >= 0, f("R_box"), "must be nonnegative");
    require(s.h_box >= 0, f("h_box"), "must be nonnegative");
    require(s.z_cells >= 1, f("z_cells"), "must be at least 1");
    require(s.growth > 1, f("growth"), "must exceed 1");
    return s;
}

void read_ld_solver(Reader& r, SolveOptions& o, int& random_iters) {
    o.max_iters = int(r.integer("max_iters", o.max_iters));
    o.grad_tol = r.number("grad_tol", o.grad_tol);
    o.energy_tol = r.number("energy_tol", o.energy_tol);
    std::string rule = r.string("step_rule", o.step_rule == StepRule::fixed ? "fixed" : "bb");
    if (rule == "bb") o.step_rule = StepRule::barzilai_borwein;
    else if (rule == "fixed") o.step_rule = StepRule::fixed;
    else throw ConfigError(r.at("step_rule"), "expected \"bb\" or \"fixed\"");
    o.fixed_step = r.number("fixed_step", o.fixed_step);
    o.coulomb = r.boolean("coulomb", o.coulomb);
    random_iters = int(r.integer("random_start_iters", random_iters));
    require(o.max_iters >= 0, r.at("max_iters"), "must be nonnegative");
    require(o.grad_tol > 0, r.at("grad_tol"), "must be positive");
    require(o.energy_tol >= 0, r.at("energy_tol"), "must be nonnegative");
    require(o.fixed_step > 0, r.at("fixed_step"), "must be positive");
    require(random_iters >= 0, r.at("random_start_iters"), "must be nonnegative");
}

void read_limit_solver(Reader& r, SolveOptions& o, double& h_grid) {
    o.pd_iters = int(r.integer("pd_iters", o.pd_iters));
    o.outer_iters = int(r.integer("outer_iters", o.outer_iters));
    o.gap_tol = r.number("gap_tol", o.gap_tol);
    o.cg_tol = r.number("cg_tol", o.cg_tol);
    o.pd_sigma = r.number("pd_sigma", o.pd_sigma);
    o.pd_tau = r.number("pd_tau", o.pd_tau);
    h_grid = r.number("h_grid", h_grid);
    require(o.pd_iters >= 1, r.at("pd_iters"), "must be at least 1");
    require(o.outer_iters >= 1, r.at("outer_iters"), "must be at least 1");
    require(o.gap_tol > 0, r.at("gap_tol"), "must be positive");
    require(o.cg_tol > 0, r.at("cg_tol"), "must be positive");
    require(o.pd_sigma >= 0 && o.pd_tau >= 0, r.at("pd_sigma"), "steps must be nonnegative (0 selects 1/||K||)");
    require(h_grid > 0, r.at("h_grid"), "must be positive");
}

double log_eps(double eps) { return std::abs(std::log(eps)); }

double total(const std::vector<double>& v) {
    long double s = 0.0L;
    for (double x : v) s += x;
    return double(s);
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

void emit(const Logger& log, const std::string& msg) {
    if (log) log(msg);
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json report_json(const SolveReport& r) {
    return {{"iterations", r.iterations}, {"energy", r.energy},       {"grad_norm", r.grad_norm},
            {"gap", r.gap},               {"converged", r.converged}, {"stop_reason", r.stop_reason},
            {"max_modulus", r.max_modulus}, {"modulus_ok", r.modulus_ok}};
}

json params_json(const ModelParams& p) {
    return {{"eps", p.eps}, {"lambda", p.lambda}, {"h_ex", p.h_ex}, {"h0", p.h0}};
}

json energy_json(const EnergyBreakdown& E) {
    return {{"kinetic", total(E.kinetic)},
            {"gl_potential", total(E.gl_potential)},
            {"josephson", total(E.josephson)},
            {"magnetic", E.magnetic},
            {"total", E.total}};
}

json observables_json(const ScaledObservables& o) {
    return {{"log_eps", o.log_eps},
            {"energy", o.energy},
            {"josephson", o.josephson},
            {"magnetic", o.magnetic},
            {"kinetic", o.kinetic},
            {"potential", o.potential},
            {"current_l2", o.current_l2},
            {"jacobian_mass", o.jacobian_mass},
            {"jacobian_total", o.jacobian_total},
            {"j3_l2", o.j3_l2},
            {"slab_trace", o.slab_trace},
            {"slab_trace_ratio", o.slab_trace_ratio},
            {"potential_excess", o.potential_excess}};
}

json grid_json(const Domain& d) {
    return {{"layer", {d.layer.nx, d.layer.ny}},
            {"h", d.layer.h},
            {"box", {d.box.nx, d.box.ny, d.box.nz}},
            {"box_nodes", d.box.n_nodes()}};
}

void dump_stack(const fs::path& stem, const LayerGrid& g, const VectorField2DStack& v) {
    std::vector<double> a, b;
    json z = json::array();
    for (const Slice2D& s : v.slices) {
        a.insert(a.end(), s.v1.begin(), s.v1.end());
        b.insert(b.end(), s.v2.begin(), s.v2.end());
        z.push_back({{"z", s.z}, {"weight", s.weight}});
    }
    const std::size_t n = v.slices.size();
    dump_field(stem.string() + "_1", a, {n, std::size_t(g.ny), std::size_t(g.nx - 1)}, {{"slices", z}});
    dump_field(stem.string() + "_2", b, {n, std::size_t(g.ny - 1), std::size_t(g.nx)}, {{"slices", z}});
}

// Mass-conserving transfer of a plaquette density onto a coarser grid.
Vec rebin_plaquettes(const LayerGrid& from, const Vec& f, const LayerGrid& to) {
    Vec out(to.n_plaq(), 0.0);
    const double ratio = (from.h * from.h) / (to.h * to.h);
    for (int j = 0; j + 1 < from.ny; ++j)
        for (int i = 0; i + 1 < from.nx; ++i) {
            std::size_t P = from.pl(i, j);
            if (!from.plaq[P] || f[P] == 0.0) continue;
            double x = from.x(i) + 0.5 * from.h, y = from.y(j) + 0.5 * from.h;
            int I = int(std::floor((x - to.x0) / to.h)), J = int(std::floor((y - to.y0) / to.h));
            if (I < 0 || J < 0 || I + 1 >= to.nx || J + 1 >= to.ny) continue;
            std::size_t Q = to.pl(I, J);
            if (to.plaq[Q]) out[Q] += f[P] * ratio;
        }
    return out;
}

// z-integrated scaled Jacobian s sum_n J(u_n) / |ln eps| on the reference grid.
Vec integrated_jacobian(const Domain& d, const OrderParameterStack& u, double eps, const LayerGrid& ref) {
    PlaquetteStack J = stack_jacobian(d, u);
    Vec sum(d.layer.n_plaq(), 0.0);
    for (const Vec& layer : J.layers)
        for (std::size_t P = 0; P < sum.size(); ++P) sum[P] += J.weight * layer[P];
    for (double& x : sum) x /= log_eps(eps);
    return rebin_plaquettes(d.layer, sum, ref);
}

void validate_sweep(const std::vector<SchedulePoint>& sched, double L) {
    require(!sched.empty(), "schedule", "gamma-sweep needs at least one point");
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < sched.size(); ++k) {
        double v = L / sched[k].N * log_eps(sched[k].eps);
        require(v > prev, "schedule[" + std::to_string(k) + "]",
                "s |ln eps| must increase strictly along the schedule (got " + format_number(v) + " after " +
                    format_number(prev) + ")");
        prev = v;
    }
}

} // namespace

// ---------------------------------------------------------------------------
// Config.

std::string mode_name(Mode m) {
    switch (m) {
    case Mode::minimize_ld: return "minimize-ld";
    case Mode::minimize_limit: return "minimize-limit";
    case Mode::recover: return "recover";
    case Mode::gamma_sweep: return "gamma-sweep";
    case Mode::diagnose: return "diagnose";
    case Mode::approx_check: return "approx-check";
    }
    return "";
}

std::optional<Mode> parse_mode(const std::string& s) {
    for (Mode m : {Mode::minimize_ld, Mode::minimize_limit, Mode::recover, Mode::gamma_sweep, Mode::diagnose,
                   Mode::approx_check})
        if (mode_name(m) == s) return m;
    return std::nullopt;
}

std::vector<SchedulePoint> default_schedule() { return {{0.1, 6}, {0.07, 5}, {0.05, 4}, {0.035, 3}}; }

ExperimentConfig parse_config(const json& j) {
    ExperimentConfig c;
    Reader r(j, "");
    std::string mode = r.string("mode", mode_name(c.mode));
    auto m = parse_mode(mode);
    if (!m) throw ConfigError("mode", "unknown mode \"" + mode + "\"");
    c.mode = *m;
    if (const json* d = r.find("domain")) {
        Reader rd(*d, "domain");
        c.domain = read_domain(rd, "domain", c.domain);
        rd.finish();
    }
    if (const json* mp = r.find("model")) {
        Reader rm(*mp, "model");
        c.base.eps = rm.number("eps", c.base.eps);
        c.base.lambda = rm.number("lambda", c.base.lambda);
        c.h_ex = rm.optional_number("h_ex");
        rm.finish();
        require(c.base.eps > 0 && c.base.eps < 1, "model.eps", "must lie in (0, 1)");
        require(c.base.lambda > 0, "model.lambda", "must be positive");
        require(!c.h_ex || *c.h_ex >= 0, "model.h_ex", "must be nonnegative");
    }
    c.h0 = r.number("h0", c.h0);
    require(c.h0 >= 0, "h0", "must be nonnegative");
    if (const json* s = r.find("schedule")) {
        if (!s->is_array()) throw ConfigError("schedule", "expected an array of {eps, N}");
        for (std::size_t k = 0; k < s->size(); ++k) {
            std::string path = "schedule[" + std::to_string(k) + "]";
            Reader rp((*s)[k], path);
            SchedulePoint pt;
            pt.eps = rp.number("eps", NaN);
            pt.N = int(rp.integer("N", 0));
            rp.finish();
            require(pt.eps > 0 && pt.eps < 1, path + ".eps", "must lie in (0, 1)");
            require(pt.N >= 1, path + ".N", "must be at least 1");
            c.schedule.push_back(pt);
        }
    }
    c.out_dir = r.string("out", c.out_dir.string());
    long long seed = r.integer("seed", (long long)c.seed);
    require(seed >= 0, "seed", "must be nonnegative");
    c.seed = std::uint64_t(seed);
    c.resolution_scale = r.number("resolution_scale", c.resolution_scale);
    require(c.resolution_scale > 0, "resolution_scale", "must be positive");
    c.threads = int(r.integer("threads", c.threads));
    require(c.threads >= 0, "threads", "must be nonnegative");
    c.dump_fields = r.boolean("dump_fields", c.dump_fields);
    if (const json* s = r.find("solver")) {
        Reader rs(*s, "solver");
        read_ld_solver(rs, c.ld_solver, c.random_start_iters);
        rs.finish();
    }
    c.init = r.string("init", c.init);
    require(c.init == "random" || c.init == "meissner", "init", "expected \"random\" or \"meissner\"");
    if (const json* s = r.find("limit_solver")) {
        Reader rs(*s, "limit_solver");
        read_limit_solver(rs, c.limit_solver, c.limit_h_grid);
        rs.finish();
    }
    c.field = r.string("field", c.field);
    try {
        named_field(c.field);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("field", e.what());
    }
    if (const json* a = r.find("approx")) {
        Reader ra(*a, "approx");
        c.approx_eps = ra.number("eps", c.approx_eps);
        c.approx_m = int(ra.integer("m", c.approx_m));
        ra.finish();
        require(c.approx_eps > 0, "approx.eps", "must be positive");
        require(c.approx_m >= 0, "approx.m", "must be nonnegative (0 selects the inradius)");
    }
    c.input = r.string("input", c.input.string());
    r.finish();
    if (c.mode == Mode::gamma_sweep) {
        if (c.schedule.empty()) c.schedule = default_schedule();
        validate_sweep(c.schedule, c.domain.L);
    }
    if (c.mode == Mode::diagnose) require(!c.input.empty(), "input", "diagnose needs the directory of a state dump");
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("", "cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        // e.what() carries the line and column.
        throw ConfigError("", path.string() + ": " + e.what());
    }
    return parse_config(j);
}

json domain_to_json(const DomainSpec& s) {
    return {{"shape", s.shape == Shape::disk ? "disk" : "rectangle"},
            {"radius", s.radius},
            {"width", s.width},
            {"height", s.height},
            {"h_grid", s.h_grid},
            {"L", s.L},
            {"N", s.N},
            {"R_box", s.R_box},
            {"h_box", s.h_box},
            {"z_cells", s.z_cells},
            {"growth", s.growth}};
}

DomainSpec domain_from_json(const json& j) {
    Reader r(j, "domain");
    DomainSpec s = read_domain(r, "domain", DomainSpec{});
    r.finish();
    return s;
}

json config_to_json(const ExperimentConfig& c) {
    json sched = json::array();
    for (const SchedulePoint& p : c.schedule) sched.push_back({{"eps", p.eps}, {"N", p.N}});
    json model = {{"eps", c.base.eps}, {"lambda", c.base.lambda}};
    if (c.h_ex) model["h_ex"] = *c.h_ex;
    const SolveOptions& o = c.ld_solver;
    const SolveOptions& l = c.limit_solver;
    return {{"mode", mode_name(c.mode)},
            {"domain", domain_to_json(c.domain)},
            {"model", model},
            {"h0", c.h0},
            {"schedule", sched},
            {"out", c.out_dir.string()},
            {"seed", c.seed},
            {"resolution_scale", c.resolution_scale},
            {"dump_fields", c.dump_fields},
            {"solver",
             {{"max_iters", o.max_iters},
              {"grad_tol", o.grad_tol},
              {"energy_tol", o.energy_tol},
              {"step_rule", o.step_rule == StepRule::fixed ? "fixed" : "bb"},
              {"fixed_step", o.fixed_step},
              {"coulomb", o.coulomb},
              {"random_start_iters", c.random_start_iters}}},
            {"init", c.init},
            {"limit_solver",
             {{"pd_iters", l.pd_iters},
              {"outer_iters", l.outer_iters},
              {"gap_tol", l.gap_tol},
              {"cg_tol", l.cg_tol},
              {"pd_sigma", l.pd_sigma},
              {"pd_tau", l.pd_tau},
              {"h_grid", c.limit_h_grid}}},
            {"field", c.field},
            {"approx", {{"eps", c.approx_eps}, {"m", c.approx_m}}},
            {"input", c.input.string()}};
}

DomainSpec point_spec(const ExperimentConfig& c, const SchedulePoint& pt) {
    DomainSpec s = c.domain;
    s.N = pt.N;
    const double h = s.h_grid > 0 ? s.h_grid : pt.eps / 3.0;
    s.h_grid = h * c.resolution_scale;
    return s;
}

ModelParams point_params(const ExperimentConfig& c, const SchedulePoint& pt) {
    ModelParams p = c.base;
    p.eps = pt.eps;
    p.h0 = c.h0;
    p.h_ex = c.h_ex ? *c.h_ex : c.h0 * log_eps(pt.eps);
    return p;
}

PlanarField named_field(const std::string& name) {
    using P = std::pair<double, double>;
    if (name == "rotating") return [](double x, double y, double) { return P{-0.5 * y, 0.5 * x}; };
    if (name == "zero") return [](double, double, double) { return P{0.0, 0.0}; };
    if (name == "gradient") return [](double x, double y, double) { return P{0.5 * y, 0.5 * x}; };
    if (name == "shear") return [](double, double y, double) { return P{y, 0.0}; };
    throw std::invalid_argument("unknown field \"" + name + "\" (rotating, zero, gradient, shear)");
}

// ---------------------------------------------------------------------------
// Output.

std::string format_number(double x) {
    if (std::isnan(x)) return "";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : cols_(header.size()) {
    for (const std::string& h : header) *this << h;
    end_row();
}

void CsvWriter::sep() {
    if (col_ > 0) buf_ += ',';
    ++col_;
}

CsvWriter& CsvWriter::operator<<(double x) {
    sep();
    buf_ += format_number(x);
    return *this;
}

CsvWriter& CsvWriter::operator<<(int x) {
    sep();
    buf_ += std::to_string(x);
    return *this;
}

CsvWriter& CsvWriter::operator<<(bool x) {
    sep();
    buf_ += x ? "true" : "false";
    return *this;
}

CsvWriter& CsvWriter::operator<<(const std::string& x) {
    sep();
    if (x.find_first_of(",\"\r\n") == std::string::npos) {
        buf_ += x;
        return *this;
    }
    buf_ += '"';
    for (char ch : x) {
        if (ch == '"') buf_ += '"';
        buf_ += ch;
    }
    buf_ += '"';
    return *this;
}

void CsvWriter::end_row() {
    if (col_ != cols_) throw std::logic_error("CSV row has " + std::to_string(col_) + " fields, expected " +
                                              std::to_string(cols_));
    buf_ += "\r\n";
    col_ = 0;
}

void CsvWriter::save(const fs::path& path) const { write_text(path, buf_); }

void dump_field(const fs::path& stem, const std::vector<double>& data, const std::vector<std::size_t>& shape,
                const json& meta) {
    std::size_t count = 1;
    for (std::size_t n : shape) count *= n;
    if (count != data.size()) throw std::invalid_argument("field shape does not match its data");
    fs::path bin = stem.string() + ".bin", side = stem.string() + ".json";
    if (bin.has_parent_path()) fs::create_directories(bin.parent_path());
    std::ofstream f(bin, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + bin.string());
    if constexpr (std::endian::native == std::endian::little) {
        f.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size() * sizeof(double)));
    } else {
        for (double x : data) {
            auto bits = __builtin_bswap64(std::bit_cast<std::uint64_t>(x));
            f.write(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
    }
    json j = meta.is_object() ? meta : json::object();
    j["file"] = bin.filename().string();
    j["dtype"] = "float64";
    j["byte_order"] = "little";
    j["order"] = "row-major";
    j["shape"] = shape;
    write_json(side, j);
}

LoadedField load_field(const fs::path& stem) {
    LoadedField out;
    std::ifstream side(stem.string() + ".json");
    if (!side) throw std::runtime_error("cannot open " + stem.string() + ".json");
    out.meta = json::parse(side);
    if (out.meta.value("dtype", "") != "float64" || out.meta.value("byte_order", "") != "little")
        throw std::runtime_error(stem.string() + ": expected little-endian float64");
    out.shape = out.meta.at("shape").get<std::vector<std::size_t>>();
    std::size_t count = 1;
    for (std::size_t n : out.shape) count *= n;
    out.data.resize(count);
    std::ifstream f(stem.string() + ".bin", std::ios::binary);
    f.read(reinterpret_cast<char*>(out.data.data()), std::streamsize(count * sizeof(double)));
    if (!f || f.peek() != std::char_traits<char>::eof())
        throw std::runtime_error(stem.string() + ".bin: size does not match its shape");
    if constexpr (std::endian::native != std::endian::little)
        for (double& x : out.data) x = std::bit_cast<double>(__builtin_bswap64(std::bit_cast<std::uint64_t>(x)));
    return out;
}

void dump_state(const fs::path& dir, const Domain& d, const ModelParams& p, const OrderParameterStack& u,
                const MagneticPotential& A) {
    const LayerGrid& g = d.layer;
    const BoxGrid& b = d.box;
    std::vector<double> uu;
    uu.reserve(u.u.size() * g.n_nodes() * 2);
    for (const auto& layer : u.u)
        for (cplx z : layer) {
            uu.push_back(z.real());
            uu.push_back(z.imag());
        }
    using S = std::size_t;
    dump_field(dir / "u", uu, {u.u.size(), S(g.ny), S(g.nx), 2});
    dump_field(dir / "A1", A.a1, {S(b.nz), S(b.ny), S(b.nx - 1)});
    dump_field(dir / "A2", A.a2, {S(b.nz), S(b.ny - 1), S(b.nx)});
    dump_field(dir / "A3", A.a3, {S(b.nz - 1), S(b.ny), S(b.nx)});
    write_json(dir / "state.json", {{"domain", domain_to_json(d.spec)},
                                    {"model", params_json(p)},
                                    {"A_h_ex", A.h_ex},
                                    {"grid", grid_json(d)}});
}

LoadedState load_state(const fs::path& dir) {
    std::ifstream f(dir / "state.json");
    if (!f) throw std::runtime_error("cannot open " + (dir / "state.json").string());
    json j = json::parse(f);
    LoadedState s;
    s.domain = build_domain(domain_from_json(j.at("domain")));
    const json& m = j.at("model");
    s.params.eps = m.at("eps").get<double>();
    s.params.lambda = m.at("lambda").get<double>();
    s.params.h_ex = m.at("h_ex").get<double>();
    s.params.h0 = m.at("h0").get<double>();
    const LayerGrid& g = s.domain.layer;
    LoadedField u = load_field(dir / "u");
    if (u.shape.size() != 4 || u.shape[1] != std::size_t(g.ny) || u.shape[2] != std::size_t(g.nx) ||
        u.shape[0] != std::size_t(s.domain.N() + 1))
        throw std::runtime_error("u dump does not match the domain");
    s.u.u.assign(u.shape[0], std::vector<cplx>(g.n_nodes()));
    for (std::size_t n = 0, k = 0; n < u.shape[0]; ++n)
        for (std::size_t q = 0; q < g.n_nodes(); ++q, k += 2) s.u.u[n][q] = {u.data[k], u.data[k + 1]};
    s.A.a1 = load_field(dir / "A1").data;
    s.A.a2 = load_field(dir / "A2").data;
    s.A.a3 = load_field(dir / "A3").data;
    s.A.h_ex = j.at("A_h_ex").get<double>();
    const BoxGrid& b = s.domain.box;
    if (s.A.a1.size() != b.n_ex() || s.A.a2.size() != b.n_ey() || s.A.a3.size() != b.n_ez())
        throw std::runtime_error("A dump does not match the domain");
    return s;
}

std::string svg_plot(const std::vector<Curve>& curves, const std::string& xlabel, const std::string& ylabel) {
    const double W = 640, H = 420, ml = 70, mr = 160, mt = 20, mb = 50;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const Curve& c : curves)
        for (std::size_t i = 0; i < c.x.size(); ++i) {
            if (!std::isfinite(c.x[i]) || !std::isfinite(c.y[i])) continue;
            x0 = std::min(x0, c.x[i]);
            x1 = std::max(x1, c.x[i]);
            y0 = std::min(y0, c.y[i]);
            y1 = std::max(y1, c.y[i]);
        }
    if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto X = [&](double x) { return ml + (x - x0) / (x1 - x0) * (W - ml - mr); };
    auto Y = [&](double y) { return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb); };
    auto esc = [](const std::string& s) {
        std::string o;
        for (char ch : s) {
            if (ch == '<') o += "&lt;";
            else if (ch == '>') o += "&gt;";
            else if (ch == '&') o += "&amp;";
            else o += ch;
        }
        return o;
    };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4g", v);
        return std::string(buf);
    };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
      << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<g stroke=\"black\" fill=\"none\"><rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << W - ml - mr
      << "\" height=\"" << H - mt - mb << "\"/></g>\n";
    for (int t = 0; t <= 4; ++t) {
        double xv = x0 + (x1 - x0) * t / 4, yv = y0 + (y1 - y0) * t / 4;
        o << "<line x1=\"" << X(xv) << "\" y1=\"" << H - mb << "\" x2=\"" << X(xv) << "\" y2=\"" << H - mb + 5
          << "\" stroke=\"black\"/><text x=\"" << X(xv) << "\" y=\"" << H - mb + 18
          << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
        o << "<line x1=\"" << ml - 5 << "\" y1=\"" << Y(yv) << "\" x2=\"" << ml << "\" y2=\"" << Y(yv)
          << "\" stroke=\"black\"/><text x=\"" << ml - 8 << "\" y=\"" << Y(yv) + 4 << "\" text-anchor=\"end\">"
          << num(yv) << "</text>\n";
    }
    o << "<text x=\"" << ml + (W - ml - mr) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">"
      << esc(xlabel) << "</text>\n";
    o << "<text transform=\"translate(16," << mt + (H - mt - mb) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << esc(ylabel) << "</text>\n";
    for (std::size_t c = 0; c < curves.size(); ++c) {
        const char* col = colors[c % 6];
        o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < curves[c].x.size(); ++i)
            if (std::isfinite(curves[c].y[i])) o << X(curves[c].x[i]) << ',' << Y(curves[c].y[i]) << ' ';
        o << "\"/>\n";
        for (std::size_t i = 0; i < curves[c].x.size(); ++i)
            if (std::isfinite(curves[c].y[i]))
                o << "<circle cx=\"" << X(curves[c].x[i]) << "\" cy=\"" << Y(curves[c].y[i]) << "\" r=\"3\" fill=\""
                  << col << "\"/>\n";
        double ly = mt + 15 + 18 * double(c);
        o << "<line x1=\"" << W - mr + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - mr + 30 << "\" y2=\"" << ly
          << "\" stroke=\"" << col << "\" stroke-width=\"2\"/><text x=\"" << W - mr + 35 << "\" y=\"" << ly + 4
          << "\">" << esc(curves[c].label) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

// ---------------------------------------------------------------------------
// Runs.

RunOutcome run_minimize_ld(const ExperimentConfig& c, const Logger& log) {
    SchedulePoint pt{c.base.eps, c.domain.N};
    Domain d = build_domain(point_spec(c, pt));
    ModelParams p = point_params(c, pt);
    emit(log, "minimize-ld: eps " + fmt(p.eps) + ", h_ex " + fmt(p.h_ex) + ", h " +
                  fmt(d.layer.h) + ", " + std::to_string(d.box.n_nodes()) + " box nodes");
    LDState init;
    if (c.init == "meissner") {
        init.u = constant_order_parameter(d, {1.0, 0.0});
        init.A = applied_potential(d, p.h_ex);
    } else {
        init = random_state(d, p, c.seed);
    }
    LDResult r = minimize_ld(d, init, p, c.ld_solver);
    EnergyBreakdown E = ld_energy(d, r.state.u, r.state.A, p);
    ScaledObservables obs = scaled_observables(d, r.state.u, r.state.A, p);
    VortexMeasure vm = detect_measure(d, r.state.u, p.eps);
    ELResidual el = el_residual(d, r.state.u, r.state.A, p);

    RunOutcome out;
    out.converged = r.report.converged;
    out.summary = {{"mode", "minimize-ld"},
                   {"model", params_json(p)},
                   {"domain", domain_to_json(d.spec)},
                   {"grid", grid_json(d)},
                   {"report", report_json(r.report)},
                   {"energy", energy_json(E)},
                   {"scaled", observables_json(obs)},
                   {"vortices", vm.entries.size()},
                   {"el_residual",
                    {{"gl", el.gl.scaled}, {"neumann", el.neumann.scaled}, {"ampere", el.ampere.scaled},
                     {"worst", el.worst_scaled()}}}};
    write_json(c.out_dir / "summary.json", out.summary);
    write_history_csv((c.out_dir / "history.csv").string(), r.report);
    write_vortex_csv((c.out_dir / "vortices.csv").string(), vm);
    if (c.dump_fields) dump_state(c.out_dir / "fields", d, p, r.state.u, r.state.A);
    emit(log, "energy " + fmt(E.total) + " after " + std::to_string(r.report.iterations) +
                  " iterations (" + r.report.stop_reason + ")");
    return out;
}

RunOutcome run_minimize_limit(const ExperimentConfig& c, const Logger& log) {
    DomainSpec s = c.domain;
    s.h_grid = (s.h_grid > 0 ? s.h_grid : c.limit_h_grid) * c.resolution_scale;
    Domain d = build_domain(s);
    emit(log, "minimize-limit: h0 " + fmt(c.h0) + ", h " + fmt(d.layer.h));
    LimitResult r = minimize_limit(d, c.h0, c.limit_solver);
    RunOutcome out;
    out.converged = r.report.converged;
    out.summary = {{"mode", "minimize-limit"},
                   {"h0", c.h0},
                   {"domain", domain_to_json(d.spec)},
                   {"grid", grid_json(d)},
                   {"report", report_json(r.report)},
                   {"value",
                    {{"trace_term", r.value.trace_term},
                     {"tv_term", r.value.tv_term},
                     {"magnetic", r.value.magnetic},
                     {"total", r.value.total}}}};
    write_json(c.out_dir / "summary.json", out.summary);
    write_history_csv((c.out_dir / "history.csv").string(), r.report);
    if (c.dump_fields) {
        dump_stack(c.out_dir / "fields" / "v", d.layer, r.v);
        const BoxGrid& b = d.box;
        using S = std::size_t;
        dump_field(c.out_dir / "fields" / "A1", r.A.a1, {S(b.nz), S(b.ny), S(b.nx - 1)});
        dump_field(c.out_dir / "fields" / "A2", r.A.a2, {S(b.nz), S(b.ny - 1), S(b.nx)});
        dump_field(c.out_dir / "fields" / "A3", r.A.a3, {S(b.nz - 1), S(b.ny), S(b.nx)});
    }
    emit(log, "value " + fmt(r.value.total) + ", gap " + fmt(r.report.gap));
    return out;
}

RunOutcome run_recover(const ExperimentConfig& c, const Logger& log) {
    SchedulePoint pt{c.base.eps, c.domain.N};
    Domain d = build_domain(point_spec(c, pt));
    ModelParams p = point_params(c, pt);
    PlanarField v = named_field(c.field);
    VectorField2DStack vs = cell_stack(d, v);
    CGResult cg;
    MagneticPotential A0 = solve_limit_potential(d, vs, c.h0, nullptr, c.limit_solver.cg_tol, &cg);
    LimitBreakdown G = limit_energy(d, vs, A0, c.h0);
    emit(log, "recover: field " + c.field + ", eps " + fmt(p.eps) + ", G(v, A0) " +
                  fmt(G.total));
    RecoveryState rec = build_recovery(d, v, p, A0, c.h0);
    EnergyBreakdown E = ld_energy(d, rec.u, rec.A, p);
    const double L2 = log_eps(p.eps) * log_eps(p.eps);
    const Placement& pl = rec.placement;
    RunOutcome out;
    out.converged = cg.converged;
    out.summary = {{"mode", "recover"},
                   {"field", c.field},
                   {"model", params_json(p)},
                   {"domain", domain_to_json(d.spec)},
                   {"grid", grid_json(d)},
                   {"energy", energy_json(E)},
                   {"scaled_recovery", E.total / L2},
                   {"limit_value", G.total},
                   {"gap", E.total / L2 - G.total},
                   {"placement",
                    {{"vortices", pl.measure.entries.size()},
                     {"delta", pl.delta},
                     {"c0", pl.c0},
                     {"w_inf", pl.w_inf},
                     {"required_separation", pl.required_separation},
                     {"min_separation", pl.min_separation},
                     {"min_boundary_distance", pl.min_boundary_distance},
                     {"mass", pl.measure.total_mass()}}}};
    write_json(c.out_dir / "summary.json", out.summary);
    write_vortex_csv((c.out_dir / "vortices.csv").string(), pl.measure);
    if (c.dump_fields) dump_state(c.out_dir / "fields", d, p, rec.u, rec.A);
    emit(log, "scaled recovery energy " + fmt(E.total / L2) + " with " +
                  std::to_string(pl.measure.entries.size()) + " vortices");
    return out;
}

RunOutcome run_diagnose(const ExperimentConfig& c, const Logger& log) {
    LoadedState s = load_state(c.input);
    const Domain& d = s.domain;
    EnergyBreakdown E = ld_energy(d, s.u, s.A, s.params);
    ScaledObservables obs = scaled_observables(d, s.u, s.A, s.params);
    VortexMeasure vm = detect_measure(d, s.u, s.params.eps);
    ELResidual el = el_residual(d, s.u, s.A, s.params);
    RunOutcome out;
    out.summary = {{"mode", "diagnose"},
                   {"input", c.input.string()},
                   {"model", params_json(s.params)},
                   {"grid", grid_json(d)},
                   {"energy", energy_json(E)},
                   {"scaled", observables_json(obs)},
                   {"vortices", vm.entries.size()},
                   {"max_modulus", max_modulus(d, s.u)},
                   {"el_residual",
                    {{"gl", el.gl.scaled}, {"neumann", el.neumann.scaled}, {"ampere", el.ampere.scaled},
                     {"worst", el.worst_scaled()}}}};
    write_json(c.out_dir / "diagnose.json", out.summary);
    write_vortex_csv((c.out_dir / "vortices.csv").string(), vm);
    emit(log, "diagnose: energy " + fmt(E.total) + ", " + std::to_string(vm.entries.size()) +
                  " vortices");
    return out;
}

RunOutcome run_approx_check(const ExperimentConfig& c, const Logger& log) {
    SchedulePoint pt{c.base.eps, c.domain.N};
    Domain d = build_domain(point_spec(c, pt));
    PlanarField v = named_field(c.field);
    VectorField2DStack vs = layer_stack(d, v);
    MollifyResult m = mollify_approx(d.spec, d.layer, vs, c.approx_eps, c.approx_m);
    const double tv = tv_measure(d.layer, vs), tv_m = tv_measure(d.layer, m.v);
    // Reflection of the field across x2 = 0 and its strip mass.
    auto [t1, t2] = sample_edge_field(d.layer, reflect_extend(v), 0.5 * d.spec.L);
    json strips = json::array();
    for (double w : {0.2, 0.1, 0.05})
        strips.push_back({{"width", w}, {"mass", strip_mass(d.layer, t1, t2, w)}});
    RunOutcome out;
    out.converged = m.met;
    out.summary = {{"mode", "approx-check"},
                   {"field", c.field},
                   {"domain", domain_to_json(d.spec)},
                   {"requested", c.approx_eps},
                   {"l2_error", m.l2_error},
                   {"met", m.met},
                   {"achievable", m.met ? json(nullptr) : json(m.achievable)},
                   {"mollified_shells", m.mollified_shells},
                   {"radius", m.radius},
                   {"shell_error", m.shell_error},
                   {"commutator_error", m.commutator_error},
                   {"tv", tv},
                   {"tv_mollified", tv_m},
                   {"strip_mass", strips}};
    write_json(c.out_dir / "summary.json", out.summary);
    if (c.dump_fields) dump_stack(c.out_dir / "fields" / "v_eps", d.layer, m.v);
    emit(log, "approx-check: L2 error " + fmt(m.l2_error) + ", TV " + fmt(tv) + " -> " +
                  fmt(tv_m));
    return out;
}

bool SweepReport::all_converged() const {
    return std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.converged; });
}

std::string sweep_csv(const SweepReport& r) {
    CsvWriter w({"eps", "s", "s_ln_eps", "scaled_ld_min", "scaled_recovery", "limit_value", "josephson_scaled",
                 "trace_estimate", "jacobian_h-1_cauchy", "N", "recovery_upper", "gap", "josephson_bound",
                 "slab_trace_ratio", "converged", "out_of_theory", "n_vortices", "iterations", "grad_norm",
                 "start"});
    for (const SweepRow& x : r.rows) {
        w << x.eps << x.s << x.s_ln_eps << x.scaled_ld_min << x.scaled_recovery << x.limit_value
          << x.josephson_scaled << x.trace_estimate << x.jacobian_cauchy << x.N << x.recovery_upper << x.gap
          << x.josephson_bound << x.slab_trace_ratio << x.converged << x.out_of_theory << x.n_vortices
          << x.iterations << x.grad_norm << x.start;
        w.end_row();
    }
    return w.str();
}

SweepReport run_gamma_sweep(const ExperimentConfig& c, const Logger& log) {
    std::vector<SchedulePoint> sched = c.schedule.empty() ? default_schedule() : c.schedule;
    validate_sweep(sched, c.domain.L);
    SweepReport rep;

    DomainSpec ls = c.domain;
    ls.N = sched.front().N;
    ls.h_grid = c.limit_h_grid * c.resolution_scale;
    Domain ref = build_domain(ls);
    emit(log, "gamma-sweep: limit problem on h " + fmt(ref.layer.h));
    LimitResult lim = minimize_limit(ref, c.h0, c.limit_solver);
    rep.limit_value = lim.value.total;
    rep.limit_report = lim.report;

    const PlanarField v = named_field(c.field);
    Vec prev_jac;
    for (std::size_t k = 0; k < sched.size(); ++k) {
        const SchedulePoint& pt = sched[k];
        Domain d = build_domain(point_spec(c, pt));
        ModelParams p = point_params(c, pt);
        const double le = log_eps(p.eps), L2 = le * le;
        SweepRow row;
        row.eps = p.eps;
        row.N = pt.N;
        row.s = d.s();
        row.s_ln_eps = d.s() * le;
        row.out_of_theory = d.s() < p.eps;
        row.limit_value = rep.limit_value;
        emit(log, "point " + std::to_string(k + 1) + "/" + std::to_string(sched.size()) + ": eps " +
                      fmt(p.eps) + ", N " + std::to_string(pt.N) + ", h " + fmt(d.layer.h) +
                      ", " + std::to_string(d.box.n_nodes()) + " box nodes");

        VectorField2DStack vs = cell_stack(d, v);
        MagneticPotential A0 = solve_limit_potential(d, vs, c.h0, nullptr, c.limit_solver.cg_tol);
        row.recovery_upper = limit_energy(d, vs, A0, c.h0).total;
        RecoveryState rec = build_recovery(d, v, p, A0, c.h0);
        row.scaled_recovery = ld_energy(d, rec.u, rec.A, p).total / L2;
        row.gap = row.scaled_recovery - row.recovery_upper;

        LDResult best = minimize_ld(d, LDState{rec.u, rec.A}, p, c.ld_solver);
        row.start = "warm";
        if (c.random_start_iters > 0) {
            SolveOptions o = c.ld_solver;
            o.max_iters = std::min(o.max_iters, c.random_start_iters);
            LDResult r = minimize_ld(d, random_state(d, p, c.seed + k), p, o);
            if (r.report.energy < best.report.energy) {
                best = std::move(r);
                row.start = "random";
            }
        }
        const SolveReport& sr = best.report;
        row.scaled_ld_min = sr.energy / L2;
        row.converged = sr.converged;
        row.iterations = sr.iterations;
        row.grad_norm = sr.grad_norm;

        ScaledObservables obs = scaled_observables(d, best.state.u, best.state.A, p);
        row.josephson_scaled = obs.josephson;
        row.josephson_bound = 2.0 * d.spec.L * d.spec.area() / (p.lambda * p.lambda * d.s() * L2);
        row.trace_estimate = obs.slab_trace;
        row.slab_trace_ratio = obs.slab_trace_ratio;
        row.n_vortices = int(detect_measure(d, best.state.u, p.eps).entries.size());

        Vec jac = integrated_jacobian(d, best.state.u, p.eps, ref.layer);
        row.jacobian_cauchy = prev_jac.empty() ? NaN : hminus1_distance(ref.layer, jac, prev_jac);
        prev_jac = std::move(jac);

        if (c.dump_fields) {
            fs::path dir = c.out_dir / ("point_" + std::to_string(k));
            dump_state(dir / "ld", d, p, best.state.u, best.state.A);
            dump_state(dir / "recovery", d, p, rec.u, rec.A);
        }
        emit(log, "  scaled LD min " + fmt(row.scaled_ld_min) + " (" + row.start + ", " +
                      std::to_string(sr.iterations) + " iterations, " + sr.stop_reason + "), recovery " +
                      fmt(row.scaled_recovery));
        rep.rows.push_back(row);
    }

    write_text(c.out_dir / "sweep.csv", sweep_csv(rep));
    json rows = json::array();
    Curve ld_c{"scaled LD min", {}, {}}, rec_c{"scaled recovery", {}, {}}, up_c{"G(v, A0)", {}, {}},
        lim_c{"limit value", {}, {}};
    for (const SweepRow& r : rep.rows) {
        rows.push_back({{"eps", r.eps},
                        {"N", r.N},
                        {"s", r.s},
                        {"scaled_ld_min", r.scaled_ld_min},
                        {"scaled_recovery", r.scaled_recovery},
                        {"recovery_upper", r.recovery_upper},
                        {"gap", r.gap},
                        {"converged", r.converged},
                        {"out_of_theory", r.out_of_theory},
                        {"start", r.start}});
        const double x = log_eps(r.eps);
        for (Curve* cv : {&ld_c, &rec_c, &up_c, &lim_c}) cv->x.push_back(x);
        ld_c.y.push_back(r.scaled_ld_min);
        rec_c.y.push_back(r.scaled_recovery);
        up_c.y.push_back(r.recovery_upper);
        lim_c.y.push_back(r.limit_value);
    }
    write_json(c.out_dir / "sweep.json", {{"config", config_to_json(c)},
                                          {"limit", report_json(rep.limit_report)},
                                          {"limit_value", rep.limit_value},
                                          {"rows", rows},
                                          {"all_converged", rep.all_converged()}});
    write_text(c.out_dir / "sweep.svg", svg_plot({ld_c, rec_c, up_c, lim_c}, "|ln eps|", "energy / |ln eps|^2"));
    return rep;
}

RunOutcome run_experiment(const ExperimentConfig& c, const Logger& log) {
#ifdef _OPENMP
    if (c.threads > 0) omp_set_num_threads(c.threads);
#endif
    fs::create_directories(c.out_dir);
    switch (c.mode) {
    case Mode::minimize_ld: return run_minimize_ld(c, log);
    case Mode::minimize_limit: return run_minimize_limit(c, log);
    case Mode::recover: return run_recover(c, log);
    case Mode::diagnose: return run_diagnose(c, log);
    case Mode::approx_check: return run_approx_check(c, log);
    case Mode::gamma_sweep: {
        SweepReport r = run_gamma_sweep(c, log);
        return {r.all_converged(), {{"mode", "gamma-sweep"}, {"rows", r.rows.size()}}};
    }
    }
    return {};
}

} // namespace ld
