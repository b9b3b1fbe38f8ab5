#include "qhydro/cli/config.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace qhydro::cli {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Scenario, std::string_view>, 7> kScenarioNames{{
    {Scenario::PlaneWave, "plane_wave"},
    {Scenario::GaussianPacket, "gaussian_packet"},
    {Scenario::VortexLine, "vortex_line"},
    {Scenario::AbcFlow, "abc_flow"},
    {Scenario::ToroidalTube, "toroidal_tube"},
    {Scenario::SelfconsistentGas, "selfconsistent_gas"},
    {Scenario::Custom, "custom"},
}};

// Bytes per grid point the pipeline may hold at once (about forty fields).
constexpr std::size_t kPipelineBytesPerPoint = 1024;

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) out += (out.empty() ? "" : "\n") + p;
    return out;
}

std::string error_detail(const Error& e) {
    const std::string what = e.what();
    const std::string prefix = std::string(to_string(e.code())) + ": ";
    return what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
}

// Reads typed values out of a JSON object while collecting every problem.
class Reader {
public:
    explicit Reader(std::vector<std::string>& issues) : issues_(issues) {}

    void fail(ErrorCode code, const std::string& path, const std::string& message) {
        issues_.push_back(std::string(to_string(code)) + ": " + path + ": " + message);
    }
    void fail(const std::string& path, const std::string& message) { fail(ErrorCode::InvalidConfig, path, message); }

    bool object(const json& j, const std::string& path) {
        if (j.is_object()) return true;
        fail(path, "expected an object");
        return false;
    }

    void allowed_keys(const json& j, const std::string& path, std::initializer_list<std::string_view> keys) {
        for (const auto& [key, _] : j.items()) {
            if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
                std::string list;
                for (auto k : keys) list += (list.empty() ? "" : ", ") + std::string(k);
                fail(join_path(path, key), "unknown key (allowed: " + list + ")");
            }
        }
    }

    std::optional<double> number(const json& j, const std::string& key, const std::string& path) {
        if (!j.contains(key)) return std::nullopt;
        const auto& v = j.at(key);
        if (!v.is_number()) {
            fail(join_path(path, key), "expected a number");
            return std::nullopt;
        }
        const double d = v.get<double>();
        if (!std::isfinite(d)) {
            fail(join_path(path, key), "must be finite");
            return std::nullopt;
        }
        return d;
    }

    std::optional<int> integer(const json& j, const std::string& key, const std::string& path) {
        if (!j.contains(key)) return std::nullopt;
        const auto& v = j.at(key);
        if (!v.is_number_integer()) {
            fail(join_path(path, key), "expected an integer");
            return std::nullopt;
        }
        return v.get<int>();
    }

    std::optional<bool> boolean(const json& j, const std::string& key, const std::string& path) {
        if (!j.contains(key)) return std::nullopt;
        const auto& v = j.at(key);
        if (!v.is_boolean()) {
            fail(join_path(path, key), "expected true or false");
            return std::nullopt;
        }
        return v.get<bool>();
    }

    std::optional<std::string> string(const json& j, const std::string& key, const std::string& path) {
        if (!j.contains(key)) return std::nullopt;
        const auto& v = j.at(key);
        if (!v.is_string()) {
            fail(join_path(path, key), "expected a string");
            return std::nullopt;
        }
        return v.get<std::string>();
    }

    std::optional<Vec3> vec3(const json& j, const std::string& key, const std::string& path) {
        if (!j.contains(key)) return std::nullopt;
        const auto& v = j.at(key);
        if (!v.is_array() || v.size() != 3 || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); })) {
            fail(join_path(path, key), "expected an array of 3 numbers");
            return std::nullopt;
        }
        return Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
    }

    /// A scalar broadcast to three axes, or an array of three.
    template <class T>
    std::optional<std::array<T, 3>> triple(const json& j, const std::string& key, const std::string& path) {
        if (!j.contains(key)) return std::nullopt;
        const auto& v = j.at(key);
        auto ok = [](const json& e) { return std::is_integral_v<T> ? e.is_number_integer() : e.is_number(); };
        if (ok(v)) return std::array<T, 3>{v.get<T>(), v.get<T>(), v.get<T>()};
        if (v.is_array() && v.size() == 3 && std::all_of(v.begin(), v.end(), ok)) {
            return std::array<T, 3>{v[0].get<T>(), v[1].get<T>(), v[2].get<T>()};
        }
        fail(join_path(path, key), std::is_integral_v<T> ? "expected an integer or an array of 3 integers"
                                                         : "expected a number or an array of 3 numbers");
        return std::nullopt;
    }

    std::optional<ExprSpec> expression(const json& j, const std::string& key, const std::string& path) {
        const auto text = string(j, key, path);
        if (!text) return std::nullopt;
        return expression_text(*text, join_path(path, key));
    }

    std::optional<ExprSpec> expression_text(const std::string& text, const std::string& where) {
        try {
            return ExprSpec{text, expr::parse(text)};
        } catch (const expr::ParseError& e) {
            fail(ErrorCode::ParseError, where, error_detail(e));
            return std::nullopt;
        }
    }

    template <class Fn>
    void check(const std::string& path, Fn&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            fail(e.code(), path, error_detail(e));
        }
    }

    static std::string join_path(const std::string& path, const std::string& key) {
        return path.empty() ? key : path + "." + key;
    }

private:
    std::vector<std::string>& issues_;
};

bool filename_safe(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_' || c == '-';
    });
}

void read_grid(Reader& rd, const json& root, ScenarioConfig& cfg) {
    if (!root.contains("grid")) {
        rd.fail("grid", "missing");
        return;
    }
    const auto& g = root.at("grid");
    if (!rd.object(g, "grid")) return;
    rd.allowed_keys(g, "grid", {"dims", "spacing", "origin", "boundary"});
    const auto dims = rd.triple<int>(g, "dims", "grid");
    const auto spacing = rd.triple<double>(g, "spacing", "grid");
    if (!g.contains("dims")) rd.fail("grid.dims", "missing");
    if (!g.contains("spacing")) rd.fail("grid.spacing", "missing");
    if (const auto origin = rd.vec3(g, "origin", "grid")) cfg.origin = {origin->x(), origin->y(), origin->z()};
    if (const auto b = rd.string(g, "boundary", "grid")) {
        if (*b == "periodic") {
            cfg.boundary = Boundary::Periodic;
        } else if (*b == "dirichlet0") {
            cfg.boundary = Boundary::Dirichlet0;
        } else {
            rd.fail("grid.boundary", "unknown boundary '" + *b + "' (expected one of: periodic, dirichlet0)");
        }
    }
    if (!dims || !spacing) return;
    cfg.dims = *dims;
    cfg.spacing = *spacing;
    rd.check("grid", [&] { cfg.grid().check_memory_budget(kPipelineBytesPerPoint); });
}

void read_physics(Reader& rd, const json& root, ScenarioConfig& cfg) {
    if (!root.contains("physics")) return;
    const auto& p = root.at("physics");
    if (!rd.object(p, "physics")) return;
    rd.allowed_keys(p, "physics",
                    {"hbar", "mass", "charge", "light_speed", "lambda0", "lambda_expr", "k_vector", "k_wave", "spin_expr"});
    if (auto v = rd.number(p, "hbar", "physics")) cfg.physics.hbar = *v;
    if (auto v = rd.number(p, "mass", "physics")) cfg.physics.mass = *v;
    if (auto v = rd.number(p, "charge", "physics")) cfg.physics.charge = *v;
    if (auto v = rd.number(p, "light_speed", "physics")) cfg.physics.light_speed = *v;
    rd.check("physics", [&] { cfg.physics.validate(); });
    cfg.lambda0 = rd.number(p, "lambda0", "physics");
    cfg.lambda_expr = rd.expression(p, "lambda_expr", "physics");
    cfg.k_vector = rd.vec3(p, "k_vector", "physics");
    cfg.k_wave = rd.number(p, "k_wave", "physics");
    if (p.contains("lambda0") && p.contains("lambda_expr")) {
        rd.fail("physics", "give either lambda0 or lambda_expr, not both");
    }
    if (p.contains("spin_expr")) {
        const auto& s = p.at("spin_expr");
        if (!s.is_array() || s.size() != 3 || !std::all_of(s.begin(), s.end(), [](const json& e) { return e.is_string(); })) {
            rd.fail("physics.spin_expr", "expected an array of 3 expression strings");
        } else {
            std::array<std::optional<ExprSpec>, 3> spin;
            for (int a = 0; a < 3; ++a) {
                spin[a] = rd.expression_text(s[a].get<std::string>(), "physics.spin_expr[" + std::to_string(a) + "]");
            }
            if (spin[0] && spin[1] && spin[2]) cfg.spin_expr = std::array<ExprSpec, 3>{*spin[0], *spin[1], *spin[2]};
        }
    }
}

void read_scenario_params(Reader& rd, const json& root, ScenarioConfig& cfg) {
    if (!root.contains("scenario_params")) return;
    const auto& s = root.at("scenario_params");
    if (!rd.object(s, "scenario_params")) return;
    rd.allowed_keys(s, "scenario_params", {"width", "winding", "abc"});
    if (auto v = rd.number(s, "width", "scenario_params")) {
        if (*v > 0) {
            cfg.width = *v;
        } else {
            rd.fail("scenario_params.width", "must be positive");
        }
    }
    if (auto v = rd.integer(s, "winding", "scenario_params")) cfg.winding = *v;
    if (auto v = rd.vec3(s, "abc", "scenario_params")) cfg.abc_coefficients = *v;
}

void read_solver(Reader& rd, const json& root, ScenarioConfig& cfg) {
    if (!root.contains("solver")) return;
    const auto& s = root.at("solver");
    if (!rd.object(s, "solver")) return;
    rd.allowed_keys(s, "solver", {"tol", "max_iter", "mixing", "eig_tol", "krylov_restart", "coulomb_projection"});
    if (auto v = rd.number(s, "tol", "solver")) cfg.solver.tol = *v;
    if (auto v = rd.integer(s, "max_iter", "solver")) cfg.solver.max_iter = *v;
    if (auto v = rd.number(s, "mixing", "solver")) cfg.solver.mixing = *v;
    if (auto v = rd.number(s, "eig_tol", "solver")) cfg.solver.eig_tol = *v;
    if (auto v = rd.integer(s, "krylov_restart", "solver")) cfg.solver.krylov_restart = *v;
    if (auto v = rd.boolean(s, "coulomb_projection", "solver")) cfg.solver.coulomb_projection = *v;
    rd.check("solver", [&] { cfg.solver.validate(); });
}

void read_gravito(Reader& rd, const json& root, ScenarioConfig& cfg) {
    if (!root.contains("gravito")) return;
    const auto& g = root.at("gravito");
    if (!rd.object(g, "gravito")) return;
    rd.allowed_keys(g, "gravito", {"G_newton", "c_SI", "Lambda_ratio", "kappa", "mass", "scale"});
    GravitoConfig gc;
    if (auto v = rd.number(g, "G_newton", "gravito")) gc.params.G_newton = *v;
    if (auto v = rd.number(g, "c_SI", "gravito")) gc.params.c_SI = *v;
    if (auto v = rd.number(g, "Lambda_ratio", "gravito")) gc.params.Lambda_ratio = *v;
    if (auto v = rd.number(g, "kappa", "gravito")) gc.params.kappa = *v;
    if (auto v = rd.number(g, "mass", "gravito")) gc.params.mass = *v;
    rd.check("gravito", [&] { gc.params.validate(); });
    if (g.contains("scale")) {
        const auto& s = g.at("scale");
        if (rd.object(s, "gravito.scale")) {
            rd.allowed_keys(s, "gravito.scale", {"length", "time", "mass"});
            if (auto v = rd.number(s, "length", "gravito.scale")) gc.scale.length = *v;
            if (auto v = rd.number(s, "time", "gravito.scale")) gc.scale.time = *v;
            if (auto v = rd.number(s, "mass", "gravito.scale")) gc.scale.mass = *v;
            rd.check("gravito.scale", [&] { gc.scale.validate(); });
        }
    }
    cfg.gravito = gc;
}

void read_outputs(Reader& rd, const json& root, ScenarioConfig& cfg) {
    if (!root.contains("outputs")) return;
    const auto& o = root.at("outputs");
    if (!rd.object(o, "outputs")) return;
    rd.allowed_keys(o, "outputs", {"formats", "directory", "probes"});
    if (o.contains("formats")) {
        const auto& f = o.at("formats");
        if (!f.is_array()) {
            rd.fail("outputs.formats", "expected an array drawn from vtk, csv, json");
        } else {
            cfg.outputs.vtk = cfg.outputs.csv = cfg.outputs.json = false;
            for (const auto& e : f) {
                const std::string s = e.is_string() ? e.get<std::string>() : e.dump();
                if (s == "vtk") {
                    cfg.outputs.vtk = true;
                } else if (s == "csv") {
                    cfg.outputs.csv = true;
                } else if (s == "json") {
                    cfg.outputs.json = true;
                } else {
                    rd.fail("outputs.formats", "unknown format " + s + " (expected one of: vtk, csv, json)");
                }
            }
        }
    }
    if (auto d = rd.string(o, "directory", "outputs")) {
        if (d->empty()) {
            rd.fail("outputs.directory", "must not be empty");
        } else {
            cfg.outputs.directory = *d;
        }
    }
    if (o.contains("probes")) {
        const auto& probes = o.at("probes");
        if (!probes.is_array()) {
            rd.fail("outputs.probes", "expected an array");
            return;
        }
        std::set<std::string> names;
        for (std::size_t i = 0; i < probes.size(); ++i) {
            const std::string path = "outputs.probes[" + std::to_string(i) + "]";
            const auto& p = probes[i];
            if (!rd.object(p, path)) continue;
            rd.allowed_keys(p, path, {"name", "from", "to", "samples"});
            ProbeLine line;
            line.name = rd.string(p, "name", path).value_or("probe" + std::to_string(i));
            if (!filename_safe(line.name)) rd.fail(path + ".name", "use letters, digits, '_' or '-'");
            if (!names.insert(line.name).second) rd.fail(path + ".name", "duplicate probe name '" + line.name + "'");
            const auto from = rd.vec3(p, "from", path);
            const auto to = rd.vec3(p, "to", path);
            if (!p.contains("from")) rd.fail(path + ".from", "missing");
            if (!p.contains("to")) rd.fail(path + ".to", "missing");
            line.samples = rd.integer(p, "samples", path).value_or(64);
            if (line.samples < 2) rd.fail(path + ".samples", "need at least 2 samples");
            if (from && to) {
                line.from = *from;
                line.to = *to;
                cfg.outputs.probes.push_back(line);
            }
        }
    }
}

void check_scenario_rules(Reader& rd, const json& root, ScenarioConfig& cfg) {
    const Scenario s = cfg.scenario;
    if (is_superfluid_control(s)) {
        if (cfg.lambda0) {
            rd.fail(ErrorCode::ConstantLambdaForbidden, "physics.lambda0",
                    "the control field lambda grad S needs a position-dependent lambda; give physics.lambda_expr");
        }
        if (cfg.lambda_expr && cfg.lambda_expr->expr.is_constant()) {
            rd.fail(ErrorCode::ConstantLambdaForbidden, "physics.lambda_expr",
                    "'" + cfg.lambda_expr->text + "' is constant; the control field lambda grad S needs a "
                    "position-dependent lambda");
        }
    }
    if (s == Scenario::AbcFlow || s == Scenario::SelfconsistentGas) {
        if (!cfg.lambda0 && !root.value("physics", json::object()).contains("lambda0")) {
            rd.fail("physics.lambda0", std::string("required by the ") + std::string(to_string(s)) + " scenario");
        }
        if (cfg.lambda_expr) {
            rd.fail("physics.lambda_expr", std::string("the ") + std::string(to_string(s)) +
                                               " scenario uses the constant physics.lambda0");
        }
    }
    if (s == Scenario::AbcFlow && cfg.lambda0 && *cfg.lambda0 == 0.0) {
        rd.fail("physics.lambda0", "the abc_flow eigenfield needs a non-zero lambda0");
    }
    if (s == Scenario::SelfconsistentGas && cfg.physics.charge == 0.0) {
        rd.fail(ErrorCode::ChargeZero, "physics.charge", "the self-consistent loop divides by the charge");
    }
    if (s == Scenario::Custom && !cfg.psi_re_expr) {
        rd.fail("psi_re_expr", "required by the custom scenario");
    }
    if (s != Scenario::Custom && (cfg.psi_re_expr || cfg.psi_im_expr)) {
        rd.fail("psi_re_expr", "wavefunction expressions are only read by the custom scenario");
    }
    if (cfg.spin_expr && !is_superfluid_control(s)) {
        rd.fail("physics.spin_expr", "the spin field only enters the superfluid control field");
    }
}

}  // namespace

std::string_view to_string(Scenario s) {
    for (const auto& [v, name] : kScenarioNames)
        if (v == s) return name;
    return "unknown";
}

std::optional<Scenario> scenario_from_string(std::string_view name) {
    for (const auto& [v, n] : kScenarioNames)
        if (n == name) return v;
    return std::nullopt;
}

std::string scenario_names() {
    std::string out;
    for (const auto& [_, name] : kScenarioNames) out += (out.empty() ? "" : ", ") + std::string(name);
    return out;
}

bool is_superfluid_control(Scenario s) {
    return s != Scenario::AbcFlow && s != Scenario::SelfconsistentGas;
}

ConfigInvalid::ConfigInvalid(std::vector<std::string> issues)
    : Error(ErrorCode::InvalidConfig, std::to_string(issues.size()) + " problem(s) in configuration\n" + join(issues)),
      issues_(std::move(issues)) {}

ScenarioConfig parse_config(std::string_view json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigInvalid({"InvalidConfig: syntax error at byte " + std::to_string(e.byte) + ": " + e.what()});
    }
    std::vector<std::string> issues;
    Reader rd(issues);
    ScenarioConfig cfg;
    if (!rd.object(root, "(document)")) throw ConfigInvalid(issues);
    cfg.source_json = root.dump();

    rd.allowed_keys(root, "", {"schema_version", "name", "scenario", "grid", "physics", "potential_expr", "psi_re_expr",
                               "psi_im_expr", "scenario_params", "solver", "gravito", "outputs"});
    if (const auto v = rd.integer(root, "schema_version", "")) {
        if (*v != kSchemaVersion) {
            rd.fail("schema_version", "unsupported version " + std::to_string(*v) + " (this build reads " +
                                          std::to_string(kSchemaVersion) + ")");
        }
    } else if (!root.contains("schema_version")) {
        rd.fail("schema_version", "missing");
    }

    bool scenario_known = false;
    if (const auto s = rd.string(root, "scenario", "")) {
        if (const auto sc = scenario_from_string(*s)) {
            cfg.scenario = *sc;
            scenario_known = true;
        } else {
            rd.fail("scenario", "unknown scenario '" + *s + "' (expected one of: " + scenario_names() + ")");
        }
    } else if (!root.contains("scenario")) {
        rd.fail("scenario", "missing (expected one of: " + scenario_names() + ")");
    }
    cfg.name = rd.string(root, "name", "").value_or(std::string(to_string(cfg.scenario)));

    read_grid(rd, root, cfg);
    read_physics(rd, root, cfg);
    cfg.potential_expr = rd.expression(root, "potential_expr", "");
    cfg.psi_re_expr = rd.expression(root, "psi_re_expr", "");
    cfg.psi_im_expr = rd.expression(root, "psi_im_expr", "");
    read_scenario_params(rd, root, cfg);
    read_solver(rd, root, cfg);
    read_gravito(rd, root, cfg);
    read_outputs(rd, root, cfg);
    if (scenario_known) check_scenario_rules(rd, root, cfg);

    if (!issues.empty()) throw ConfigInvalid(std::move(issues));
    return cfg;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigInvalid({"InvalidConfig: " + path + ": cannot open file"});
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void override_grid(ScenarioConfig& cfg, int n) {
    if (n < 8) throw ConfigInvalid({"InvalidGrid: --grid: need at least 8 points per axis"});
    const double edge_offset = cfg.boundary == Boundary::Dirichlet0 ? 0.5 : 0.0;
    for (int a = 0; a < 3; ++a) {
        const double length = cfg.dims[a] * cfg.spacing[a];
        const double lower = cfg.origin[a] - edge_offset * cfg.spacing[a];
        cfg.dims[a] = n;
        cfg.spacing[a] = length / n;
        cfg.origin[a] = lower + edge_offset * cfg.spacing[a];
    }
}

}  // namespace qhydro::cli
