#pragma once

// Scenario configuration: a JSON document with a schema_version field.
// Loading validates everything that can be checked without computation and
// reports every problem found, not just the first.

#include "qhydro/fieldexpr.hpp"
#include "qhydro/gravito.hpp"
#include "qhydro/helmholtz.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qhydro::cli {

inline constexpr int kSchemaVersion = 1;

enum class Scenario { PlaneWave, GaussianPacket, VortexLine, AbcFlow, ToroidalTube, SelfconsistentGas, Custom };

std::string_view to_string(Scenario s);
std::optional<Scenario> scenario_from_string(std::string_view name);
/// Comma-separated list of every scenario name.
std::string scenario_names();

/// Scenarios that build the superfluid control field B = lambda grad S and
/// therefore require a non-constant lambda.
bool is_superfluid_control(Scenario s);

/// A named expression together with its source text.
struct ExprSpec {
    std::string text;
    expr::Expr expr;
};

struct ProbeLine {
    std::string name;
    Vec3 from = Vec3::Zero();
    Vec3 to = Vec3::Zero();
    int samples = 2;
};

struct OutputConfig {
    bool vtk = true;
    bool csv = true;
    bool json = true;
    std::string directory = "qhydro_out";
    std::vector<ProbeLine> probes;
};

struct GravitoConfig {
    GravitoParams params;
    ScaleRecord scale;
};

struct ScenarioConfig {
    int schema_version = kSchemaVersion;
    std::string name;
    Scenario scenario = Scenario::PlaneWave;

    std::array<int, 3> dims{};
    std::array<double, 3> spacing{};
    std::array<double, 3> origin{};
    Boundary boundary = Boundary::Periodic;

    PhysicalParams physics;
    std::optional<double> lambda0;
    std::optional<ExprSpec> lambda_expr;
    std::optional<Vec3> k_vector;
    std::optional<double> k_wave;
    std::optional<std::array<ExprSpec, 3>> spin_expr;
    std::optional<ExprSpec> potential_expr;
    std::optional<ExprSpec> psi_re_expr;
    std::optional<ExprSpec> psi_im_expr;

    // scenario shape parameters; non-positive means "use the default"
    double width = 0.0;
    int winding = 1;
    Vec3 abc_coefficients = Vec3::Ones();

    SolverConfig solver;
    std::optional<GravitoConfig> gravito;
    OutputConfig outputs;

    /// The document as read, echoed into the report.
    std::string source_json;

    Grid grid() const { return Grid(dims, spacing, origin, boundary); }
};

/// Every validation failure found in a configuration. Each entry starts with
/// the error name (InvalidConfig, ParseError, ConstantLambdaForbidden, ...).
class ConfigInvalid : public Error {
public:
    explicit ConfigInvalid(std::vector<std::string> issues);

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    std::vector<std::string> issues_;
};

/// Parses and validates. Throws ConfigInvalid with the aggregated issue list.
ScenarioConfig parse_config(std::string_view json_text);
ScenarioConfig load_config(const std::string& path);

/// Resamples the grid to n points per axis over the same box. The box lower
/// edge is taken to be origin - h/2 on Dirichlet0 grids (cell-centred) and
/// origin on periodic grids.
void override_grid(ScenarioConfig& cfg, int n);

}  // namespace qhydro::cli
