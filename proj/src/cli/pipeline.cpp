#include "qhydro/cli/pipeline.hpp"

#include "qhydro/cli/app.hpp"
#include "qhydro/cli/field_io.hpp"
#include "qhydro/madelung.hpp"
#include "qhydro/nonradiating.hpp"
#include "qhydro/vortex_control.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <variant>

namespace qhydro::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json residual_json(const NormedResidual& r) { return {{"max", r.max}, {"l2", r.l2}}; }

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json complex_triple_json(const Eigen3c& e) {
    json out = json::array();
    for (const auto& z : e) out.push_back(json::array({z.real(), z.imag()}));
    return out;
}

/// Smallest box extent, used to size the default scenario shapes.
double box_length(const Grid& g) {
    return std::min({g.dims[0] * g.spacing[0], g.dims[1] * g.spacing[1], g.dims[2] * g.spacing[2]});
}

ScalarField evaluate(const ExprSpec& e, const Grid& g) { return expr::evaluate_on_grid(e.expr, g); }

// A saved output field, in the order it was produced.
struct NamedField {
    std::string name;
    std::variant<ScalarField, VectorField> field;
};

class Pipeline {
public:
    Pipeline(const ScenarioConfig& cfg, const RunOptions& opts, std::ostream& log)
        : cfg_(cfg), opts_(opts), log_(log), grid_(cfg.grid()) {}

    RunOutcome run();

private:
    template <class Fn>
    void stage(const std::string& name, Fn&& fn);

    void save(const std::string& name, ScalarField f) { fields_.push_back({name, std::move(f)}); }
    void save(const std::string& name, VectorField f) { fields_.push_back({name, std::move(f)}); }
    const ScalarField* scalar(const std::string& name) const;
    const VectorField* vector(const std::string& name) const;

    ComplexField initial_wavefunction() const;
    void madelung_stage(const ComplexField& psi);
    void control_stage();
    void abc_stage();
    void selfconsistent_stage();
    void radiation_stage(const VectorField& J, const LambdaField& lam, double k);
    void gravito_stage();
    void write_outputs();
    void write_report(RunOutcome& outcome);

    const ScenarioConfig& cfg_;
    const RunOptions& opts_;
    std::ostream& log_;
    Grid grid_;
    std::string timestamp_;

    json stages_ = json::array();
    json report_extra_ = json::object();
    std::vector<NamedField> fields_;
    std::optional<MadelungFields> madelung_;
    std::optional<LambdaField> lambda_;
    std::vector<std::string> written_;
};

template <class Fn>
void Pipeline::stage(const std::string& name, Fn&& fn) {
    json entry = {{"name", name}};
    const auto t0 = std::chrono::steady_clock::now();
    json summary = json::object();
    try {
        summary = fn();
    } catch (const Error& e) {
        entry["status"] = "failed";
        entry["error"] = std::string(to_string(e.code()));
        stages_.push_back(entry);
        log_ << "[" << name << "] failed: " << e.what() << '\n';
        throw;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    entry["status"] = "ok";
    entry["seconds"] = opts_.reproducible ? json(nullptr) : json(seconds);
    entry["residuals"] = summary;
    stages_.push_back(entry);

    log_ << "[" << name << "] ok";
    if (!opts_.reproducible) {
        char buf[32];
        std::snprintf(buf, sizeof buf, " %.3fs", seconds);
        log_ << buf;
    }
    for (const auto& [key, value] : summary.items()) {
        if (value.is_number() || value.is_boolean()) log_ << ' ' << key << '=' << value.dump();
    }
    log_ << '\n';
}

const ScalarField* Pipeline::scalar(const std::string& name) const {
    for (const auto& f : fields_)
        if (f.name == name) return std::get_if<ScalarField>(&f.field);
    return nullptr;
}

const VectorField* Pipeline::vector(const std::string& name) const {
    for (const auto& f : fields_)
        if (f.name == name) return std::get_if<VectorField>(&f.field);
    return nullptr;
}

ComplexField Pipeline::initial_wavefunction() const {
    const double L = box_length(grid_);
    const Vec3 k = cfg_.k_vector.value_or(Vec3(0, 0, 2 * kPi / (grid_.dims[2] * grid_.spacing[2])));
    switch (cfg_.scenario) {
        case Scenario::PlaneWave:
            return ComplexField::generate(grid_, [&](const Vec3& r) { return std::polar(1.0, k.dot(r)); });
        case Scenario::GaussianPacket: {
            const double w = cfg_.width > 0 ? cfg_.width : L / 8;
            return ComplexField::generate(grid_, [&](const Vec3& r) {
                return std::polar(std::exp(-r.squaredNorm() / (2 * w * w)), k.dot(r));
            });
        }
        case Scenario::VortexLine: {
            const double w = cfg_.width > 0 ? cfg_.width : L / 4;
            return ComplexField::generate(grid_, [&](const Vec3& r) {
                return Complex(r.x(), r.y()) * std::exp(-r.squaredNorm() / (2 * w * w));
            });
        }
        case Scenario::ToroidalTube: {
            const double major = 0.35 * L;
            const double Lambda = cfg_.gravito ? cfg_.gravito->params.Lambda_ratio : GravitoParams{}.Lambda_ratio;
            const double minor = Lambda * major;
            const int n = cfg_.winding;
            return ComplexField::generate(grid_, [&](const Vec3& r) {
                const double d = std::hypot(std::hypot(r.x(), r.y()) - major, r.z());
                if (d >= minor) return Complex(0, 0);
                const double c = std::cos(0.5 * kPi * d / minor);
                return std::polar(c, n * std::atan2(r.y(), r.x()));
            });
        }
        case Scenario::Custom: {
            const auto re = evaluate(*cfg_.psi_re_expr, grid_);
            const auto im = cfg_.psi_im_expr ? evaluate(*cfg_.psi_im_expr, grid_) : ScalarField(grid_);
            std::vector<Complex> v(grid_.size());
            for (std::size_t p = 0; p < v.size(); ++p) v[p] = Complex(re[p], im[p]);
            return ComplexField(grid_, std::move(v));
        }
        default:
            throw Error(ErrorCode::InvalidConfig, "scenario has no wavefunction");
    }
}

void Pipeline::madelung_stage(const ComplexField& psi) {
    stage("madelung", [&] {
        madelung_ = decompose(psi, cfg_.physics);
        const auto& m = *madelung_;
        const auto curlJ = curl(m.J);
        const auto clebsch = clebsch_vorticity(psi, cfg_.physics);
        const auto identity = vorticity_identity_residual(m);
        const double curl_norm = norm_l2(curlJ);
        save("density", m.R);
        save("current", m.J);
        save("velocity", m.u);
        save("vorticity", curlJ);
        return json{
            {"J_l2", norm_l2(m.J)},
            {"curl_J_max", norm_max(curlJ)},
            {"curl_J_l2", curl_norm},
            {"log_density_identity", residual_json(identity)},
            {"clebsch_minus_curl_l2", norm_l2(clebsch - curlJ)},
            {"density_floor", m.density_floor},
        };
    });
}

void Pipeline::control_stage() {
    if (!cfg_.lambda_expr) return;
    stage("control", [&] {
        lambda_.emplace(evaluate(*cfg_.lambda_expr, grid_));
        const auto& m = *madelung_;
        std::optional<SpinField> spin;
        if (cfg_.spin_expr) {
            const auto sx = evaluate((*cfg_.spin_expr)[0], grid_);
            const auto sy = evaluate((*cfg_.spin_expr)[1], grid_);
            const auto sz = evaluate((*cfg_.spin_expr)[2], grid_);
            std::vector<Vec3> s(grid_.size());
            for (std::size_t p = 0; p < s.size(); ++p) s[p] = Vec3(sx[p], sy[p], sz[p]);
            spin.emplace(VectorField(grid_, std::move(s)));
        }
        const auto B = superfluid_control_field(m.gradS, *lambda_, spin);
        std::optional<VectorField> k;
        if (cfg_.k_vector) k = VectorField::uniform(grid_, *cfg_.k_vector);
        const auto rep = check_lambda_constraints(*lambda_, m.J, k, ScalarField(grid_), m.gradS);
        save("lambda", lambda_->values());
        save("control_field", B);
        const json constraints = {
            {"solenoidal_J_residual", rep.solenoidal_J_residual},
            {"constraint12_residual", rep.constraint12_residual},
            {"constraint13_residual", rep.constraint13_residual},
            {"constraint14_residual", rep.constraint14_residual},
            {"constraint14_form", rep.constraint14_form == Constraint14Form::LogGradient ? "log_gradient"
                                                                                          : "lambda_weighted"},
            {"nonconstant_lambda_ok", rep.nonconstant_lambda_ok},
            {"beltrami_residual", rep.beltrami_residual},
            {"k_substituted_by_gradS", rep.k_substituted_by_gradS},
            {"k_nonuniform", rep.k_nonuniform},
            {"passed", rep.passed},
        };
        report_extra_["constraint_report"] = constraints;
        json out = constraints;
        out["B_max"] = norm_max(B);
        if (spin) out["spin_max_curl"] = spin->max_curl;
        return out;
    });
    if (cfg_.k_wave) radiation_stage(madelung_->J, *lambda_, *cfg_.k_wave);
}

void Pipeline::abc_stage() {
    const double lam0 = *cfg_.lambda0;
    const Vec3 c = cfg_.abc_coefficients;
    stage("abc_flow", [&] {
        const auto J = VectorField::generate(grid_, [&](const Vec3& r) {
            return Vec3(c.x() * std::sin(lam0 * r.z()) + c.z() * std::cos(lam0 * r.y()),
                        c.y() * std::sin(lam0 * r.x()) + c.x() * std::cos(lam0 * r.z()),
                        c.z() * std::sin(lam0 * r.y()) + c.y() * std::cos(lam0 * r.x()));
        });
        lambda_.emplace(LambdaField::constant(grid_, lam0));
        const auto belt = beltrami_residual(J, *lambda_);
        save("current", J);
        save("vorticity", curl(J));
        return json{{"J_l2", norm_l2(J)}, {"beltrami_residual", residual_json(belt)},
                    {"beltrami_relative", belt.l2 / std::max(norm_l2(J), 1e-300)}};
    });
    radiation_stage(*vector("current"), *lambda_, cfg_.k_wave.value_or(lam0));
}

void Pipeline::radiation_stage(const VectorField& J, const LambdaField& lam, double k) {
    stage("radiation", [&] {
        const auto rep = classify_nonradiating(J, lam, k);
        // eigenstructure sample at the strongest current
        std::size_t pmax = 0;
        for (std::size_t p = 0; p < J.size(); ++p)
            if (J[p].norm() > J[pmax].norm()) pmax = p;
        const json radiation = {
            {"k", k},
            {"condition22_residual", rep.condition22_residual},
            {"condition24_residual", rep.condition24_residual},
            {"J_norm", rep.J_norm},
            {"beta_min", rep.beta.size() ? *std::min_element(rep.beta.values().begin(), rep.beta.values().end()) : 0.0},
            {"beta_max", rep.beta.size() ? *std::max_element(rep.beta.values().begin(), rep.beta.values().end()) : 0.0},
            {"kernel_alignment", rep.kernel_alignment},
            {"flux_points", rep.flux_points},
            {"classified_nonradiating", rep.classified_nonradiating},
            {"classification_framing", RadiationReport::framing},
            {"eigen_sample",
             {{"point", vec_json(grid_.position(pmax))},
              {"computed", complex_triple_json(rep.eigen_branch[pmax])},
              {"claimed", complex_triple_json(rep.claimed_eigen_branch[pmax])}}},
            {"consistency_constant", consistency_constant(lam)},
        };
        report_extra_["radiation_report"] = radiation;
        return json{{"condition22_residual", rep.condition22_residual},
                    {"condition24_residual", rep.condition24_residual},
                    {"J_norm", rep.J_norm},
                    {"kernel_alignment", rep.kernel_alignment},
                    {"classified_nonradiating", rep.classified_nonradiating}};
    });
}

void Pipeline::selfconsistent_stage() {
    const double lam0 = *cfg_.lambda0;
    const auto U = cfg_.potential_expr ? evaluate(*cfg_.potential_expr, grid_) : ScalarField(grid_);
    save("potential", U);
    std::optional<ControlSolution> sol;
    stage("selfconsistent", [&] {
        try {
            sol = self_consistent_solve(U, lam0, cfg_.physics, cfg_.solver);
        } catch (const SolverDiverged& e) {
            report_extra_["failure_history"] = e.history();
            if (!e.suggestion().empty()) report_extra_["failure_suggestion"] = e.suggestion();
            throw;
        }
        json res = sol->final_residuals;
        return json{{"iterations", sol->iterations},
                    {"energy", sol->energy},
                    {"final_residuals", res},
                    {"fixed_point_history", sol->fixed_point_history},
                    {"energy_history", sol->energy_history}};
    });
    save("vector_potential", sol->A);
    save("magnetic_field", sol->B);
    save("external_current", sol->J_e);
    madelung_stage(sol->psi);
}

void Pipeline::gravito_stage() {
    const GravitoConfig gc = cfg_.gravito.value_or(GravitoConfig{});
    stage("gravito", [&] {
        const auto& p = gc.params;
        const auto& s = gc.scale;
        json out = {
            {"mu_G", gravitomagnetic_permeability(p)},
            {"ratio_form_coefficient", dipole_ratio_form(Vec3::Zero(), p).coefficient},
            {"approx_form_coefficient", dipole_approx_coefficient(p)},
        };
        if (madelung_) {
            // natural units to SI through the scale record
            const Grid si_grid(grid_.dims, {grid_.spacing[0] * s.length, grid_.spacing[1] * s.length,
                                            grid_.spacing[2] * s.length},
                               {grid_.origin[0] * s.length, grid_.origin[1] * s.length, grid_.origin[2] * s.length},
                               grid_.boundary);
            const double density_unit = s.mass / (s.length * s.length * s.length);
            std::vector<double> rho(grid_.size()), U(grid_.size(), 0.0);
            for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = madelung_->rho[i] * density_unit;
            if (const auto* u = scalar("potential")) {
                for (std::size_t i = 0; i < U.size(); ++i) U[i] = (*u)[i] * s.energy();
            } else if (cfg_.potential_expr) {
                const auto u = evaluate(*cfg_.potential_expr, grid_);
                for (std::size_t i = 0; i < U.size(); ++i) U[i] = u[i] * s.energy();
            }
            PhysicalParams si_params = cfg_.physics;
            si_params.hbar = cfg_.physics.hbar * s.action();
            si_params.mass = cfg_.physics.mass * s.mass;
            const ScalarField rho_si(si_grid, std::move(rho)), U_si(si_grid, std::move(U));
            const auto internal =
                dipole_internal_form(rho_si, U_si, p, si_params, madelung_->density_floor * density_unit);
            const double mc2 = si_params.mass * p.c_SI * p.c_SI;
            const auto approx = dipole_approx((1.0 / mc2) * gradient(U_si), p);
            const double qmax = norm_max(internal.quantum), umax = norm_max(internal.potential);
            out["internal_form_max"] = norm_max(internal.value);
            out["internal_quantum_max"] = qmax;
            out["internal_potential_max"] = umax;
            out["quantum_to_potential_ratio"] = umax > 0 ? json(qmax / umax) : json(nullptr);
            out["approx_form_max"] = norm_max(approx);
            save("gravitomagnetic_dipole", VectorField(grid_, std::vector<Vec3>(internal.value.values().begin(),
                                                                               internal.value.values().end())));
        }
        const VectorField* B = vector("control_field");
        if (!B) B = vector("magnetic_field");
        if (B) {
            const auto st = scalar_tensor_source(*B, VectorField(grid_), p);
            out["scalar_tensor_source_max"] = norm_max(st.source);
            out["scalar_tensor_fluctuation_scale"] = st.fluctuation_scale;
            out["scalar_tensor_units_note"] = ScalarTensorSource::units_note;
        }
        return out;
    });
}

void Pipeline::write_outputs() {
    const fs::path dir(opts_.out_dir);
    const std::string ts = opts_.reproducible ? std::string() : timestamp_;
    if (cfg_.outputs.vtk) {
        for (const auto& f : fields_) {
            const std::string file = f.name + ".vtk";
            std::visit([&](const auto& field) { write_field((dir / file).string(), f.name, field, field_title(f.name, ts)); },
                       f.field);
            written_.push_back(file);
        }
    }
    if (cfg_.outputs.csv) {
        std::vector<ProbeColumn> cols;
        for (const auto& f : fields_) {
            if (const auto* s = std::get_if<ScalarField>(&f.field)) cols.push_back({f.name, s, nullptr});
            if (const auto* v = std::get_if<VectorField>(&f.field)) cols.push_back({f.name, nullptr, v});
        }
        for (const auto& probe : cfg_.outputs.probes) {
            const std::string file = "probe_" + probe.name + ".csv";
            write_probe_csv((dir / file).string(), probe.from, probe.to, probe.samples, cols);
            written_.push_back(file);
        }
    }
}

void Pipeline::write_report(RunOutcome& outcome) {
    json report = {
        {"schema_version", kSchemaVersion},
        {"qhydro_version", std::string(kVersion)},
        {"name", cfg_.name},
        {"scenario", std::string(to_string(cfg_.scenario))},
        {"status", outcome.exit_code == kExitOk ? "ok" : "failed"},
        {"exit_code", outcome.exit_code},
        {"config", json::parse(cfg_.source_json)},
        {"grid",
         {{"dims", grid_.dims},
          {"spacing", grid_.spacing},
          {"origin", grid_.origin},
          {"boundary", grid_.boundary == Boundary::Periodic ? "periodic" : "dirichlet0"}}},
        {"stages", stages_},
    };
    if (!opts_.reproducible) report["generated"] = timestamp_;
    for (const auto& [key, value] : report_extra_.items()) report[key] = value;

    json manifest = json::array();
    for (const auto& file : written_) {
        const fs::path path = fs::path(opts_.out_dir) / file;
        manifest.push_back({{"file", file}, {"sha256", sha256_file(path.string())}, {"bytes", fs::file_size(path)}});
    }
    report["manifest"] = manifest;
    outcome.report = report;
    if (cfg_.outputs.json || outcome.exit_code != kExitOk) {
        outcome.report_path = (fs::path(opts_.out_dir) / "report.json").string();
        std::ofstream out(outcome.report_path, std::ios::binary | std::ios::trunc);
        out << report.dump(2) << '\n';
        if (!out) throw Error(ErrorCode::InvalidConfig, "failed writing " + outcome.report_path);
    }
}

RunOutcome Pipeline::run() {
    timestamp_ = utc_timestamp();
    RunOutcome outcome;
    try {
        switch (cfg_.scenario) {
            case Scenario::AbcFlow:
                abc_stage();
                break;
            case Scenario::SelfconsistentGas:
                selfconsistent_stage();
                break;
            default:
                madelung_stage(initial_wavefunction());
                control_stage();
                if (cfg_.potential_expr) save("potential", evaluate(*cfg_.potential_expr, grid_));
                break;
        }
        if (cfg_.gravito || cfg_.scenario == Scenario::ToroidalTube) gravito_stage();
        write_outputs();
    } catch (const Error& e) {
        outcome.exit_code = exit_code_for(e.code());
        report_extra_["failure"] = {{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
        if (report_extra_.contains("failure_history")) {
            report_extra_["failure"]["history"] = report_extra_["failure_history"];
            report_extra_.erase("failure_history");
        }
        if (report_extra_.contains("failure_suggestion")) {
            report_extra_["failure"]["suggestion"] = report_extra_["failure_suggestion"];
            report_extra_.erase("failure_suggestion");
        }
        log_ << "error: " << e.what() << '\n';
    }
    write_report(outcome);
    return outcome;
}

}  // namespace

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidConfig:
        case ErrorCode::InvalidGrid:
        case ErrorCode::ParseError:
        case ErrorCode::EvalDomainError:
        case ErrorCode::ConstantLambdaForbidden:
        case ErrorCode::LogDomainError:
        case ErrorCode::ChargeZero:
        case ErrorCode::DegenerateState:
            return kExitValidation;
        case ErrorCode::SolverDiverged:
        case ErrorCode::EigenSolverFailed:
            return kExitSolverFailure;
        default:
            return kExitOther;
    }
}

RunOutcome run_scenario(const ScenarioConfig& cfg, const RunOptions& opts, std::ostream& log) {
    std::error_code ec;
    fs::create_directories(opts.out_dir, ec);
    const fs::path probe = fs::path(opts.out_dir) / ".qhydro_write_check";
    {
        std::ofstream test(probe, std::ios::binary);
        if (ec || !test) {
            throw ConfigInvalid({"InvalidConfig: output directory '" + opts.out_dir + "' is not writable"});
        }
    }
    fs::remove(probe, ec);
    return Pipeline(cfg, opts, log).run();
}

}  // namespace qhydro::cli
