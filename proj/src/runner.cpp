#include "frsde/runner.hpp"

#include "frsde/basis.hpp"
#include "frsde/diagnostics.hpp"
#include "frsde/estimate.hpp"

#include <boost/version.hpp>
#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#ifndef FRSDE_VERSION
#define FRSDE_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace frsde {

namespace {

nlohmann::json finite_or_null(double v)
{
    if (std::isfinite(v))
        return v;
    return nullptr;
}

nlohmann::json nan_or(double v)
{
    return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v);
}

nlohmann::json check_json(const CheckReport& r)
{
    return {{"condition", r.condition},
            {"pass", r.pass},
            {"margin", finite_or_null(r.margin)},
            {"witness",
             {{"t", nan_or(r.witness.t)},
              {"x", nan_or(r.witness.x)},
              {"u1", nan_or(r.witness.u1)},
              {"u2", nan_or(r.witness.u2)},
              {"note", r.witness.note}}},
            {"samples", r.samples},
            {"message", r.message}};
}

nlohmann::json vector_json(const Eigen::VectorXd& v)
{
    return std::vector<double>(v.data(), v.data() + v.size());
}

// Tracks written files so a failed run leaves nothing behind.
class OutputDir {
public:
    explicit OutputDir(const std::string& path) : root_(path)
    {
        created_ = !fs::exists(root_);
        fs::create_directories(root_);
    }

    std::string path(const std::string& name)
    {
        files_.push_back(name);
        return (root_ / name).string();
    }

    void write_text(const std::string& name, const std::string& text)
    {
        std::ofstream out(path(name), std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write " + (root_ / name).string());
        out << text;
        if (!out)
            throw std::runtime_error("write failed for " + (root_ / name).string());
    }

    void rollback() noexcept
    {
        std::error_code ec;
        for (const auto& f : files_)
            fs::remove(root_ / f, ec);
        if (created_ && fs::is_empty(root_, ec))
            fs::remove(root_, ec);
    }

    const std::vector<std::string>& files() const { return files_; }
    const fs::path& root() const { return root_; }

private:
    fs::path root_;
    bool created_ = false;
    std::vector<std::string> files_;
};

struct Context {
    const ExperimentConfig& cfg;
    int threads;
    std::ostream* log;
    std::vector<std::string> warnings;

    void note(const std::string& msg) const
    {
        if (log)
            *log << "[frsde] " << msg << std::endl;
    }
};

FracOperator build_operator(Context& ctx)
{
    ctx.note("assembling " + to_string(ctx.cfg.operator_mode) + " operator on " +
             std::to_string(ctx.cfg.space.nodes) + " nodes");
    FracOperator op = assemble_operator(ctx.cfg.operator_mode, ctx.cfg.space);
    for (const auto& w : op.warnings)
        ctx.warnings.push_back("operator: " + w);
    return op;
}

std::shared_ptr<const ModalBasis> build_basis(Context& ctx)
{
    return std::make_shared<const ModalBasis>(ModalBasis::from_operator(build_operator(ctx)));
}

GalerkinSystem make_system(Context& ctx, const std::shared_ptr<const ModalBasis>& basis, int n)
{
    GalerkinSystem sys(basis, ctx.cfg.drift, ctx.cfg.perturbation, ctx.cfg.noise, n);
    const auto& scheme = ctx.cfg.scheme;
    const double lam_max = sys.lambda().maxCoeff();
    if (scheme.scheme == Scheme::TamedEuler && scheme.dt * lam_max > scheme.stability_guard) {
        std::ostringstream msg;
        msg << "scheme: dt * lambda_max = " << scheme.dt * lam_max << " exceeds the stability guard "
            << scheme.stability_guard << " at n_modes = " << n;
        ctx.warnings.push_back(msg.str());
    }
    return sys;
}

Eigen::VectorXd initial_coefficients(const ExperimentConfig& cfg)
{
    return Eigen::Map<const Eigen::VectorXd>(cfg.initial.data(), static_cast<Eigen::Index>(cfg.initial.size()));
}

nlohmann::json run_check(Context& ctx, OutputDir& out)
{
    const auto& cfg = ctx.cfg;
    const auto basis = build_basis(ctx);
    std::vector<CheckReport> reports = check_f(cfg.drift, cfg.check.grid);
    reports.push_back(check_h(cfg.perturbation, cfg.check.grid));
    for (auto& r : check_sigma(cfg.noise, cfg.drift, cfg.check.grid, cfg.scheme.T, cfg.space.length()))
        reports.push_back(std::move(r));
    ctx.note("sampling abstract hypotheses on " + std::to_string(cfg.check.sampling.n_states) + " states");
    const HypothesisProfile profile = default_profile(cfg.drift, cfg.perturbation, cfg.noise, *basis);
    for (auto& r : check_abstract(profile, cfg.drift, cfg.perturbation, cfg.noise, *basis, cfg.check.n_modes,
                                  cfg.check.sampling))
        reports.push_back(std::move(r));

    bool all_pass = true;
    nlohmann::json checks = nlohmann::json::array();
    std::ofstream csv(out.path("checks.csv"));
    csv << "condition,pass,margin,samples,witness_t,witness_x,witness_u1,witness_u2\n" << std::setprecision(17);
    for (const auto& r : reports) {
        all_pass = all_pass && r.pass;
        checks.push_back(check_json(r));
        csv << r.condition << ',' << (r.pass ? 1 : 0) << ',' << r.margin << ',' << r.samples << ','
            << r.witness.t << ',' << r.witness.x << ',' << r.witness.u1 << ',' << r.witness.u2 << '\n';
    }
    if (!csv)
        throw std::runtime_error("cannot write checks.csv");

    const auto a = cfg.noise.a();
    const auto b = cfg.noise.betas();
    const auto g = cfg.noise.gammas();
    double beta_gamma = 0.0;
    double sigma1_sq = 0.0;
    for (int i = 0; i < cfg.noise.m; ++i) {
        beta_gamma += b[static_cast<std::size_t>(i)] + g[static_cast<std::size_t>(i)];
        sigma1_sq += a[static_cast<std::size_t>(i)] * a[static_cast<std::size_t>(i)];
    }
    nlohmann::json prof = {{"alpha2", profile.alpha2},
                           {"alpha3", profile.alpha3},
                           {"alpha4", profile.alpha4},
                           {"beta_exp", profile.beta_exp},
                           {"q", profile.q_list},
                           {"q_hat", profile.qhat_list},
                           {"q_tilde", profile.q_tilde},
                           {"q_under", profile.q_under},
                           {"c1", profile.c1},
                           {"g_at_0", profile.g(0.0)}};
    return {{"all_pass", all_pass},
            {"checks", checks},
            {"profile", prof},
            {"certified_delta3", certify_delta3(cfg.drift, cfg.check.grid)},
            {"partial_sums", {{"beta_plus_gamma", beta_gamma}, {"sigma1_coefficients_sq", sigma1_sq}}},
            {"note", "a pass means no violation on the sampled grid, not a proof"}};
}

nlohmann::json run_eig(Context& ctx, OutputDir& out, bool dump_operator)
{
    const auto& cfg = ctx.cfg;
    const FracOperator op = build_operator(ctx);
    const int count = cfg.eig.count > 0 ? cfg.eig.count : op.size();
    {
        std::ofstream csv(out.path("eigenvalues.csv"));
        csv << "k,lambda\n" << std::setprecision(17);
        for (int k = 0; k < count; ++k)
            csv << k + 1 << ',' << op.eigenvalues[k] << '\n';
        if (!csv)
            throw std::runtime_error("cannot write eigenvalues.csv");
    }
    if (dump_operator)
        write_operator_csv(op, out.path("operator.csv"));
    return {{"mode", to_string(op.mode)},
            {"eigenvalues", vector_json(op.eigenvalues.head(count))},
            {"gagliardo_const", op.gagliardo_const},
            {"max_relative_residual", op.max_relative_residual()},
            {"orthonormality_defect", op.orthonormality_defect()},
            {"quadrature_error", op.quadrature_error}};
}

nlohmann::json run_simulate(Context& ctx, OutputDir& out)
{
    const auto& cfg = ctx.cfg;
    const auto basis = build_basis(ctx);
    const GalerkinSystem sys = make_system(ctx, basis, cfg.simulate.n_modes);
    const Eigen::VectorXd z0 = project_initial(sys, initial_coefficients(cfg));
    Trajectory traj;
    try {
        traj = simulate_path(sys, cfg.scheme, z0, cfg.simulate.path_index);
    } catch (const std::exception& e) {
        throw PathError(cfg.simulate.path_index, e.what());
    }
    write_trajectory_csv(sys, traj, out.path("trajectory.csv"));
    return {{"n_modes", sys.n_modes()},
            {"path_index", cfg.simulate.path_index},
            {"steps", cfg.scheme.steps()},
            {"initial_h_norm", z0.norm()},
            {"final_state", vector_json(traj.final_state)},
            {"sup_h", traj.sup_h},
            {"int_v1_sq", traj.int_v1_sq},
            {"int_v2_p", traj.int_v2_p},
            {"int_v3_sq", traj.int_v3_sq},
            {"int_hs", traj.int_hs}};
}

nlohmann::json run_moments(Context& ctx, OutputDir& out)
{
    const auto& cfg = ctx.cfg;
    const auto& m = cfg.moments;
    const auto basis = build_basis(ctx);
    const double beta_exp = default_profile(cfg.drift, cfg.perturbation, cfg.noise, *basis).beta_exp;
    Eigen::VectorXd dir = initial_coefficients(cfg);
    dir /= dir.norm();

    std::vector<MomentReport> reports;
    for (int n : m.levels) {
        const GalerkinSystem sys = make_system(ctx, basis, n);
        for (double x : m.x_norms) {
            std::ostringstream msg;
            msg << "moments: n_modes = " << n << ", |x|_H = " << x << ", " << m.paths << " paths";
            ctx.note(msg.str());
            const Eigen::VectorXd z0 = project_initial(sys, x * dir);
            for (auto& r : mc_moments(sys, cfg.scheme, z0, m.paths, m.p_exp, ctx.threads, beta_exp)) {
                // report the requested magnitude, not the truncated one
                r.x_norm = x;
                for (const auto& w : r.warnings)
                    ctx.warnings.push_back(w);
                reports.push_back(std::move(r));
            }
        }
    }
    const UniformitySummary summary = uniformity_check(reports, {m.factor, m.confidence});
    write_moments_csv(reports, out.path("moments.csv"));
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& r : reports)
        reps.push_back(to_json(r));
    return {{"reports", reps}, {"uniformity", to_json(summary)}};
}

nlohmann::json run_aldous(Context& ctx, OutputDir& out)
{
    const auto& cfg = ctx.cfg;
    const auto& a = cfg.aldous;
    const auto basis = build_basis(ctx);
    const GalerkinSystem sys = make_system(ctx, basis, a.n_modes);
    const Eigen::VectorXd z0 = project_initial(sys, initial_coefficients(cfg));
    const Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(a.test_function.data(),
                                                                static_cast<Eigen::Index>(a.test_function.size()));
    ModulusOptions opts;
    opts.noise_fraction = a.noise_fraction;
    opts.excursion_quantile = a.excursion_quantile;
    opts.excursion_factor = a.excursion_factor;
    opts.threads = ctx.threads;
    ctx.note("aldous: " + std::to_string(a.paths) + " paths");
    const ModulusCurve curve = aldous_modulus(sys, cfg.scheme, z0, h, a.delta, a.theta, a.paths, opts);
    if (curve.excursions > 0)
        ctx.warnings.push_back("aldous: " + std::to_string(curve.excursions) +
                               " paths exceed the excursion threshold");
    write_modulus_csv(curve, out.path("modulus.csv"));
    return to_json(curve);
}

nlohmann::json run_converge(Context& ctx, OutputDir& out)
{
    const auto& cfg = ctx.cfg;
    const auto& c = cfg.converge;
    const auto basis = build_basis(ctx);
    std::vector<GalerkinSystem> systems;
    for (int n : c.levels)
        systems.push_back(make_system(ctx, basis, n));
    std::vector<const GalerkinSystem*> ptrs;
    for (const auto& s : systems)
        ptrs.push_back(&s);
    ctx.note("converge: " + std::to_string(c.paths) + " coupled paths");
    const ConvergenceTable table =
        galerkin_convergence(ptrs, cfg.scheme, initial_coefficients(cfg), c.paths, ctx.threads, c.confidence);
    write_convergence_csv(table, out.path("convergence.csv"));
    return to_json(table);
}

} // namespace

nlohmann::json version_info()
{
    return {{"frsde", FRSDE_VERSION},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"boost", BOOST_LIB_VERSION},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"compiler", __VERSION__}};
}

RunResult run_experiment(ExperimentConfig cfg, const RunOptions& opts)
{
    if (opts.out_dir)
        cfg.output_dir = *opts.out_dir;
    if (opts.seed) {
        if (*opts.seed > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
            throw ConfigError({"seed: must be below 2^63"});
        cfg.scheme.master_seed = *opts.seed;
    }
    if (auto errors = validate(cfg); !errors.empty())
        throw ConfigError(errors);

    const auto start = std::chrono::steady_clock::now();
    Context ctx{cfg, resolve_threads(opts.threads), opts.log, {}};
    OutputDir out(cfg.output_dir);
    RunResult result;
    result.out_dir = cfg.output_dir;
    try {
        nlohmann::json body;
        switch (cfg.kind) {
        case ExperimentKind::Check: body = run_check(ctx, out); break;
        case ExperimentKind::Eig: body = run_eig(ctx, out, opts.dump_operator); break;
        case ExperimentKind::Simulate: body = run_simulate(ctx, out); break;
        case ExperimentKind::Moments: body = run_moments(ctx, out); break;
        case ExperimentKind::Aldous: body = run_aldous(ctx, out); break;
        case ExperimentKind::Converge: body = run_converge(ctx, out); break;
        }
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        nlohmann::json report;
        report["kind"] = to_string(cfg.kind);
        report["config_hash"] = config_hash(cfg);
        report["config"] = normalized(cfg);
        report["versions"] = version_info();
        report["result"] = body;
        report["warnings"] = ctx.warnings;
        report["timing"] = {{"wall_time_s", wall}};
        out.write_text("report.json", report.dump(2) + "\n");

        std::vector<std::string> listed = out.files();
        std::sort(listed.begin(), listed.end());
        std::ostringstream manifest;
        for (const auto& f : listed)
            manifest << sha256_file((out.root() / f).string()) << "  " << f << '\n';
        out.write_text("MANIFEST.txt", manifest.str());
        result.files = out.files();
        result.report = std::move(report);
    } catch (...) {
        out.rollback();
        throw;
    }
    ctx.note("wrote " + std::to_string(result.files.size()) + " files to " + result.out_dir);
    return result;
}

int run(ExperimentKind kind, const std::string& config_path, const RunOptions& opts, std::ostream& err)
{
    try {
        const ExperimentConfig cfg = load_config(config_path, kind);
        run_experiment(cfg, opts);
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "frsde: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "frsde: " << e.what() << '\n';
        return kExitRuntime;
    }
}

} // namespace frsde
