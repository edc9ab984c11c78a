#include "frsde/galerkin.hpp"

#include "frsde/stats.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace frsde {

std::string to_string(Scheme scheme)
{
    return scheme == Scheme::TamedEuler ? "tamed_euler" : "exponential_tamed";
}

Scheme scheme_from_string(const std::string& name)
{
    if (name == "tamed_euler")
        return Scheme::TamedEuler;
    if (name == "exponential_tamed")
        return Scheme::ExponentialTamed;
    throw std::invalid_argument("unknown scheme '" + name + "' (expected tamed_euler or exponential_tamed)");
}

int SchemeConfig::steps() const
{
    return static_cast<int>(std::llround(T / dt));
}

std::vector<std::string> SchemeConfig::validate() const
{
    std::vector<std::string> errors;
    if (!(dt > 0.0) || !(T > 0.0) || !(dt <= T)) {
        errors.emplace_back("scheme: 0 < dt <= T required");
        return errors;
    }
    if (std::abs(steps() * dt - T) > 1e-9 * T)
        errors.emplace_back("scheme: T must be an integer multiple of dt");
    if (!(stability_guard > 0.0))
        errors.emplace_back("scheme: stability_guard must be positive");
    return errors;
}

GalerkinSystem::GalerkinSystem(std::shared_ptr<const ModalBasis> basis, DriftF f, DriftH h, NoiseModel nm,
                               int n_modes)
    : basis_(std::move(basis)), f_(std::move(f)), h_(std::move(h)), nm_(std::move(nm)), n_(n_modes)
{
    if (!basis_)
        throw std::invalid_argument("Galerkin system needs a basis");
    if (n_ < 1 || n_ > basis_->available())
        throw std::invalid_argument("n_modes = " + std::to_string(n_) + " outside 1.." +
                                    std::to_string(basis_->available()));
    lambda_ = basis_->eigenvalues().head(n_);
    values_ = basis_->values().leftCols(n_);
    weighted_ = basis_->w().asDiagonal() * values_;
    sigma1_proj_ = weighted_.transpose() * sigma1_at_nodes(nm_, *basis_);
    const std::vector<double> gam = nm_.gammas();
    sqrt_gamma_.resize(nm_.m);
    for (int i = 0; i < nm_.m; ++i) {
        sqrt_gamma_[i] = std::sqrt(gam[i]);
        gamma_sum_ += gam[i];
    }
    s1_gamma_ = sigma1_proj_ * sqrt_gamma_;
    s1_frob_sq_ = sigma1_proj_.squaredNorm();
}

namespace {

[[noreturn]] void report_nonfinite(const char* what, double t, const ModalBasis& basis, const Eigen::VectorXd& values)
{
    Eigen::Index worst = 0;
    for (Eigen::Index k = 0; k < values.size(); ++k)
        if (!std::isfinite(values[k])) {
            worst = k;
            break;
        }
    std::ostringstream msg;
    msg << "non-finite " << what << " at t = " << t << ", x = " << basis.x()[worst];
    throw NumericalError(msg.str());
}

} // namespace

StateEval GalerkinSystem::evaluate(double t, const Eigen::VectorXd& z) const
{
    if (z.size() != n_)
        throw std::invalid_argument("state has " + std::to_string(z.size()) + " coefficients, system has " +
                                    std::to_string(n_));
    StateEval ev;
    ev.t = t;
    ev.u = values_ * z;
    const Eigen::Index q = ev.u.size();
    Eigen::VectorXd nl(q);
    Eigen::VectorXd ps(q);
    const Eigen::VectorXd& x = basis_->x();
    for (Eigen::Index k = 0; k < q; ++k) {
        const double u = ev.u[k];
        nl[k] = f_(t, x[k], u) + h_(t, x[k], u);
        ps[k] = nm_.psi(u);
    }
    if (!nl.allFinite())
        report_nonfinite("drift", t, *basis_, nl);
    if (!ps.allFinite())
        report_nonfinite("diffusion", t, *basis_, ps);
    ev.nonlin = weighted_.transpose() * nl;
    ev.psi_proj = weighted_.transpose() * ps;
    ev.hs = s1_frob_sq_ + 2.0 * ev.psi_proj.dot(s1_gamma_) + ev.psi_proj.squaredNorm() * gamma_sum_;
    return ev;
}

Eigen::VectorXd GalerkinSystem::drift_eval(double t, const Eigen::VectorXd& z) const
{
    const StateEval ev = evaluate(t, z);
    return ev.nonlin - lambda_.cwiseProduct(z);
}

Eigen::MatrixXd GalerkinSystem::diffusion_eval(double t, const Eigen::VectorXd& z) const
{
    const StateEval ev = evaluate(t, z);
    return sigma1_proj_ + ev.psi_proj * sqrt_gamma_.transpose();
}

Eigen::VectorXd GalerkinSystem::apply_diffusion(const StateEval& ev, const Eigen::VectorXd& dW) const
{
    return sigma1_proj_ * dW + ev.psi_proj * sqrt_gamma_.dot(dW);
}

Integrands GalerkinSystem::integrands(const StateEval& ev, const Eigen::VectorXd& z) const
{
    Integrands out;
    const Eigen::VectorXd& w = basis_->w();
    const Eigen::VectorXd& x = basis_->x();
    const double p = f_.p;
    const double dual = p / (p - 1.0);
    out.h_sq = z.squaredNorm();
    out.v3_sq = out.h_sq;
    out.v1_sq = (lambda_.array() * z.array().square()).sum();
    out.a1_dual = (lambda_.array().square() * z.array().square() / (1.0 + lambda_.array())).sum();
    for (Eigen::Index k = 0; k < ev.u.size(); ++k) {
        const double au = std::abs(ev.u[k]);
        const double up = fast_pow(au, p);
        out.v2_p += w[k] * up;
        const double hv = h_(ev.t, x[k], ev.u[k]);
        out.a3_dual += w[k] * hv * hv;
        if (f_.family == DriftFamily::PowerDecay)
            out.a2_dual += w[k] * up;  // |f|^{p'} = delta1^{p'} |u|^p
        else
            out.a2_dual += w[k] * std::pow(std::abs(f_(ev.t, x[k], ev.u[k])), dual);
    }
    if (f_.family == DriftFamily::PowerDecay)
        out.a2_dual *= std::pow(std::abs(f_.delta1), dual);
    out.hs = ev.hs;
    return out;
}

Eigen::VectorXd project_initial_nodal(const GalerkinSystem& sys, const Eigen::VectorXd& nodal)
{
    const auto& mesh = sys.basis().mesh();
    if (!mesh)
        throw std::invalid_argument("nodal initial data needs a basis built from an operator");
    if (nodal.size() != mesh->interior_nodes())
        throw std::invalid_argument("initial data has " + std::to_string(nodal.size()) + " nodal values, mesh has " +
                                    std::to_string(mesh->interior_nodes()));
    return sys.basis().project(mesh->interpolate(nodal), sys.n_modes());
}

Eigen::VectorXd project_initial(const GalerkinSystem& sys, const Eigen::VectorXd& coefficients)
{
    Eigen::VectorXd z = Eigen::VectorXd::Zero(sys.n_modes());
    const Eigen::Index k = std::min<Eigen::Index>(coefficients.size(), sys.n_modes());
    z.head(k) = coefficients.head(k);
    return z;
}

Eigen::VectorXd step(const GalerkinSystem& sys, const SchemeConfig& cfg, const StateEval& ev,
                     const Eigen::VectorXd& z, const Eigen::VectorXd& dW)
{
    const double dt = cfg.dt;
    Eigen::VectorXd noise = sys.apply_diffusion(ev, dW);
    if (cfg.diffusion_tamed(sys.noise()))
        noise /= 1.0 + dt * ev.hs;
    if (cfg.scheme == Scheme::TamedEuler) {
        const Eigen::VectorXd a = ev.nonlin - sys.lambda().cwiseProduct(z);
        return z + (dt / (1.0 + dt * a.norm())) * a + noise;
    }
    const Eigen::VectorXd tamed = (dt / (1.0 + dt * ev.nonlin.norm())) * ev.nonlin;
    return (-dt * sys.lambda().array()).exp().matrix().cwiseProduct(z + tamed + noise);
}

Eigen::VectorXd step(const GalerkinSystem& sys, const SchemeConfig& cfg, double t, const Eigen::VectorXd& z,
                     const Eigen::VectorXd& dW)
{
    return step(sys, cfg, sys.evaluate(t, z), z, dW);
}

void draw_increments(std::mt19937_64& rng, double dt, Eigen::VectorXd& dW)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = std::sqrt(dt);
    for (Eigen::Index i = 0; i < dW.size(); ++i)
        dW[i] = scale * normal(rng);
}

namespace {

void check_state(const Eigen::VectorXd& z, int step_index, double t)
{
    if (!z.allFinite()) {
        std::ostringstream msg;
        msg << "non-finite state after step " << step_index << " (t = " << t << "); dt is likely too large";
        throw NumericalError(msg.str());
    }
}

} // namespace

Trajectory simulate_path(const GalerkinSystem& sys, const SchemeConfig& cfg, const Eigen::VectorXd& z0,
                         std::uint64_t path_index, const SimulateOptions& opts)
{
    if (z0.size() != sys.n_modes())
        throw std::invalid_argument("initial state dimension mismatch");
    const int n_steps = cfg.steps();
    const double dt = cfg.dt;
    std::mt19937_64 rng = path_rng(cfg.master_seed, path_index);
    Eigen::VectorXd dW(sys.noise_dim());

    Trajectory traj;
    traj.int_weighted.assign(opts.p_exps.size(), 0.0);
    if (opts.store_path) {
        traj.times.reserve(static_cast<std::size_t>(n_steps) + 1);
        traj.states.reserve(static_cast<std::size_t>(n_steps) + 1);
        traj.running_sup.reserve(static_cast<std::size_t>(n_steps) + 1);
    }
    Eigen::VectorXd z = z0;
    double sup_sq = 0.0;
    for (int k = 0;; ++k) {
        const double t = k * dt;
        const double h_sq = z.squaredNorm();
        sup_sq = std::max(sup_sq, h_sq);
        if (opts.store_path) {
            traj.times.push_back(t);
            traj.states.push_back(z);
            traj.running_sup.push_back(std::sqrt(sup_sq));
        }
        if (k == n_steps)
            break;
        const StateEval ev = sys.evaluate(t, z);
        const Integrands in = sys.integrands(ev, z);
        traj.int_v1_sq += dt * in.v1_sq;
        traj.int_v2_p += dt * in.v2_p;
        traj.int_v3_sq += dt * in.v3_sq;
        traj.int_a1_dual += dt * in.a1_dual;
        traj.int_a2_dual += dt * in.a2_dual;
        traj.int_a3_dual += dt * in.a3_dual;
        traj.int_hs += dt * in.hs;
        const double energy = in.v1_sq + in.v2_p + in.v3_sq;
        for (std::size_t j = 0; j < opts.p_exps.size(); ++j)
            traj.int_weighted[j] += dt * std::pow(h_sq, opts.p_exps[j] - 1.0) * energy;
        draw_increments(rng, dt, dW);
        z = step(sys, cfg, ev, z, dW);
        check_state(z, k + 1, t + dt);
    }
    traj.final_state = z;
    traj.sup_h = std::sqrt(sup_sq);
    return traj;
}

void simulate_coupled(const std::vector<const GalerkinSystem*>& levels, const SchemeConfig& cfg,
                      const std::vector<Eigen::VectorXd>& z0, std::uint64_t path_index,
                      const std::function<void(int, double, const std::vector<Eigen::VectorXd>&)>& observe)
{
    if (levels.empty() || levels.size() != z0.size())
        throw std::invalid_argument("coupled simulation needs one initial state per level");
    const int m = levels.front()->noise_dim();
    for (const auto* sys : levels)
        if (sys->noise_dim() != m)
            throw std::invalid_argument("coupled levels must share the noise dimension");
    const int n_steps = cfg.steps();
    std::mt19937_64 rng = path_rng(cfg.master_seed, path_index);
    Eigen::VectorXd dW(m);
    std::vector<Eigen::VectorXd> z = z0;
    std::vector<StateEval> evals(levels.size());
    for (int k = 0;; ++k) {
        const double t = k * cfg.dt;
        observe(k, t, z);
        if (k == n_steps)
            break;
        draw_increments(rng, cfg.dt, dW);
        for (std::size_t l = 0; l < levels.size(); ++l) {
            z[l] = step(*levels[l], cfg, t, z[l], dW);
            check_state(z[l], k + 1, t + cfg.dt);
        }
    }
}

void write_trajectory_csv(const GalerkinSystem& sys, const Trajectory& traj, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << "t";
    for (int k = 1; k <= sys.n_modes(); ++k)
        out << ",c_" << k;
    out << ",H_norm,V1_seminorm,V2_norm\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const Eigen::VectorXd& z = traj.states[i];
        out << traj.times[i];
        for (Eigen::Index k = 0; k < z.size(); ++k)
            out << ',' << z[k];
        const Eigen::VectorXd u = sys.basis().reconstruct(z);
        out << ',' << z.norm() << ',' << std::sqrt((sys.lambda().array() * z.array().square()).sum()) << ','
            << lp_norm(u, sys.basis().w(), sys.f().p) << '\n';
    }
}

} // namespace frsde
