#pragma once

#include "frsde/basis.hpp"
#include "frsde/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace frsde {

enum class Scheme { TamedEuler, ExponentialTamed };

std::string to_string(Scheme scheme);
Scheme scheme_from_string(const std::string& name);

struct SchemeConfig {
    Scheme scheme = Scheme::ExponentialTamed;
    double dt = 2e-3;
    double T = 1.0;
    /// Unset means on exactly when q > 2.
    std::optional<bool> tame_diffusion;
    std::uint64_t master_seed = 20240611;
    /// TamedEuler warns when dt * lambda_max exceeds this.
    double stability_guard = 2.0;

    int steps() const;
    bool diffusion_tamed(const NoiseModel& nm) const { return tame_diffusion.value_or(nm.q > 2.0); }
    std::vector<std::string> validate() const;
};

/// Raised when an evaluation or a step produces a non-finite value.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything a step needs at one state, evaluated once.
struct StateEval {
    double t = 0.0;
    Eigen::VectorXd u;        // field at the quadrature points
    Eigen::VectorXd nonlin;   // F + H in eigen-coordinates
    Eigen::VectorXd psi_proj; // eigen-coordinates of psi(u)
    double hs = 0.0;          // squared Frobenius norm of the diffusion matrix
};

/// Per-state integrands of the uniform-estimate lemmas.
struct Integrands {
    double h_sq = 0.0;     // |z|_H^2
    double v1_sq = 0.0;    // |z|_{V1}^2 (seminorm)
    double v2_p = 0.0;     // |u|_{L^p}^p
    double v3_sq = 0.0;    // |z|_{V3}^2 = |z|_H^2
    double a1_dual = 0.0;  // sum lambda^2 z^2 / (1 + lambda)
    double a2_dual = 0.0;  // |f(u)|_{L^p'}^p'
    double a3_dual = 0.0;  // |h(u)|_H^2
    double hs = 0.0;       // |B|_HS^2
};

/// The projected SDE dZ = [-Lambda Z + P_n F(Z) + P_n H(Z)] dt + P_n B(Z) dW in
/// eigen-coordinates of the first n_modes eigenfunctions.
class GalerkinSystem {
public:
    GalerkinSystem(std::shared_ptr<const ModalBasis> basis, DriftF f, DriftH h, NoiseModel nm, int n_modes);

    int n_modes() const { return n_; }
    int noise_dim() const { return nm_.m; }
    const ModalBasis& basis() const { return *basis_; }
    std::shared_ptr<const ModalBasis> basis_ptr() const { return basis_; }
    const Eigen::VectorXd& lambda() const { return lambda_; }
    const DriftF& f() const { return f_; }
    const DriftH& h() const { return h_; }
    const NoiseModel& noise() const { return nm_; }

    /// -Lambda z + F(t, z) + H(t, z).
    Eigen::VectorXd drift_eval(double t, const Eigen::VectorXd& z) const;
    /// n_modes x m; column i holds the coefficients of sigma_{1,i} + sigma_{2,i}(u).
    Eigen::MatrixXd diffusion_eval(double t, const Eigen::VectorXd& z) const;

    StateEval evaluate(double t, const Eigen::VectorXd& z) const;
    /// B(z) dW without forming B.
    Eigen::VectorXd apply_diffusion(const StateEval& ev, const Eigen::VectorXd& dW) const;
    Integrands integrands(const StateEval& ev, const Eigen::VectorXd& z) const;

private:
    std::shared_ptr<const ModalBasis> basis_;
    DriftF f_;
    DriftH h_;
    NoiseModel nm_;
    int n_ = 0;
    Eigen::VectorXd lambda_;
    Eigen::MatrixXd values_;      // Q x n
    Eigen::MatrixXd weighted_;    // w o values, Q x n
    Eigen::MatrixXd sigma1_proj_; // n x m
    Eigen::VectorXd sqrt_gamma_;  // m
    Eigen::VectorXd s1_gamma_;    // sigma1_proj * sqrt_gamma
    double s1_frob_sq_ = 0.0;
    double gamma_sum_ = 0.0;
};

/// P_n x for x given by interior nodal values on the operator mesh.
Eigen::VectorXd project_initial_nodal(const GalerkinSystem& sys, const Eigen::VectorXd& nodal);
/// P_n x for x given by eigen-coefficients (any length).
Eigen::VectorXd project_initial(const GalerkinSystem& sys, const Eigen::VectorXd& coefficients);

/// One time step from t with Gaussian increments dW (variance dt each).
Eigen::VectorXd step(const GalerkinSystem& sys, const SchemeConfig& cfg, const StateEval& ev,
                     const Eigen::VectorXd& z, const Eigen::VectorXd& dW);
Eigen::VectorXd step(const GalerkinSystem& sys, const SchemeConfig& cfg, double t, const Eigen::VectorXd& z,
                     const Eigen::VectorXd& dW);

struct SimulateOptions {
    bool store_path = true;
    /// Exponents p for the accumulator int |Z|_H^{2p-2} (|Z|_V1^2 + |Z|_V2^p + |Z|_V3^2).
    std::vector<double> p_exps;
};

struct Trajectory {
    std::vector<double> times;             // stored when store_path
    std::vector<Eigen::VectorXd> states;   // stored when store_path
    std::vector<double> running_sup;       // sup_{s <= t_k} |Z(s)|_H, stored when store_path
    Eigen::VectorXd final_state;
    double sup_h = 0.0;
    double int_v1_sq = 0.0;
    double int_v2_p = 0.0;
    double int_v3_sq = 0.0;
    double int_a1_dual = 0.0;
    double int_a2_dual = 0.0;
    double int_a3_dual = 0.0;
    double int_hs = 0.0;
    std::vector<double> int_weighted;      // one per SimulateOptions::p_exps
};

/// Draws m standard normals scaled by sqrt(dt).
void draw_increments(std::mt19937_64& rng, double dt, Eigen::VectorXd& dW);

Trajectory simulate_path(const GalerkinSystem& sys, const SchemeConfig& cfg, const Eigen::VectorXd& z0,
                         std::uint64_t path_index, const SimulateOptions& opts = {});

/// Several levels driven by the same Brownian increments, stepped in lockstep.
/// The callback sees (step index, time, states) after every step including
/// the initial one.
void simulate_coupled(const std::vector<const GalerkinSystem*>& levels, const SchemeConfig& cfg,
                      const std::vector<Eigen::VectorXd>& z0, std::uint64_t path_index,
                      const std::function<void(int, double, const std::vector<Eigen::VectorXd>&)>& observe);

/// CSV columns t, c_1..c_n, H_norm, V1_seminorm, V2_norm.
void write_trajectory_csv(const GalerkinSystem& sys, const Trajectory& traj, const std::string& path);

} // namespace frsde
