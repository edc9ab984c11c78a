#pragma once

#include "frsde/galerkin.hpp"
#include "frsde/stats.hpp"

#include <nlohmann/json_fwd.hpp>

#include <functional>
#include <string>
#include <vector>

namespace frsde {

struct ModulusOptions {
    /// Points enter the slope fit only when stderr < noise_fraction * m(delta).
    double noise_fraction = 0.2;
    /// Paths whose sup |Z|_H exceeds excursion_factor times this quantile of
    /// all path maxima are counted as excursions.
    double excursion_quantile = 0.99;
    double excursion_factor = 2.0;
    int threads = 1;
};

struct ModulusPoint {
    double delta = 0.0;
    double estimate = 0.0;  // max over theta of E |(Z(theta + delta) - Z(theta), h)|
    double se = 0.0;        // at the maximizing theta
    double theta = 0.0;     // maximizing theta
    bool in_fit = false;
};

struct ModulusCurve {
    std::vector<ModulusPoint> points;
    std::string test_function;
    double slope = 0.0;
    bool slope_defined = false;
    std::string note;
    /// Reference exponents 1/q-tilde and (q_j - q-hat_j)/(2 q_j) for plotting.
    std::vector<double> reference_slopes;
    std::size_t n_paths = 0;
    std::size_t excursions = 0;
    double excursion_threshold = 0.0;
};

/// Increment modulus on deterministic (theta, delta) grids; theta + delta is
/// clamped to T. Grid times snap to the nearest multiple of dt.
ModulusCurve aldous_modulus(const GalerkinSystem& sys, const SchemeConfig& cfg, const Eigen::VectorXd& z0,
                            const Eigen::VectorXd& h_test, const std::vector<double>& delta_grid,
                            const std::vector<double>& theta_grid, std::size_t n_paths,
                            const ModulusOptions& opts = {});

/// E|delta m(delta_min)| below m(delta_max) beyond both confidence intervals.
bool modulus_separated(const ModulusCurve& curve, double confidence = 0.95);

struct ConvergenceRow {
    int n_coarse = 0;
    int n_fine = 0;
    Estimate sup_dual;  // E sup_t |Z_n - Z_n'|^2 in the V1* proxy
    Estimate int_h;     // E int |Z_n - Z_n'|_H^2 dt
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    std::size_t n_paths = 0;
    bool decreasing = false;  // both metrics, beyond CI overlap
};

/// Consecutive levels driven by identical Brownian increments.
ConvergenceTable galerkin_convergence(const std::vector<const GalerkinSystem*>& levels, const SchemeConfig& cfg,
                                      const Eigen::VectorXd& x, std::size_t n_paths, int threads = 1,
                                      double confidence = 0.95);
ConvergenceTable galerkin_convergence(const std::function<GalerkinSystem(int)>& factory,
                                      const std::vector<int>& levels, const SchemeConfig& cfg,
                                      const Eigen::VectorXd& x, std::size_t n_paths, int threads = 1,
                                      double confidence = 0.95);

/// Columns delta, estimate, stderr, theta, in_fit.
void write_modulus_csv(const ModulusCurve& curve, const std::string& path);
/// Columns level_pair, estimate, stderr, metric.
void write_convergence_csv(const ConvergenceTable& table, const std::string& path);

nlohmann::json to_json(const ModulusCurve& curve);
nlohmann::json to_json(const ConvergenceTable& table);

} // namespace frsde
