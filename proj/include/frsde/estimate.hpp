#pragma once

#include "frsde/galerkin.hpp"
#include "frsde/stats.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <vector>

namespace frsde {

/// Path functionals of the uniform-estimate lemmas, in report order.
enum class Functional {
    SupH,          // sup_t |Z|_H^{2p}
    EnergyPow,     // (int sum_j |Z|_{V_j}^{q_j})^p
    Weighted,      // int |Z|_H^{2p-2} sum_j |Z|_{V_j}^{q_j}
    A1Dual,        // int |A_1|_{V_1*}^2
    A2Dual,        // int |A_2|_{V_2*}^{p/(p-1)}
    A3Dual,        // int |A_3|_{V_3*}^2
    Hs,            // int |B|_HS^2
    TerminalH,     // |Z(T)|_H^{2p}
};

constexpr int kFunctionalCount = 8;
std::string to_string(Functional f);
/// Normalized by (1 + |x|^{2p}); the rest use (1 + |x|^{beta+2}).
bool uses_moment_normalization(Functional f);

struct MomentReport {
    double p_exp = 1.0;
    int n_modes = 0;
    std::size_t n_paths = 0;
    double x_norm = 0.0;
    double beta_exp = 0.0;
    std::vector<Estimate> estimates;  // indexed by Functional
    std::vector<std::string> warnings;

    const Estimate& at(Functional f) const { return estimates.at(static_cast<std::size_t>(f)); }
    double normalizer(Functional f) const;
    double ratio(Functional f) const { return at(f).mean / normalizer(f); }
    double ratio_se(Functional f) const { return at(f).se / normalizer(f); }
};

/// One report per entry of p_exps, all from the same paths (indices
/// 0..n_paths-1 under cfg.master_seed).
std::vector<MomentReport> mc_moments(const GalerkinSystem& sys, const SchemeConfig& cfg, const Eigen::VectorXd& z0,
                                     std::size_t n_paths, const std::vector<double>& p_exps, int threads = 1,
                                     double beta_exp = 0.0);
MomentReport mc_moments(const GalerkinSystem& sys, const SchemeConfig& cfg, const Eigen::VectorXd& z0,
                        std::size_t n_paths, double p_exp, int threads = 1, double beta_exp = 0.0);

struct UniformityOptions {
    double factor = 1.25;
    double confidence = 0.95;
};

struct SpreadCell {
    Functional functional = Functional::SupH;
    double p_exp = 1.0;
    double x_norm = 0.0;
    double max_ratio = 0.0;
    double min_ratio = 0.0;
    double raw_spread = 1.0;       // max / min
    double adjusted_spread = 1.0;  // (max - z se) / (min + z se), floored at 1
    bool uniform = true;
};

struct LinearFit {
    double p_exp = 1.0;
    int n_modes = 0;
    double intercept = 0.0;
    double slope = 0.0;
};

struct UniformitySummary {
    std::vector<SpreadCell> cells;
    std::vector<LinearFit> fits;  // E sup |Z|^{2p} against 1 + |x|^{2p}
    bool all_finite = true;
    bool uniform = true;
    std::string verdict;          // "uniform" or "not uniform"
};

/// Cross-level spread of every moment-normalized ratio, per (p_exp, x).
/// Needs at least 3 levels and 2 initial magnitudes.
UniformitySummary uniformity_check(const std::vector<MomentReport>& reports, const UniformityOptions& opts = {});

nlohmann::json to_json(const MomentReport& report);
nlohmann::json to_json(const UniformitySummary& summary);

/// One row per (n_modes, x_norm, p_exp): each functional with its standard
/// error, ratio and ratio standard error.
void write_moments_csv(const std::vector<MomentReport>& reports, const std::string& path);

} // namespace frsde
