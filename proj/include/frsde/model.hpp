#pragma once

#include "frsde/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace frsde {

class ModalBasis;

/// x^e for x >= 0, with multiplication and sqrt for small integer and
/// half-integer exponents.
inline double fast_pow(double x, double e)
{
    const double twice = 2.0 * e;
    if (twice == std::floor(twice) && e >= 0.0 && e <= 8.0) {
        const int k = static_cast<int>(e);
        double r = 1.0;
        for (int i = 0; i < k; ++i)
            r *= x;
        return twice == 2.0 * k ? r : r * std::sqrt(x);
    }
    return std::pow(x, e);
}

/// Nonnegative coefficient profile phi(t, x): a constant, or a piecewise
/// linear table in x (constant in t).
struct Profile {
    double constant = 0.0;
    std::vector<double> table_x;  // strictly increasing
    std::vector<double> table_v;  // nonnegative

    static Profile uniform(double value) { return Profile{value, {}, {}}; }
    bool tabulated() const { return !table_x.empty(); }
    double operator()(double t, double x) const;
    double sup() const;
    /// Integral of phi(t, .)^r over (a, b), r > 0.
    double integral_pow(double a, double b, double r) const;
    std::vector<std::string> validate(const std::string& name) const;
};

/// Piecewise-linear curve u -> y(u) with linear extrapolation from the end
/// segments.
struct Table1D {
    std::vector<double> u;
    std::vector<double> y;
    double operator()(double v) const;
    bool empty() const { return u.empty(); }
};

enum class DriftFamily { PowerDecay, UserTabulated };
enum class PerturbationFamily { Linear, BoundedSine };
enum class Sigma1Shape { Sine, Constant, Eigenmode };
enum class Sigma2Family { PowerHalfQ, UserTabulated };

/// f(t, x, u). PowerDecay: -delta1 u |u|^{p-2}. UserTabulated: table in u.
struct DriftF {
    DriftFamily family = DriftFamily::PowerDecay;
    double p = 4.0;
    double delta1 = 1.0;
    double delta2 = 1.0;
    double delta3 = 0.5;
    Profile phi1;
    Profile phi2;
    Profile phi4;
    Table1D table;

    double operator()(double /*t*/, double /*x*/, double u) const
    {
        if (family == DriftFamily::PowerDecay)
            return -delta1 * u * fast_pow(std::abs(u), p - 2.0);
        return table(u);
    }
    std::vector<std::string> validate() const;
};

/// h(t, x, u). Linear: kappa u. BoundedSine: kappa sin u.
struct DriftH {
    PerturbationFamily family = PerturbationFamily::BoundedSine;
    double kappa = 0.5;
    Profile phi3 = Profile::uniform(0.5);

    double operator()(double /*t*/, double /*x*/, double u) const
    {
        return family == PerturbationFamily::Linear ? kappa * u : kappa * std::sin(u);
    }
    std::vector<std::string> validate() const;
};

/// Power-law sequence v_i = scale i^{-decay}, or explicit values (zero tail).
struct Sequence {
    double scale = 0.0;
    double decay = 2.0;
    std::vector<double> values;

    static Sequence power(double scale, double decay) { return Sequence{scale, decay, {}}; }
    static Sequence list(std::vector<double> v) { return Sequence{0.0, 0.0, std::move(v)}; }
    bool is_explicit() const { return !values.empty(); }
    /// v_i for i = 1..m
    std::vector<double> head(int m) const;
    /// sum_{i > m} v_i (infinite when the power law is not summable).
    double tail(int m) const;
    /// sum_{i > m} v_i^2
    double tail_squares(int m) const;
};

/// sigma_i(t, x, u) = sigma_{1,i}(x) + sigma_{2,i}(u), i = 1..m, with
/// sigma_{1,i} = a_i shape_i(x) and sigma_{2,i}(u) = sqrt(gamma_i) psi(u).
/// PowerHalfQ uses psi(u) = sign(u) |u|^{q/2}.
struct NoiseModel {
    int m = 8;
    double q = 3.0;
    Sequence sigma1 = Sequence::power(0.5, 1.0);
    Sigma1Shape sigma1_shape = Sigma1Shape::Sine;
    Sequence beta = Sequence::power(0.01, 2.0);
    Sequence gamma = Sequence::power(0.25, 2.0);
    /// Empty means alpha_i = (q^2 / 4) gamma_i, which satisfies (ff2) for
    /// PowerHalfQ.
    std::vector<double> alpha;
    Sigma2Family sigma2_family = Sigma2Family::PowerHalfQ;
    Table1D psi_table;

    double psi(double u) const
    {
        if (sigma2_family == Sigma2Family::PowerHalfQ)
            return std::copysign(fast_pow(std::abs(u), 0.5 * q), u);
        return psi_table(u);
    }
    std::vector<double> a() const { return sigma1.head(m); }
    std::vector<double> betas() const { return beta.head(m); }
    std::vector<double> gammas() const { return gamma.head(m); }
    std::vector<double> alphas() const;
    double sigma2(int i, double u) const;  // 1-based mode index
    std::vector<std::string> validate(double p) const;
};

/// Values of sigma_{1,i} (columns i = 1..m) at the quadrature points of
/// `basis`. Eigenmode shapes need m eigenfunctions in the basis.
Eigen::MatrixXd sigma1_at_nodes(const NoiseModel& nm, const ModalBasis& basis);

/// Constants of the abstract hypotheses for a concrete model.
struct HypothesisProfile {
    std::function<double(double)> g;
    double alpha2 = 1.0;
    double alpha3 = 1.0;
    double alpha4 = 0.0;
    double beta_exp = 0.0;
    std::vector<double> q_list;     // (2, p, 2)
    std::vector<double> qhat_list;  // each below the matching q
    double q_tilde = 0.0;
    double q_under = 0.0;
    double c1 = 0.0;                // the beta/gamma constant inside g
    std::vector<std::string> validate() const;
};

struct Witness {
    double t = std::numeric_limits<double>::quiet_NaN();
    double x = std::numeric_limits<double>::quiet_NaN();
    double u1 = std::numeric_limits<double>::quiet_NaN();
    double u2 = std::numeric_limits<double>::quiet_NaN();
    std::string note;
    bool populated() const { return !std::isnan(t) || !std::isnan(u1) || !note.empty(); }
};

/// Outcome of one sampled condition. Reports mean "no violation found on the
/// grid", never a proof.
struct CheckReport {
    std::string condition;
    bool pass = true;
    double margin = std::numeric_limits<double>::infinity();
    Witness witness;
    std::size_t samples = 0;
    std::string message;
};

constexpr double kCheckTolerance = 1e-9;

/// Sampling lattice for the pointwise checks. u values are generated
/// symmetrically so that u and -u are both present exactly.
struct SampleGrid {
    double u_max = 3.0;
    int n_u = 1001;         // univariate checks
    int n_pair = 201;       // pairwise checks use all ordered pairs of this grid
    std::vector<double> t = {0.0, 0.5, 1.0};
    std::vector<double> x = {0.1, 0.3, 0.5, 0.7, 0.9};

    std::vector<double> u_values(int n) const;
    void check() const;
};

std::vector<CheckReport> check_f(const DriftF& f, const SampleGrid& grid, const DriftF* claimed = nullptr);
CheckReport check_h(const DriftH& h, const SampleGrid& grid);
std::vector<CheckReport> check_sigma(const NoiseModel& nm, const DriftF& f, const SampleGrid& grid,
                                     double horizon = 1.0, double measure = 1.0);

/// Largest delta3 for which (ff1) holds on the pair grid, by bisection.
double certify_delta3(const DriftF& f, const SampleGrid& grid);

struct HsNorm {
    double value = 0.0;
    double bound_rhs = 0.0;
};

/// ||B(t, v)||_HS^2 = sum_i ||sigma_{1,i} + sigma_{2,i}(v)||_H^2 for v given by
/// its samples at the quadrature points, and the Hilbert-Schmidt upper bound.
HsNorm hs_norm_B(const NoiseModel& nm, const Eigen::MatrixXd& sigma1_nodes, const Eigen::VectorXd& v,
                 const Eigen::VectorXd& weights, double p, double measure);

/// Same, for eigen-coordinates z of the basis.
HsNorm hs_norm_B(const NoiseModel& nm, const ModalBasis& basis, double t, const Eigen::VectorXd& z, double p);

/// Constants for the concrete reaction-diffusion model, including g(t).
HypothesisProfile default_profile(const DriftF& f, const DriftH& h, const NoiseModel& nm, const ModalBasis& basis);

struct StateSampling {
    int n_states = 1000;
    double scale_min = 1e-2;
    double scale_max = 10.0;
    double decay = 1.0;          // coefficient std dev ~ k^{-decay}
    std::vector<double> t = {0.0, 0.5, 1.0};
    unsigned long long seed = 12345;
};

/// (H3), (H4) per component and (H5) on sampled states (z = 0 included).
std::vector<CheckReport> check_abstract(const HypothesisProfile& profile, const DriftF& f, const DriftH& h,
                                        const NoiseModel& nm, const ModalBasis& basis, int n_modes,
                                        const StateSampling& sampling);

std::string to_string(DriftFamily v);
std::string to_string(PerturbationFamily v);
std::string to_string(Sigma1Shape v);
std::string to_string(Sigma2Family v);

} // namespace frsde
