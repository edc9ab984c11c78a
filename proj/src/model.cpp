#include "frsde/model.hpp"

#include "frsde/basis.hpp"

#include <boost/math/special_functions/zeta.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace frsde {

// ---------------------------------------------------------------- profiles

double Profile::operator()(double /*t*/, double x) const
{
    if (!tabulated())
        return constant;
    if (x <= table_x.front())
        return table_v.front();
    if (x >= table_x.back())
        return table_v.back();
    const auto it = std::upper_bound(table_x.begin(), table_x.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - table_x.begin());
    const double t = (x - table_x[j - 1]) / (table_x[j] - table_x[j - 1]);
    return (1.0 - t) * table_v[j - 1] + t * table_v[j];
}

double Profile::sup() const
{
    if (!tabulated())
        return constant;
    return *std::max_element(table_v.begin(), table_v.end());
}

double Profile::integral_pow(double a, double b, double r) const
{
    if (!tabulated())
        return std::pow(constant, r) * (b - a);
    const CellQuadrature quad(a, b, 511, 4);
    double acc = 0.0;
    for (int k = 0; k < quad.size(); ++k)
        acc += quad.w()[k] * std::pow((*this)(0.0, quad.x()[k]), r);
    return acc;
}

std::vector<std::string> Profile::validate(const std::string& name) const
{
    std::vector<std::string> errors;
    if (!tabulated()) {
        if (!(constant >= 0.0) || !std::isfinite(constant))
            errors.push_back(name + " must be a finite nonnegative value");
        return errors;
    }
    if (table_x.size() != table_v.size() || table_x.size() < 2)
        errors.push_back(name + " table needs matching x/value arrays of length >= 2");
    for (std::size_t i = 1; i < table_x.size(); ++i)
        if (!(table_x[i] > table_x[i - 1]))
            errors.push_back(name + " table x must be strictly increasing");
    for (double v : table_v)
        if (!(v >= 0.0))
            errors.push_back(name + " table values must be nonnegative");
    return errors;
}

double Table1D::operator()(double v) const
{
    if (u.size() < 2)
        return 0.0;
    std::size_t j = 1;
    if (v >= u.back())
        j = u.size() - 1;
    else if (v > u.front())
        j = static_cast<std::size_t>(std::upper_bound(u.begin(), u.end(), v) - u.begin());
    const double t = (v - u[j - 1]) / (u[j] - u[j - 1]);
    return (1.0 - t) * y[j - 1] + t * y[j];
}

namespace {

std::vector<std::string> validate_table(const Table1D& table, const std::string& name)
{
    std::vector<std::string> errors;
    if (table.u.size() < 2 || table.u.size() != table.y.size()) {
        errors.push_back(name + " table needs matching u/y arrays of length >= 2");
        return errors;
    }
    for (std::size_t i = 1; i < table.u.size(); ++i)
        if (!(table.u[i] > table.u[i - 1]))
            errors.push_back(name + " table u must be strictly increasing");
    if (std::abs(table(0.0)) > 1e-14)
        errors.push_back(name + " table must pass through 0 at u = 0");
    return errors;
}

void append(std::vector<std::string>& to, const std::vector<std::string>& from)
{
    to.insert(to.end(), from.begin(), from.end());
}

} // namespace

std::vector<std::string> DriftF::validate() const
{
    std::vector<std::string> errors;
    if (!(p > 2.0))
        errors.emplace_back("drift: p > 2 required");
    if (!(delta1 > 0.0))
        errors.emplace_back("drift: delta1 > 0 required");
    if (!(delta2 > 0.0))
        errors.emplace_back("drift: delta2 > 0 required");
    if (!(delta3 > 0.0))
        errors.emplace_back("drift: delta3 > 0 required");
    append(errors, phi1.validate("drift.phi1"));
    append(errors, phi2.validate("drift.phi2"));
    append(errors, phi4.validate("drift.phi4"));
    if (family == DriftFamily::UserTabulated)
        append(errors, validate_table(table, "drift"));
    return errors;
}

std::vector<std::string> DriftH::validate() const
{
    std::vector<std::string> errors;
    if (!std::isfinite(kappa))
        errors.emplace_back("perturbation: kappa must be finite");
    append(errors, phi3.validate("perturbation.phi3"));
    return errors;
}

// ---------------------------------------------------------------- sequences

std::vector<double> Sequence::head(int m) const
{
    std::vector<double> out(static_cast<std::size_t>(std::max(m, 0)), 0.0);
    for (int i = 1; i <= m; ++i) {
        if (is_explicit())
            out[i - 1] = i <= static_cast<int>(values.size()) ? values[i - 1] : 0.0;
        else
            out[i - 1] = scale * std::pow(static_cast<double>(i), -decay);
    }
    return out;
}

namespace {

// sum_{i > m} i^{-r}, r > 1
double zeta_tail(double r, int m)
{
    double partial = 0.0;
    for (int i = m; i >= 1; --i)
        partial += std::pow(static_cast<double>(i), -r);
    return std::max(0.0, boost::math::zeta(r) - partial);
}

} // namespace

double Sequence::tail(int m) const
{
    if (is_explicit()) {
        double acc = 0.0;
        for (std::size_t i = static_cast<std::size_t>(std::max(m, 0)); i < values.size(); ++i)
            acc += values[i];
        return acc;
    }
    if (scale == 0.0)
        return 0.0;
    if (decay <= 1.0)
        return std::numeric_limits<double>::infinity();
    return scale * zeta_tail(decay, m);
}

double Sequence::tail_squares(int m) const
{
    if (is_explicit()) {
        double acc = 0.0;
        for (std::size_t i = static_cast<std::size_t>(std::max(m, 0)); i < values.size(); ++i)
            acc += values[i] * values[i];
        return acc;
    }
    if (scale == 0.0)
        return 0.0;
    if (2.0 * decay <= 1.0)
        return std::numeric_limits<double>::infinity();
    return scale * scale * zeta_tail(2.0 * decay, m);
}

// ---------------------------------------------------------------- noise

std::vector<double> NoiseModel::alphas() const
{
    if (!alpha.empty())
        return alpha;
    std::vector<double> out = gammas();
    for (double& v : out)
        v *= 0.25 * q * q;
    return out;
}

double NoiseModel::sigma2(int i, double u) const
{
    const double g = gamma.is_explicit() ? gamma.head(i).back() : gamma.scale * std::pow(double(i), -gamma.decay);
    return std::sqrt(g) * psi(u);
}

std::vector<std::string> NoiseModel::validate(double p) const
{
    std::vector<std::string> errors;
    if (m < 1)
        errors.emplace_back("noise: modes >= 1 required");
    if (!(q >= 2.0 && q < p)) {
        std::ostringstream msg;
        msg << "noise: q must satisfy 2 ≤ q < p (q = " << q << ", p = " << p << ")";
        errors.push_back(msg.str());
    }
    auto check_seq = [&](const Sequence& s, const std::string& name, bool squares) {
        for (double v : s.head(m))
            if (!(v >= 0.0) || !std::isfinite(v)) {
                errors.push_back("noise: " + name + " entries must be finite and nonnegative");
                break;
            }
        if (s.is_explicit() && static_cast<int>(s.values.size()) < m)
            errors.push_back("noise: " + name + " lists fewer than `modes` values");
        const double tail = squares ? s.tail_squares(m) : s.tail(m);
        if (!std::isfinite(tail))
            errors.push_back("noise: " + name + " sequence is not summable");
    };
    check_seq(sigma1, "sigma1", true);
    check_seq(beta, "beta", false);
    check_seq(gamma, "gamma", false);
    if (!alpha.empty() && static_cast<int>(alpha.size()) != m)
        errors.emplace_back("noise: alpha must list exactly `modes` values");
    for (double v : alpha)
        if (!(v >= 0.0))
            errors.emplace_back("noise: alpha entries must be nonnegative");
    if (sigma2_family == Sigma2Family::UserTabulated)
        append(errors, validate_table(psi_table, "noise.psi"));
    return errors;
}

Eigen::MatrixXd sigma1_at_nodes(const NoiseModel& nm, const ModalBasis& basis)
{
    const std::vector<double> a = nm.a();
    Eigen::MatrixXd out(basis.points(), nm.m);
    if (nm.sigma1_shape == Sigma1Shape::Eigenmode && nm.m > basis.available())
        throw std::invalid_argument("eigenmode noise shapes need at least `modes` basis functions");
    const double L = basis.measure();
    for (int i = 1; i <= nm.m; ++i) {
        for (int k = 0; k < basis.points(); ++k) {
            double shape = 1.0;
            switch (nm.sigma1_shape) {
            case Sigma1Shape::Sine:
                shape = std::sin(i * std::numbers::pi * (basis.x()[k] - basis.a()) / L);
                break;
            case Sigma1Shape::Constant:
                shape = 1.0;
                break;
            case Sigma1Shape::Eigenmode:
                shape = basis.values()(k, i - 1);
                break;
            }
            out(k, i - 1) = a[i - 1] * shape;
        }
    }
    return out;
}

// ---------------------------------------------------------------- HS norm

HsNorm hs_norm_B(const NoiseModel& nm, const Eigen::MatrixXd& sigma1_nodes, const Eigen::VectorXd& v,
                 const Eigen::VectorXd& weights, double p, double measure)
{
    if (v.size() != weights.size() || sigma1_nodes.rows() != v.size() || sigma1_nodes.cols() != nm.m)
        throw std::invalid_argument("hs_norm_B: dimension mismatch");
    const std::vector<double> gam = nm.gammas();
    const std::vector<double> bet = nm.betas();
    HsNorm out;
    double sigma1_sq = 0.0;
    for (int i = 0; i < nm.m; ++i) {
        const double root = std::sqrt(gam[i]);
        double mode = 0.0;
        double s1 = 0.0;
        for (Eigen::Index k = 0; k < v.size(); ++k) {
            const double val = sigma1_nodes(k, i) + root * nm.psi(v[k]);
            mode += weights[k] * val * val;
            s1 += weights[k] * sigma1_nodes(k, i) * sigma1_nodes(k, i);
        }
        out.value += mode;
        sigma1_sq += s1;
    }
    double sum_beta = 0.0;
    double sum_gamma = 0.0;
    for (int i = 0; i < nm.m; ++i) {
        sum_beta += bet[i];
        sum_gamma += gam[i];
    }
    double lp = 0.0;
    for (Eigen::Index k = 0; k < v.size(); ++k)
        lp += weights[k] * std::pow(std::abs(v[k]), p);
    const double v2_q = std::pow(lp, nm.q / p);
    out.bound_rhs = 2.0 * sigma1_sq + 2.0 * measure * sum_beta +
                    2.0 * std::pow(measure, (p - nm.q) / p) * sum_gamma * v2_q;
    return out;
}

HsNorm hs_norm_B(const NoiseModel& nm, const ModalBasis& basis, double /*t*/, const Eigen::VectorXd& z, double p)
{
    const Eigen::MatrixXd s1 = sigma1_at_nodes(nm, basis);
    return hs_norm_B(nm, s1, basis.reconstruct(z), basis.w(), p, basis.measure());
}

// ---------------------------------------------------------------- profile

std::vector<std::string> HypothesisProfile::validate() const
{
    std::vector<std::string> errors;
    if (!(alpha2 > 0.0))
        errors.emplace_back("profile: alpha2 > 0 required");
    if (alpha3 < 0.0 || alpha4 < 0.0 || beta_exp < 0.0)
        errors.emplace_back("profile: alpha3, alpha4 and beta must be nonnegative");
    if (q_list.size() != qhat_list.size() || q_list.empty())
        errors.emplace_back("profile: q and q-hat lists must have equal nonzero length");
    for (std::size_t j = 0; j < std::min(q_list.size(), qhat_list.size()); ++j)
        if (!(qhat_list[j] >= 1.0 && qhat_list[j] < q_list[j]))
            errors.emplace_back("profile: 1 <= q-hat_j < q_j required for every j");
    if (!q_list.empty()) {
        if (q_tilde != *std::max_element(q_list.begin(), q_list.end()))
            errors.emplace_back("profile: q-tilde must equal max q_j");
        if (q_under != *std::min_element(q_list.begin(), q_list.end()))
            errors.emplace_back("profile: q-under must equal min q_j");
    }
    if (!g)
        errors.emplace_back("profile: g(t) missing");
    return errors;
}

HypothesisProfile default_profile(const DriftF& f, const DriftH& h, const NoiseModel& nm, const ModalBasis& basis)
{
    const double p = f.p;
    const double q = nm.q;
    if (!(f.delta1 > 0.0) || !(q < p))
        throw std::invalid_argument("default_profile needs delta1 > 0 and q < p");
    const double measure = basis.measure();
    const double dual = p / (p - 1.0);

    double sum_beta = 0.0;
    double sum_gamma = 0.0;
    for (double v : nm.betas())
        sum_beta += v;
    for (double v : nm.gammas())
        sum_gamma += v;

    HypothesisProfile prof;
    prof.alpha2 = std::min(2.0, f.delta1);
    const double growth = 2.0 * std::pow(measure, (p - q) / p) * sum_gamma;
    // sup_X (growth X^q - delta1 X^p), absorbed by Young's inequality
    double young = 0.0;
    if (growth > 0.0) {
        const double xstar = std::pow(growth * q / (f.delta1 * p), 1.0 / (p - q));
        young = growth * std::pow(xstar, q) * (p - q) / p;
    }
    prof.c1 = 2.0 * measure * sum_beta + young;

    const Eigen::MatrixXd s1 = sigma1_at_nodes(nm, basis);
    double sigma1_sq = 0.0;
    for (int i = 0; i < nm.m; ++i)
        sigma1_sq += basis.w().dot(s1.col(i).cwiseAbs2());

    const double a = basis.a();
    const double b = basis.b();
    const double phi3_sup = h.phi3.sup();
    const double phi1_l1 = f.phi1.integral_pow(a, b, 1.0);
    const double phi2_dual = f.phi2.integral_pow(a, b, dual);
    const double alpha2 = prof.alpha2;
    const double c1 = prof.c1;
    prof.g = [=](double) {
        return 2.0 * phi3_sup + alpha2 + 2.0 * phi1_l1 + 2.0 * sigma1_sq + c1 + std::pow(2.0, dual) * phi2_dual;
    };
    prof.alpha3 = std::max({1.0, std::pow(2.0 * f.delta2, dual), phi3_sup * phi3_sup});
    prof.alpha4 = growth;
    prof.beta_exp = 0.0;
    prof.q_list = {2.0, p, 2.0};
    prof.qhat_list = {1.0, q, 1.0};
    prof.q_tilde = std::max(2.0, p);
    prof.q_under = std::min(2.0, p);
    return prof;
}

// ---------------------------------------------------------------- sampling

std::vector<double> SampleGrid::u_values(int n) const
{
    std::vector<double> out(static_cast<std::size_t>(n));
    // exact symmetry: u_k = -u_{n-1-k}
    for (int k = 0; k < n; ++k)
        out[k] = u_max * static_cast<double>(2 * k - (n - 1)) / static_cast<double>(n - 1);
    return out;
}

void SampleGrid::check() const
{
    if (n_u < 2 || n_pair < 2 || t.empty() || x.empty() || !(u_max > 0.0))
        throw std::invalid_argument("empty sampling grid");
}

namespace {

class MarginTracker {
public:
    explicit MarginTracker(std::string condition) { report_.condition = std::move(condition); }

    void observe(double margin, double t, double x, double u1, double u2 = std::numeric_limits<double>::quiet_NaN(),
                 const std::string& note = {})
    {
        ++report_.samples;
        if (!std::isfinite(margin) && !(margin == std::numeric_limits<double>::infinity())) {
            if (!nonfinite_) {
                nonfinite_ = true;
                report_.witness = Witness{t, x, u1, u2, note.empty() ? "non-finite evaluation" : note + "; non-finite"};
            }
            return;
        }
        if (margin < report_.margin) {
            report_.margin = margin;
            if (!nonfinite_)
                report_.witness = Witness{t, x, u1, u2, note};
        }
    }

    CheckReport finish(const std::string& message = {})
    {
        report_.pass = !nonfinite_ && report_.margin >= -kCheckTolerance;
        if (nonfinite_)
            report_.margin = -std::numeric_limits<double>::infinity();
        report_.message = message;
        if (report_.pass && report_.message.empty())
            report_.message = "no violation found on grid";
        return report_;
    }

private:
    CheckReport report_;
    bool nonfinite_ = false;
};

} // namespace

std::vector<CheckReport> check_f(const DriftF& f, const SampleGrid& grid, const DriftF* claimed)
{
    grid.check();
    const DriftF& c = claimed ? *claimed : f;
    const double p = c.p;
    const std::vector<double> uu = grid.u_values(grid.n_u);
    const std::vector<double> up = grid.u_values(grid.n_pair);

    MarginTracker f0("f0"), f1("f1"), f2("f2"), f3("f3"), ff1("ff1");
    for (double t : grid.t) {
        for (double x : grid.x) {
            f0.observe(-std::abs(f(t, x, 0.0)), t, x, 0.0);
            for (double u : uu) {
                const double fu = f(t, x, u);
                const double au = std::abs(u);
                f2.observe(-c.delta1 * std::pow(au, p) + c.phi1(t, x) - fu * u, t, x, u);
                f3.observe(c.delta2 * std::pow(au, p - 1.0) + c.phi2(t, x) - std::abs(fu), t, x, u);
            }
            std::vector<double> fp(up.size());
            for (std::size_t i = 0; i < up.size(); ++i)
                fp[i] = f(t, x, up[i]);
            const double phi4 = c.phi4(t, x);
            for (std::size_t i = 0; i < up.size(); ++i) {
                for (std::size_t j = i + 1; j < up.size(); ++j) {
                    const double lo = up[i];
                    const double hi = up[j];
                    // f decreasing: f(hi) <= f(lo)
                    f1.observe(fp[i] - fp[j], t, x, lo, hi);
                    const double d = hi - lo;
                    const double weight = std::pow(std::abs(lo), p - 2.0) + std::pow(std::abs(hi), p - 2.0);
                    const double slack = -c.delta3 * weight * d * d + phi4 * d * d - (fp[j] - fp[i]) * d;
                    ff1.observe(slack, t, x, lo, hi);
                }
            }
        }
    }
    return {f0.finish(), f1.finish(), f2.finish(), f3.finish(), ff1.finish()};
}

double certify_delta3(const DriftF& f, const SampleGrid& grid)
{
    grid.check();
    const std::vector<double> up = grid.u_values(grid.n_pair);
    struct Pair {
        double rest;    // phi4 d^2 - (f(hi) - f(lo)) d
        double weight;  // (|lo|^{p-2} + |hi|^{p-2}) d^2
    };
    std::vector<Pair> pairs;
    for (double t : grid.t)
        for (double x : grid.x) {
            const double phi4 = f.phi4(t, x);
            for (std::size_t i = 0; i < up.size(); ++i)
                for (std::size_t j = i + 1; j < up.size(); ++j) {
                    const double d = up[j] - up[i];
                    const double w = (std::pow(std::abs(up[i]), f.p - 2.0) + std::pow(std::abs(up[j]), f.p - 2.0)) * d * d;
                    pairs.push_back({phi4 * d * d - (f(t, x, up[j]) - f(t, x, up[i])) * d, w});
                }
        }
    auto feasible = [&](double delta3) {
        for (const auto& pr : pairs)
            if (pr.rest - delta3 * pr.weight < 0.0)
                return false;
        return true;
    };
    if (!feasible(0.0))
        return 0.0;
    double lo = 0.0;
    double hi = 1.0;
    while (feasible(hi) && hi < 1e12) {
        lo = hi;
        hi *= 2.0;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? lo : hi) = mid;
    }
    return lo;
}

CheckReport check_h(const DriftH& h, const SampleGrid& grid)
{
    grid.check();
    const std::vector<double> up = grid.u_values(grid.n_pair);
    MarginTracker tracker("h1");
    for (double t : grid.t)
        for (double x : grid.x) {
            tracker.observe(-std::abs(h(t, x, 0.0)), t, x, 0.0, std::numeric_limits<double>::quiet_NaN(),
                            "h(t,x,0) must vanish");
            const double phi3 = h.phi3(t, x);
            std::vector<double> hv(up.size());
            for (std::size_t i = 0; i < up.size(); ++i)
                hv[i] = h(t, x, up[i]);
            for (std::size_t i = 0; i < up.size(); ++i)
                for (std::size_t j = i + 1; j < up.size(); ++j) {
                    const double quotient = std::abs(hv[j] - hv[i]) / (up[j] - up[i]);
                    tracker.observe(phi3 - quotient, t, x, up[i], up[j]);
                }
        }
    return tracker.finish();
}

std::vector<CheckReport> check_sigma(const NoiseModel& nm, const DriftF& f, const SampleGrid& grid, double horizon,
                                     double measure)
{
    grid.check();
    std::vector<CheckReport> out;
    const double p = f.p;

    {
        CheckReport r;
        r.condition = "q_range";
        r.samples = 1;
        r.margin = std::min(nm.q - 2.0, p - nm.q);
        r.pass = nm.q >= 2.0 && nm.q < p;
        std::ostringstream note;
        note << "q = " << nm.q << ", p = " << p;
        r.witness.note = note.str();
        r.message = r.pass ? "2 ≤ q < p" : "q must satisfy 2 ≤ q < p";
        out.push_back(r);
    }

    const std::vector<double> uu = grid.u_values(grid.n_u);
    const std::vector<double> up = grid.u_values(grid.n_pair);
    const std::vector<double> bet = nm.betas();
    const std::vector<double> gam = nm.gammas();
    const std::vector<double> alp = nm.alphas();

    {
        // sigma_i - sigma_{1,i} must depend on u alone
        MarginTracker sig1("sig1");
        for (int i = 1; i <= nm.m; ++i)
            for (double u : uu) {
                const double reference = nm.sigma2(i, u);
                double dev = 0.0;
                for (double t : grid.t)
                    for (double x : grid.x) {
                        (void)t;
                        (void)x;
                        dev = std::max(dev, std::abs(nm.sigma2(i, u) - reference));
                    }
                sig1.observe(std::isfinite(reference) ? -dev : reference, 0.0, 0.0, u,
                             std::numeric_limits<double>::quiet_NaN(), "mode " + std::to_string(i));
            }
        out.push_back(sig1.finish());
    }

    {
        CheckReport r;
        r.condition = "sig2";
        const std::vector<double> a = nm.a();
        double shape_sq = 1.0;
        switch (nm.sigma1_shape) {
        case Sigma1Shape::Sine: shape_sq = 0.5 * measure; break;
        case Sigma1Shape::Constant: shape_sq = measure; break;
        case Sigma1Shape::Eigenmode: shape_sq = 1.0; break;
        }
        double partial = 0.0;
        for (double v : a)
            partial += v * v * shape_sq * horizon;
        const double tail = nm.sigma1.tail_squares(nm.m) * shape_sq * horizon;
        r.samples = static_cast<std::size_t>(nm.m);
        r.pass = std::isfinite(partial) && std::isfinite(tail);
        r.margin = r.pass ? 0.0 : -std::numeric_limits<double>::infinity();
        std::ostringstream msg;
        msg << "partial sum " << partial << ", truncated tail " << tail;
        r.message = msg.str();
        r.witness.note = r.pass ? "" : "sigma1 coefficients not square summable";
        out.push_back(r);
    }

    {
        MarginTracker sig3("sig3");
        for (int i = 1; i <= nm.m; ++i)
            for (double u : uu) {
                const double s = nm.sigma2(i, u);
                sig3.observe(bet[i - 1] + gam[i - 1] * std::pow(std::abs(u), nm.q) - s * s, 0.0, 0.0, u,
                             std::numeric_limits<double>::quiet_NaN(), "mode " + std::to_string(i));
            }
        out.push_back(sig3.finish());
    }

    {
        CheckReport r;
        r.condition = "sig4";
        double partial = 0.0;
        for (int i = 0; i < nm.m; ++i)
            partial += bet[i] + gam[i];
        const double tail = nm.beta.tail(nm.m) + nm.gamma.tail(nm.m);
        r.samples = static_cast<std::size_t>(nm.m);
        r.pass = std::isfinite(partial) && std::isfinite(tail);
        r.margin = r.pass ? 0.0 : -std::numeric_limits<double>::infinity();
        std::ostringstream msg;
        msg << "partial sum " << partial << ", truncated tail " << tail;
        r.message = msg.str();
        r.witness.note = r.pass ? "" : "beta + gamma not summable";
        out.push_back(r);
    }

    {
        MarginTracker ff2("ff2");
        for (int i = 1; i <= nm.m; ++i) {
            std::vector<double> sv(up.size());
            for (std::size_t k = 0; k < up.size(); ++k)
                sv[k] = nm.sigma2(i, up[k]);
            for (std::size_t k = 0; k < up.size(); ++k)
                for (std::size_t l = k + 1; l < up.size(); ++l) {
                    const double d = up[l] - up[k];
                    const double weight =
                        1.0 + std::pow(std::abs(up[k]), nm.q - 2.0) + std::pow(std::abs(up[l]), nm.q - 2.0);
                    const double diff = sv[l] - sv[k];
                    ff2.observe(alp[i - 1] * weight * d * d - diff * diff, 0.0, 0.0, up[k], up[l],
                                "mode " + std::to_string(i));
                }
        }
        out.push_back(ff2.finish());
    }
    return out;
}

// ---------------------------------------------------------------- abstract

std::vector<CheckReport> check_abstract(const HypothesisProfile& profile, const DriftF& f, const DriftH& h,
                                        const NoiseModel& nm, const ModalBasis& basis, int n_modes,
                                        const StateSampling& sampling)
{
    if (n_modes < 1 || n_modes > basis.available())
        throw std::invalid_argument("check_abstract: n_modes outside the basis");
    if (sampling.n_states < 1 || sampling.t.empty())
        throw std::invalid_argument("check_abstract: empty state sampling");

    std::vector<CheckReport> out;
    {
        CheckReport r;
        r.condition = "profile";
        const auto errors = profile.validate();
        r.pass = errors.empty();
        r.margin = r.pass ? 0.0 : -1.0;
        r.samples = 1;
        for (const auto& e : errors)
            r.message += (r.message.empty() ? "" : "; ") + e;
        if (!r.pass)
            r.witness.note = r.message;
        out.push_back(r);
        if (!r.pass)
            return out;
    }

    const double p = f.p;
    const double dual = p / (p - 1.0);
    const Eigen::VectorXd lam = basis.eigenvalues().head(n_modes);
    const Eigen::MatrixXd s1 = sigma1_at_nodes(nm, basis);
    const Eigen::VectorXd& w = basis.w();
    const Eigen::VectorXd& xs = basis.x();

    std::mt19937_64 rng(sampling.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double log_lo = std::log(sampling.scale_min);
    const double log_hi = std::log(sampling.scale_max);

    MarginTracker h3("H3"), h4a1("H4[A1]"), h4a2("H4[A2]"), h4a3("H4[A3]"), h5("H5");
    Eigen::VectorXd c(n_modes);
    for (int state = 0; state <= sampling.n_states; ++state) {
        if (state == 0) {
            c.setZero();
        } else {
            const double scale = std::exp(log_lo + (log_hi - log_lo) * unit(rng));
            for (int k = 0; k < n_modes; ++k)
                c[k] = scale * std::pow(k + 1.0, -sampling.decay) * normal(rng);
        }
        const Eigen::VectorXd v = basis.reconstruct(c);
        const double v1_sq = (lam.array() * c.array().square()).sum();
        const double a1_dual = (lam.array().square() * c.array().square() / (1.0 + lam.array())).sum();
        double v2_p = 0.0;
        double h_sq = 0.0;
        for (Eigen::Index k = 0; k < v.size(); ++k) {
            v2_p += w[k] * std::pow(std::abs(v[k]), p);
            h_sq += w[k] * v[k] * v[k];
        }
        const double h_norm = std::sqrt(h_sq);
        const double hb = 1.0 + std::pow(h_norm, profile.beta_exp);
        const HsNorm hs = hs_norm_B(nm, s1, v, w, p, basis.measure());
        for (double t : sampling.t) {
            double pair_f = 0.0;
            double pair_h = 0.0;
            double a2_dual = 0.0;
            double a3_dual = 0.0;
            for (Eigen::Index k = 0; k < v.size(); ++k) {
                const double fv = f(t, xs[k], v[k]);
                const double hv = h(t, xs[k], v[k]);
                pair_f += w[k] * fv * v[k];
                pair_h += w[k] * hv * v[k];
                a2_dual += w[k] * std::pow(std::abs(fv), dual);
                a3_dual += w[k] * hv * hv;
            }
            const double g = profile.g(t);
            const std::string note = "state " + std::to_string(state);
            const double nan = std::numeric_limits<double>::quiet_NaN();

            const double lhs3 = 2.0 * (-v1_sq + pair_f + pair_h) + hs.value;
            const double rhs3 = -profile.alpha2 * (v1_sq + v2_p + h_sq) + g * (1.0 + h_sq);
            h3.observe(rhs3 - lhs3, t, nan, h_norm, nan, note);

            h4a1.observe(profile.alpha3 * v1_sq * hb + g * hb - a1_dual, t, nan, h_norm, nan, note);
            h4a2.observe(profile.alpha3 * v2_p * hb + g * hb - a2_dual, t, nan, h_norm, nan, note);
            h4a3.observe(profile.alpha3 * h_sq * hb + g * hb - a3_dual, t, nan, h_norm, nan, note);

            const double v_norms[3] = {std::sqrt(v1_sq), std::pow(v2_p, 1.0 / p), h_norm};
            double growth = 0.0;
            for (std::size_t j = 0; j < 3 && j < profile.qhat_list.size(); ++j)
                growth += std::pow(v_norms[j], profile.qhat_list[j]);
            h5.observe(profile.alpha4 * growth + g * (1.0 + h_sq) - hs.value, t, nan, h_norm, nan, note);
        }
    }
    const std::string info = "u1 holds ||v||_H of the worst sampled state";
    out.push_back(h3.finish());
    out.push_back(h4a1.finish());
    out.push_back(h4a2.finish());
    out.push_back(h4a3.finish());
    out.push_back(h5.finish());
    for (auto& r : out)
        if (r.condition != "profile" && !r.pass)
            r.message = info;
    return out;
}

// ---------------------------------------------------------------- names

std::string to_string(DriftFamily v) { return v == DriftFamily::PowerDecay ? "power_decay" : "tabulated"; }
std::string to_string(PerturbationFamily v) { return v == PerturbationFamily::Linear ? "linear" : "bounded_sine"; }
std::string to_string(Sigma1Shape v)
{
    switch (v) {
    case Sigma1Shape::Sine: return "sine";
    case Sigma1Shape::Constant: return "constant";
    case Sigma1Shape::Eigenmode: return "eigenmode";
    }
    return "sine";
}
std::string to_string(Sigma2Family v) { return v == Sigma2Family::PowerHalfQ ? "power_half_q" : "tabulated"; }

} // namespace frsde
