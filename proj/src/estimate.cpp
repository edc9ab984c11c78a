#include "frsde/estimate.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace frsde {

std::string to_string(Functional f)
{
    switch (f) {
    case Functional::SupH: return "sup_h_2p";
    case Functional::EnergyPow: return "energy_p";
    case Functional::Weighted: return "weighted_energy";
    case Functional::A1Dual: return "a1_dual";
    case Functional::A2Dual: return "a2_dual";
    case Functional::A3Dual: return "a3_dual";
    case Functional::Hs: return "hs";
    case Functional::TerminalH: return "terminal_h_2p";
    }
    return "?";
}

bool uses_moment_normalization(Functional f)
{
    return f == Functional::SupH || f == Functional::EnergyPow || f == Functional::Weighted ||
           f == Functional::TerminalH;
}

double MomentReport::normalizer(Functional f) const
{
    if (uses_moment_normalization(f))
        return 1.0 + std::pow(x_norm, 2.0 * p_exp);
    return 1.0 + std::pow(x_norm, beta_exp + 2.0);
}

std::vector<MomentReport> mc_moments(const GalerkinSystem& sys, const SchemeConfig& cfg, const Eigen::VectorXd& z0,
                                     std::size_t n_paths, const std::vector<double>& p_exps, int threads,
                                     double beta_exp)
{
    if (n_paths < 2)
        throw std::invalid_argument("mc_moments needs at least 2 paths");
    if (p_exps.empty())
        throw std::invalid_argument("mc_moments needs at least one moment exponent");
    for (double p : p_exps)
        if (!(p >= 1.0))
            throw std::invalid_argument("moment exponents must be >= 1");

    const std::size_t np = p_exps.size();
    // values[path][j * kFunctionalCount + functional]
    std::vector<std::vector<double>> values(n_paths);
    SimulateOptions opts;
    opts.store_path = false;
    opts.p_exps = p_exps;
    parallel_for(n_paths, threads, [&](std::size_t i) {
        Trajectory traj;
        try {
            traj = simulate_path(sys, cfg, z0, i, opts);
        } catch (const std::exception& e) {
            throw PathError(i, e.what());
        }
        std::vector<double> row(np * kFunctionalCount);
        const double energy = traj.int_v1_sq + traj.int_v2_p + traj.int_v3_sq;
        const double terminal_sq = traj.final_state.squaredNorm();
        for (std::size_t j = 0; j < np; ++j) {
            const double p = p_exps[j];
            double* r = row.data() + j * kFunctionalCount;
            r[int(Functional::SupH)] = std::pow(traj.sup_h, 2.0 * p);
            r[int(Functional::EnergyPow)] = std::pow(energy, p);
            r[int(Functional::Weighted)] = traj.int_weighted[j];
            r[int(Functional::A1Dual)] = traj.int_a1_dual;
            r[int(Functional::A2Dual)] = traj.int_a2_dual;
            r[int(Functional::A3Dual)] = traj.int_a3_dual;
            r[int(Functional::Hs)] = traj.int_hs;
            r[int(Functional::TerminalH)] = std::pow(terminal_sq, p);
        }
        values[i] = std::move(row);
    });

    std::vector<MomentReport> out;
    std::vector<double> column(n_paths);
    for (std::size_t j = 0; j < np; ++j) {
        MomentReport rep;
        rep.p_exp = p_exps[j];
        rep.n_modes = sys.n_modes();
        rep.n_paths = n_paths;
        rep.x_norm = z0.norm();
        rep.beta_exp = beta_exp;
        for (int f = 0; f < kFunctionalCount; ++f) {
            for (std::size_t i = 0; i < n_paths; ++i)
                column[i] = values[i][j * kFunctionalCount + static_cast<std::size_t>(f)];
            Estimate est = batch_means(column);
            if (est.heavy_tail) {
                std::ostringstream msg;
                msg << to_string(Functional(f)) << " (p = " << rep.p_exp << ", n = " << rep.n_modes
                    << "): batch skewness " << est.skewness << " suggests a heavy tail";
                rep.warnings.push_back(msg.str());
            }
            rep.estimates.push_back(est);
        }
        out.push_back(std::move(rep));
    }
    return out;
}

MomentReport mc_moments(const GalerkinSystem& sys, const SchemeConfig& cfg, const Eigen::VectorXd& z0,
                        std::size_t n_paths, double p_exp, int threads, double beta_exp)
{
    return mc_moments(sys, cfg, z0, n_paths, std::vector<double>{p_exp}, threads, beta_exp).front();
}

namespace {

// ratios are grouped by (p_exp, x_norm); levels are compared within a group
struct GroupKey {
    double p_exp;
    double x_norm;
    bool operator<(const GroupKey& o) const
    {
        return p_exp != o.p_exp ? p_exp < o.p_exp : x_norm < o.x_norm;
    }
};

bool same(double a, double b)
{
    return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

double rounded(double v)
{
    return std::round(v * 1e9) / 1e9;
}

} // namespace

UniformitySummary uniformity_check(const std::vector<MomentReport>& reports, const UniformityOptions& opts)
{
    std::set<int> levels;
    std::set<double> magnitudes;
    for (const auto& r : reports) {
        levels.insert(r.n_modes);
        magnitudes.insert(rounded(r.x_norm));
    }
    if (levels.size() < 3)
        throw std::invalid_argument("uniformity check needs at least 3 Galerkin levels");
    if (magnitudes.size() < 2)
        throw std::invalid_argument("uniformity check needs at least 2 initial magnitudes");

    const double z = normal_quantile(opts.confidence);
    UniformitySummary summary;
    std::map<GroupKey, std::vector<const MomentReport*>> groups;
    for (const auto& r : reports) {
        groups[{rounded(r.p_exp), rounded(r.x_norm)}].push_back(&r);
        for (const auto& e : r.estimates)
            if (!std::isfinite(e.mean) || !std::isfinite(e.se))
                summary.all_finite = false;
    }

    for (const auto& [key, group] : groups) {
        for (int fi = 0; fi < kFunctionalCount; ++fi) {
            const Functional f = static_cast<Functional>(fi);
            if (!uses_moment_normalization(f))
                continue;
            const MomentReport* hi = group.front();
            const MomentReport* lo = group.front();
            for (const auto* r : group) {
                if (r->ratio(f) > hi->ratio(f))
                    hi = r;
                if (r->ratio(f) < lo->ratio(f))
                    lo = r;
            }
            SpreadCell cell;
            cell.functional = f;
            cell.p_exp = key.p_exp;
            cell.x_norm = key.x_norm;
            cell.max_ratio = hi->ratio(f);
            cell.min_ratio = lo->ratio(f);
            if (cell.max_ratio == 0.0 && cell.min_ratio == 0.0) {
                cell.raw_spread = 1.0;
                cell.adjusted_spread = 1.0;
            } else {
                cell.raw_spread = cell.min_ratio > 0.0 ? cell.max_ratio / cell.min_ratio
                                                       : std::numeric_limits<double>::infinity();
                const double num = cell.max_ratio - z * hi->ratio_se(f);
                const double den = cell.min_ratio + z * lo->ratio_se(f);
                cell.adjusted_spread =
                    den > 0.0 ? std::max(1.0, num / den) : std::numeric_limits<double>::infinity();
            }
            cell.uniform = cell.adjusted_spread <= opts.factor;
            summary.uniform = summary.uniform && cell.uniform;
            summary.cells.push_back(cell);
        }
    }

    // E sup |Z|^{2p} against 1 + |x|^{2p}, per (p_exp, level)
    std::map<std::pair<double, int>, std::vector<const MomentReport*>> by_level;
    for (const auto& r : reports)
        by_level[{rounded(r.p_exp), r.n_modes}].push_back(&r);
    for (const auto& [key, group] : by_level) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double n = static_cast<double>(group.size());
        for (const auto* r : group) {
            const double x = 1.0 + std::pow(r->x_norm, 2.0 * r->p_exp);
            const double y = r->at(Functional::SupH).mean;
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        LinearFit fit;
        fit.p_exp = key.first;
        fit.n_modes = key.second;
        const double den = n * sxx - sx * sx;
        if (group.size() >= 2 && !same(den, 0.0)) {
            fit.slope = (n * sxy - sx * sy) / den;
            fit.intercept = (sy - fit.slope * sx) / n;
        }
        summary.fits.push_back(fit);
    }

    summary.uniform = summary.uniform && summary.all_finite;
    summary.verdict = summary.uniform ? "uniform" : "not uniform";
    return summary;
}

namespace {

nlohmann::json finite_or_null(double v)
{
    if (std::isfinite(v))
        return v;
    return nullptr;
}

} // namespace

nlohmann::json to_json(const MomentReport& report)
{
    nlohmann::json j;
    j["p_exp"] = report.p_exp;
    j["n_modes"] = report.n_modes;
    j["n_paths"] = report.n_paths;
    j["x_norm"] = report.x_norm;
    j["beta_exp"] = report.beta_exp;
    nlohmann::json est = nlohmann::json::object();
    for (int fi = 0; fi < kFunctionalCount; ++fi) {
        const Functional f = static_cast<Functional>(fi);
        const Estimate& e = report.at(f);
        est[to_string(f)] = {{"estimate", finite_or_null(e.mean)},
                             {"stderr", finite_or_null(e.se)},
                             {"ratio", finite_or_null(report.ratio(f))},
                             {"ratio_stderr", finite_or_null(report.ratio_se(f))},
                             {"normalization", uses_moment_normalization(f) ? "1+|x|^(2p)" : "1+|x|^(beta+2)"},
                             {"batches", e.batches},
                             {"skewness", finite_or_null(e.skewness)}};
    }
    j["functionals"] = est;
    j["warnings"] = report.warnings;
    return j;
}

nlohmann::json to_json(const UniformitySummary& summary)
{
    nlohmann::json j;
    j["verdict"] = summary.verdict;
    j["uniform"] = summary.uniform;
    j["all_finite"] = summary.all_finite;
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : summary.cells)
        cells.push_back({{"functional", to_string(c.functional)},
                         {"p_exp", c.p_exp},
                         {"x_norm", c.x_norm},
                         {"max_ratio", finite_or_null(c.max_ratio)},
                         {"min_ratio", finite_or_null(c.min_ratio)},
                         {"raw_spread", finite_or_null(c.raw_spread)},
                         {"adjusted_spread", finite_or_null(c.adjusted_spread)},
                         {"uniform", c.uniform}});
    j["cells"] = cells;
    nlohmann::json fits = nlohmann::json::array();
    for (const auto& f : summary.fits)
        fits.push_back({{"p_exp", f.p_exp},
                        {"n_modes", f.n_modes},
                        {"intercept", finite_or_null(f.intercept)},
                        {"slope", finite_or_null(f.slope)}});
    j["sup_fit"] = fits;
    return j;
}

void write_moments_csv(const std::vector<MomentReport>& reports, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << "n_modes,x_norm,p_exp,n_paths";
    for (int fi = 0; fi < kFunctionalCount; ++fi) {
        const std::string name = to_string(static_cast<Functional>(fi));
        out << ',' << name << ',' << name << "_stderr," << name << "_ratio," << name << "_ratio_stderr";
    }
    out << '\n' << std::setprecision(17);
    for (const auto& r : reports) {
        out << r.n_modes << ',' << r.x_norm << ',' << r.p_exp << ',' << r.n_paths;
        for (int fi = 0; fi < kFunctionalCount; ++fi) {
            const Functional f = static_cast<Functional>(fi);
            out << ',' << r.at(f).mean << ',' << r.at(f).se << ',' << r.ratio(f) << ',' << r.ratio_se(f);
        }
        out << '\n';
    }
}

} // namespace frsde
