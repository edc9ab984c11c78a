#include "frsde/diagnostics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace frsde {

namespace {

int snap(double t, double dt)
{
    return static_cast<int>(std::llround(t / dt));
}

nlohmann::json finite_or_null(double v)
{
    if (std::isfinite(v))
        return v;
    return nullptr;
}

} // namespace

ModulusCurve aldous_modulus(const GalerkinSystem& sys, const SchemeConfig& cfg, const Eigen::VectorXd& z0,
                            const Eigen::VectorXd& h_test, const std::vector<double>& delta_grid,
                            const std::vector<double>& theta_grid, std::size_t n_paths, const ModulusOptions& opts)
{
    if (delta_grid.empty() || theta_grid.empty())
        throw std::invalid_argument("modulus grids must be nonempty");
    for (std::size_t i = 0; i < delta_grid.size(); ++i) {
        if (!(delta_grid[i] > 0.0))
            throw std::invalid_argument("delta grid must be positive");
        if (i > 0 && !(delta_grid[i] > delta_grid[i - 1]))
            throw std::invalid_argument("delta grid must be strictly increasing");
    }
    for (double th : theta_grid)
        if (th < 0.0 || th > cfg.T)
            throw std::invalid_argument("theta grid must lie in [0, T]");
    if (h_test.size() > sys.n_modes())
        throw std::invalid_argument("test function lies outside the Galerkin span");
    if (n_paths < 2)
        throw std::invalid_argument("modulus needs at least 2 paths");

    const int n_steps = cfg.steps();
    std::vector<int> theta_idx, delta_idx;
    for (double th : theta_grid)
        theta_idx.push_back(std::clamp(snap(th, cfg.dt), 0, n_steps));
    for (double d : delta_grid)
        delta_idx.push_back(std::max(1, snap(d, cfg.dt)));

    const std::size_t nd = delta_grid.size();
    const std::size_t nt = theta_grid.size();
    const Eigen::VectorXd h = project_initial(sys, h_test);
    std::vector<std::vector<double>> samples(n_paths);
    std::vector<double> maxima(n_paths);
    SimulateOptions sim;
    sim.store_path = true;
    parallel_for(n_paths, opts.threads, [&](std::size_t i) {
        Trajectory traj;
        try {
            traj = simulate_path(sys, cfg, z0, i, sim);
        } catch (const std::exception& e) {
            throw PathError(i, e.what());
        }
        std::vector<double> y(traj.states.size());
        for (std::size_t k = 0; k < y.size(); ++k)
            y[k] = traj.states[k].dot(h);
        std::vector<double> row(nd * nt);
        for (std::size_t a = 0; a < nd; ++a)
            for (std::size_t b = 0; b < nt; ++b) {
                // convention: theta + delta := T when it overshoots
                const int end = std::min(theta_idx[b] + delta_idx[a], n_steps);
                row[a * nt + b] = std::abs(y[static_cast<std::size_t>(end)] - y[static_cast<std::size_t>(theta_idx[b])]);
            }
        samples[i] = std::move(row);
        maxima[i] = traj.sup_h;
    });

    ModulusCurve curve;
    curve.n_paths = n_paths;
    {
        std::ostringstream id;
        id << "h = sum of " << h.size() << " eigen-coefficients, |h|_H = " << h.norm();
        curve.test_function = id.str();
    }
    std::vector<double> column(n_paths);
    for (std::size_t a = 0; a < nd; ++a) {
        ModulusPoint pt;
        pt.delta = delta_idx[a] * cfg.dt;
        pt.estimate = -1.0;
        for (std::size_t b = 0; b < nt; ++b) {
            for (std::size_t i = 0; i < n_paths; ++i)
                column[i] = samples[i][a * nt + b];
            const Estimate est = batch_means(column);
            if (est.mean > pt.estimate) {
                pt.estimate = est.mean;
                pt.se = est.se;
                pt.theta = theta_idx[b] * cfg.dt;
            }
        }
        curve.points.push_back(pt);
    }

    std::vector<double> lx, ly;
    bool any_signal = false;
    for (auto& pt : curve.points) {
        any_signal = any_signal || pt.estimate > 0.0;
        pt.in_fit = pt.estimate > 0.0 && pt.se < opts.noise_fraction * pt.estimate;
        if (pt.in_fit) {
            lx.push_back(std::log(pt.delta));
            ly.push_back(std::log(pt.estimate));
        }
    }
    if (!any_signal) {
        curve.note = "all-zero signal; slope undefined";
    } else if (lx.size() < 2) {
        curve.note = "fewer than two points above the noise floor; slope undefined";
    } else {
        const double n = static_cast<double>(lx.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sx += lx[i];
            sy += ly[i];
            sxx += lx[i] * lx[i];
            sxy += lx[i] * ly[i];
        }
        curve.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        curve.slope_defined = true;
        curve.note = "deterministic theta grid stands in for stopping times";
    }

    const double p = sys.f().p;
    const double q = sys.noise().q;
    curve.reference_slopes = {1.0 / std::max(2.0, p), (2.0 - 1.0) / 4.0, (p - q) / (2.0 * p)};

    std::vector<double> sorted = maxima;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t qi = std::min(sorted.size() - 1,
                                    static_cast<std::size_t>(std::floor(opts.excursion_quantile * (sorted.size() - 1))));
    curve.excursion_threshold = opts.excursion_factor * sorted[qi];
    for (double m : maxima)
        if (m > curve.excursion_threshold)
            ++curve.excursions;
    return curve;
}

bool modulus_separated(const ModulusCurve& curve, double confidence)
{
    if (curve.points.size() < 2)
        return false;
    const double z = normal_quantile(confidence);
    const ModulusPoint& lo = curve.points.front();
    const ModulusPoint& hi = curve.points.back();
    return lo.estimate + z * lo.se < hi.estimate - z * hi.se;
}

ConvergenceTable galerkin_convergence(const std::vector<const GalerkinSystem*>& levels, const SchemeConfig& cfg,
                                      const Eigen::VectorXd& x, std::size_t n_paths, int threads, double confidence)
{
    if (levels.size() < 3)
        throw std::invalid_argument("convergence needs at least 3 levels");
    const int m = levels.front()->noise_dim();
    for (const auto* sys : levels)
        if (sys->noise_dim() != m)
            throw std::invalid_argument("mismatched noise dimension across levels");
    if (n_paths < 2)
        throw std::invalid_argument("convergence needs at least 2 paths");

    const std::size_t pairs = levels.size() - 1;
    std::vector<Eigen::VectorXd> z0;
    for (const auto* sys : levels)
        z0.push_back(project_initial(*sys, x));
    const int n_steps = cfg.steps();
    const double dt = cfg.dt;

    std::vector<std::vector<double>> sup_vals(pairs, std::vector<double>(n_paths));
    std::vector<std::vector<double>> int_vals(pairs, std::vector<double>(n_paths));
    parallel_for(n_paths, threads, [&](std::size_t i) {
        std::vector<double> sup(pairs, 0.0), integral(pairs, 0.0);
        try {
            simulate_coupled(levels, cfg, z0, i, [&](int k, double, const std::vector<Eigen::VectorXd>& z) {
                for (std::size_t l = 0; l < pairs; ++l) {
                    const Eigen::VectorXd& coarse = z[l];
                    const Eigen::VectorXd& fine = z[l + 1];
                    const Eigen::Index nc = std::min(coarse.size(), fine.size());
                    const Eigen::Index nf = std::max(coarse.size(), fine.size());
                    const Eigen::VectorXd& lam = levels[coarse.size() >= fine.size() ? l : l + 1]->lambda();
                    double dual = 0.0;
                    double hsq = 0.0;
                    for (Eigen::Index j = 0; j < nf; ++j) {
                        const double a = j < coarse.size() ? coarse[j] : 0.0;
                        const double b = j < fine.size() ? fine[j] : 0.0;
                        const double d = (j < nc) ? b - a : (a + b);
                        dual += d * d / (1.0 + lam[j]);
                        hsq += d * d;
                    }
                    sup[l] = std::max(sup[l], dual);
                    if (k < n_steps)
                        integral[l] += dt * hsq;
                }
            });
        } catch (const std::exception& e) {
            throw PathError(i, e.what());
        }
        for (std::size_t l = 0; l < pairs; ++l) {
            sup_vals[l][i] = sup[l];
            int_vals[l][i] = integral[l];
        }
    });

    ConvergenceTable table;
    table.n_paths = n_paths;
    for (std::size_t l = 0; l < pairs; ++l) {
        ConvergenceRow row;
        row.n_coarse = levels[l]->n_modes();
        row.n_fine = levels[l + 1]->n_modes();
        row.sup_dual = batch_means(sup_vals[l]);
        row.int_h = batch_means(int_vals[l]);
        table.rows.push_back(row);
    }
    const double z = normal_quantile(confidence);
    table.decreasing = true;
    for (std::size_t l = 1; l < table.rows.size(); ++l) {
        const auto& a = table.rows[l - 1];
        const auto& b = table.rows[l];
        table.decreasing = table.decreasing && b.sup_dual.upper(z) < a.sup_dual.lower(z) &&
                           b.int_h.upper(z) < a.int_h.lower(z);
    }
    return table;
}

ConvergenceTable galerkin_convergence(const std::function<GalerkinSystem(int)>& factory,
                                      const std::vector<int>& levels, const SchemeConfig& cfg,
                                      const Eigen::VectorXd& x, std::size_t n_paths, int threads, double confidence)
{
    std::vector<GalerkinSystem> systems;
    systems.reserve(levels.size());
    for (int n : levels)
        systems.push_back(factory(n));
    std::vector<const GalerkinSystem*> ptrs;
    for (const auto& s : systems)
        ptrs.push_back(&s);
    return galerkin_convergence(ptrs, cfg, x, n_paths, threads, confidence);
}

void write_modulus_csv(const ModulusCurve& curve, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << "delta,estimate,stderr,theta,in_fit\n" << std::setprecision(17);
    for (const auto& pt : curve.points)
        out << pt.delta << ',' << pt.estimate << ',' << pt.se << ',' << pt.theta << ',' << (pt.in_fit ? 1 : 0)
            << '\n';
}

void write_convergence_csv(const ConvergenceTable& table, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << "level_pair,estimate,stderr,metric\n" << std::setprecision(17);
    for (const auto& row : table.rows) {
        const std::string pair = std::to_string(row.n_coarse) + "-" + std::to_string(row.n_fine);
        out << pair << ',' << row.sup_dual.mean << ',' << row.sup_dual.se << ",sup_v1dual_sq\n";
        out << pair << ',' << row.int_h.mean << ',' << row.int_h.se << ",int_h_sq\n";
    }
}

nlohmann::json to_json(const ModulusCurve& curve)
{
    nlohmann::json j;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& pt : curve.points)
        pts.push_back({{"delta", pt.delta},
                       {"estimate", pt.estimate},
                       {"stderr", pt.se},
                       {"theta", pt.theta},
                       {"in_fit", pt.in_fit}});
    j["points"] = pts;
    j["test_function"] = curve.test_function;
    j["slope"] = curve.slope_defined ? finite_or_null(curve.slope) : nlohmann::json(nullptr);
    j["note"] = curve.note;
    j["reference_slopes"] = curve.reference_slopes;
    j["n_paths"] = curve.n_paths;
    j["excursions"] = curve.excursions;
    j["excursion_threshold"] = curve.excursion_threshold;
    j["separated"] = modulus_separated(curve);
    return j;
}

nlohmann::json to_json(const ConvergenceTable& table)
{
    nlohmann::json j;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : table.rows)
        rows.push_back({{"level_pair", std::to_string(r.n_coarse) + "-" + std::to_string(r.n_fine)},
                        {"sup_v1dual_sq", {{"estimate", r.sup_dual.mean}, {"stderr", r.sup_dual.se}}},
                        {"int_h_sq", {{"estimate", r.int_h.mean}, {"stderr", r.int_h.se}}}});
    j["rows"] = rows;
    j["n_paths"] = table.n_paths;
    j["decreasing"] = table.decreasing;
    return j;
}

} // namespace frsde
