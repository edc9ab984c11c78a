#include "frsde/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace frsde {

namespace {

template <unsigned N>
GaussRule unit_rule()
{
    using Rule = boost::math::quadrature::gauss<double, N>;
    const auto& abscissa = Rule::abscissa();
    const auto& weights = Rule::weights();
    GaussRule rule;
    // boost stores the nonnegative half of the symmetric rule on [-1, 1]
    for (std::size_t i = 0; i < abscissa.size(); ++i) {
        const double xi = abscissa[i];
        const double wi = weights[i];
        if (xi == 0.0) {
            rule.nodes.push_back(0.5);
            rule.weights.push_back(0.5 * wi);
            continue;
        }
        rule.nodes.push_back(0.5 * (1.0 - xi));
        rule.weights.push_back(0.5 * wi);
        rule.nodes.push_back(0.5 * (1.0 + xi));
        rule.weights.push_back(0.5 * wi);
    }
    return rule;
}

} // namespace

GaussRule gauss_legendre_unit(int n)
{
    switch (n) {
    case 2: return unit_rule<2>();
    case 3: return unit_rule<3>();
    case 4: return unit_rule<4>();
    case 5: return unit_rule<5>();
    case 6: return unit_rule<6>();
    case 8: return unit_rule<8>();
    case 10: return unit_rule<10>();
    case 12: return unit_rule<12>();
    case 16: return unit_rule<16>();
    case 20: return unit_rule<20>();
    case 24: return unit_rule<24>();
    case 30: return unit_rule<30>();
    default:
        throw std::invalid_argument("unsupported Gauss-Legendre order " + std::to_string(n));
    }
}

CellQuadrature::CellQuadrature(double a, double b, int interior_nodes, int points_per_cell)
    : a_(a), b_(b), interior_nodes_(interior_nodes), per_cell_(points_per_cell)
{
    if (!(a < b))
        throw std::invalid_argument("quadrature interval requires a < b");
    if (interior_nodes < 1)
        throw std::invalid_argument("quadrature requires at least one interior node");
    const GaussRule rule = gauss_legendre_unit(points_per_cell);
    h_ = (b - a) / (interior_nodes + 1);
    const int total = cells() * per_cell_;
    x_.resize(total);
    w_.resize(total);
    left_.resize(total);
    right_.resize(total);
    for (int c = 0; c < cells(); ++c) {
        for (int q = 0; q < per_cell_; ++q) {
            const int k = c * per_cell_ + q;
            const double xi = rule.nodes[q];
            x_[k] = a + (c + xi) * h_;
            w_[k] = rule.weights[q] * h_;
            left_[k] = 1.0 - xi;
            right_[k] = xi;
        }
    }
}

Eigen::VectorXd CellQuadrature::interpolate(const Eigen::VectorXd& nodal) const
{
    if (nodal.size() != interior_nodes_)
        throw std::invalid_argument("nodal vector has size " + std::to_string(nodal.size()) +
                                    ", expected " + std::to_string(interior_nodes_));
    Eigen::VectorXd out(size());
    for (int c = 0; c < cells(); ++c) {
        // cell c spans mesh nodes c and c+1; interior node j sits at mesh node j+1
        const double left = c >= 1 ? nodal[c - 1] : 0.0;
        const double right = c < interior_nodes_ ? nodal[c] : 0.0;
        for (int q = 0; q < per_cell_; ++q) {
            const int k = c * per_cell_ + q;
            out[k] = left * left_[k] + right * right_[k];
        }
    }
    return out;
}

Eigen::MatrixXd CellQuadrature::hat_matrix() const
{
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(size(), interior_nodes_);
    for (int c = 0; c < cells(); ++c) {
        for (int q = 0; q < per_cell_; ++q) {
            const int k = c * per_cell_ + q;
            if (c >= 1)
                out(k, c - 1) = left_[k];
            if (c < interior_nodes_)
                out(k, c) = right_[k];
        }
    }
    return out;
}

Eigen::VectorXd CellQuadrature::sample(const std::function<double(double)>& fn) const
{
    Eigen::VectorXd out(size());
    for (int k = 0; k < size(); ++k)
        out[k] = fn(x_[k]);
    return out;
}

double CellQuadrature::integrate_abs_pow(const Eigen::VectorXd& samples, double p) const
{
    double acc = 0.0;
    for (int k = 0; k < size(); ++k)
        acc += w_[k] * std::pow(std::abs(samples[k]), p);
    return acc;
}

double lp_norm(const Eigen::VectorXd& samples, const Eigen::VectorXd& weights, double p)
{
    if (!(p >= 1.0))
        throw std::invalid_argument("L^p norm requires p >= 1");
    if (samples.size() != weights.size())
        throw std::invalid_argument("sample/weight size mismatch");
    double acc = 0.0;
    for (Eigen::Index k = 0; k < samples.size(); ++k)
        acc += weights[k] * std::pow(std::abs(samples[k]), p);
    return std::pow(acc, 1.0 / p);
}

} // namespace frsde
