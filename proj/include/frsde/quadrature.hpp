#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace frsde {

/// Gauss-Legendre rule on [0, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Returns the n-point Gauss-Legendre rule mapped to [0, 1].
/// Supported orders: 2, 3, 4, 5, 6, 8, 10, 12, 16, 20, 24, 30.
GaussRule gauss_legendre_unit(int n);

/// Composite Gauss rule over the cells of a uniform mesh of (a, b) with
/// `interior_nodes` interior nodes, together with the values of the two
/// hat-function pieces living on each cell. Hats vanish at a and b.
class CellQuadrature {
public:
    CellQuadrature() = default;
    CellQuadrature(double a, double b, int interior_nodes, int points_per_cell = 4);

    int size() const { return static_cast<int>(x_.size()); }
    int interior_nodes() const { return interior_nodes_; }
    int cells() const { return interior_nodes_ + 1; }
    double a() const { return a_; }
    double b() const { return b_; }
    double h() const { return h_; }
    double measure() const { return b_ - a_; }

    const Eigen::VectorXd& x() const { return x_; }
    const Eigen::VectorXd& w() const { return w_; }

    /// Piecewise-linear reconstruction at the quadrature points from interior
    /// nodal values.
    Eigen::VectorXd interpolate(const Eigen::VectorXd& nodal) const;

    /// Dense (points x interior nodes) evaluation matrix of the hat basis.
    Eigen::MatrixXd hat_matrix() const;

    Eigen::VectorXd sample(const std::function<double(double)>& fn) const;

    /// Integral of |u|^p over (a, b) from samples at the quadrature points.
    double integrate_abs_pow(const Eigen::VectorXd& samples, double p) const;
    double integrate(const Eigen::VectorXd& samples) const { return w_.dot(samples); }

private:
    double a_ = 0.0;
    double b_ = 1.0;
    double h_ = 1.0;
    int interior_nodes_ = 0;
    int per_cell_ = 4;
    Eigen::VectorXd x_;
    Eigen::VectorXd w_;
    Eigen::VectorXd left_;   // value of the hat anchored at the left cell node
    Eigen::VectorXd right_;  // value of the hat anchored at the right cell node
};

/// (sum |v|^p w)^(1/p) on quadrature samples.
double lp_norm(const Eigen::VectorXd& samples, const Eigen::VectorXd& weights, double p);

} // namespace frsde
