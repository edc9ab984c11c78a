#pragma once

#include "frsde/fracop.hpp"
#include "frsde/quadrature.hpp"

#include <Eigen/Dense>

#include <optional>

namespace frsde {

/// Orthonormal eigenbasis {h_k} of H tabulated at quadrature points, with
/// eigenvalues. Everything nonlinear in the Galerkin system goes through
/// these tables.
class ModalBasis {
public:
    /// All eigenpairs of `op`, tabulated on its mesh quadrature.
    static ModalBasis from_operator(const FracOperator& op, int points_per_cell = 4);

    /// One mode h = 1/sqrt(b-a) with eigenvalue `lambda`; a harness basis
    /// for closed-form checks.
    static ModalBasis flat(double lambda, double a = 0.0, double b = 1.0, int cells = 8);

    /// Explicit tables (values: points x modes).
    ModalBasis(Eigen::VectorXd eigenvalues, Eigen::MatrixXd values, Eigen::VectorXd x, Eigen::VectorXd w,
               double a, double b);

    int available() const { return static_cast<int>(eigenvalues_.size()); }
    int points() const { return static_cast<int>(x_.size()); }
    const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
    const Eigen::MatrixXd& values() const { return values_; }
    const Eigen::VectorXd& x() const { return x_; }
    const Eigen::VectorXd& w() const { return w_; }
    double a() const { return a_; }
    double b() const { return b_; }
    double measure() const { return b_ - a_; }

    /// Field values at the quadrature points for the first z.size() modes.
    Eigen::VectorXd reconstruct(const Eigen::VectorXd& z) const;

    /// Coefficients (u, h_k)_H, k < n_modes, of a field given at the
    /// quadrature points.
    Eigen::VectorXd project(const Eigen::VectorXd& samples, int n_modes) const;

    /// Nodal interpolation on the operator mesh; present for from_operator.
    const std::optional<CellQuadrature>& mesh() const { return mesh_; }

private:
    ModalBasis() = default;

    Eigen::VectorXd eigenvalues_;
    Eigen::MatrixXd values_;
    Eigen::VectorXd x_;
    Eigen::VectorXd w_;
    double a_ = 0.0;
    double b_ = 1.0;
    std::optional<CellQuadrature> mesh_;
};

} // namespace frsde
