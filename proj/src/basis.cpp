#include "frsde/basis.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace frsde {

ModalBasis::ModalBasis(Eigen::VectorXd eigenvalues, Eigen::MatrixXd values, Eigen::VectorXd x, Eigen::VectorXd w,
                       double a, double b)
    : eigenvalues_(std::move(eigenvalues)), values_(std::move(values)), x_(std::move(x)), w_(std::move(w)), a_(a),
      b_(b)
{
    if (values_.cols() != eigenvalues_.size() || values_.rows() != x_.size() || x_.size() != w_.size())
        throw std::invalid_argument("modal basis tables have inconsistent shapes");
    if (!(a_ < b_))
        throw std::invalid_argument("modal basis requires a < b");
}

ModalBasis ModalBasis::from_operator(const FracOperator& op, int points_per_cell)
{
    CellQuadrature quad = make_quadrature(op, points_per_cell);
    ModalBasis basis(op.eigenvalues, quad.hat_matrix() * op.eigenvectors, quad.x(), quad.w(), op.config.a,
                     op.config.b);
    basis.mesh_ = std::move(quad);
    return basis;
}

ModalBasis ModalBasis::flat(double lambda, double a, double b, int cells)
{
    const CellQuadrature quad(a, b, cells - 1);
    Eigen::VectorXd lam(1);
    lam[0] = lambda;
    Eigen::MatrixXd values = Eigen::MatrixXd::Constant(quad.size(), 1, 1.0 / std::sqrt(b - a));
    return ModalBasis(lam, values, quad.x(), quad.w(), a, b);
}

Eigen::VectorXd ModalBasis::reconstruct(const Eigen::VectorXd& z) const
{
    if (z.size() > available())
        throw std::invalid_argument("coefficient vector has " + std::to_string(z.size()) + " modes, basis has " +
                                    std::to_string(available()));
    return values_.leftCols(z.size()) * z;
}

Eigen::VectorXd ModalBasis::project(const Eigen::VectorXd& samples, int n_modes) const
{
    if (samples.size() != points())
        throw std::invalid_argument("field samples do not match the quadrature");
    if (n_modes > available())
        throw std::invalid_argument("requested more modes than the basis holds");
    return values_.leftCols(n_modes).transpose() * w_.cwiseProduct(samples);
}

} // namespace frsde
