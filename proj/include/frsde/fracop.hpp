#pragma once

#include "frsde/quadrature.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace frsde {

/// Interval (a, b), uniform mesh with `nodes` interior nodes, fractional
/// order s and drift growth exponent p.
struct SpaceConfig {
    double a = 0.0;
    double b = 1.0;
    int n_dim = 1;
    int nodes = 64;
    double s = 0.5;
    double p = 4.0;

    double length() const { return b - a; }
    double h() const { return (b - a) / (nodes + 1); }
    /// Empty when valid; otherwise one message per violated constraint.
    std::vector<std::string> validate() const;
};

enum class OperatorMode { IntegralFEM, SpectralPower };

std::string to_string(OperatorMode mode);
OperatorMode operator_mode_from_string(const std::string& name);

class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, double estimate)
        : std::runtime_error(what), estimate_(estimate) {}
    double estimate() const { return estimate_; }

private:
    double estimate_;
};

struct AssemblyOptions {
    int far_order = 16;           // tensor Gauss order for separated cell pairs
    int radial_order = 24;        // Gauss order for the Duffy-regularized angular integrals
    double tolerance = 1e-10;     // relative, on the achieved quadrature error estimate
    double guard_band = 0.02;     // s closer than this to 0 or 1 produces a warning
};

/// Discrete fractional Laplacian on the interior hat basis. Immutable once
/// built; safe to share across threads.
struct FracOperator {
    OperatorMode mode = OperatorMode::IntegralFEM;
    SpaceConfig config;
    Eigen::MatrixXd stiffness;     // A
    Eigen::MatrixXd mass;          // M
    Eigen::VectorXd eigenvalues;   // ascending
    Eigen::MatrixXd eigenvectors;  // columns, M-orthonormal
    double gagliardo_const = 0.0;
    double quadrature_error = 0.0; // achieved estimate (IntegralFEM only)
    std::vector<std::string> warnings;

    int size() const { return static_cast<int>(mass.rows()); }

    /// Eigen-coordinates c = Phi^T M z of a nodal vector.
    Eigen::VectorXd to_modal(const Eigen::VectorXd& nodal) const;
    Eigen::VectorXd to_nodal(const Eigen::VectorXd& modal) const;

    /// max_k ||A phi_k - lambda_k M phi_k|| / (lambda_k ||M phi_k||)
    double max_relative_residual() const;
    /// max_ij |phi_i^T M phi_j - delta_ij|
    double orthonormality_defect() const;
};

/// C(n, s) = s 4^s Gamma((n+2s)/2) / (pi^{n/2} Gamma(1-s)).
/// Throws std::domain_error unless 0 < s < 1 and n_dim >= 1.
double gagliardo_constant(int n_dim, double s);

/// Restricted (integral) fractional Laplacian with zero exterior condition,
/// assembled from the Gagliardo form on P1 hats.
FracOperator assemble_integral_operator(const SpaceConfig& cfg, const AssemblyOptions& opts = {});

/// Spectral power of the Dirichlet Laplacian; a baseline, not the restricted
/// operator.
FracOperator assemble_spectral_operator(const SpaceConfig& cfg);

FracOperator assemble_operator(OperatorMode mode, const SpaceConfig& cfg);

enum class NormKind { H, V1, V2, V2Dual, V1Dual };

/// Norms of the function with nodal coefficients z.
/// V1 is the seminorm sqrt(z^T A z). V1Dual is the proxy
/// sqrt(sum c_k^2 / (1 + lambda_k)); it bounds the V* norm from above.
/// `p` is the V2 exponent (p > 1) for V2 and V2Dual.
double norm(const FracOperator& op, const Eigen::VectorXd& z, NormKind which, double p = 0.0);

/// Quadrature used for all nonlinear functionals on the mesh of `op`.
CellQuadrature make_quadrature(const FracOperator& op, int points_per_cell = 4);

/// Writes (row, col, value) triplets of the stiffness and mass matrices.
void write_operator_csv(const FracOperator& op, const std::string& path);

} // namespace frsde
