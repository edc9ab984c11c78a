#include "frsde/fracop.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace frsde {

std::vector<std::string> SpaceConfig::validate() const
{
    std::vector<std::string> errors;
    if (!(a < b))
        errors.emplace_back("space: a < b required");
    if (n_dim != 1)
        errors.emplace_back("space: only n_dim = 1 is supported");
    if (nodes < 2)
        errors.emplace_back("space: nodes >= 2 required");
    if (!(s > 0.0 && s < 1.0))
        errors.emplace_back("space: s must satisfy 0 < s < 1");
    if (!(p > 2.0))
        errors.emplace_back("drift: p > 2 required");
    return errors;
}

std::string to_string(OperatorMode mode)
{
    return mode == OperatorMode::IntegralFEM ? "integral" : "spectral";
}

OperatorMode operator_mode_from_string(const std::string& name)
{
    if (name == "integral")
        return OperatorMode::IntegralFEM;
    if (name == "spectral")
        return OperatorMode::SpectralPower;
    throw std::invalid_argument("unknown operator mode '" + name + "' (expected integral|spectral)");
}

double gagliardo_constant(int n_dim, double s)
{
    if (!(s > 0.0 && s < 1.0))
        throw std::domain_error("gagliardo_constant: s must lie in (0, 1)");
    if (n_dim < 1)
        throw std::domain_error("gagliardo_constant: n_dim must be positive");
    const double n = n_dim;
    return s * std::pow(4.0, s) * std::tgamma(0.5 * (n + 2.0 * s)) /
           (std::pow(std::numbers::pi, 0.5 * n) * std::tgamma(1.0 - s));
}

namespace {

void check_config(const SpaceConfig& cfg)
{
    const auto errors = cfg.validate();
    if (!errors.empty()) {
        std::string msg;
        for (const auto& e : errors)
            msg += (msg.empty() ? "" : "; ") + e;
        throw std::invalid_argument(msg);
    }
}

Eigen::MatrixXd p1_mass(const SpaceConfig& cfg)
{
    const int n = cfg.nodes;
    const double h = cfg.h();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        m(i, i) = 4.0 * h / 6.0;
        if (i + 1 < n) {
            m(i, i + 1) = h / 6.0;
            m(i + 1, i) = h / 6.0;
        }
    }
    return m;
}

// Unit-square moments J_ab = int int xi^a eta^b (xi + eta)^(-1-2s), a + b = 2,
// via the Duffy split of the square into two triangles.
struct VertexMoments {
    double j20 = 0.0;
    double j11 = 0.0;
    double j02 = 0.0;
};

VertexMoments vertex_moments(double s, int order)
{
    const GaussRule rule = gauss_legendre_unit(order);
    std::array<double, 3> w_int{}; // int_0^1 w^k (1+w)^(-1-2s) dw, k = 0, 1, 2
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double w = rule.nodes[q];
        const double kern = std::pow(1.0 + w, -1.0 - 2.0 * s);
        w_int[0] += rule.weights[q] * kern;
        w_int[1] += rule.weights[q] * w * kern;
        w_int[2] += rule.weights[q] * w * w * kern;
    }
    const double radial = 1.0 / (3.0 - 2.0 * s);
    // triangle xi >= eta contributes w^b, the other triangle w^a
    VertexMoments out;
    out.j20 = radial * (w_int[0] + w_int[2]);
    out.j11 = radial * (w_int[1] + w_int[1]);
    out.j02 = out.j20;
    return out;
}

// Reference 4x4 local matrix for cells [0,1] and [d, d+1], d >= 2, local
// functions ordered (l, l+1, m, m+1). Both orderings of the pair included.
Eigen::Matrix4d separated_block(double s, int d, const GaussRule& rule)
{
    Eigen::Matrix4d out = Eigen::Matrix4d::Zero();
    const double expo = -1.0 - 2.0 * s;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double xi = rule.nodes[i];
        for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
            const double eta = rule.nodes[j];
            const double wt = rule.weights[i] * rule.weights[j] * std::pow(d + eta - xi, expo);
            const Eigen::Vector4d diff(1.0 - xi, xi, -(1.0 - eta), -eta);
            out.noalias() += wt * diff * diff.transpose();
        }
    }
    return 2.0 * out;
}

// int_0^1 phi_a phi_b g(xi) d xi with phi = (1 - xi, xi), for a smooth weight g.
template <class G>
Eigen::Matrix2d weighted_local_mass(const GaussRule& rule, G&& g)
{
    Eigen::Matrix2d out = Eigen::Matrix2d::Zero();
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double xi = rule.nodes[q];
        const Eigen::Vector2d phi(1.0 - xi, xi);
        out.noalias() += rule.weights[q] * g(xi) * phi * phi.transpose();
    }
    return out;
}

struct Assembled {
    Eigen::MatrixXd stiffness;
    double max_block_delta = 0.0;
};

// Stiffness in units where the mesh width is 1; caller scales by h^(1-2s).
Assembled assemble_unit_stiffness(const SpaceConfig& cfg, int far_order, int radial_order)
{
    const int n = cfg.nodes;
    const int cells = n + 1;
    const double s = cfg.s;
    const double c_ns = gagliardo_constant(1, s);

    // mesh node k -> interior index k-1, boundary nodes dropped
    Eigen::MatrixXd pair_part = Eigen::MatrixXd::Zero(n, n);
    auto add = [&](int node_a, int node_b, double value) {
        if (node_a < 1 || node_a > n || node_b < 1 || node_b > n)
            return;
        pair_part(node_a - 1, node_b - 1) += value;
    };

    // same cell: (e(x)-e(y)) = slope (x - y)
    const double same = 2.0 / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s));
    for (int l = 0; l < cells; ++l) {
        const std::array<int, 2> nodes{l, l + 1};
        const std::array<double, 2> slope{-1.0, 1.0};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                add(nodes[i], nodes[j], same * slope[i] * slope[j]);
    }

    // adjacent cells sharing a vertex
    const VertexMoments vm = vertex_moments(s, radial_order);
    {
        const std::array<std::array<double, 2>, 3> coef{{{1.0, 0.0}, {-1.0, 1.0}, {0.0, -1.0}}};
        Eigen::Matrix3d local;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const auto& ci = coef[i];
                const auto& cj = coef[j];
                local(i, j) = 2.0 * (ci[0] * cj[0] * vm.j20 + (ci[0] * cj[1] + ci[1] * cj[0]) * vm.j11 +
                                     ci[1] * cj[1] * vm.j02);
            }
        for (int l = 0; l + 1 < cells; ++l)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    add(l + i, l + j, local(i, j));
    }

    // separated pairs; the uniform mesh makes each block depend on the gap only
    const GaussRule far = gauss_legendre_unit(far_order);
    for (int d = 2; d < cells; ++d) {
        const Eigen::Matrix4d block = separated_block(s, d, far);
        for (int l = 0; l + d < cells; ++l) {
            const int m = l + d;
            const std::array<int, 4> nodes{l, l + 1, m, m + 1};
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    add(nodes[i], nodes[j], block(i, j));
        }
    }

    // exterior tails: C int e_i e_j kappa, kappa = ((x-a)^-2s + (b-x)^-2s) / (2s)
    Eigen::MatrixXd tail = Eigen::MatrixXd::Zero(n, n);
    const double boundary_cell = 1.0 / (3.0 - 2.0 * s);
    for (int c = 0; c < cells; ++c) {
        auto far_weight = [&](double xi) {
            double g = 0.0;
            if (c > 0)
                g += std::pow(c + xi, -2.0 * s);
            if (c < cells - 1)
                g += std::pow(cells - c - xi, -2.0 * s);
            return g;
        };
        Eigen::Matrix2d local = weighted_local_mass(far, far_weight);
        if (c == 0)
            local(1, 1) += boundary_cell; // int xi^2 xi^-2s
        if (c == cells - 1)
            local(0, 0) += boundary_cell; // int (1-xi)^2 (1-xi)^-2s
        const std::array<int, 2> nodes{c, c + 1};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                if (nodes[i] < 1 || nodes[i] > n || nodes[j] < 1 || nodes[j] > n)
                    continue;
                tail(nodes[i] - 1, nodes[j] - 1) += local(i, j);
            }
    }

    Assembled out;
    out.stiffness = 0.5 * c_ns * pair_part + c_ns / (2.0 * s) * tail;
    out.stiffness = 0.5 * (out.stiffness + out.stiffness.transpose());
    return out;
}

void solve_eigenproblem(FracOperator& op)
{
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(
        op.stiffness, op.mass, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("generalized eigen-solve failed");
    op.eigenvalues = solver.eigenvalues();
    op.eigenvectors = solver.eigenvectors();
    // fix the sign so that each eigenvector has a positive first nonzero entry
    for (Eigen::Index k = 0; k < op.eigenvectors.cols(); ++k) {
        auto col = op.eigenvectors.col(k);
        Eigen::Index idx = 0;
        col.cwiseAbs().maxCoeff(&idx);
        for (Eigen::Index j = 0; j < col.size(); ++j) {
            if (std::abs(col[j]) > 1e-8 * std::abs(col[idx])) {
                idx = j;
                break;
            }
        }
        if (col[idx] < 0.0)
            col = -col;
    }
    if (op.eigenvalues.size() > 0 && !(op.eigenvalues[0] > 0.0))
        throw std::runtime_error("fractional operator has a nonpositive eigenvalue");
}

void add_guard_band_warning(FracOperator& op, double guard)
{
    const double s = op.config.s;
    if (s < guard || s > 1.0 - guard) {
        std::ostringstream msg;
        msg << "s = " << s << " lies within " << guard << " of the endpoints of (0,1); "
            << "conditioning of the discrete operator degrades";
        op.warnings.push_back(msg.str());
    }
}

} // namespace

FracOperator assemble_integral_operator(const SpaceConfig& cfg, const AssemblyOptions& opts)
{
    check_config(cfg);
    FracOperator op;
    op.mode = OperatorMode::IntegralFEM;
    op.config = cfg;
    op.gagliardo_const = gagliardo_constant(cfg.n_dim, cfg.s);
    op.mass = p1_mass(cfg);

    const double scale = std::pow(cfg.h(), 1.0 - 2.0 * cfg.s);
    const Assembled primary = assemble_unit_stiffness(cfg, opts.far_order, opts.radial_order);
    const Assembled refined = assemble_unit_stiffness(cfg, opts.far_order + 8, opts.radial_order + 6);
    const double ref = primary.stiffness.cwiseAbs().maxCoeff();
    op.quadrature_error = (primary.stiffness - refined.stiffness).cwiseAbs().maxCoeff() / ref;
    if (!(op.quadrature_error <= opts.tolerance)) {
        std::ostringstream msg;
        msg << "stiffness quadrature did not converge: relative error estimate " << op.quadrature_error;
        throw QuadratureError(msg.str(), op.quadrature_error);
    }
    op.stiffness = scale * refined.stiffness;
    add_guard_band_warning(op, opts.guard_band);
    solve_eigenproblem(op);
    return op;
}

FracOperator assemble_spectral_operator(const SpaceConfig& cfg)
{
    check_config(cfg);
    const int n = cfg.nodes;
    FracOperator op;
    op.mode = OperatorMode::SpectralPower;
    op.config = cfg;
    op.gagliardo_const = gagliardo_constant(cfg.n_dim, cfg.s);
    op.mass = p1_mass(cfg);
    op.eigenvalues.resize(n);
    op.eigenvectors.resize(n, n);
    const double pi = std::numbers::pi;
    for (int k = 1; k <= n; ++k) {
        Eigen::VectorXd v(n);
        for (int j = 0; j < n; ++j)
            v[j] = std::sin(k * pi * (j + 1) / (n + 1));
        // sampled sines are exact eigenvectors of the Toeplitz mass matrix, so
        // M-normalization keeps them M-orthogonal
        v /= std::sqrt(v.dot(op.mass * v));
        op.eigenvectors.col(k - 1) = v;
        op.eigenvalues[k - 1] = std::pow(k * pi / cfg.length(), 2.0 * cfg.s);
    }
    const Eigen::MatrixXd mphi = op.mass * op.eigenvectors;
    op.stiffness = mphi * op.eigenvalues.asDiagonal() * mphi.transpose();
    op.stiffness = 0.5 * (op.stiffness + op.stiffness.transpose());
    add_guard_band_warning(op, AssemblyOptions{}.guard_band);
    return op;
}

FracOperator assemble_operator(OperatorMode mode, const SpaceConfig& cfg)
{
    return mode == OperatorMode::IntegralFEM ? assemble_integral_operator(cfg)
                                             : assemble_spectral_operator(cfg);
}

Eigen::VectorXd FracOperator::to_modal(const Eigen::VectorXd& nodal) const
{
    if (nodal.size() != size())
        throw std::invalid_argument("nodal vector dimension mismatch");
    return eigenvectors.transpose() * (mass * nodal);
}

Eigen::VectorXd FracOperator::to_nodal(const Eigen::VectorXd& modal) const
{
    if (modal.size() > eigenvectors.cols())
        throw std::invalid_argument("modal vector longer than the eigenbasis");
    return eigenvectors.leftCols(modal.size()) * modal;
}

double FracOperator::max_relative_residual() const
{
    double worst = 0.0;
    for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) {
        const Eigen::VectorXd mphi = mass * eigenvectors.col(k);
        const Eigen::VectorXd r = stiffness * eigenvectors.col(k) - eigenvalues[k] * mphi;
        worst = std::max(worst, r.norm() / (std::abs(eigenvalues[k]) * mphi.norm()));
    }
    return worst;
}

double FracOperator::orthonormality_defect() const
{
    const Eigen::MatrixXd g = eigenvectors.transpose() * mass * eigenvectors;
    return (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

CellQuadrature make_quadrature(const FracOperator& op, int points_per_cell)
{
    return CellQuadrature(op.config.a, op.config.b, op.config.nodes, points_per_cell);
}

double norm(const FracOperator& op, const Eigen::VectorXd& z, NormKind which, double p)
{
    if (z.size() != op.size())
        throw std::invalid_argument("norm: coefficient vector has dimension " + std::to_string(z.size()) +
                                    ", operator has " + std::to_string(op.size()));
    switch (which) {
    case NormKind::H:
        return std::sqrt(std::max(0.0, z.dot(op.mass * z)));
    case NormKind::V1:
        return std::sqrt(std::max(0.0, z.dot(op.stiffness * z)));
    case NormKind::V2:
    case NormKind::V2Dual: {
        if (!(p > 1.0))
            throw std::invalid_argument("norm: V2 exponent must exceed 1");
        const CellQuadrature quad = make_quadrature(op);
        const double expo = which == NormKind::V2 ? p : p / (p - 1.0);
        return lp_norm(quad.interpolate(z), quad.w(), expo);
    }
    case NormKind::V1Dual: {
        const Eigen::VectorXd c = op.to_modal(z);
        double acc = 0.0;
        for (Eigen::Index k = 0; k < c.size(); ++k)
            acc += c[k] * c[k] / (1.0 + op.eigenvalues[k]);
        return std::sqrt(acc);
    }
    }
    return 0.0;
}

void write_operator_csv(const FracOperator& op, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open " + path);
    out.precision(17);
    out << "matrix,row,col,value\n";
    for (int i = 0; i < op.size(); ++i)
        for (int j = 0; j < op.size(); ++j)
            out << "A," << i << ',' << j << ',' << op.stiffness(i, j) << '\n';
    for (int i = 0; i < op.size(); ++i)
        for (int j = 0; j < op.size(); ++j)
            if (op.mass(i, j) != 0.0)
                out << "M," << i << ',' << j << ',' << op.mass(i, j) << '\n';
}

} // namespace frsde
