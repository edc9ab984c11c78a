#include "frsde/fracop.hpp"
#include "frsde/galerkin.hpp"
#include "frsde/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace frsde;

namespace {

const FracOperator& default_op()
{
    static const FracOperator op = assemble_operator(OperatorMode::IntegralFEM, SpaceConfig{});
    return op;
}

std::shared_ptr<const ModalBasis> default_basis()
{
    static const auto basis = std::make_shared<const ModalBasis>(ModalBasis::from_operator(default_op()));
    return basis;
}

DriftF no_drift()
{
    DriftF f;
    f.delta1 = 0.0;
    return f;
}

DriftH no_perturbation()
{
    DriftH h;
    h.kappa = 0.0;
    return h;
}

NoiseModel no_noise(int m = 1)
{
    NoiseModel nm;
    nm.m = m;
    nm.sigma1 = Sequence::power(0.0, 1.0);
    nm.beta = Sequence::power(0.0, 2.0);
    nm.gamma = Sequence::power(0.0, 2.0);
    return nm;
}

GalerkinSystem unit_mode(double lambda, const DriftF& f, const DriftH& h, const NoiseModel& nm)
{
    return GalerkinSystem(std::make_shared<const ModalBasis>(ModalBasis::flat(lambda)), f, h, nm, 1);
}

Eigen::VectorXd scalar(double v)
{
    return Eigen::VectorXd::Constant(1, v);
}

} // namespace

TEST(ProjectInitial, BasisReproductionAndOrthogonality)
{
    const GalerkinSystem sys(default_basis(), DriftF{}, DriftH{}, NoiseModel{}, 8);
    const Eigen::VectorXd z1 = project_initial_nodal(sys, default_op().eigenvectors.col(0));
    EXPECT_NEAR(z1[0], 1.0, 1e-12);
    EXPECT_NEAR(z1.tail(7).norm(), 0.0, 1e-12);

    const Eigen::VectorXd z9 = project_initial_nodal(sys, default_op().eigenvectors.col(8));
    EXPECT_NEAR(z9.norm(), 0.0, 1e-12);

    const Eigen::VectorXd x = 3.0 * default_op().eigenvectors.col(0) + 4.0 * default_op().eigenvectors.col(1);
    const Eigen::VectorXd z = project_initial_nodal(sys, x);
    EXPECT_NEAR(z.norm(), 5.0, 1e-12);
    // idempotent on the span
    const Eigen::VectorXd again = project_initial_nodal(sys, default_op().to_nodal(project_initial(sys, z)));
    EXPECT_NEAR((again - z).norm(), 0.0, 1e-12);

    EXPECT_THROW(project_initial_nodal(sys, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST(DriftEval, LinearPartOnly)
{
    const GalerkinSystem sys(default_basis(), no_drift(), no_perturbation(), NoiseModel{}, 8);
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(8);
    e1[0] = 1.0;
    const Eigen::VectorXd a = sys.drift_eval(0.0, e1);
    EXPECT_NEAR(a[0], -default_op().eigenvalues[0], 1e-12);
    EXPECT_NEAR(a.tail(7).norm(), 0.0, 1e-12);
}

TEST(DriftEval, CubicOnFlatMode)
{
    const GalerkinSystem sys = unit_mode(0.0, DriftF{}, no_perturbation(), no_noise());
    EXPECT_NEAR(sys.drift_eval(0.0, scalar(2.0))[0], -8.0, 1e-12);
}

TEST(DriftEval, ZeroIsEquilibrium)
{
    const GalerkinSystem sys(default_basis(), DriftF{}, DriftH{}, NoiseModel{}, 16);
    EXPECT_EQ(sys.drift_eval(0.3, Eigen::VectorXd::Zero(16)).norm(), 0.0);
}

TEST(DriftEval, NonFiniteReportsLocation)
{
    DriftF f;
    f.family = DriftFamily::UserTabulated;
    f.table = Table1D{{-1.0, 0.0, 1.0}, {std::nan(""), 0.0, 0.0}};
    const GalerkinSystem sys(default_basis(), f, DriftH{}, NoiseModel{}, 4);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(4);
    z[0] = -5.0;
    try {
        sys.drift_eval(0.25, z);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("t = 0.25"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("x = "), std::string::npos);
    }
}

TEST(DiffusionEval, ZeroCases)
{
    NoiseModel nm;
    nm.sigma1 = Sequence::power(0.0, 1.0);
    const GalerkinSystem sys(default_basis(), DriftF{}, DriftH{}, nm, 8);
    const Eigen::MatrixXd B = sys.diffusion_eval(0.0, Eigen::VectorXd::Zero(8));
    EXPECT_EQ(B.rows(), 8);
    EXPECT_EQ(B.cols(), nm.m);
    EXPECT_EQ(B.norm(), 0.0);

    NoiseModel additive_noise;
    additive_noise.gamma = Sequence::power(0.0, 2.0);
    const GalerkinSystem add(default_basis(), DriftF{}, DriftH{}, additive_noise, 8);
    const Eigen::MatrixXd b0 = add.diffusion_eval(0.0, Eigen::VectorXd::Zero(8));
    const Eigen::MatrixXd b1 = add.diffusion_eval(0.7, Eigen::VectorXd::Constant(8, 0.9));
    EXPECT_GT(b0.norm(), 0.0);
    EXPECT_EQ((b0 - b1).norm(), 0.0);
}

TEST(DiffusionEval, FrobeniusMatchesHsNormInSpan)
{
    // sigma_i stays in the span: eigenmode shapes, q = 2 (psi linear)
    NoiseModel nm;
    nm.q = 2.0;
    nm.sigma1_shape = Sigma1Shape::Eigenmode;
    const int n = 16;
    const GalerkinSystem sys(default_basis(), DriftF{}, DriftH{}, nm, n);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd z(n);
        for (int j = 0; j < n; ++j)
            z[j] = normal(rng) / (j + 1.0);
        const double frob = sys.diffusion_eval(0.0, z).squaredNorm();
        const double hs = hs_norm_B(nm, *default_basis(), 0.0, z, 4.0).value;
        EXPECT_LT(std::abs(frob - hs), 1e-6 * hs);
        EXPECT_NEAR(sys.evaluate(0.0, z).hs, frob, 1e-12 * frob);
    }
}

TEST(DiffusionEval, ProjectionNeverExceedsHsNorm)
{
    const NoiseModel nm;
    const int n = 16;
    const GalerkinSystem sys(default_basis(), DriftF{}, DriftH{}, nm, n);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd z(n);
        for (int j = 0; j < n; ++j)
            z[j] = 2.0 * normal(rng) / (j + 1.0);
        const double frob = sys.diffusion_eval(0.0, z).squaredNorm();
        EXPECT_LE(frob, hs_norm_B(nm, *default_basis(), 0.0, z, 4.0).value + 1e-12);
    }
}

TEST(Step, TamedEulerArithmetic)
{
    const GalerkinSystem sys = unit_mode(1.0, no_drift(), no_perturbation(), no_noise());
    SchemeConfig cfg;
    cfg.scheme = Scheme::TamedEuler;
    cfg.dt = 0.1;
    const Eigen::VectorXd z = step(sys, cfg, 0.0, scalar(1.0), Eigen::VectorXd::Zero(1));
    EXPECT_NEAR(z[0], 1.0 - 0.1 / 1.1, 1e-15);
    EXPECT_NEAR(z[0], 0.9090909, 1e-7);
}

TEST(Step, ExponentialFactor)
{
    const GalerkinSystem sys = unit_mode(1.0, no_drift(), no_perturbation(), no_noise());
    SchemeConfig cfg;
    cfg.dt = 0.1;
    const Eigen::VectorXd z = step(sys, cfg, 0.0, scalar(1.0), Eigen::VectorXd::Zero(1));
    EXPECT_NEAR(z[0], std::exp(-0.1), 1e-15);
    EXPECT_NEAR(z[0], 0.9048374, 1e-7);
}

TEST(Step, ZeroIsFixedWithoutNoise)
{
    for (Scheme s : {Scheme::TamedEuler, Scheme::ExponentialTamed}) {
        SchemeConfig cfg;
        cfg.scheme = s;
        NoiseModel nm;
        nm.sigma1 = Sequence::power(0.0, 1.0);
        const GalerkinSystem quiet(default_basis(), DriftF{}, DriftH{}, nm, 8);
        const Eigen::VectorXd z = step(quiet, cfg, 0.0, Eigen::VectorXd::Zero(8), Eigen::VectorXd::Zero(nm.m));
        EXPECT_EQ(z.norm(), 0.0);
    }
}

TEST(Step, TamingBound)
{
    const GalerkinSystem sys(default_basis(), DriftF{}, DriftH{}, no_noise(8), 8);
    SchemeConfig cfg;
    cfg.scheme = Scheme::TamedEuler;
    cfg.dt = 0.05;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal;
    for (int k = 0; k < 50; ++k) {
        Eigen::VectorXd z(8);
        for (int j = 0; j < 8; ++j)
            z[j] = 30.0 * normal(rng);
        const double a = sys.drift_eval(0.0, z).norm();
        const Eigen::VectorXd next = step(sys, cfg, 0.0, z, Eigen::VectorXd::Zero(8));
        EXPECT_LE((next - z).norm(), std::min(cfg.dt * a, 1.0) + 1e-12);
    }
}

TEST(Step, NonFiniteStateCarriesStepIndex)
{
    const GalerkinSystem sys = unit_mode(-1000.0, no_drift(), no_perturbation(), no_noise());
    SchemeConfig cfg;
    cfg.dt = 1.0;
    cfg.T = 3.0;
    try {
        simulate_path(sys, cfg, scalar(1.0), 0);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("after step 1"), std::string::npos) << e.what();
    }
}

TEST(SimulatePath, PureDecayIsExact)
{
    const GalerkinSystem sys(default_basis(), no_drift(), no_perturbation(), no_noise(), 8);
    SchemeConfig cfg;
    cfg.dt = 1e-2;
    cfg.T = 1.0;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(8);
    x[0] = 1.0;
    const Trajectory traj = simulate_path(sys, cfg, x, 0);
    const double lam = sys.lambda()[0];
    for (std::size_t k = 0; k < traj.states.size(); ++k)
        EXPECT_NEAR(traj.states[k][0], std::exp(-lam * traj.times[k]), 1e-12);
    EXPECT_NEAR(traj.final_state[0], std::exp(-lam), 1e-12);
    EXPECT_NEAR(traj.final_state.tail(7).norm(), 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(traj.sup_h, 1.0);
}

TEST(SimulatePath, TamedEulerFirstOrder)
{
    const GalerkinSystem sys(default_basis(), no_drift(), no_perturbation(), no_noise(), 1);
    const double lam = sys.lambda()[0];
    std::vector<double> errors;
    for (double dt : {1e-2, 5e-3, 2.5e-3}) {
        SchemeConfig cfg;
        cfg.scheme = Scheme::TamedEuler;
        cfg.dt = dt;
        const Trajectory traj = simulate_path(sys, cfg, scalar(1.0), 0, {false, {}});
        errors.push_back(std::abs(traj.final_state[0] - std::exp(-lam)));
    }
    for (std::size_t i = 1; i < errors.size(); ++i)
        EXPECT_GE(std::log2(errors[i - 1] / errors[i]), 0.9);
}

TEST(SimulatePath, Deterministic)
{
    const GalerkinSystem sys(default_basis(), DriftF{}, DriftH{}, NoiseModel{}, 8);
    SchemeConfig cfg;
    cfg.T = 0.2;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(8);
    x[0] = 0.5;
    const Trajectory a = simulate_path(sys, cfg, x, 17);
    const Trajectory b = simulate_path(sys, cfg, x, 17);
    const Trajectory c = simulate_path(sys, cfg, x, 18);
    ASSERT_EQ(a.states.size(), b.states.size());
    for (std::size_t k = 0; k < a.states.size(); ++k)
        EXPECT_EQ((a.states[k] - b.states[k]).norm(), 0.0);
    EXPECT_EQ(a.int_hs, b.int_hs);
    EXPECT_GT((a.final_state - c.final_state).norm(), 0.0);
}

TEST(SimulatePath, DeterministicDissipativity)
{
    NoiseModel nm;
    nm.sigma1 = Sequence::power(0.0, 1.0);
    nm.gamma = Sequence::power(0.0, 2.0);
    const GalerkinSystem sys(default_basis(), DriftF{}, no_perturbation(), nm, 16);
    SchemeConfig cfg;
    cfg.dt = 1e-2;
    Eigen::VectorXd x(16);
    for (int k = 0; k < 16; ++k)
        x[k] = 2.0 / (k + 1.0);
    const Trajectory traj = simulate_path(sys, cfg, x, 0);
    for (std::size_t k = 1; k < traj.states.size(); ++k)
        EXPECT_LE(traj.states[k].norm(), traj.states[k - 1].norm() + 1e-14);
}

TEST(SimulatePath, ProjectionConsistencyLinear)
{
    const GalerkinSystem small(default_basis(), no_drift(), no_perturbation(), no_noise(), 8);
    const GalerkinSystem large(default_basis(), no_drift(), no_perturbation(), no_noise(), 16);
    SchemeConfig cfg;
    cfg.scheme = Scheme::TamedEuler;
    cfg.dt = 1e-2;
    Eigen::VectorXd x(8);
    for (int k = 0; k < 8; ++k)
        x[k] = 1.0 / (k + 1.0);
    const Trajectory a = simulate_path(small, cfg, x, 0);
    const Trajectory b = simulate_path(large, cfg, project_initial(large, x), 0);
    ASSERT_EQ(a.states.size(), b.states.size());
    // TamedEuler couples modes only through the norm of the drift, which
    // ignores the zero tail; the exponential scheme is fully diagonal
    for (std::size_t k = 0; k < a.states.size(); ++k) {
        EXPECT_NEAR((a.states[k] - b.states[k].head(8)).norm(), 0.0, 1e-12);
        EXPECT_NEAR(b.states[k].tail(8).norm(), 0.0, 1e-12);
    }
}

TEST(SimulatePath, SupAccumulatorMatchesStoredGrid)
{
    const GalerkinSystem sys(default_basis(), DriftF{}, DriftH{}, NoiseModel{}, 8);
    SchemeConfig cfg;
    cfg.T = 0.5;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(8);
    x[0] = 0.3;
    SimulateOptions opts;
    opts.p_exps = {1.0, 2.0};
    const Trajectory traj = simulate_path(sys, cfg, x, 4, opts);
    double grid_max = 0.0;
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        grid_max = std::max(grid_max, traj.states[k].norm());
        EXPECT_DOUBLE_EQ(traj.running_sup[k], grid_max);
        if (k > 0)
            EXPECT_GE(traj.running_sup[k], traj.running_sup[k - 1]);
    }
    EXPECT_DOUBLE_EQ(traj.sup_h, grid_max);
    for (double v : {traj.int_v1_sq, traj.int_v2_p, traj.int_v3_sq, traj.int_a1_dual, traj.int_a2_dual,
                     traj.int_a3_dual, traj.int_hs, traj.int_weighted[0], traj.int_weighted[1]})
        EXPECT_GE(v, 0.0);
    // p = 1 weight is |Z|^0 = 1
    EXPECT_NEAR(traj.int_weighted[0], traj.int_v1_sq + traj.int_v2_p + traj.int_v3_sq, 1e-12);

    const Trajectory bare = simulate_path(sys, cfg, x, 4, {false, {}});
    EXPECT_TRUE(bare.states.empty());
    EXPECT_EQ((bare.final_state - traj.final_state).norm(), 0.0);
}

TEST(SimulatePath, LeftRectangleIntegrals)
{
    // pure decay: int |z|^2 = sum dt e^{-2 lambda t_k}
    const GalerkinSystem sys = unit_mode(1.0, no_drift(), no_perturbation(), no_noise());
    SchemeConfig cfg;
    cfg.dt = 0.25;
    cfg.T = 1.0;
    const Trajectory traj = simulate_path(sys, cfg, scalar(1.0), 0);
    double expected = 0.0;
    for (int k = 0; k < 4; ++k)
        expected += 0.25 * std::exp(-2.0 * 0.25 * k);
    EXPECT_NEAR(traj.int_v3_sq, expected, 1e-14);
    EXPECT_NEAR(traj.int_v1_sq, expected, 1e-14);
}

TEST(SimulateCoupled, SharedIncrementsMatchSinglePath)
{
    const GalerkinSystem a(default_basis(), DriftF{}, DriftH{}, NoiseModel{}, 8);
    const GalerkinSystem b(default_basis(), DriftF{}, DriftH{}, NoiseModel{}, 16);
    SchemeConfig cfg;
    cfg.T = 0.2;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(16);
    x[0] = 0.5;
    std::vector<Eigen::VectorXd> last;
    simulate_coupled({&a, &b}, cfg, {project_initial(a, x), x}, 9,
                     [&](int, double, const std::vector<Eigen::VectorXd>& z) { last = z; });
    const Trajectory ta = simulate_path(a, cfg, project_initial(a, x), 9, {false, {}});
    const Trajectory tb = simulate_path(b, cfg, x, 9, {false, {}});
    EXPECT_EQ((last[0] - ta.final_state).norm(), 0.0);
    EXPECT_EQ((last[1] - tb.final_state).norm(), 0.0);

    NoiseModel other;
    other.m = 3;
    const GalerkinSystem c(default_basis(), DriftF{}, DriftH{}, other, 8);
    EXPECT_THROW(simulate_coupled({&a, &c}, cfg, {project_initial(a, x), project_initial(c, x)}, 0,
                                  [](int, double, const std::vector<Eigen::VectorXd>&) {}),
                 std::invalid_argument);
}

TEST(SchemeConfig, Validation)
{
    SchemeConfig cfg;
    EXPECT_TRUE(cfg.validate().empty());
    EXPECT_EQ(cfg.steps(), 500);
    cfg.dt = 0.3;
    EXPECT_FALSE(cfg.validate().empty());
    cfg.dt = -1.0;
    EXPECT_FALSE(cfg.validate().empty());
    EXPECT_EQ(scheme_from_string(to_string(Scheme::TamedEuler)), Scheme::TamedEuler);
    EXPECT_THROW(scheme_from_string("euler"), std::invalid_argument);
    NoiseModel nm;
    EXPECT_TRUE(SchemeConfig{}.diffusion_tamed(nm));
    nm.q = 2.0;
    EXPECT_FALSE(SchemeConfig{}.diffusion_tamed(nm));
}

TEST(TrajectoryCsv, HeaderAndRows)
{
    const GalerkinSystem sys(default_basis(), DriftF{}, DriftH{}, NoiseModel{}, 3);
    SchemeConfig cfg;
    cfg.dt = 0.1;
    cfg.T = 0.5;
    const Trajectory traj = simulate_path(sys, cfg, Eigen::VectorXd::Constant(3, 0.2), 0);
    const auto path = std::filesystem::temp_directory_path() / "frsde_traj_test.csv";
    write_trajectory_csv(sys, traj, path.string());
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "t,c_1,c_2,c_3,H_norm,V1_seminorm,V2_norm");
    int rows = 0;
    for (std::string line; std::getline(in, line);)
        ++rows;
    EXPECT_EQ(rows, 6);
    std::filesystem::remove(path);
}
