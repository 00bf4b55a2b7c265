#include <cmath>
#include <complex>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "orlab/spatial.hpp"

using namespace orlab;

namespace {

using Coeffs = std::vector<DiscreteOperator<double>::Coefficient>;
using cplx = std::complex<double>;

double zero(double) { return 0.0; }
double one(double) { return 1.0; }

DiscreteOperator<double> dk(int n, int k, int accuracy) {
    Coeffs c(k + 1, zero);
    c[k] = one;
    return build_operator<double>(Grid1D(n), k, accuracy, c);
}

const BoundaryLayout kDirichlet{{Side::Left, BCKind::Dirichlet}, {Side::Right, BCKind::Dirichlet}};

double interior_max(const Grid1D& g, const GridVector<double>& v, int skip = 0) {
    double m = 0;
    for (int i = 1 + skip; i < g.nodes() - 1 - skip; ++i) m = std::max(m, std::abs(v[i]));
    return m;
}

}  // namespace

TEST(Grid, Spacing) {
    Grid1D g(99, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(g.h(), 0.01);
    EXPECT_EQ(g.nodes(), 101);
    EXPECT_EQ(g.x(0), 0.0);
    EXPECT_EQ(g.x(100), 1.0);
    EXPECT_THROW(Grid1D(0), InvalidInput);
    EXPECT_THROW(Grid1D(10, 1.0, 1.0), InvalidInput);
}

TEST(Stencil, KnownWeights) {
    auto w2 = fd_weights(0.0, {-1, 0, 1}, 2);
    EXPECT_NEAR(w2[0], 1.0, 1e-14);
    EXPECT_NEAR(w2[1], -2.0, 1e-14);
    EXPECT_NEAR(w2[2], 1.0, 1e-14);
    Stencil s = derivative_stencil(1, 4, 10, 100);
    ASSERT_EQ(s.first, -2);
    const double expect[] = {1.0 / 12, -2.0 / 3, 0.0, 2.0 / 3, -1.0 / 12};
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(s.weights[i], expect[i], 1e-14);
    Stencil edge = derivative_stencil(2, 4, 0, 100);
    EXPECT_EQ(edge.first, 0);
    EXPECT_EQ(edge.weights.size(), 6u);
    EXPECT_THROW(fd_weights(0.0, {0.0}, 1), InvalidInput);
}

TEST(Operator, SecondDerivativeOfQuadratic) {
    auto op = dk(100, 2, 2);
    GridVector<double> u = op.grid().sample([](double x) { return x * x; });
    GridVector<double> d = op.apply(u);
    for (int i = 0; i < op.grid().nodes(); ++i) EXPECT_NEAR(d[i], 2.0, 1e-10);
}

TEST(Operator, ThirdDerivativeOfCubic) {
    const int n = 200;
    auto op = dk(n, 3, 4);
    GridVector<double> d = op.apply(op.grid().sample([](double x) { return x * x * x; }));
    for (int i = 0; i < op.grid().nodes(); ++i) EXPECT_NEAR(d[i], 6.0, 1e-8 * n);
}

TEST(Operator, MonomialsUpToAccuracyAreExact) {
    const int n = 60;
    for (int acc : {2, 4})
        for (int k = 1; k <= 3; ++k) {
            auto op = dk(n, k, acc);
            for (int m = 0; m <= acc; ++m) {
                GridVector<double> d = op.apply(op.grid().sample([&](double x) { return std::pow(x, m); }));
                for (int i = 0; i < op.grid().nodes(); ++i) {
                    double exact = m < k ? 0.0 : std::tgamma(m + 1) / std::tgamma(m - k + 1) * std::pow(op.grid().x(i), m - k);
                    EXPECT_NEAR(d[i], exact, 1e-9 * n) << "acc " << acc << " k " << k << " m " << m;
                }
            }
        }
}

TEST(Operator, FourthOrderFirstDerivative) {
    auto err = [](int n) {
        auto op = dk(n, 1, 4);
        GridVector<double> d = op.apply(op.grid().sample([](double x) { return std::sin(5 * x + 5); }));
        GridVector<double> e = d - op.grid().sample([](double x) { return 5 * std::cos(5 * x + 5); });
        return interior_max(op.grid(), e);
    };
    // Halve h exactly: n + 1 intervals doubles.
    const double e1 = err(249), e2 = err(499);
    EXPECT_NEAR(std::log2(e1 / e2), 4.0, 0.1);
    EXPECT_LT(err(1999), 1e-9);
}

TEST(Operator, TooSmallGridThrows) { EXPECT_THROW(dk(4, 2, 4), InvalidInput); }

TEST(Operator, BadArgumentsThrow) {
    EXPECT_THROW(build_operator<double>(Grid1D(50), 4, 2, Coeffs(5, zero)), InvalidInput);
    EXPECT_THROW(build_operator<double>(Grid1D(50), 2, 3, Coeffs(3, zero)), InvalidInput);
    EXPECT_THROW(build_operator<double>(Grid1D(50), 2, 2, Coeffs(2, zero)), InvalidInput);
}

TEST(Operator, DirichletLaplacianIsSymmetric) {
    auto op = dk(80, 2, 2);
    const auto& L = op.matrix();
    const int n = op.grid().n();
    double scale = 0;
    for (int i = 1; i <= n; ++i) scale = std::max(scale, std::abs(L(i, i)));
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j) EXPECT_LE(std::abs(L(i, j) - L(j, i)), 1e-13 * scale);
}

TEST(ApplyDerivative, Examples) {
    Grid1D g(500);
    GridVector<double> c = GridVector<double>::Constant(g.nodes(), 3.0);
    EXPECT_LT(apply_derivative(g, c, 1, 4).cwiseAbs().maxCoeff(), 1e-12 * 500);
    GridVector<double> sq = apply_derivative(g, g.sample([](double x) { return x * x; }), 2, 4);
    for (int i = 0; i < g.nodes(); ++i) EXPECT_NEAR(sq[i], 2.0, 1e-9 * 500);

    Grid1D fine(10000);
    GridVector<double> d2 = apply_derivative(fine, fine.sample([](double x) { return std::sin(5 * x + 5); }), 2, 4);
    GridVector<double> exact = fine.sample([](double x) { return -25 * std::sin(5 * x + 5); });
    // At h = 1e-4 truncation is ~1e-13; what remains is sampling roundoff (~1e-15 in sin(5x+5))
    // amplified by the stencil's sum |w| / h^2, about 5e8 in the interior and more at the edges.
    EXPECT_LT((d2 - exact).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_THROW(apply_derivative(g, c, 4, 4), InvalidInput);
}

TEST(Band, MatchesDenseSolve) {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int n : {5, 50, 500}) {
        const int kl = 3, ku = 2;
        BandMatrix<double> B(n, kl, ku);
        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = std::max(0, i - kl); j <= std::min(n - 1, i + ku); ++j) {
                double v = u(rng) + (i == j ? 0.5 : 0.0);
                B(i, j) = v;
                D(i, j) = v;
            }
        Eigen::VectorXd rhs = Eigen::VectorXd::NullaryExpr(n, [&] { return u(rng); });
        Eigen::VectorXd ref = D.partialPivLu().solve(rhs);
        BandLU<double> lu(B);
        Eigen::VectorXd x = lu.solve(rhs);
        EXPECT_LE((x - ref).norm(), 1e-10 * ref.norm()) << "n=" << n;
        EXPECT_GE(lu.condition_estimate(), 1.0);
    }
}

TEST(Band, ComplexMatchesDense) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int n = 120;
    BandMatrix<cplx> B(n, 2, 2);
    Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = std::max(0, i - 2); j <= std::min(n - 1, i + 2); ++j) {
            cplx v(u(rng) + (i == j ? 4.0 : 0.0), u(rng));
            B(i, j) = v;
            D(i, j) = v;
        }
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Random(n);
    Eigen::VectorXcd ref = D.partialPivLu().solve(rhs);
    EXPECT_LE((BandLU<cplx>(B).solve(rhs) - ref).norm(), 1e-12 * ref.norm());
}

TEST(Band, SingularThrowsWithShift) {
    BandMatrix<double> B(3, 1, 1);
    B(0, 0) = 1;
    B(1, 1) = 0;
    B(2, 2) = 1;
    try {
        BandLU<double> lu(B, 1e14, cplx(0.0, 2.0));
        FAIL() << "expected SingularSystem";
    } catch (const SingularSystem& e) {
        EXPECT_EQ(e.lambda(), cplx(0.0, 2.0));
    }
}

TEST(Shifted, ZeroShiftIsIdentity) {
    auto op = dk(50, 2, 4);
    GridVector<double> rhs = op.grid().sample([](double x) { return std::cos(x); });
    GridVector<double> v = solve_shifted(op, 0.0, rhs, BoundarySnapshot<double>{kDirichlet, {2.0, -1.0}});
    for (int i = 1; i < op.grid().nodes() - 1; ++i) EXPECT_NEAR(v[i], rhs[i], 1e-15);
    EXPECT_EQ(v[0], 2.0);
    EXPECT_EQ(v[op.grid().nodes() - 1], -1.0);
}

TEST(Shifted, DirichletValueSurvivesPivoting) {
    // lambda/h^2 ~ 4e4 makes the LU pivot away from the identity row.
    auto op = dk(2000, 2, 4);
    GridVector<double> rhs = op.grid().sample([](double x) { return std::sin(5 * x + 5); });
    const double g0 = 0.1234567890123456, g1 = -0.9876543210987654;
    GridVector<double> v = solve_shifted(op, 0.01, rhs, BoundarySnapshot<double>{kDirichlet, {g0, g1}});
    EXPECT_EQ(v[0], g0);
    EXPECT_EQ(v[op.grid().nodes() - 1], g1);
}

TEST(Shifted, HeatBoundaryLayer) {
    auto op = dk(2000, 2, 4);
    const double lam = 1e-4, w = std::sqrt(lam);
    GridVector<double> rhs = GridVector<double>::Ones(op.grid().nodes());
    GridVector<double> v = solve_shifted(op, lam, rhs, BoundarySnapshot<double>{kDirichlet, {0.0, 0.0}});
    GridVector<double> exact =
        op.grid().sample([&](double x) { return 1.0 - std::cosh((x - 0.5) / w) / std::cosh(0.5 / w); });
    EXPECT_LT((v - exact).cwiseAbs().maxCoeff(), 1e-6);
    // x = sqrt(lambda) = 1e-2 is node 20 (h = 1/2001 is close enough for a 5% check).
    const int i = static_cast<int>(std::lround(w / op.grid().h()));
    EXPECT_NEAR(v[i], 1.0 - std::exp(-1.0), 0.05 * (1.0 - std::exp(-1.0)));
    EXPECT_NEAR(v[op.grid().nodes() / 2], 1.0, 1e-12);
}

TEST(Shifted, ComplexShiftMatchesDense) {
    auto op = dk(200, 2, 4);
    const cplx lam = 1.0 / cplx(0.0, 2.0 * std::acos(-1.0));
    GridVector<cplx> rhs = op.grid().sample([](double x) { return cplx(std::sin(5 * x + 5)); });
    GridVector<cplx> v = solve_shifted(op, lam, rhs, BoundarySnapshot<cplx>{kDirichlet, {cplx(0.3), cplx(0.0, 1.0)}});

    const int N = op.grid().nodes();
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) M(i, j) -= lam * op.matrix()(i, j);
    M.row(0).setZero();
    M(0, 0) = 1;
    M.row(N - 1).setZero();
    M(N - 1, N - 1) = 1;
    Eigen::VectorXcd b = rhs;
    b(0) = 0.3;
    b(N - 1) = cplx(0.0, 1.0);
    Eigen::VectorXcd ref = M.partialPivLu().solve(b);
    EXPECT_LT((v - ref).cwiseAbs().maxCoeff(), 1e-10 * ref.cwiseAbs().maxCoeff());
}

TEST(Shifted, ComplexWithZeroImaginaryMatchesReal) {
    auto op = dk(300, 2, 4);
    auto opc = build_operator<cplx>(op.grid(), 2, 4,
                                    {[](double) { return cplx(0); }, [](double) { return cplx(0); },
                                     [](double) { return cplx(1); }});
    GridVector<double> rhs = op.grid().sample([](double x) { return std::exp(x); });
    GridVector<double> vr = solve_shifted(op, 0.01, rhs, BoundarySnapshot<double>{kDirichlet, {1.0, 2.0}});
    GridVector<cplx> vc =
        solve_shifted(opc, cplx(0.01), GridVector<cplx>(rhs.cast<cplx>()), BoundarySnapshot<cplx>{kDirichlet, {1.0, 2.0}});
    EXPECT_LT((vc - vr.cast<cplx>()).cwiseAbs().maxCoeff(), 1e-14 * vr.cwiseAbs().maxCoeff());
    EXPECT_LT(vc.imag().cwiseAbs().maxCoeff(), 1e-300);
    GridVector<cplx> ac = opc.apply(GridVector<cplx>(rhs.cast<cplx>()));
    EXPECT_LT((ac - op.apply(rhs).cast<cplx>()).cwiseAbs().maxCoeff(), 1e-14 * ac.cwiseAbs().maxCoeff());
}

TEST(Boundary, RowsAndNeumannStencil) {
    BoundaryLayout airy{{Side::Left, BCKind::Dirichlet}, {Side::Left, BCKind::Neumann}, {Side::Right, BCKind::Neumann}};
    EXPECT_EQ(boundary_rows(airy, 100), (std::vector<int>{0, 1, 99}));
    EXPECT_THROW(boundary_row(airy, 3, 100), InvalidInput);

    Grid1D g(100);
    GridVector<double> sq = g.sample([](double x) { return x * x; });
    for (auto side : {Side::Left, Side::Right}) {
        Stencil s = boundary_stencil({side, BCKind::Neumann}, 4, g.nodes(), g.h());
        double acc = 0;
        for (std::size_t p = 0; p < s.weights.size(); ++p) acc += s.weights[p] * sq[s.first + static_cast<int>(p)];
        EXPECT_NEAR(acc, side == Side::Left ? 0.0 : 2.0, 1e-10);
    }
}

TEST(Boundary, NeumannSolveSatisfiesCondition) {
    auto op = dk(400, 2, 4);
    BoundaryLayout layout{{Side::Left, BCKind::Neumann}, {Side::Right, BCKind::Dirichlet}};
    GridVector<double> rhs = op.grid().sample([](double x) { return std::sin(x); });
    GridVector<double> v = solve_shifted(op, 1e-3, rhs, BoundarySnapshot<double>{layout, {0.5, 0.0}});
    Stencil s = boundary_stencil(layout[0], 4, op.grid().nodes(), op.grid().h());
    double acc = 0;
    for (std::size_t p = 0; p < s.weights.size(); ++p) acc += s.weights[p] * v[s.first + static_cast<int>(p)];
    EXPECT_NEAR(acc, 0.5, 1e-9);
}
