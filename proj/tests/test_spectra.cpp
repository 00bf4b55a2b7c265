#include <algorithm>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "orlab/harness.hpp"
#include "orlab/spectra.hpp"

using namespace orlab;

namespace {

const double kPi = std::acos(-1.0);

PeriodicSetup constant_setup(int n, double value) {
    PeriodicSetup s = periodic_heat(n);
    s.Ustar = GridVector<cplx>::Constant(s.Ustar.size(), value);
    return s;
}

}  // namespace

TEST(Dcm, BackwardEulerClosedForm) {
    for (double omega : {1.0, 15.0})
        for (double dt : {1e-2, 1e-4}) {
            DCMatrix d = build_dcm(builtin("be"), omega, dt);
            ASSERT_EQ(d.M.rows(), 1);
            const cplx z = std::exp(cplx(0, omega * dt));
            // The naive z - 1 here loses eps / (omega dt) to cancellation.
            EXPECT_LT(std::abs(d.M(0, 0) - dt * z / (z - 1.0)), 1e-15 / (omega * dt) * std::abs(d.M(0, 0)));
            EXPECT_LT(std::abs(std::abs(d.z) - 1.0), 1e-15);
        }
    EXPECT_LT(std::abs(build_dcm(builtin("be"), 2.0, 1e-7).M(0, 0) - 1.0 / cplx(0, 2.0)), 1e-6);
}

TEST(Dcm, ReproducedFromFactors) {
    auto t = builtin("dirk3");
    DCMatrix d = build_dcm(t, 2 * kPi, 1e-3);
    ComplexMatrix M = 1e-3 * t.A().cast<cplx>() +
                      1e-3 / (d.z - 1.0) * ComplexVector::Ones(3) * t.b().cast<cplx>().transpose();
    EXPECT_LT((M - d.M).cwiseAbs().maxCoeff(), 1e-14 * d.M.cwiseAbs().maxCoeff());
}

TEST(Dcm, Dirk2HasEigenvalueNearInverseOmega) {
    DCMatrix d = build_dcm(builtin("dirk2"), 2 * kPi, 1e-3);
    Eigen::ComplexEigenSolver<ComplexMatrix> es(d.M);
    double best = 1e9;
    for (int i = 0; i < 2; ++i) best = std::min(best, std::abs(es.eigenvalues()(i) - 1.0 / cplx(0, 2 * kPi)));
    EXPECT_LT(best, 1e-2);
}

TEST(Dcm, FrequencyRange) {
    EXPECT_THROW(build_dcm(builtin("dirk2"), 0.0, 1e-3), InvalidInput);
    EXPECT_THROW(build_dcm(builtin("dirk2"), 1e4, 1e-3), InvalidInput);
    EXPECT_THROW(build_dcm(builtin("dirk2"), 1.0, -1e-3), InvalidInput);
}

TEST(Mu0, Examples) {
    EXPECT_TRUE(predicted_mu0(builtin("be")).empty());
    EXPECT_EQ(predicted_mu0(builtin("dirk2")).size(), 1u);
    for (const auto& t : builtin_tableaux())
        for (cplx m : predicted_mu0(t)) EXPECT_GE(m.real(), -1e-10) << t.name();
}

TEST(Mu0, SmallEigenvalueMismatchHalvesWithDt) {
    auto t = builtin("dirk2");
    double prev = 0;
    for (double dt : {2e-3, 1e-3, 5e-4}) {
        SpectrumReport r = classify_spectrum(build_dcm(t, 2 * kPi, dt), t);
        ASSERT_EQ(r.small_eigs.size(), 1u);
        const double mis = r.small_eigs[0].mismatch;
        if (prev > 0) { EXPECT_NEAR(prev / mis, 2.0, 0.2); }
        prev = mis;
    }
}

TEST(Spectrum, LocationBranches) {
    auto t = builtin("dirk3");
    SpectrumReport r = classify_spectrum(build_dcm(t, 2 * kPi, 1e-3), t);
    EXPECT_TRUE(r.ok());
    ASSERT_EQ(r.location.size(), 3u);
    for (const auto& c : r.location) EXPECT_NE(c.branch, LocationBranch::Neither);

    auto mid = builtin("midpoint");
    SpectrumReport m = classify_spectrum(build_dcm(mid, 2 * kPi, 1e-3), mid);
    ASSERT_EQ(m.location.size(), 1u);
    EXPECT_EQ(m.location[0].branch, LocationBranch::StabilityFunction);
}

TEST(Spectrum, ZeroEigenvalueIsReported) {
    ComplexMatrix M = ComplexMatrix::Zero(2, 2);
    M(0, 0) = cplx(0.0, -0.1);
    SpectrumReport r = classify_spectrum(DCMatrix::from_matrix(M, 10.0, 1e-3), builtin("dirk2"));
    EXPECT_TRUE(r.zero_eigenvalue);
    EXPECT_FALSE(r.ok());
}

TEST(Spectrum, InvariantsOverGrid) {
    for (const auto& t : builtin_tableaux())
        for (double omega : {1.0, 2 * kPi, 15.0})
            for (double dt : {1e-2, 1e-3, 1e-4}) {
                SCOPED_TRACE(t.name() + " omega " + std::to_string(omega) + " dt " + std::to_string(dt));
                SpectrumReport r = classify_spectrum(build_dcm(t, omega, dt), t);
                EXPECT_TRUE(r.ok()) << (r.violations.empty() ? "" : r.violations[0]);
                EXPECT_GT(r.min_abs, 1e-14 * dt);
                EXPECT_EQ(r.n_big, 1);
                EXPECT_LT(r.biorthogonality_error, 1e-10);
            }
}

TEST(Spectrum, BigEigenvalueGapIsWithinLinearBound) {
    // The gap is O(dt) or better: gap/dt must not grow as dt shrinks.
    for (const auto& t : builtin_tableaux()) {
        double prev = std::numeric_limits<double>::infinity();
        for (double dt : {4e-3, 2e-3, 1e-3, 5e-4}) {
            const double g = classify_spectrum(build_dcm(t, 15.0, dt), t).big_gap;
            if (g > 1e-13) { EXPECT_LE(g / dt, prev * 1.05) << t.name(); }
            prev = g / dt;
        }
    }
}

TEST(Spectrum, FirstLeftEigenvectorAnnihilatesTruncationError) {
    const std::vector<double> dts{4e-3, 2e-3, 1e-3, 5e-4};
    for (const auto& t : builtin_tableaux()) {
        std::vector<double> v;
        for (double dt : dts) {
            SpectrumReport r = classify_spectrum(build_dcm(t, 15.0, dt), t);
            v.push_back(std::abs((r.left.row(0) * lte_coefficients(t, 15.0, dt).h)(0)));
        }
        EXPECT_GE(fit_loglog(dts, v).slope, verified_order(t) - 0.3) << t.name();
    }
}

TEST(Lte, Examples) {
    auto setup = periodic_heat(200);
    auto l = lte_series(setup.Ustar, builtin("dirk3"), 15.0, 1e-3);
    EXPECT_LT(l.psi0.cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_EQ(l.coef.J, 5);

    LTECoefficients zero = lte_coefficients(builtin("dirk2"), 0.0, 1e-3);
    EXPECT_EQ(zero.delta.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(zero.h.cwiseAbs().maxCoeff(), 0.0);

    double prev = 0;
    for (double dt : {4e-3, 2e-3, 1e-3}) {
        const double p0 = lte_series(setup.Ustar, builtin("dirk3_2s"), 15.0, dt).psi0.cwiseAbs().maxCoeff();
        if (prev > 0) {
            EXPECT_GE(prev / p0, 3.4);
            EXPECT_LE(prev / p0, 4.6);
        }
        prev = p0;
    }
    EXPECT_THROW(lte_coefficients(builtin("dirk3"), 15.0, 1e-3, 3), InvalidInput);
}

TEST(Lte, RefusesVanishingBTAinvE) {
    // Gauss-Legendre 2 has b^T A^{-1} e = 0.
    EXPECT_THROW(lte_coefficients(tableaux::gauss2(), 15.0, 1e-3), InvalidInput);
}

TEST(Modes, Dirk3ModeScalingAndInteriorOrder) {
    auto setup = periodic_heat(1000);
    auto t = builtin("dirk3");
    const int N = setup.op.grid().nodes();
    std::vector<double> amp[3], mid;
    for (double dt : {4e-3, 2e-3, 1e-3}) {
        ModalDecomposition dec = analyze_periodic(t, setup.op, setup.layout, setup.Ustar, 15.0, dt);
        ASSERT_EQ(dec.modes.size(), 3u);
        for (int i = 0; i < 3; ++i) amp[i].push_back(std::abs(dec.weights[i]) * dec.modes[i].cwiseAbs().maxCoeff());
        mid.push_back(dec.eps0.segment(N / 3, N / 3).cwiseAbs().maxCoeff());
        EXPECT_LT(std::abs(dec.eps0[0] - dec.lte.psi0[0]), 1e-14);
        EXPECT_LT(std::abs(dec.eps0[N - 1] - dec.lte.psi0[N - 1]), 1e-14);
    }
    for (int k = 1; k < 3; ++k) {
        EXPECT_NEAR(amp[0][k - 1] / amp[0][k], 8.0, 0.8);
        EXPECT_NEAR(amp[1][k - 1] / amp[1][k], 4.0, 0.4);
        EXPECT_NEAR(amp[2][k - 1] / amp[2][k], 4.0, 0.4);
        EXPECT_NEAR(std::log2(mid[k - 1] / mid[k]), 3.0, 0.3);
    }
}

TEST(Modes, BoundaryValueEqualsPsi0ForNonStifflyAccurate) {
    auto setup = periodic_heat(400);
    ModalDecomposition dec = analyze_periodic(builtin("dirk3_2s"), setup.op, setup.layout, setup.Ustar, 15.0, 2e-3);
    EXPECT_GT(std::abs(dec.lte.psi0[0]), 1e-6);
    EXPECT_LT(std::abs(dec.eps0[0] - dec.lte.psi0[0]), 1e-12 * std::abs(dec.lte.psi0[0]) + 1e-16);
}

TEST(Coupled, AgreesWithModes) {
    auto setup = periodic_heat(1000);
    for (const char* name : {"dirk2", "dirk3", "dirk3_2s", "wso2"}) {
        auto t = builtin(name);
        ModalDecomposition dec = analyze_periodic(t, setup.op, setup.layout, setup.Ustar, 15.0, 2e-3);
        ASSERT_LT(dec.spectrum.cond_T, 1e6);
        CoupledSolution c = solve_coupled(build_dcm(t, 15.0, 2e-3), dec.lte, setup.op, setup.layout);
        EXPECT_LT((c.eps0 - dec.eps0).cwiseAbs().maxCoeff(), 1e-8 * dec.eps0.cwiseAbs().maxCoeff()) << name;
    }
}

TEST(Coupled, BackwardEulerIsOneShiftedSolve) {
    auto setup = periodic_heat(300);
    auto t = builtin("be");
    DCMatrix d = build_dcm(t, 15.0, 1e-3);
    LTESeries l = lte_series(setup.Ustar, t, 15.0, 1e-3);
    CoupledSolution c = solve_coupled(d, l, setup.op, setup.layout);
    ShiftedSolver<cplx> solver(setup.op, d.M(0, 0), setup.layout);
    GridVector<cplx> e = solver.solve(l.h[0], {0.0, 0.0});
    // The two factorizations pivot differently; agreement is at eps * |lambda| / h^2 ~ 1e-12 (measured 3.4e-12).
    EXPECT_LT((c.stages[0] - e).cwiseAbs().maxCoeff(), 1e-11 * e.cwiseAbs().maxCoeff());
}

TEST(Coupled, JordanBlockFallsBackToCoupledSolve) {
    auto setup = periodic_heat(200);
    auto t = builtin("dirk2");
    ComplexMatrix M(2, 2);
    M << cplx(0, -0.05), 1e-3, 0.0, cplx(0, -0.05);
    DCMatrix d = DCMatrix::from_matrix(M, 15.0, 1e-3);
    SpectrumReport r = classify_spectrum(d, t);
    EXPECT_TRUE(r.near_defective);
    LTESeries l = lte_series(setup.Ustar, t, 15.0, 1e-3);
    EXPECT_THROW(solve_modes(d, r, l, setup.op, setup.layout), NumericalFailure);
    CoupledSolution c = solve_coupled(d, l, setup.op, setup.layout);
    EXPECT_TRUE(c.eps0.allFinite());
    EXPECT_GT(c.eps0.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Composite, ErrorShrinksWithDt) {
    auto setup = periodic_heat(1000);
    auto t = builtin("dirk3");
    std::vector<double> prev;
    for (double dt : {4e-3, 2e-3, 1e-3}) {
        ModalDecomposition dec = analyze_periodic(t, setup.op, setup.layout, setup.Ustar, 15.0, dt);
        CompositeExpansion ce = composite_expansion(dec, setup.op, setup.Ustar, 2);
        ASSERT_EQ(ce.modes.size(), 2u);
        std::vector<double> rel;
        for (const auto& cm : ce.modes) {
            const auto& psi = dec.modes[cm.index];
            rel.push_back((psi - cm.composite).cwiseAbs().maxCoeff() / psi.cwiseAbs().maxCoeff());
        }
        for (std::size_t i = 0; i < prev.size(); ++i) EXPECT_GT(prev[i] / rel[i], 2.0) << "mode " << i + 1;
        prev = rel;
    }
}

TEST(Composite, ConstantProfile) {
    auto setup = constant_setup(300, 2.0);
    ModalDecomposition dec = analyze_periodic(builtin("dirk3"), setup.op, setup.layout, setup.Ustar, 15.0, 1e-3);
    CompositeExpansion ce = composite_expansion(dec, setup.op, setup.Ustar, 2);
    const int N = setup.op.grid().nodes();
    for (const auto& cm : ce.modes) {
        const cplx expect = cm.H * 2.0;
        EXPECT_LT((cm.outer.segment(3, N - 6).array() - expect).abs().maxCoeff(), 1e-12 * std::abs(expect));
        // Boundary rows of L_h on a constant only vanish up to eps / h^2.
        EXPECT_LT(std::abs(cm.amp_left + expect), 1e-9 * std::abs(expect));
        EXPECT_LT(std::abs(cm.amp_right + expect), 1e-9 * std::abs(expect));
    }
}

TEST(Composite, OuterTermsAreRepeatedOperatorApplications) {
    auto setup = periodic_heat(300);
    ModalDecomposition dec = analyze_periodic(builtin("dirk3"), setup.op, setup.layout, setup.Ustar, 15.0, 1e-3);
    CompositeExpansion ce = composite_expansion(dec, setup.op, setup.Ustar, 3);
    for (const auto& cm : ce.modes) {
        ASSERT_EQ(cm.outer_terms.size(), 4u);
        GridVector<cplx> sum = GridVector<cplx>::Zero(setup.Ustar.size());
        for (int k = 0; k < 4; ++k) {
            if (k > 0) {
                GridVector<cplx> next = cm.lambda * setup.op.apply<cplx>(cm.outer_terms[k - 1]);
                EXPECT_LT((next - cm.outer_terms[k]).cwiseAbs().maxCoeff(), 1e-14 * (1 + next.cwiseAbs().maxCoeff()));
            }
            sum += cm.outer_terms[k];
        }
        EXPECT_LT((sum - cm.outer).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(Composite, InternalLayerAtBreak) {
    auto setup = periodic_heat(999);  // h = 1e-3, so x = 1/2 is a node
    const Grid1D& g = setup.op.grid();
    PiecewiseProfile pw;
    pw.pieces.push_back(g.sample([](double x) { return cplx(std::sin(5 * x + 5)); }));
    pw.pieces.push_back(g.sample([](double x) { return cplx(std::cos(3 * x)); }));
    pw.breaks.push_back(0.5);
    GridVector<cplx> U(g.nodes());
    for (int i = 0; i < g.nodes(); ++i) U[i] = g.x(i) < 0.5 ? pw.pieces[0][i] : pw.pieces[1][i];
    ModalDecomposition dec = analyze_periodic(builtin("dirk3"), setup.op, setup.layout, U, 15.0, 1e-3);
    CompositeExpansion ce = composite_expansion(dec, setup.op, U, 2, pw);
    ASSERT_TRUE(ce.break_point);
    const int ib = 500;
    const double jump0 = std::cos(1.5) - std::sin(7.5), djump0 = -3 * std::sin(1.5) - 5 * std::cos(7.5);
    for (const auto& cm : ce.modes) {
        // Leading order only: the outer series adds O(lambda |L U*|), a few percent at this dt.
        EXPECT_LT(std::abs(cm.jump - cm.H * jump0), 5e-2 * std::abs(cm.H * jump0));
        EXPECT_LT(std::abs(cm.jump_derivative - cm.H * djump0), 5e-2 * std::abs(cm.H * djump0));
        const cplx w = std::sqrt(cm.lambda);
        EXPECT_LT(std::abs(cm.layer_internal[ib] - w / 2.0 * cm.jump_derivative), 1e-14);
        const cplx right = (-cm.jump / 2.0 + w / 2.0 * cm.jump_derivative) * std::exp(-g.h() / w);
        EXPECT_LT(std::abs(cm.layer_internal[ib + 1] - right), 1e-12 * std::abs(right));
        // The layer cancels the outer jump; what is left is the slope over two cells, O(h / width).
        EXPECT_LT(std::abs(cm.composite[ib + 1] - cm.composite[ib - 1]), 0.15 * std::abs(cm.jump));
    }
    pw.breaks.push_back(0.7);
    EXPECT_THROW(composite_expansion(dec, setup.op, U, 2, pw), InvalidInput);
}

TEST(Composite, RejectsNonPositiveDiffusion) {
    auto setup = periodic_heat(100);
    ModalDecomposition dec = analyze_periodic(builtin("dirk2"), setup.op, setup.layout, setup.Ustar, 15.0, 1e-3);
    DiscreteOperator<double> neg(setup.op.grid(), 2, 4,
                                 {[](double) { return 0.0; }, [](double) { return 0.0; }, [](double) { return -1.0; }});
    EXPECT_THROW(composite_expansion(dec, neg, setup.Ustar, 2), InvalidInput);
}

TEST(Bracket1, Orders) {
    auto setup = periodic_heat(1000);
    const std::vector<double> dts{4e-3, 2e-3, 1e-3};
    EXPECT_NEAR(bracket1_check(builtin("dirk3"), setup, 15.0, dts).order, 3.0, 0.3);
    EXPECT_NEAR(bracket1_check(builtin("be"), setup, 15.0, dts).order, 1.0, 0.2);
    Bracket1Check z = bracket1_check(builtin("dirk3"), setup, 0.0, dts);
    EXPECT_TRUE(z.identically_zero);
    for (double v : z.norm) EXPECT_EQ(v, 0.0);
}

TEST(LayerWidth, SyntheticExponential) {
    Grid1D g(4000);
    GridVector<double> e = g.sample([](double x) { return std::exp(-x / 1e-2); });
    LayerEstimate l = detect_layer_width(g, e, Side::Left);
    ASSERT_TRUE(l.found);
    EXPECT_NEAR(l.width, 1e-2, 1e-3);
    EXPECT_FALSE(detect_layer_width(g, e, Side::Right).found);
}

TEST(LayerWidth, FlatErrorHasNoLayer) {
    Grid1D g(500);
    LayerEstimate l = detect_layer_width(g, GridVector<double>(GridVector<double>::Constant(g.nodes(), 3e-6)), Side::Left);
    EXPECT_FALSE(l.found);
    EXPECT_FALSE(l.reason.empty());
    EXPECT_FALSE(detect_layer_width(g, GridVector<double>(GridVector<double>::Zero(g.nodes())), Side::Right).found);
}

TEST(LayerWidth, Dirk2LocalErrorScalesWithRootDt) {
    const AnyProblem p = problems::heat();
    const Method m = Method::rk(builtin("dirk2"));
    ErrorShape a = error_shape_snapshot(p, m, 1.25e-3, 2000, ShapeKind::Local);
    ErrorShape b = error_shape_snapshot(p, m, 6.25e-4, 2000, ShapeKind::Local);
    for (Side side : {Side::Left, Side::Right}) {
        const LayerEstimate& la = side == Side::Left ? a.left : a.right;
        const LayerEstimate& lb = side == Side::Left ? b.left : b.right;
        ASSERT_TRUE(la.found && lb.found);
        EXPECT_NEAR(la.width / lb.width, std::sqrt(2.0), 0.15 * std::sqrt(2.0));
    }
}

TEST(Lmm, SpectrumHasOneBigAndZeroEigenvalues) {
    for (int k = 1; k <= 4; ++k)
        for (double dt : {1e-2, 1e-3}) {
            LMMSpectrum s = lmm_spectrum(k, 15.0, dt);
            EXPECT_EQ(s.n_zero, k - 1) << k;
            EXPECT_EQ(s.n_big, 1) << k;
            EXPECT_LT(std::abs(s.big - 1.0 / cplx(0, 15.0)), 0.05) << k;
        }
    EXPECT_THROW(lmm_spectrum(2, 0.0, 1e-3), InvalidInput);
}

TEST(Dump, SpectrumJsonAndModesCsv) {
    auto setup = periodic_heat(50);
    ModalDecomposition dec = analyze_periodic(builtin("dirk2"), setup.op, setup.layout, setup.Ustar, 15.0, 1e-2);
    nlohmann::json j = spectrum_to_json(dec.spectrum);
    EXPECT_EQ(j["eigenvalues"].size(), 2u);
    EXPECT_EQ(j["n_big"], 1);
    std::ostringstream os;
    write_modes_csv(os, setup.op.grid(), dec);
    std::string header = os.str().substr(0, os.str().find('\n'));
    EXPECT_EQ(std::count(header.begin(), header.end(), ','), 8);
}
