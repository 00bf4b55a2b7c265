#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "orlab/tableau.hpp"
#include "orlab/tableau_io.hpp"

using namespace orlab;

namespace {

struct Expected {
    const char* name;
    int p, q, wso;
    bool sa;
};

// Verified metadata of the built-ins.
const Expected kBuiltins[] = {
    {"BE", 1, 1, 1, true},      {"DIRK2", 2, 1, 1, true}, {"DIRK3_2s", 3, 1, 1, false}, {"DIRK3", 3, 1, 1, true},
    {"DIRK4", 4, 1, 1, true},   {"WSO2", 3, 1, 2, true},  {"midpoint", 2, 1, 1, false},
};

}  // namespace

TEST(Tableau, BuiltinsMatchDeclaredMetadata) {
    for (const auto& e : kBuiltins) {
        SCOPED_TRACE(e.name);
        ButcherTableau t = builtin(e.name);
        SchemeAudit a = audit(t);
        EXPECT_EQ(a.p, e.p);
        EXPECT_EQ(a.q, e.q);
        EXPECT_EQ(a.q_tilde, e.wso);
        EXPECT_EQ(a.stiffly_accurate, e.sa);
        EXPECT_TRUE(a.mismatches.empty());
    }
}

TEST(Tableau, BuiltinCoefficients) {
    ButcherTableau be = builtin("be");
    EXPECT_EQ(be.A()(0, 0), 1.0);
    EXPECT_EQ(be.b()(0), 1.0);
    EXPECT_EQ(be.c()(0), 1.0);

    ButcherTableau d2 = builtin("dirk2");
    const double g = 0.2928932188;
    EXPECT_NEAR(d2.A()(0, 0), g, 1e-10);
    EXPECT_EQ(d2.A()(0, 1), 0.0);
    EXPECT_NEAR(d2.A()(1, 0), 1 - g, 1e-10);
    EXPECT_NEAR(d2.A()(1, 1), g, 1e-10);

    EXPECT_EQ(builtin("WSO2").A()(0, 0), 0.019000728905359);
}

TEST(Tableau, Dirk3ClosedFormMatchesPrintedDigits) {
    ButcherTableau t = builtin("dirk3");
    EXPECT_NEAR(t.A()(0, 0), 0.4358665215, 5e-10);
    EXPECT_NEAR(t.A()(1, 0), 0.2820667392, 5e-10);
    EXPECT_NEAR(t.b()(0), 1.208496649, 5e-10);
    EXPECT_NEAR(t.b()(1), -0.644363171, 5e-10);
    EXPECT_NEAR(t.b().sum(), 1.0, 1e-15);
}

TEST(Tableau, UnknownSchemeThrows) { EXPECT_THROW(builtin("rk45"), InvalidInput); }

TEST(Tableau, OrderConditionResiduals) {
    auto be = order_condition_residuals(builtin("be"), 2);
    EXPECT_NEAR(be.at({0, 0}), 0.0, 1e-15);
    EXPECT_NEAR(be.at({0, 1}), 0.5, 1e-15);
    auto d3 = order_condition_residuals(builtin("dirk3"), 3);
    for (const auto& [jk, r] : d3) EXPECT_LT(std::abs(r), 1e-8) << jk.first << "," << jk.second;
    EXPECT_THROW(order_condition_residuals(builtin("be"), 0), InvalidInput);
}

TEST(Tableau, StageOrderResidualAtOneVanishes) {
    for (const auto& t : builtin_tableaux()) EXPECT_LT(stage_order_residual(t, 1).cwiseAbs().maxCoeff(), 1e-12) << t.name();
}

TEST(Tableau, Dirk2SecondStageResidual) {
    RealVector tau = stage_order_residual(builtin("dirk2"), 2);
    const double g = 1.0 - std::sqrt(2.0) / 2.0;
    EXPECT_NEAR(tau(0), g * g / 2, 1e-15);
    EXPECT_NEAR(tau(0), 0.0428932, 1e-7);
    EXPECT_NEAR(tau(1), 0.0, 1e-15);
}

TEST(Tableau, Wso2SecondResidualIsEigenvector) {
    ButcherTableau t = builtin("wso2");
    RealVector v = stage_order_residual(t, 2);
    EXPECT_GT(v.norm(), 1e-5);
    EXPECT_LT((t.A() * v - t.A()(0, 0) * v).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Tableau, StageOrders) {
    EXPECT_EQ(stage_order(builtin("dirk3")), 1);
    EXPECT_EQ(stage_order(builtin("be")), 1);
    // A c = 1/4 but c^2/2 = 1/8, so tau^(2) = 1/8 and the stage order is 1.
    ButcherTableau mid = builtin("midpoint");
    EXPECT_NEAR(stage_order_residual(mid, 2)(0), 0.125, 1e-15);
    EXPECT_EQ(stage_order(mid), 1);
    EXPECT_EQ(stage_order(tableaux::gauss2()), 2);
}

TEST(Tableau, WeakStageOrders) {
    for (const auto& t : builtin_tableaux()) EXPECT_GE(weak_stage_order(t), 1) << t.name();
    EXPECT_EQ(weak_stage_order(builtin("wso2")), 2);
    EXPECT_EQ(weak_stage_order(builtin("dirk3")), 1);
}

TEST(Tableau, WeakStageOrderIsMonotone) {
    for (const auto& t : builtin_tableaux()) {
        const int q = weak_stage_order(t);
        for (int j = 1; j <= q; ++j) EXPECT_TRUE(detail::wso_level_holds(t, j, t.tolerance())) << t.name() << " j=" << j;
    }
}

TEST(Tableau, EigenvectorCriterion) {
    EXPECT_GE(eigenvector_criterion_order(builtin("wso2")), 2);
    EXPECT_EQ(eigenvector_criterion_order(builtin("be")), 1);
    // A tau^(2) = (g^3/2, (1-g) g^2/2) is not parallel to tau^(2) = (g^2/2, 0).
    EXPECT_EQ(eigenvector_criterion_order(builtin("dirk2")), 1);
}

TEST(Tableau, ResidualsOrthogonalBelowOrder) {
    for (const auto& t : builtin_tableaux()) {
        const int p = verified_order(t);
        for (int k = 1; k <= p - 1; ++k) {
            RealVector v = stage_order_residual(t, k);
            for (int j = 0; j + k <= p - 1; ++j) {
                EXPECT_LT(std::abs(t.b().dot(v)), 1e-8) << t.name() << " j=" << j << " k=" << k;
                v = t.A() * v;
            }
        }
    }
}

TEST(Tableau, StabilityFunction) {
    ButcherTableau be = builtin("be");
    EXPECT_NEAR(std::abs(stability_function(be, -1.0) - 0.5), 0.0, 1e-15);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> re(-50.0, 0.0), im(-50.0, 50.0);
    for (int i = 0; i < 100; ++i) {
        cplx z(re(rng), im(rng));
        EXPECT_LT(std::abs(stability_function(be, z) - 1.0 / (1.0 - z)), 1e-13);
    }
    for (const auto& t : builtin_tableaux()) EXPECT_NEAR(std::abs(stability_function(t, 0.0) - 1.0), 0.0, 1e-15);
    EXPECT_LT(std::abs(stability_function(builtin("dirk3"), -1e8)), 1e-6);
    EXPECT_THROW(stability_function(be, 1.0), NumericalFailure);
}

TEST(Tableau, MidpointIsNotLStable) {
    EXPECT_NEAR(std::abs(stability_function(builtin("midpoint"), -1e8)), 1.0, 1e-6);
    EXPECT_TRUE(audit(builtin("midpoint")).a_stable_sampled);
}

TEST(Tableau, AuditFlags) {
    SchemeAudit d3 = audit(builtin("dirk3"));
    EXPECT_TRUE(d3.stiffly_accurate);
    EXPECT_NEAR(d3.bTAinv_e, 1.0, 1e-12);
    EXPECT_FALSE(audit(builtin("dirk3_2s")).stiffly_accurate);
    SchemeAudit g = audit(tableaux::gauss2());
    EXPECT_EQ(g.p, 4);
    EXPECT_NEAR(g.bTAinv_e, 0.0, 1e-12);
}

TEST(Tableau, RowSumInvariant) {
    RealMatrix A(1, 1);
    A << 0.5;
    RealVector b(1), c(1);
    b << 1.0;
    c << 0.7;
    EXPECT_THROW(ButcherTableau("bad", A, b, c), InvalidInput);
    EXPECT_THROW(ButcherTableau("bad", RealMatrix::Zero(2, 3), RealVector::Zero(2)), InvalidInput);
}

TEST(Tableau, DeclaredMismatchIsReported) {
    ButcherTableau t("be-claims-2", RealMatrix::Constant(1, 1, 1.0), RealVector::Constant(1, 1.0), std::nullopt,
                     DeclaredMetadata{2, 1, 1, true});
    SchemeAudit a = audit(t);
    ASSERT_EQ(a.mismatches.size(), 1u);
    EXPECT_EQ(a.mismatches[0], "p");
}

TEST(TableauJson, RoundTripIsExact) {
    for (const auto& t : builtin_tableaux()) {
        ButcherTableau back = tableau_from_json(tableau_to_json(t));
        EXPECT_EQ(back.name(), t.name());
        EXPECT_EQ((back.A() - t.A()).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ((back.b() - t.b()).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(back.declared(), t.declared());
    }
}

TEST(TableauJson, PrintedDigitsLoadWithInferredTolerance) {
    auto j = nlohmann::json::parse(R"({
        "name": "sdirk3-printed",
        "A": [["0.4358665215", "0", "0"],
              ["0.2820667392", "0.4358665215", "0"],
              ["1.208496649", "-0.644363171", "0.4358665215"]],
        "b": ["1.208496649", "-0.644363171", "0.4358665215"],
        "c": ["0.4358665215", "0.7179332608", "1"],
        "declared": {"p": 3, "q": 1, "wso": 1, "stiffly_accurate": true}
    })");
    ButcherTableau t = tableau_from_json(j);
    EXPECT_GE(t.tolerance(), 1e-10);
    EXPECT_LE(t.tolerance(), 1e-7);
    SchemeAudit a = audit(t);
    EXPECT_EQ(a.p, 3);
    EXPECT_TRUE(a.mismatches.empty());
}

TEST(TableauJson, FlatMatrixAndErrors) {
    auto flat = nlohmann::json::parse(R"({"A": ["0.5", "0", "0.5", "0.5"], "b": ["0.5", "0.5"]})");
    EXPECT_EQ(tableau_from_json(flat).stages(), 2);
    EXPECT_THROW(tableau_from_json(nlohmann::json::parse(R"({"b": ["1"]})")), InvalidInput);
    EXPECT_THROW(tableau_from_json(nlohmann::json::parse(R"({"A": [["1"]], "b": ["1"], "c": ["0.5"]})")), InvalidInput);
    EXPECT_THROW(load_tableau_file("/nonexistent/tableau.json"), InvalidInput);
}
