#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "orlab/errors.hpp"
#include "orlab/fit.hpp"
#include "orlab/spatial.hpp"
#include "orlab/tableau.hpp"

namespace orlab {

/// Nonlinear semi-discrete right-hand side N_h and its banded Jacobian.
template <class Scalar>
struct NonlinearForm {
    std::function<GridVector<Scalar>(const GridVector<Scalar>&)> apply;
    std::function<BandMatrix<Scalar>(const GridVector<Scalar>&)> jacobian;
};

/**
 * Manufactured-solution initial-boundary-value problem u_t = L u + f (or N u + f) on (x_min, x_max).
 *
 * `exact(x, t, a, b)` returns d^a/dt^a d^b/dx^b u*. Forcing, boundary data and all
 * their derivatives needed by modified boundary conditions are derived from it.
 */
template <class Scalar>
class IBVProblem {
public:
    using Exact = std::function<Scalar(double x, double t, int dt_order, int dx_order)>;
    using NonlinearFactory = std::function<NonlinearForm<Scalar>(const Grid1D&, int accuracy)>;
    using Forcing = std::function<Scalar(double x, double t, int dt_order)>;

    std::string id;
    double t_final = 1.0;
    double x_min = 0.0;
    double x_max = 1.0;
    int order = 2;
    std::vector<Scalar> alpha;  // constant coefficients of L, alpha[k] multiplies d^k/dx^k
    BoundaryLayout boundary;
    Exact exact;
    NonlinearFactory nonlinear;      // empty for linear problems
    Forcing nonlinear_forcing;       // d^k/dt^k f for nonlinear problems
    bool outside_theory = false;     // violates the stability-wedge assumption
    std::string remark;

    bool linear() const { return !nonlinear; }
    static constexpr bool complex_valued = is_complex<Scalar>::value;

    Scalar solution(double x, double t) const { return exact(x, t, 0, 0); }

    /// d^k f/dt^k at (x, t).
    Scalar forcing(double x, double t, int k = 0) const { return forcing_dx(x, t, k, 0); }

    /// d^m/dx^m d^k/dt^k f.
    Scalar forcing_dx(double x, double t, int k, int m) const {
        if (!linear()) {
            if (m != 0) throw InvalidInput(id + ": spatial derivatives of nonlinear forcing are not available");
            return nonlinear_forcing(x, t, k);
        }
        Scalar f = exact(x, t, k + 1, m);
        for (int j = 0; j <= order; ++j)
            if (alpha[j] != Scalar(0)) f -= alpha[j] * exact(x, t, k, m + j);
        return f;
    }

    double boundary_x(const BoundaryCondition& bc) const { return bc.side == Side::Left ? x_min : x_max; }

    /// d^k/dt^k of the data of condition c: u* (Dirichlet) or u*_x (Neumann) at its endpoint.
    Scalar boundary_value(std::size_t c, double t, int k = 0) const {
        const auto& bc = boundary.at(c);
        return exact(boundary_x(bc), t, k, bc.kind == BCKind::Neumann ? 1 : 0);
    }

    /// B L^i d^k f/dt^k at the endpoint of condition c (linear problems only).
    Scalar boundary_forcing(std::size_t c, double t, int i, int k) const {
        if (!linear()) throw InvalidInput("MBC order not derivable from data: " + id + " is nonlinear");
        const auto& bc = boundary.at(c);
        const int shift = bc.kind == BCKind::Neumann ? 1 : 0;
        std::vector<Scalar> poly = operator_power(i);
        Scalar acc(0);
        for (std::size_t m = 0; m < poly.size(); ++m)
            if (poly[m] != Scalar(0)) acc += poly[m] * forcing_dx(boundary_x(bc), t, k, static_cast<int>(m) + shift);
        return acc;
    }

    /// Coefficients of L^i as a polynomial in d/dx (constant coefficients).
    std::vector<Scalar> operator_power(int i) const {
        std::vector<Scalar> p{Scalar(1)};
        for (int r = 0; r < i; ++r) {
            std::vector<Scalar> q(p.size() + order, Scalar(0));
            for (std::size_t a = 0; a < p.size(); ++a)
                for (int b = 0; b <= order; ++b) q[a + b] += p[a] * alpha[b];
            p = std::move(q);
        }
        return p;
    }

    Grid1D grid(int n) const { return Grid1D(n, x_min, x_max); }

    /// Linear part (for nonlinear problems: the linearization is supplied by `nonlinear` instead).
    DiscreteOperator<Scalar> discretize(const Grid1D& g, int accuracy) const {
        std::vector<typename DiscreteOperator<Scalar>::Coefficient> coeffs;
        for (int k = 0; k <= order; ++k) {
            Scalar a = alpha.at(k);
            coeffs.push_back([a](double) { return a; });
        }
        return DiscreteOperator<Scalar>(g, order, accuracy, std::move(coeffs));
    }

    GridVector<Scalar> sample_exact(const Grid1D& g, double t, int dx_order = 0) const {
        return g.sample([&](double x) { return exact(x, t, 0, dx_order); });
    }

    GridVector<Scalar> sample_forcing(const Grid1D& g, double t) const {
        return g.sample([&](double x) { return forcing(x, t, 0); });
    }
};

using AnyProblem = std::variant<IBVProblem<double>, IBVProblem<cplx>>;

namespace detail {

inline double pi() { return std::acos(-1.0); }

/// d^a/dy^a cos(w y + phase) = w^a cos(w y + phase + a pi/2).
inline double dcos(double w, double y, double phase, int a) {
    return std::pow(w, a) * std::cos(w * y + phase + a * pi() / 2);
}
inline double dsin(double w, double y, double phase, int a) {
    return std::pow(w, a) * std::sin(w * y + phase + a * pi() / 2);
}

inline BoundaryLayout dirichlet_both() { return {{Side::Left, BCKind::Dirichlet}, {Side::Right, BCKind::Dirichlet}}; }

}  // namespace detail

namespace problems {

inline IBVProblem<double> intro_heat() {
    IBVProblem<double> p;
    p.id = "intro-heat";
    p.t_final = 1.0;
    p.order = 2;
    p.alpha = {0.0, 0.0, 1.0};
    p.boundary = detail::dirichlet_both();
    p.exact = [](double, double t, int a, int b) { return b > 0 ? 0.0 : detail::dcos(1.0, t, 0.0, a); };
    return p;
}

inline IBVProblem<double> heat() {
    IBVProblem<double> p;
    p.id = "heat";
    p.t_final = 1.0;
    p.order = 2;
    p.alpha = {0.0, 0.0, 1.0};
    p.boundary = detail::dirichlet_both();
    p.exact = [](double x, double t, int a, int b) {
        return detail::dcos(15.0, t, 0.0, a) * detail::dsin(5.0, x, 5.0, b);
    };
    return p;
}

/// u_t = (i w / k^2) u_xx with u* = exp(i(kx - wt)), f = 0.
inline IBVProblem<cplx> schrodinger() {
    constexpr double k = 5.0;
    const double w = 2.0 * detail::pi();
    IBVProblem<cplx> p;
    p.id = "schrodinger";
    p.t_final = 1.2;
    p.order = 2;
    p.alpha = {0.0, 0.0, cplx(0.0, w / (k * k))};
    p.boundary = detail::dirichlet_both();
    p.exact = [w, k](double x, double t, int a, int b) {
        const cplx I(0.0, 1.0);
        return std::pow(-I * w, a) * std::pow(I * k, b) * std::exp(I * (k * x - w * t));
    };
    p.outside_theory = true;
    p.remark = "purely imaginary spectrum: outside the stability-wedge assumption";
    return p;
}

inline IBVProblem<double> advdiff() {
    constexpr double nu = 1e-3;
    IBVProblem<double> p;
    p.id = "advdiff";
    p.t_final = 1.2;
    p.order = 2;
    p.alpha = {0.0, -1.0, nu};
    p.boundary = detail::dirichlet_both();
    p.exact = [](double x, double t, int a, int b) {
        const double w = 2.0 * detail::pi();
        return std::pow(-1.0, a) * std::pow(w, a + b) * std::sin(w * (x - t) + (a + b) * detail::pi() / 2);
    };
    return p;
}

/// u_t = -u_x; the single Dirichlet condition sits at the inflow end x = 0.
inline IBVProblem<double> advection() {
    IBVProblem<double> p;
    p.id = "advection";
    p.t_final = 1.2;
    p.order = 1;
    p.alpha = {0.0, -1.0};
    p.boundary = {{Side::Left, BCKind::Dirichlet}};
    p.exact = advdiff().exact;
    return p;
}

inline IBVProblem<double> airy() {
    IBVProblem<double> p;
    p.id = "airy";
    p.t_final = 1.0;
    p.order = 3;
    p.alpha = {0.0, 0.0, 0.0, 1.0};
    p.boundary = {{Side::Left, BCKind::Dirichlet}, {Side::Left, BCKind::Neumann}, {Side::Right, BCKind::Neumann}};
    p.exact = [](double, double t, int a, int b) { return b > 0 ? 0.0 : detail::dcos(15.0, t, 0.0, a); };
    return p;
}

/// N_h u = nu D2 u - u * D1 u with Jacobian nu D2 - diag(u) D1 - diag(D1 u).
inline NonlinearForm<double> burgers_form(const Grid1D& g, int accuracy, double nu) {
    auto D1 = std::make_shared<DiscreteOperator<double>>(
        g, 1, accuracy, std::vector<DiscreteOperator<double>::Coefficient>{[](double) { return 0.0; }, [](double) { return 1.0; }});
    auto D2 = std::make_shared<DiscreteOperator<double>>(
        g, 2, accuracy,
        std::vector<DiscreteOperator<double>::Coefficient>{[](double) { return 0.0; }, [](double) { return 0.0; },
                                                           [nu](double) { return nu; }});
    NonlinearForm<double> form;
    form.apply = [D1, D2](const GridVector<double>& u) -> GridVector<double> {
        GridVector<double> ux = D1->apply(u);
        return D2->apply(u) - u.cwiseProduct(ux);
    };
    form.jacobian = [D1, D2](const GridVector<double>& u) {
        BandMatrix<double> J = D2->matrix();
        const auto& d1 = D1->matrix();
        GridVector<double> ux = D1->apply(u);
        const int N = J.size();
        for (int i = 0; i < N; ++i) {
            for (int j = std::max(0, i - d1.lower()); j <= std::min(N - 1, i + d1.upper()); ++j) {
                double v = d1(i, j);
                if (v != 0.0) J(i, j) -= u[i] * v;
            }
            J(i, i) -= ux[i];
        }
        return J;
    };
    return form;
}

/// u_t + u u_x = nu u_xx + f.
inline IBVProblem<double> burgers() {
    constexpr double nu = 0.1;
    IBVProblem<double> p;
    p.id = "burgers";
    p.t_final = 1.0;
    p.order = 2;
    p.alpha = {0.0, 0.0, nu};  // linear part only; the full operator is nonlinear
    p.boundary = detail::dirichlet_both();
    p.exact = [](double x, double t, int a, int b) {
        return detail::dcos(10.0, t, 2.0, a) * detail::dsin(20.0, x, 0.2, b);
    };
    p.nonlinear = [nu](const Grid1D& g, int accuracy) { return burgers_form(g, accuracy, nu); };
    auto ex = p.exact;
    p.nonlinear_forcing = [ex, nu](double x, double t, int k) {
        double f = ex(x, t, k + 1, 0) - nu * ex(x, t, k, 2);
        double binom = 1.0;
        for (int m = 0; m <= k; ++m) {
            f += binom * ex(x, t, m, 0) * ex(x, t, k - m, 1);
            binom = binom * (k - m) / (m + 1);
        }
        return f;
    };
    return p;
}

}  // namespace problems

inline std::vector<AnyProblem> problem_suite() {
    return {problems::intro_heat(), problems::heat(),      problems::schrodinger(), problems::advdiff(),
            problems::burgers(),    problems::advection(), problems::airy()};
}

inline std::vector<std::string> problem_ids() {
    std::vector<std::string> ids;
    for (auto& p : problem_suite()) ids.push_back(std::visit([](auto& q) { return q.id; }, p));
    return ids;
}

inline AnyProblem find_problem(const std::string& id) {
    for (auto& p : problem_suite())
        if (std::visit([](auto& q) { return q.id; }, p) == id) return p;
    throw InvalidInput("unknown problem: " + id);
}

inline const std::string& problem_id(const AnyProblem& p) {
    return std::visit([](auto& q) -> const std::string& { return q.id; }, p);
}

// ---------------------------------------------------------------------------
// Prothero-Robinson

/// phi(t) with all derivatives: derivative(t, k) = d^k phi / dt^k.
struct AnalyticProfile {
    std::function<cplx(double t, int k)> derivative;

    /// cos(w t + phase). With phase 0 every odd derivative vanishes at t = 0.
    static AnalyticProfile cosine(double w = 1.0, double phase = 0.0) {
        return {[w, phase](double t, int k) { return cplx(detail::dcos(w, t, phase, k), 0.0); }};
    }
};

/// y' = lambda (y - phi) + phi'; exact solution phi.
struct ProtheroRobinson {
    cplx lambda;
    AnalyticProfile phi;

    ProtheroRobinson(cplx l, AnalyticProfile p) : lambda(l), phi(std::move(p)) {
        if (!(l.real() < 0.0)) throw InvalidInput("Prothero-Robinson requires Re(lambda) < 0");
    }

    cplx y0() const { return phi.derivative(0.0, 0); }
};

/**
 * Error after one RK step from the exact value phi(0): y1 - phi(dt).
 *
 * The step is carried out on the stage errors E = Y - phi(c dt), which satisfy
 * (I - zeta A) E = -d with the stage defects d; this is the same arithmetic as the plain
 * step with phi subtracted first, and keeps the rounding floor near machine epsilon
 * instead of cond(I - zeta A) * epsilon.
 */
inline cplx pr_one_step_error(const ButcherTableau& t, const ProtheroRobinson& pr, double dt) {
    const int s = t.stages();
    const cplx zeta = pr.lambda * dt;
    const cplx phi0 = pr.y0();
    ComplexVector phic(s), dphic(s);
    for (int i = 0; i < s; ++i) {
        phic[i] = pr.phi.derivative(t.c()[i] * dt, 0);
        dphic[i] = pr.phi.derivative(t.c()[i] * dt, 1);
    }
    ComplexMatrix A = t.A().cast<cplx>();
    ComplexMatrix M = ComplexMatrix::Identity(s, s) - zeta * A;
    Eigen::FullPivLU<ComplexMatrix> lu(M);
    if (!lu.isInvertible()) throw NumericalFailure("I - zeta A is singular");
    ComplexVector d = (phic - ComplexVector::Constant(s, phi0)) - dt * A * dphic;
    ComplexVector E = lu.solve(-d);
    const cplx quad = phi0 + dt * t.b().cast<cplx>().dot(dphic) - pr.phi.derivative(dt, 0);
    return quad + zeta * t.b().cast<cplx>().dot(E);
}

/**
 * Same error from the truncation-error recursion: eps1 = -zeta b^T (I - zeta A)^{-1} delta - delta_hat,
 * with the stage and step defects summed as Taylor series of J terms.
 */
inline cplx pr_one_step_error_series(const ButcherTableau& t, const ProtheroRobinson& pr, double dt, int J = 24) {
    const int s = t.stages();
    const cplx zeta = pr.lambda * dt;
    ComplexVector delta = ComplexVector::Zero(s);
    cplx delta_hat = 0.0;
    double fact = 1.0;  // (j-1)!
    for (int j = 1; j <= J; ++j) {
        if (j > 1) fact *= (j - 1);
        cplx d = pr.phi.derivative(0.0, j) * std::pow(dt, j) / fact;
        delta -= d * stage_order_residual(t, j).cast<cplx>();
        delta_hat += d * (1.0 / j - t.b().dot(detail::cpow(t.c(), j - 1)));
    }
    ComplexMatrix M = ComplexMatrix::Identity(s, s) - zeta * t.A().cast<cplx>();
    ComplexVector w = M.fullPivLu().solve(delta);
    return -zeta * t.b().cast<cplx>().dot(w) - delta_hat;
}

/// How lambda moves with dt in a one-step error sweep.
enum class PRSweep {
    FixedZeta,    // lambda = lambda_ref dt_ref / dt: the stiff limit with constants independent of dt
    FixedLambda,
};

struct PROrderSweep {
    std::vector<double> dts;
    std::vector<cplx> lambdas;
    std::vector<double> direct;  // |error| from the step itself
    std::vector<double> series;  // |error| from the truncation-error recursion
    LogLogFit fit;               // of `direct`
    // Gap between the two paths beyond an absolute roundoff floor, relative to `direct`.
    // Both paths subtract O(1) quantities, so agreement below ~1e-15 is not meaningful.
    double max_relative_gap = 0.0;
};

inline constexpr double kPRRoundoffFloor = 1e-15;

inline PROrderSweep pr_order_sweep(const ButcherTableau& t, cplx lambda_ref, double dt_ref, PRSweep mode,
                                   const std::vector<double>& dts, const AnalyticProfile& phi) {
    PROrderSweep r;
    r.dts = dts;
    for (double dt : dts) {
        const cplx lam = mode == PRSweep::FixedZeta ? lambda_ref * dt_ref / dt : lambda_ref;
        ProtheroRobinson pr(lam, phi);
        const double a = std::abs(pr_one_step_error(t, pr, dt));
        const double b = std::abs(pr_one_step_error_series(t, pr, dt));
        r.lambdas.push_back(lam);
        r.direct.push_back(a);
        r.series.push_back(b);
        if (a > 0) r.max_relative_gap = std::max(r.max_relative_gap, std::max(0.0, std::abs(a - b) - kPRRoundoffFloor) / a);
    }
    r.fit = fit_loglog(r.dts, r.direct);
    return r;
}

}  // namespace orlab
