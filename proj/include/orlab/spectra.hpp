#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "orlab/errors.hpp"
#include "orlab/fit.hpp"
#include "orlab/spatial.hpp"
#include "orlab/stepper.hpp"
#include "orlab/tableau.hpp"

namespace orlab {

/**
 * Derivative coefficient matrix M = dt A + dt/(z-1) e b^T for the time-periodic error
 * equations, with z = exp(i omega dt).
 */
struct DCMatrix {
    cplx z;
    double omega = 0.0;
    double dt = 0.0;
    ComplexMatrix M;
    bool from_tableau = false;  // M assembled by build_dcm (enables eigenvalue polishing)

    /// Wrap an arbitrary matrix (used to exercise the fallbacks).
    static DCMatrix from_matrix(ComplexMatrix M, double omega, double dt) {
        if (M.rows() != M.cols() || M.rows() < 1) throw InvalidInput("DCMatrix: M must be square");
        return DCMatrix{std::exp(cplx(0.0, omega * dt)), omega, dt, std::move(M), false};
    }
};

inline DCMatrix build_dcm(const ButcherTableau& t, double omega, double dt) {
    const double pi = std::acos(-1.0);
    const double th = omega * dt;
    if (!(dt > 0)) throw InvalidInput("build_dcm: dt must be positive");
    if (!(std::abs(th) > 0 && std::abs(th) < pi)) throw InvalidInput("build_dcm: need 0 < |omega dt| < pi");
    DCMatrix d;
    d.omega = omega;
    d.dt = dt;
    d.z = std::polar(1.0, th);
    const int s = t.stages();
    // dt/(z-1) with z-1 = 2i sin(th/2) e^{i th/2}, avoiding cancellation for small th.
    cplx zm1 = cplx(0.0, 2.0 * std::sin(th / 2)) * std::polar(1.0, th / 2);
    d.M = dt * t.A().cast<cplx>() + (dt / zm1) * ComplexVector::Ones(s) * t.b().cast<cplx>().transpose();
    d.from_tableau = true;
    return d;
}

namespace detail {

inline cplx z_minus_one(double th) { return cplx(0.0, 2.0 * std::sin(th / 2)) * std::polar(1.0, th / 2); }

inline std::vector<cplx> eigenvalues_of(const RealMatrix& A) {
    Eigen::EigenSolver<RealMatrix> es(A, false);
    std::vector<cplx> out;
    for (int i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()(i));
    return out;
}

}  // namespace detail

namespace detail {

inline RealMatrix b_perp_block(const ButcherTableau& t) {
    const int s = t.stages();
    Eigen::HouseholderQR<RealMatrix> qr(RealMatrix(t.b()));
    RealMatrix Ob = (qr.householderQ() * RealMatrix::Identity(s, s)).rightCols(s - 1);
    RealMatrix Q = RealMatrix::Identity(s, s) - RealVector::Ones(s) * t.b().transpose();
    return Ob.transpose() * Q * t.A() * Ob;
}

/**
 * Small eigenvalues dt*mu of M are roots of det(B - mu) + (z-1) det(A - mu). A dense eigensolver
 * only resolves them to eps*|M|, far from their own size; a few Newton steps on the exact
 * characteristic identity restore full relative accuracy.
 */
inline cplx polish_small_eigenvalue(const ButcherTableau& t, const RealMatrix& B, cplx zm1, double dt, cplx lambda) {
    const int s = t.stages();
    auto g = [&](cplx mu) {
        ComplexMatrix a = t.A().cast<cplx>() - mu * ComplexMatrix::Identity(s, s);
        ComplexMatrix b = B.cast<cplx>() - mu * ComplexMatrix::Identity(s - 1, s - 1);
        return b.fullPivLu().determinant() + zm1 * a.fullPivLu().determinant();
    };
    const cplx mu0 = lambda / dt;
    cplx mu = mu0;
    for (int it = 0; it < 8; ++it) {
        const double h = 1e-6 * (1.0 + std::abs(mu));
        const cplx dg = (g(mu + h) - g(mu - h)) / (2.0 * h);
        if (dg == 0.0) break;
        const cplx step = g(mu) / dg;
        mu -= step;
        if (std::abs(step) <= 1e-16 * (1.0 + std::abs(mu))) break;
    }
    if (!(std::abs(mu - mu0) < 1e-6 * (1.0 + std::abs(mu0)))) return lambda;
    return dt * mu;
}

}  // namespace detail

/// Eigenvalues of B = O_b^T Q A O_b, Q = I - e b^T, O_b an orthonormal basis of b-perp.
inline std::vector<cplx> predicted_mu0(const ButcherTableau& t) {
    const int s = t.stages();
    if (s < 2) return {};
    return detail::eigenvalues_of(detail::b_perp_block(t));
}

enum class LocationBranch { StabilityFunction, StageEigenvalue, Both, Neither };

inline const char* to_string(LocationBranch b) {
    switch (b) {
        case LocationBranch::StabilityFunction: return "R(zeta)=z";
        case LocationBranch::StageEigenvalue: return "1/zeta in spec(A)";
        case LocationBranch::Both: return "both";
        default: return "neither";
    }
}

struct LocationCheck {
    cplx lambda;
    double r_residual = 0.0;  // |R(dt/lambda) - z|
    double a_residual = 0.0;  // dist(lambda/dt, spec A)
    LocationBranch branch = LocationBranch::Neither;
};

struct SmallEigen {
    cplx lambda;
    cplx predicted;  // dt * mu0 of the matched root
    double mismatch = 0.0;  // |lambda/dt - mu0|
};

struct SpectrumReport {
    double dt = 0.0;
    double omega = 0.0;
    cplx z;
    double threshold = 0.0;

    /// Ordered by decreasing modulus; column i of `right` and row i of `left` belong to eigenvalues(i).
    ComplexVector eigenvalues;
    ComplexMatrix right;
    ComplexMatrix left;
    double cond_T = 0.0;
    bool near_defective = false;
    double biorthogonality_error = 0.0;

    int n_big = 0;
    cplx big_eig;
    double big_gap = 0.0;  // |lambda_1 - 1/(i omega)|
    std::vector<SmallEigen> small_eigs;
    std::vector<cplx> mu0;
    std::vector<LocationCheck> location;

    double min_abs = 0.0;
    bool zero_eigenvalue = false;
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

/// Big/small split: |lambda| > sqrt(dt / max(|omega|, 1)).
inline double classification_threshold(double dt, double omega) { return std::sqrt(dt / std::max(std::abs(omega), 1.0)); }

inline SpectrumReport classify_spectrum(const DCMatrix& d, const ButcherTableau& t, double location_tol = 1e-8,
                                        double defect_cond = 1e10) {
    const int s = static_cast<int>(d.M.rows());
    if (t.stages() != s) throw InvalidInput("classify_spectrum: tableau and M sizes differ");
    SpectrumReport r;
    r.dt = d.dt;
    r.omega = d.omega;
    r.z = d.z;
    r.threshold = classification_threshold(d.dt, d.omega);

    Eigen::ComplexEigenSolver<ComplexMatrix> es(d.M, true);
    if (es.info() != Eigen::Success) throw NumericalFailure("classify_spectrum: eigenvalue solver failed");
    std::vector<int> order(s);
    for (int i = 0; i < s; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return std::abs(es.eigenvalues()(a)) > std::abs(es.eigenvalues()(b)); });
    r.eigenvalues.resize(s);
    r.right.resize(s, s);
    for (int i = 0; i < s; ++i) {
        r.eigenvalues(i) = es.eigenvalues()(order[i]);
        r.right.col(i) = es.eigenvectors().col(order[i]).normalized();
    }
    if (d.from_tableau && s >= 2) {
        const RealMatrix B = detail::b_perp_block(t);
        const cplx zm1 = detail::z_minus_one(d.omega * d.dt);
        for (int i = 1; i < s; ++i)
            r.eigenvalues(i) = detail::polish_small_eigenvalue(t, B, zm1, d.dt, r.eigenvalues(i));
    }

    Eigen::JacobiSVD<ComplexMatrix> svd(r.right);
    const auto& sv = svd.singularValues();
    r.cond_T = sv(s - 1) > 0 ? sv(0) / sv(s - 1) : std::numeric_limits<double>::infinity();
    r.near_defective = !(r.cond_T <= defect_cond);
    if (std::isfinite(r.cond_T) && r.cond_T < 1e15) {
        r.left = r.right.inverse();
        r.biorthogonality_error = (r.left * r.right - ComplexMatrix::Identity(s, s)).cwiseAbs().maxCoeff();
    } else {
        r.left = ComplexMatrix::Zero(s, s);
        r.biorthogonality_error = std::numeric_limits<double>::infinity();
    }
    if (r.near_defective) r.violations.push_back("near-defective M (cond(T) above threshold)");

    r.min_abs = r.eigenvalues.cwiseAbs().minCoeff();
    r.zero_eigenvalue = !(r.min_abs > 1e-14 * d.dt);
    if (r.zero_eigenvalue) r.violations.push_back("zero eigenvalue of M");

    for (int i = 0; i < s; ++i)
        if (std::abs(r.eigenvalues(i)) > r.threshold) ++r.n_big;
    if (r.n_big != 1) r.violations.push_back("expected exactly one big eigenvalue, found " + std::to_string(r.n_big));
    r.big_eig = r.eigenvalues(0);
    if (d.omega != 0.0) r.big_gap = std::abs(r.big_eig - 1.0 / cplx(0.0, d.omega));

    // Greedy nearest-neighbour matching of the small eigenvalues to dt * mu0.
    r.mu0 = predicted_mu0(t);
    std::vector<int> small;
    for (int i = 1; i < s; ++i) small.push_back(i);
    std::vector<bool> used_l(s, false), used_m(r.mu0.size(), false);
    r.small_eigs.assign(small.size(), {});
    for (std::size_t round = 0; round < small.size() && round < r.mu0.size(); ++round) {
        double best = std::numeric_limits<double>::infinity();
        int bi = -1, bj = -1;
        for (std::size_t a = 0; a < small.size(); ++a) {
            if (used_l[small[a]]) continue;
            for (std::size_t m = 0; m < r.mu0.size(); ++m) {
                if (used_m[m]) continue;
                double dist = std::abs(r.eigenvalues(small[a]) / d.dt - r.mu0[m]);
                if (dist < best) {
                    best = dist;
                    bi = static_cast<int>(a);
                    bj = static_cast<int>(m);
                }
            }
        }
        used_l[small[bi]] = true;
        used_m[bj] = true;
        r.small_eigs[bi] = {r.eigenvalues(small[bi]), d.dt * r.mu0[bj], best};
    }

    std::vector<cplx> eigA = detail::eigenvalues_of(t.A());
    for (int i = 0; i < s; ++i) {
        LocationCheck c;
        c.lambda = r.eigenvalues(i);
        c.r_residual = c.a_residual = std::numeric_limits<double>::infinity();
        if (std::abs(c.lambda) > 0) {
            cplx zeta = d.dt / c.lambda;
            try {
                c.r_residual = std::abs(stability_function(t, zeta) - d.z);
            } catch (const NumericalFailure&) {
            }
            for (cplx a : eigA) c.a_residual = std::min(c.a_residual, std::abs(c.lambda / d.dt - a));
        }
        bool rb = c.r_residual < location_tol, ab = c.a_residual < location_tol;
        c.branch = rb && ab ? LocationBranch::Both
                   : rb     ? LocationBranch::StabilityFunction
                   : ab     ? LocationBranch::StageEigenvalue
                            : LocationBranch::Neither;
        if (c.branch == LocationBranch::Neither)
            r.violations.push_back("eigenvalue " + std::to_string(i) + " fails the location test");
        r.location.push_back(c);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Local truncation error series and the modal error decomposition

/// Scalar coefficients multiplying U*(x) in delta, delta_0, h and psi_0.
struct LTECoefficients {
    ComplexVector delta;
    cplx delta0;
    ComplexVector h;
    cplx psi0;
    ComplexVector alpha;  // z b^T A^{-1} / (z - 1 + b^T A^{-1} e)
    int J = 0;
};

inline LTECoefficients lte_coefficients(const ButcherTableau& t, double omega, double dt, int J = -1) {
    const int s = t.stages();
    const int p = verified_order(t);
    if (J < 0) J = p + 2;
    if (J < p + 2) throw InvalidInput("lte_series: J must be at least p + 2");
    Eigen::FullPivLU<RealMatrix> lu(t.A());
    lu.setThreshold(1e-14);
    if (!lu.isInvertible()) throw InvalidInput("lte_series: A must be invertible");
    RealVector w = btainv(t);
    const double we = w.sum();
    if (std::abs(we) < 1e-10) throw InvalidInput("lte_series: assumption (e) violated, b^T A^{-1} e vanishes");

    LTECoefficients c;
    c.J = J;
    const double th = omega * dt;
    const cplx z = std::polar(1.0, th);
    const cplx zm1 = detail::z_minus_one(th);
    c.alpha = z * w.cast<cplx>() / (zm1 + we);
    c.delta = ComplexVector::Zero(s);
    c.delta0 = 0.0;
    c.h = ComplexVector::Zero(s);
    c.psi0 = 0.0;
    if (omega == 0.0) return c;

    cplx pw = 1.0;
    for (int j = 1; j <= J; ++j) {
        pw *= cplx(0.0, th);
        cplx f = pw / detail::factorial(j - 1);
        c.delta += f * stage_order_residual(t, j).cast<cplx>();
        c.delta0 += f * (t.b().dot(detail::cpow(t.c(), j - 1)) - 1.0 / j);
    }
    c.h = (c.delta + c.delta0 / zm1 * ComplexVector::Ones(s)) / z;
    c.psi0 = (-w.cast<cplx>().dot(c.delta) + c.delta0) / (zm1 + we);
    return c;
}

struct LTESeries {
    LTECoefficients coef;
    GridVector<cplx> Ustar;
    std::vector<GridVector<cplx>> delta_vec;
    GridVector<cplx> delta0;
    std::vector<GridVector<cplx>> h;
    GridVector<cplx> psi0;
};

inline LTESeries lte_series(const GridVector<cplx>& Ustar, const ButcherTableau& t, double omega, double dt,
                            int J = -1) {
    LTESeries l;
    l.coef = lte_coefficients(t, omega, dt, J);
    l.Ustar = Ustar;
    for (int i = 0; i < t.stages(); ++i) {
        l.delta_vec.push_back(l.coef.delta(i) * Ustar);
        l.h.push_back(l.coef.h(i) * Ustar);
    }
    l.delta0 = l.coef.delta0 * Ustar;
    l.psi0 = l.coef.psi0 * Ustar;
    return l;
}

/// Operator, homogeneous boundary layout and periodic amplitude U*(x) of a time-harmonic solution.
struct PeriodicSetup {
    std::string id;
    DiscreteOperator<double> op;
    BoundaryLayout layout;
    GridVector<cplx> Ustar;
};

/// L = d^2/dx^2 on [0,1], Dirichlet both ends, U*(x) = sin(k x + phase).
inline PeriodicSetup periodic_heat(int n, double k = 5.0, double phase = 5.0) {
    Grid1D g(n);
    auto op = DiscreteOperator<double>(g, 2, 4, {[](double) { return 0.0; }, [](double) { return 0.0; },
                                                 [](double) { return 1.0; }});
    GridVector<cplx> U = g.sample([&](double x) { return cplx(std::sin(k * x + phase)); });
    return {"periodic-heat", std::move(op),
            {{Side::Left, BCKind::Dirichlet}, {Side::Right, BCKind::Dirichlet}}, std::move(U)};
}

struct ModalDecomposition {
    SpectrumReport spectrum;
    LTESeries lte;
    std::vector<cplx> amplitudes;         // H_i = l_i^T h coefficients
    std::vector<cplx> weights;            // alpha^T r_i
    std::vector<GridVector<cplx>> modes;  // psi_i, same order as the spectrum
    GridVector<cplx> eps0;
    int J = 0;
};

namespace detail {

inline std::vector<cplx> homogeneous(const BoundaryLayout& layout) { return std::vector<cplx>(layout.size(), 0.0); }

}  // namespace detail

template <class S>
ModalDecomposition solve_modes(const DCMatrix& d, const SpectrumReport& spec, const LTESeries& lte,
                               const DiscreteOperator<S>& op, const BoundaryLayout& layout) {
    if (spec.near_defective) throw NumericalFailure("solve_modes: M is near-defective, use solve_coupled");
    const int s = static_cast<int>(d.M.rows());
    ModalDecomposition m;
    m.spectrum = spec;
    m.lte = lte;
    m.J = lte.coef.J;
    m.eps0 = lte.psi0;
    for (int i = 0; i < s; ++i) {
        const cplx H = (spec.left.row(i) * lte.coef.h)(0);
        const cplx wgt = (lte.coef.alpha.transpose() * spec.right.col(i))(0);
        GridVector<cplx> rhs = H * lte.Ustar;
        ShiftedSolver<cplx> solver(op, spec.eigenvalues(i), layout);
        GridVector<cplx> psi = solver.solve(rhs, detail::homogeneous(layout));
        m.eps0 += wgt * psi;
        m.amplitudes.push_back(H);
        m.weights.push_back(wgt);
        m.modes.push_back(std::move(psi));
    }
    return m;
}

struct CoupledSolution {
    std::vector<GridVector<cplx>> stages;
    GridVector<cplx> eps0;
};

/// Block-banded solve of (I - M L_h) eps = h with homogeneous boundary rows; unknowns interleaved node-major.
template <class S>
CoupledSolution solve_coupled(const DCMatrix& d, const LTESeries& lte, const DiscreteOperator<S>& op,
                              const BoundaryLayout& layout) {
    const int s = static_cast<int>(d.M.rows());
    const int N = op.grid().nodes();
    const auto& L = op.matrix();
    const int kl = L.lower() * s + s - 1, ku = L.upper() * s + s - 1;
    BandMatrix<cplx> K(N * s, kl, ku);
    std::vector<bool> bmask = boundary_row_mask(layout, N);
    for (int k = 0; k < N; ++k) {
        if (bmask[k]) continue;
        for (int i = 0; i < s; ++i) {
            const int row = k * s + i;
            K(row, row) += 1.0;
            for (int mcol = std::max(0, k - L.lower()); mcol <= std::min(N - 1, k + L.upper()); ++mcol) {
                S l = L(k, mcol);
                if (l == S(0)) continue;
                for (int j = 0; j < s; ++j)
                    if (d.M(i, j) != 0.0) K(row, mcol * s + j) -= d.M(i, j) * cplx(l);
            }
        }
    }
    for (std::size_t c = 0; c < layout.size(); ++c) {
        const int brow = boundary_row(layout, c, N);
        Stencil st = boundary_stencil(layout[c], op.accuracy(), N, op.grid().h());
        for (int i = 0; i < s; ++i)
            for (std::size_t p = 0; p < st.weights.size(); ++p) {
                int row = brow * s + i, col = (st.first + static_cast<int>(p)) * s + i;
                if (!K.in_band(row, col)) throw InvalidInput("solve_coupled: boundary row outside the band");
                K(row, col) = st.weights[p];
            }
    }
    GridVector<cplx> rhs(N * s);
    for (int k = 0; k < N; ++k)
        for (int i = 0; i < s; ++i) rhs[k * s + i] = bmask[k] ? cplx(0) : lte.h[i][k];
    BandLU<cplx> lu(std::move(K));
    lu.solve_in_place(rhs);

    CoupledSolution out;
    out.eps0 = lte.psi0;
    for (int i = 0; i < s; ++i) {
        GridVector<cplx> e(N);
        for (int k = 0; k < N; ++k) e[k] = rhs[k * s + i];
        out.eps0 += lte.coef.alpha(i) * e;
        out.stages.push_back(std::move(e));
    }
    return out;
}

/// Build M, classify, expand the truncation error and solve: modal path when diagonalizable, else coupled.
template <class S>
ModalDecomposition analyze_periodic(const ButcherTableau& t, const DiscreteOperator<S>& op,
                                    const BoundaryLayout& layout, const GridVector<cplx>& Ustar, double omega,
                                    double dt, int J = -1) {
    DCMatrix d = build_dcm(t, omega, dt);
    SpectrumReport spec = classify_spectrum(d, t);
    LTESeries lte = lte_series(Ustar, t, omega, dt, J);
    if (!spec.near_defective) return solve_modes(d, spec, lte, op, layout);
    ModalDecomposition m;
    m.spectrum = spec;
    m.lte = lte;
    m.J = lte.coef.J;
    m.eps0 = solve_coupled(d, lte, op, layout).eps0;
    return m;
}

// ---------------------------------------------------------------------------
// Composite singular-perturbation expansions (second-order operators)

/// U* made of smooth pieces: pieces[k] is a smooth extension sampled on the whole grid, used between breaks.
struct PiecewiseProfile {
    std::vector<GridVector<cplx>> pieces;
    std::vector<double> breaks;
};

struct CompositeMode {
    int index = 0;  // position in the spectrum ordering
    cplx lambda;
    cplx H;
    std::vector<GridVector<cplx>> outer_terms;  // H lambda^k L_h^k U*, k = 0..m
    GridVector<cplx> outer;
    cplx amp_left, amp_right;
    GridVector<cplx> layer_left, layer_right;
    GridVector<cplx> layer_internal;  // zero without a break
    cplx jump = 0.0, jump_derivative = 0.0;
    GridVector<cplx> composite;
};

struct CompositeExpansion {
    int m = 0;
    double dt = 0.0;
    std::optional<double> break_point;
    std::vector<CompositeMode> modes;  // small eigenvalues only
};

namespace detail {

template <class S>
GridVector<cplx> outer_series(const DiscreteOperator<S>& op, const GridVector<cplx>& U, cplx H, cplx lambda, int m,
                              std::vector<GridVector<cplx>>* terms) {
    GridVector<cplx> term = H * U;
    GridVector<cplx> sum = term;
    if (terms) terms->push_back(term);
    for (int k = 1; k <= m; ++k) {
        term = lambda * op.template apply<cplx>(term);
        sum += term;
        if (terms) terms->push_back(term);
    }
    return sum;
}

}  // namespace detail

template <class S>
CompositeExpansion composite_expansion(const ModalDecomposition& dec, const DiscreteOperator<S>& op,
                                       const GridVector<cplx>& Ustar, int m,
                                       const std::optional<PiecewiseProfile>& piecewise = std::nullopt) {
    if (op.order() != 2) throw InvalidInput("composite_expansion: closed form needs a second-order operator");
    if (m < 0) throw InvalidInput("composite_expansion: m must be non-negative");
    const Grid1D& g = op.grid();
    const int N = g.nodes();
    std::vector<double> a2(N);
    for (int i = 0; i < N; ++i) {
        cplx a = cplx(op.coefficient(2, g.x(i)));
        if (a.imag() != 0.0 || !(a.real() > 0)) throw InvalidInput("composite_expansion: alpha_2 must be positive");
        a2[i] = a.real();
    }
    int ib = -1;
    if (piecewise) {
        if (piecewise->breaks.size() != 1 || piecewise->pieces.size() != 2)
            throw InvalidInput("composite_expansion: exactly one break point is supported");
        const double xb = piecewise->breaks[0];
        for (int i = 1; i < N - 1; ++i)
            if (std::abs(g.x(i) - xb) < 1e-12 * (1 + std::abs(xb))) ib = i;
        if (ib < 0) throw InvalidInput("composite_expansion: break point must be a grid node");
    }

    CompositeExpansion ce;
    ce.m = m;
    ce.dt = dec.spectrum.dt;
    if (piecewise) ce.break_point = piecewise->breaks[0];
    const int s = static_cast<int>(dec.spectrum.eigenvalues.size());
    if (dec.amplitudes.size() != static_cast<std::size_t>(s))
        throw InvalidInput("composite_expansion: decomposition has no modal amplitudes");
    for (int i = 1; i < s; ++i) {
        CompositeMode cm;
        cm.index = i;
        cm.lambda = dec.spectrum.eigenvalues(i);
        cm.H = dec.amplitudes[i];
        auto width = [&](int node) { return std::sqrt(cm.lambda * a2[node]); };
        if (!piecewise) {
            cm.outer = detail::outer_series(op, Ustar, cm.H, cm.lambda, m, &cm.outer_terms);
            cm.layer_internal = GridVector<cplx>::Zero(N);
        } else {
            std::vector<GridVector<cplx>> tl, tr;
            GridVector<cplx> left = detail::outer_series(op, piecewise->pieces[0], cm.H, cm.lambda, m, &tl);
            GridVector<cplx> right = detail::outer_series(op, piecewise->pieces[1], cm.H, cm.lambda, m, &tr);
            GridVector<cplx> dl = apply_derivative(g, left, 1, op.accuracy());
            GridVector<cplx> dr = apply_derivative(g, right, 1, op.accuracy());
            cm.outer.resize(N);
            for (int k = 0; k < N; ++k) cm.outer[k] = k < ib ? left[k] : k > ib ? right[k] : 0.5 * (left[k] + right[k]);
            for (int j = 0; j <= m; ++j) {
                GridVector<cplx> t(N);
                for (int k = 0; k < N; ++k) t[k] = k < ib ? tl[j][k] : k > ib ? tr[j][k] : 0.5 * (tl[j][k] + tr[j][k]);
                cm.outer_terms.push_back(std::move(t));
            }
            cm.jump = right[ib] - left[ib];
            cm.jump_derivative = dr[ib] - dl[ib];
            const cplx w = width(ib);
            cm.layer_internal.resize(N);
            for (int k = 0; k < N; ++k) {
                const double zx = g.x(k) - g.x(ib);
                const double sg = zx > 0 ? 1.0 : zx < 0 ? -1.0 : 0.0;
                cm.layer_internal[k] = (-sg * cm.jump / 2.0 + w / 2.0 * cm.jump_derivative) * std::exp(-std::abs(zx) / w);
            }
        }
        cm.amp_left = -cm.outer[0];
        cm.amp_right = -cm.outer[N - 1];
        const cplx wl = width(0), wr = width(N - 1);
        cm.layer_left.resize(N);
        cm.layer_right.resize(N);
        for (int k = 0; k < N; ++k) {
            cm.layer_left[k] = cm.amp_left * std::exp(-(g.x(k) - g.x_min()) / wl);
            cm.layer_right[k] = cm.amp_right * std::exp(-(g.x_max() - g.x(k)) / wr);
        }
        cm.composite = cm.outer + cm.layer_left + cm.layer_right + cm.layer_internal;
        ce.modes.push_back(std::move(cm));
    }
    return ce;
}

/// alpha^T r_1 psi_1 + psi_0 + sum_{i>=2} alpha^T r_i Phi^m_i: the part of the error that stays smooth.
inline GridVector<cplx> bracket1(const ModalDecomposition& dec, const CompositeExpansion& ce) {
    if (dec.modes.empty()) throw InvalidInput("bracket1: decomposition has no modes");
    GridVector<cplx> b = dec.weights[0] * dec.modes[0] + dec.lte.psi0;
    for (const auto& cm : ce.modes) b += dec.weights[cm.index] * cm.outer;
    return b;
}

struct Bracket1Check {
    std::vector<double> dt;
    std::vector<double> norm;  // max norm of Bracket 1
    bool identically_zero = false;
    double order = std::numeric_limits<double>::quiet_NaN();
    double residual = 0.0;
};

inline Bracket1Check bracket1_check(const ButcherTableau& t, const PeriodicSetup& setup, double omega,
                                    const std::vector<double>& dts, int m = 2) {
    Bracket1Check r;
    r.dt = dts;
    if (omega == 0.0) {
        r.norm.assign(dts.size(), 0.0);
        r.identically_zero = true;
        return r;
    }
    for (double dt : dts) {
        ModalDecomposition dec = analyze_periodic(t, setup.op, setup.layout, setup.Ustar, omega, dt);
        CompositeExpansion ce = composite_expansion(dec, setup.op, setup.Ustar, m);
        r.norm.push_back(bracket1(dec, ce).cwiseAbs().maxCoeff());
    }
    if (dts.size() >= 2) {
        LogLogFit f = fit_loglog(r.dt, r.norm);
        r.order = f.slope;
        r.residual = f.residual;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Boundary layer width

struct LayerDetectOptions {
    double noise_floor = 1e-13;
    double relative_floor = 1e-2;  // of max |err|
    double max_width = 0.25;       // in units of the domain length
    int plateau_degree = 4;
    double plateau_lo = 0.25;  // plateau fit window, fractions of the domain
    double plateau_hi = 0.75;
};

struct LayerEstimate {
    bool found = false;
    double width = 0.0;      // distance from the boundary
    double amplitude = 0.0;  // peak |err - plateau| next to the boundary
    std::string reason;
};

/**
 * Width of a boundary layer: distance from the boundary at which |err - plateau| falls below 1/e of
 * its peak. The plateau is a low-degree polynomial fitted to the middle of the domain and
 * extrapolated, so smooth interior variation is not mistaken for a layer.
 */
template <class T>
LayerEstimate detect_layer_width(const Grid1D& g, const GridVector<T>& err, Side side, LayerDetectOptions o = {}) {
    const int N = g.nodes();
    if (err.size() != N) throw InvalidInput("detect_layer_width: size mismatch");
    const double L = g.x_max() - g.x_min();
    const double mid = 0.5 * (g.x_min() + g.x_max());
    std::vector<int> fit_nodes;
    for (int i = 0; i < N; ++i) {
        double f = (g.x(i) - g.x_min()) / L;
        if (f >= o.plateau_lo && f <= o.plateau_hi) fit_nodes.push_back(i);
    }
    const int deg = std::min<int>(o.plateau_degree, static_cast<int>(fit_nodes.size()) - 1);
    ComplexMatrix V(fit_nodes.size(), deg + 1);
    ComplexVector y(fit_nodes.size());
    for (std::size_t r = 0; r < fit_nodes.size(); ++r) {
        double u = (g.x(fit_nodes[r]) - mid) / (0.5 * L);
        for (int k = 0; k <= deg; ++k) V(r, k) = std::pow(u, k);
        y(r) = cplx(err[fit_nodes[r]]);
    }
    ComplexVector coef = V.colPivHouseholderQr().solve(y);
    auto deviation = [&](int i) {
        double u = (g.x(i) - mid) / (0.5 * L);
        cplx p = 0.0;
        for (int k = deg; k >= 0; --k) p = p * u + coef(k);
        return std::abs(cplx(err[i]) - p);
    };

    LayerEstimate e;
    double emax = 0.0;
    for (int i = 0; i < N; ++i) emax = std::max(emax, std::abs(cplx(err[i])));
    const int start = side == Side::Left ? 0 : N - 1;
    const int step = side == Side::Left ? 1 : -1;
    // Several modes of different widths can cancel at the boundary node itself, so the
    // amplitude is the peak deviation inside the boundary region.
    std::vector<double> dev;
    for (int k = 0; k < N; ++k) {
        const int i = start + step * k;
        if (std::abs(g.x(i) - g.x(start)) > o.max_width * L) break;
        dev.push_back(deviation(i));
    }
    const auto peak = std::max_element(dev.begin(), dev.end());
    e.amplitude = *peak;
    if (!(e.amplitude > std::max(o.noise_floor, o.relative_floor * emax))) {
        e.reason = "deviation below noise floor";
        return e;
    }
    const double target = e.amplitude / std::exp(1.0);
    for (std::size_t k = static_cast<std::size_t>(peak - dev.begin()) + 1; k < dev.size(); ++k) {
        if (dev[k] < target) {
            const double frac = (dev[k - 1] - target) / (dev[k - 1] - dev[k]);
            const int i0 = start + step * static_cast<int>(k - 1), i1 = start + step * static_cast<int>(k);
            e.width = std::abs(g.x(i0) - g.x(start)) + frac * std::abs(g.x(i1) - g.x(i0));
            e.found = true;
            return e;
        }
    }
    e.reason = "no decay within the maximal width";
    return e;
}

// ---------------------------------------------------------------------------
// Multistep comparison

struct LMMSpectrum {
    int steps = 0;
    ComplexVector eigenvalues;
    int n_zero = 0;
    int n_big = 0;
    cplx big;
};

/// M = dt/(z-1) A B + dt B for BDF-k with its companion matrices.
inline LMMSpectrum lmm_spectrum(int k, double omega, double dt) {
    BDFCoefficients bc = bdf_coefficients(k);
    const double th = omega * dt;
    const double pi = std::acos(-1.0);
    if (!(std::abs(th) > 0 && std::abs(th) < pi)) throw InvalidInput("lmm_spectrum: need 0 < |omega dt| < pi");
    ComplexMatrix A = ComplexMatrix::Zero(k, k), B = ComplexMatrix::Zero(k, k);
    for (int j = 0; j < k; ++j) A(0, j) = bc.a[j];
    for (int j = 1; j < k; ++j) A(j, j - 1) = 1.0;
    // BDF has beta_j = 0 below the top level, so B carries beta_s in the first slot only.
    B(0, 0) = bc.beta;
    ComplexMatrix M = dt / detail::z_minus_one(th) * A * B + dt * B;
    Eigen::ComplexEigenSolver<ComplexMatrix> es(M, false);
    LMMSpectrum r;
    r.steps = k;
    r.eigenvalues = es.eigenvalues();
    double best = -1;
    const double thr = classification_threshold(dt, omega);
    for (int i = 0; i < k; ++i) {
        double a = std::abs(r.eigenvalues(i));
        if (a < 1e-12) ++r.n_zero;
        if (a > thr) ++r.n_big;
        if (a > best) {
            best = a;
            r.big = r.eigenvalues(i);
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Dumps

inline nlohmann::json spectrum_to_json(const SpectrumReport& r) {
    auto cj = [](cplx v) { return nlohmann::json::array({v.real(), v.imag()}); };
    nlohmann::json j;
    j["dt"] = r.dt;
    j["omega"] = r.omega;
    j["threshold"] = r.threshold;
    j["eigenvalues"] = nlohmann::json::array();
    for (int i = 0; i < r.eigenvalues.size(); ++i) j["eigenvalues"].push_back(cj(r.eigenvalues(i)));
    j["cond_T"] = std::isfinite(r.cond_T) ? nlohmann::json(r.cond_T) : nlohmann::json(nullptr);
    j["near_defective"] = r.near_defective;
    j["n_big"] = r.n_big;
    j["big_eig"] = cj(r.big_eig);
    j["big_gap"] = r.big_gap;
    j["mu0"] = nlohmann::json::array();
    for (cplx m : r.mu0) j["mu0"].push_back(cj(m));
    j["small_eigs"] = nlohmann::json::array();
    for (const auto& s : r.small_eigs)
        j["small_eigs"].push_back({{"lambda", cj(s.lambda)}, {"predicted", cj(s.predicted)}, {"mismatch", s.mismatch}});
    j["location"] = nlohmann::json::array();
    for (const auto& c : r.location)
        j["location"].push_back({{"lambda", cj(c.lambda)},
                                 {"r_residual", std::isfinite(c.r_residual) ? nlohmann::json(c.r_residual) : nullptr},
                                 {"a_residual", std::isfinite(c.a_residual) ? nlohmann::json(c.a_residual) : nullptr},
                                 {"branch", to_string(c.branch)}});
    j["min_abs"] = r.min_abs;
    j["zero_eigenvalue"] = r.zero_eigenvalue;
    j["violations"] = r.violations;
    return j;
}

/// Columns x, then Re/Im of psi_0, each psi_i and eps_0.
inline void write_modes_csv(std::ostream& os, const Grid1D& g, const ModalDecomposition& d) {
    os << "x,re_psi0,im_psi0";
    for (std::size_t i = 0; i < d.modes.size(); ++i) os << ",re_psi" << i + 1 << ",im_psi" << i + 1;
    os << ",re_eps0,im_eps0\n";
    os.precision(17);
    for (int k = 0; k < g.nodes(); ++k) {
        os << g.x(k) << ',' << d.lte.psi0[k].real() << ',' << d.lte.psi0[k].imag();
        for (const auto& m : d.modes) os << ',' << m[k].real() << ',' << m[k].imag();
        os << ',' << d.eps0[k].real() << ',' << d.eps0[k].imag() << '\n';
    }
}

}  // namespace orlab
