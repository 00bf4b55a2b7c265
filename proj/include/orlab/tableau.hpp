#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "orlab/errors.hpp"

namespace orlab {

using cplx = std::complex<double>;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Order data as published alongside a scheme.
struct DeclaredMetadata {
    int p = 0;
    int q = 0;
    int wso = 0;
    bool stiffly_accurate = false;

    bool operator==(const DeclaredMetadata&) const = default;
};

/**
 * Runge-Kutta coefficients (A, b, c).
 *
 * Immutable after construction. `tolerance` is the precision of the coefficients
 * themselves; it bounds every residual test in the audits.
 */
class ButcherTableau {
public:
    ButcherTableau(std::string name, RealMatrix A, RealVector b,
                   std::optional<RealVector> c = std::nullopt,
                   std::optional<DeclaredMetadata> declared = std::nullopt,
                   double tolerance = 1e-12)
        : name_(std::move(name)), A_(std::move(A)), b_(std::move(b)),
          declared_(declared), tol_(tolerance) {
        if (A_.rows() < 1 || A_.rows() != A_.cols())
            throw InvalidInput("tableau " + name_ + ": A must be square with s >= 1");
        if (b_.size() != A_.rows())
            throw InvalidInput("tableau " + name_ + ": b must have length s");
        if (!(tol_ > 0.0))
            throw InvalidInput("tableau " + name_ + ": tolerance must be positive");
        if (!A_.allFinite() || !b_.allFinite())
            throw InvalidInput("tableau " + name_ + ": non-finite coefficient");
        RealVector rows = A_.rowwise().sum();
        if (c) {
            if (c->size() != A_.rows())
                throw InvalidInput("tableau " + name_ + ": c must have length s");
            double mismatch = (*c - rows).cwiseAbs().maxCoeff();
            if (!(mismatch <= tol_))
                throw InvalidInput("tableau " + name_ +
                                   ": invariant violated, c must equal the row sums of A (max mismatch " +
                                   detail::sci(mismatch) + ")");
            c_ = *c;
        } else {
            c_ = rows;
        }
    }

    const std::string& name() const noexcept { return name_; }
    int stages() const noexcept { return static_cast<int>(A_.rows()); }
    const RealMatrix& A() const noexcept { return A_; }
    const RealVector& b() const noexcept { return b_; }
    const RealVector& c() const noexcept { return c_; }
    const std::optional<DeclaredMetadata>& declared() const noexcept { return declared_; }
    double tolerance() const noexcept { return tol_; }

    bool lower_triangular() const {
        for (int i = 0; i < stages(); ++i)
            for (int j = i + 1; j < stages(); ++j)
                if (A_(i, j) != 0.0) return false;
        return true;
    }

    /// Lower triangular with a strictly positive diagonal.
    bool is_dirk() const {
        if (!lower_triangular()) return false;
        for (int i = 0; i < stages(); ++i)
            if (!(A_(i, i) > 0.0)) return false;
        return true;
    }

    bool stiffly_accurate() const {
        return (A_.row(stages() - 1).transpose() - b_).cwiseAbs().maxCoeff() <= tol_;
    }

private:
    std::string name_;
    RealMatrix A_;
    RealVector b_;
    RealVector c_;
    std::optional<DeclaredMetadata> declared_;
    double tol_;
};

namespace detail {

inline RealVector cpow(const RealVector& v, int k) {
    RealVector r = RealVector::Ones(v.size());
    for (int i = 0; i < k; ++i) r = r.cwiseProduct(v);
    return r;
}

inline double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return s;
}

}  // namespace detail

/// r(j,k) = b^T A^j c^k - k!/(j+k+1)! for all j+k <= p_max-1.
inline std::map<std::pair<int, int>, double> order_condition_residuals(const ButcherTableau& t,
                                                                       int p_max) {
    if (p_max < 1 || p_max > 8) throw InvalidInput("order_condition_residuals: p_max must be in 1..8");
    std::map<std::pair<int, int>, double> out;
    for (int k = 0; k < p_max; ++k) {
        RealVector v = detail::cpow(t.c(), k);
        for (int j = 0; j + k < p_max; ++j) {
            double target = detail::factorial(k) / detail::factorial(j + k + 1);
            out[{j, k}] = t.b().dot(v) - target;
            v = t.A() * v;
        }
    }
    return out;
}

/// Largest p <= p_max with every residual of total degree j+k <= p-1 below tol.
inline int verified_order(const ButcherTableau& t, double tol, int p_max = 8) {
    auto r = order_condition_residuals(t, p_max);
    int p = 0;
    for (int deg = 0; deg < p_max; ++deg) {
        for (int j = 0; j <= deg; ++j)
            if (!(std::abs(r.at({j, deg - j})) < tol)) return p;
        p = deg + 1;
    }
    return p;
}

inline int verified_order(const ButcherTableau& t) { return verified_order(t, t.tolerance()); }

/// tau^(j) = A c^{j-1} - c^j / j.
inline RealVector stage_order_residual(const ButcherTableau& t, int j) {
    if (j < 1) throw InvalidInput("stage_order_residual: j must be >= 1");
    return t.A() * detail::cpow(t.c(), j - 1) - detail::cpow(t.c(), j) / static_cast<double>(j);
}

struct StageResiduals {
    std::vector<RealVector> tau;  // tau[j-1] holds tau^(j)
};

inline StageResiduals stage_order_residuals(const ButcherTableau& t, int J) {
    StageResiduals r;
    for (int j = 1; j <= J; ++j) r.tau.push_back(stage_order_residual(t, j));
    return r;
}

inline int stage_order(const ButcherTableau& t, double tol) {
    if (!(tol > 0)) throw InvalidInput("stage_order: tol must be positive");
    constexpr int jmax = 8;
    int quad = 0;
    for (int j = 1; j <= jmax; ++j) {
        if (!(std::abs(t.b().dot(detail::cpow(t.c(), j - 1)) - 1.0 / j) < tol)) break;
        quad = j;
    }
    int resid = 0;
    for (int j = 1; j <= jmax; ++j) {
        if (!(stage_order_residual(t, j).cwiseAbs().maxCoeff() < tol)) break;
        resid = j;
    }
    return std::min(quad, resid);
}

inline int stage_order(const ButcherTableau& t) { return stage_order(t, t.tolerance()); }

namespace detail {

/// b orthogonal to A^m tau^(j) for m = 0..s-1 (columns of the controllability matrix).
inline bool wso_level_holds(const ButcherTableau& t, int j, double tol) {
    RealVector v = stage_order_residual(t, j);
    if (v.cwiseAbs().maxCoeff() == 0.0) return true;
    for (int m = 0; m < t.stages(); ++m) {
        double scale = std::max(v.norm(), 1.0);
        if (!(std::abs(t.b().dot(v)) < tol * scale)) return false;
        v = t.A() * v;
    }
    return true;
}

}  // namespace detail

/// Largest q~ <= p such that b is orthogonal to A^m tau^(j) for all m < s, j <= q~.
inline int weak_stage_order(const ButcherTableau& t, double tol) {
    if (!(tol > 0)) throw InvalidInput("weak_stage_order: tol must be positive");
    int p = std::max(verified_order(t, tol), 1);
    int q = 0;
    for (int j = 1; j <= p; ++j) {
        if (!detail::wso_level_holds(t, j, tol)) break;
        q = j;
    }
    return q;
}

inline int weak_stage_order(const ButcherTableau& t) { return weak_stage_order(t, t.tolerance()); }

/// Largest q_e <= p such that each tau^(j), j <= q_e, is zero or an eigenvector of A orthogonal to b.
inline int eigenvector_criterion_order(const ButcherTableau& t, double tol) {
    int p = std::max(verified_order(t, tol), 1);
    int q = 0;
    for (int j = 1; j <= p; ++j) {
        RealVector tau = stage_order_residual(t, j);
        double n = tau.norm();
        if (n >= tol) {
            RealVector At = t.A() * tau;
            double rayleigh = tau.dot(At) / tau.squaredNorm();
            bool parallel = (At - rayleigh * tau).norm() < tol * std::max(At.norm(), 1.0);
            bool orthogonal = std::abs(t.b().dot(tau)) < tol * std::max(n, 1.0);
            if (!(parallel && orthogonal)) break;
        }
        q = j;
    }
    return q;
}

inline int eigenvector_criterion_order(const ButcherTableau& t) {
    return eigenvector_criterion_order(t, t.tolerance());
}

/// R(zeta) = 1 + zeta b^T (I - zeta A)^{-1} e.
inline cplx stability_function(const ButcherTableau& t, cplx zeta) {
    const int s = t.stages();
    ComplexMatrix M = ComplexMatrix::Identity(s, s) - zeta * t.A().cast<cplx>();
    Eigen::FullPivLU<ComplexMatrix> lu(M);
    lu.setThreshold(1e-14);
    if (!lu.isInvertible()) throw NumericalFailure("pole of stability function");
    ComplexVector x = lu.solve(ComplexVector::Ones(s));
    return 1.0 + zeta * t.b().cast<cplx>().dot(x);
}

struct SchemeAudit {
    int p = 0;
    int q = 0;
    int q_tilde = 0;
    int q_eig = 0;
    bool stiffly_accurate = false;
    double bTAinv_e = std::numeric_limits<double>::quiet_NaN();
    bool a_invertible = false;
    double l_stable_estimate = 0.0;
    bool a_stable_sampled = false;
    bool eig_A_nonneg_real = false;

    /// Names of declared fields that disagree with the verified ones.
    std::vector<std::string> mismatches;
};

/// Sampled A-stability: |R| <= 1 + 1e-10 on a log-polar grid of the closed left half plane.
inline bool a_stable_sampled(const ButcherTableau& t) {
    constexpr int nr = 121;
    constexpr int nth = 121;
    const double pi = std::acos(-1.0);
    for (int ir = 0; ir < nr; ++ir) {
        double r = std::pow(10.0, -4.0 + 10.0 * ir / (nr - 1));
        for (int it = 0; it < nth; ++it) {
            double th = pi / 2 + pi * it / (nth - 1);
            cplx z = std::polar(r, th);
            try {
                if (std::abs(stability_function(t, z)) > 1.0 + 1e-10) return false;
            } catch (const NumericalFailure&) {
                return false;
            }
        }
    }
    return true;
}

inline SchemeAudit audit(const ButcherTableau& t) {
    SchemeAudit a;
    const double tol = t.tolerance();
    a.p = verified_order(t, tol);
    a.q = stage_order(t, tol);
    a.q_tilde = weak_stage_order(t, tol);
    a.q_eig = eigenvector_criterion_order(t, tol);
    a.stiffly_accurate = t.stiffly_accurate();

    Eigen::FullPivLU<RealMatrix> lu(t.A());
    lu.setThreshold(1e-14);
    a.a_invertible = lu.isInvertible();
    if (a.a_invertible) {
        RealVector w = t.A().transpose().fullPivLu().solve(t.b());
        a.bTAinv_e = w.sum();
    }
    try {
        a.l_stable_estimate = std::abs(stability_function(t, cplx(-1e8, 0.0)));
    } catch (const NumericalFailure&) {
        a.l_stable_estimate = std::numeric_limits<double>::infinity();
    }
    a.a_stable_sampled = a_stable_sampled(t);

    Eigen::EigenSolver<RealMatrix> es(t.A(), false);
    a.eig_A_nonneg_real = (es.eigenvalues().real().array() >= -tol).all();

    if (const auto& d = t.declared()) {
        if (d->p != a.p) a.mismatches.push_back("p");
        if (d->q != a.q) a.mismatches.push_back("q");
        if (d->wso != a.q_tilde) a.mismatches.push_back("wso");
        if (d->stiffly_accurate != a.stiffly_accurate) a.mismatches.push_back("stiffly_accurate");
    }
    return a;
}

// ---------------------------------------------------------------------------
// Built-in schemes

namespace tableaux {

inline ButcherTableau backward_euler() {
    return {"BE", RealMatrix::Constant(1, 1, 1.0), RealVector::Constant(1, 1.0), std::nullopt,
            DeclaredMetadata{1, 1, 1, true}};
}

inline ButcherTableau dirk2() {
    const double g = 1.0 - std::sqrt(2.0) / 2.0;
    RealMatrix A(2, 2);
    A << g, 0.0, 1.0 - g, g;
    RealVector b(2);
    b << 1.0 - g, g;
    return {"DIRK2", A, b, std::nullopt, DeclaredMetadata{2, 1, 1, true}};
}

inline ButcherTableau dirk3_2s() {
    const double g = (3.0 + std::sqrt(3.0)) / 6.0;
    RealMatrix A(2, 2);
    A << g, 0.0, 1.0 - 2.0 * g, g;
    RealVector b(2);
    b << 0.5, 0.5;
    return {"DIRK3_2s", A, b, std::nullopt, DeclaredMetadata{3, 1, 1, false}};
}

/// Root of g^3 - 3g^2 + 3g/2 - 1/6 in (1/6, 1/2); the L-stable 3-stage SDIRK diagonal.
inline double dirk3_gamma() {
    double g = 0.4358665215;
    for (int it = 0; it < 8; ++it) {
        double f = ((g - 3.0) * g + 1.5) * g - 1.0 / 6.0;
        double df = (3.0 * g - 6.0) * g + 1.5;
        g -= f / df;
    }
    return g;
}

inline ButcherTableau dirk3() {
    const double g = dirk3_gamma();
    const double b1 = -(6.0 * g * g - 16.0 * g + 1.0) / 4.0;
    const double b2 = (6.0 * g * g - 20.0 * g + 5.0) / 4.0;
    RealMatrix A = RealMatrix::Zero(3, 3);
    A(0, 0) = g;
    A(1, 0) = (1.0 - g) / 2.0;
    A(1, 1) = g;
    A(2, 0) = b1;
    A(2, 1) = b2;
    A(2, 2) = g;
    RealVector b(3);
    b << b1, b2, g;
    return {"DIRK3", A, b, std::nullopt, DeclaredMetadata{3, 1, 1, true}};
}

inline ButcherTableau dirk4() {
    RealMatrix A = RealMatrix::Zero(5, 5);
    A(0, 0) = 1.0 / 4;
    A(1, 0) = 1.0 / 2;
    A(1, 1) = 1.0 / 4;
    A(2, 0) = 17.0 / 50;
    A(2, 1) = -1.0 / 25;
    A(2, 2) = 1.0 / 4;
    A(3, 0) = 371.0 / 1360;
    A(3, 1) = -137.0 / 2720;
    A(3, 2) = 15.0 / 544;
    A(3, 3) = 1.0 / 4;
    A(4, 0) = 25.0 / 24;
    A(4, 1) = -49.0 / 48;
    A(4, 2) = 125.0 / 16;
    A(4, 3) = -85.0 / 12;
    A(4, 4) = 1.0 / 4;
    RealVector b = A.row(4).transpose();
    return {"DIRK4", A, b, std::nullopt, DeclaredMetadata{4, 1, 1, true}};
}

/// 4-stage, 3rd order, stiffly accurate, L-stable DIRK with weak stage order 2.
inline ButcherTableau wso2() {
    RealMatrix A = RealMatrix::Zero(4, 4);
    A(0, 0) = 0.019000728905359;
    A(1, 0) = 0.404346056017447;
    A(1, 1) = 0.384357175123333;
    A(2, 0) = 0.064879084117003;
    A(2, 1) = -0.163896402946036;
    A(2, 2) = 0.515452312221597;
    A(3, 0) = 0.023435493738931;
    A(3, 1) = -0.412078778885435;
    A(3, 2) = 0.966611612813460;
    A(3, 3) = 0.422031672333044;
    RealVector b = A.row(3).transpose();
    return {"WSO2", A, b, std::nullopt, DeclaredMetadata{3, 1, 2, true}, 1e-10};
}

inline ButcherTableau implicit_midpoint() {
    return {"midpoint", RealMatrix::Constant(1, 1, 0.5), RealVector::Constant(1, 1.0), std::nullopt,
            DeclaredMetadata{2, 1, 1, false}};
}

/// 2-stage Gauss (fully implicit): b^T A^{-1} e = 0.
inline ButcherTableau gauss2() {
    const double r = std::sqrt(3.0) / 6.0;
    RealMatrix A(2, 2);
    A << 0.25, 0.25 - r, 0.25 + r, 0.25;
    RealVector b(2);
    b << 0.5, 0.5;
    return {"gauss2", A, b, std::nullopt, DeclaredMetadata{4, 2, 2, false}};
}

}  // namespace tableaux

inline std::vector<ButcherTableau> builtin_tableaux() {
    return {tableaux::backward_euler(), tableaux::dirk2(), tableaux::dirk3_2s(), tableaux::dirk3(),
            tableaux::dirk4(),          tableaux::wso2(),  tableaux::implicit_midpoint()};
}

/// Case-insensitive lookup among the built-ins (plus gauss2).
inline std::optional<ButcherTableau> find_builtin(const std::string& name) {
    const std::string key = detail::lower(name);
    for (auto& t : builtin_tableaux())
        if (detail::lower(t.name()) == key) return t;
    if (key == "gauss2") return tableaux::gauss2();
    if (key == "dirk1") return tableaux::backward_euler();
    return std::nullopt;
}

inline ButcherTableau builtin(const std::string& name) {
    if (auto t = find_builtin(name)) return *t;
    throw InvalidInput("unknown scheme: " + name);
}

}  // namespace orlab
