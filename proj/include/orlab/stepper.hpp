#pragma once

#include <bit>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "orlab/errors.hpp"
#include "orlab/problems.hpp"
#include "orlab/spatial.hpp"
#include "orlab/tableau.hpp"

namespace orlab {

/// How stage boundary values are chosen.
struct BCPolicy {
    enum class Kind { Conventional, MBC, MBCStar };

    Kind kind = Kind::Conventional;
    int order = 0;  // truncation order of the modified conditions

    static BCPolicy conventional() { return {}; }
    static BCPolicy mbc(int p) { return {Kind::MBC, p}; }
    static BCPolicy mbc_star(int p) { return {Kind::MBCStar, p}; }

    std::string label() const {
        switch (kind) {
            case Kind::Conventional: return "conventional";
            case Kind::MBC: return "mbc" + std::to_string(order);
            case Kind::MBCStar: return "mbcstar" + std::to_string(order);
        }
        return "?";
    }

    /// Accepts "conventional", "mbcP", "mbcstarP" and "mbc*P".
    static BCPolicy parse(const std::string& text) {
        const std::string s = detail::lower(text);
        auto digits = [&](std::size_t from) {
            if (from >= s.size()) throw InvalidInput("policy needs an order: " + text);
            int p = 0;
            for (std::size_t i = from; i < s.size(); ++i) {
                if (s[i] < '0' || s[i] > '9') throw InvalidInput("bad policy: " + text);
                p = 10 * p + (s[i] - '0');
            }
            if (p < 1 || p > 8) throw InvalidInput("policy order must be 1..8: " + text);
            return p;
        };
        if (s == "conventional" || s == "conv") return conventional();
        if (s.rfind("mbcstar", 0) == 0) return mbc_star(digits(7));
        if (s.rfind("mbc*", 0) == 0) return mbc_star(digits(4));
        if (s.rfind("mbc", 0) == 0) return mbc(digits(3));
        throw InvalidInput("unknown boundary policy: " + text);
    }
};

template <class Scalar>
struct StepperState {
    double t = 0.0;
    GridVector<Scalar> u;
    std::deque<std::pair<double, GridVector<Scalar>>> history;  // older levels, most recent first
    long step_count = 0;
};

/**
 * A problem realized on a grid: operator, forcing, and a cache of factorized shifted systems.
 * Single-threaded: use one instance per concurrent run.
 */
template <class Scalar>
class Discretization {
public:
    Discretization(IBVProblem<Scalar> problem, int n, int accuracy = 4)
        : problem_(std::move(problem)),
          grid_(problem_.grid(n)),
          op_(problem_.discretize(grid_, accuracy)),
          accuracy_(accuracy) {
        if (!problem_.linear()) nonlinear_ = problem_.nonlinear(grid_, accuracy);
        mask_ = boundary_row_mask(problem_.boundary, grid_.nodes());
        const auto& m = op_.matrix();
        for (int i = 0; i < m.size(); ++i) {
            double row = 0.0;
            for (int j = std::max(0, i - m.lower()); j <= std::min(m.size() - 1, i + m.upper()); ++j)
                row += magnitude(m(i, j));
            op_norm_ = std::max(op_norm_, row);
        }
    }

    const IBVProblem<Scalar>& problem() const noexcept { return problem_; }
    const Grid1D& grid() const noexcept { return grid_; }
    const DiscreteOperator<Scalar>& op() const noexcept { return op_; }
    int accuracy() const noexcept { return accuracy_; }
    bool linear() const noexcept { return problem_.linear(); }
    const NonlinearForm<Scalar>& nonlinear() const { return nonlinear_; }
    const std::vector<bool>& boundary_mask() const noexcept { return mask_; }
    double operator_norm() const noexcept { return op_norm_; }

    GridVector<Scalar> forcing(double t) const { return problem_.sample_forcing(grid_, t); }

    /// Semi-discrete right-hand side L_h u + f (or N_h u + f) at every node.
    GridVector<Scalar> rhs(const GridVector<Scalar>& u, double t) const {
        GridVector<Scalar> f = forcing(t);
        return (linear() ? op_.apply(u) : nonlinear_.apply(u)) + f;
    }

    /// Factorized (I - lambda L_h) with this problem's boundary rows.
    const ShiftedSolver<Scalar>& shifted(Scalar lambda) const {
        auto key = bits(lambda);
        auto it = cache_.find(key);
        if (it == cache_.end())
            it = cache_.emplace(key, std::make_unique<ShiftedSolver<Scalar>>(op_, lambda, problem_.boundary)).first;
        return *it->second;
    }

    StepperState<Scalar> exact_state(double t) const {
        StepperState<Scalar> s;
        s.t = t;
        s.u = problem_.sample_exact(grid_, t);
        return s;
    }

    /// Condition values of a grid function (u at Dirichlet nodes, one-sided u_x at Neumann ones).
    std::vector<Scalar> boundary_values_of(const GridVector<Scalar>& u) const {
        std::vector<Scalar> out;
        for (const auto& bc : problem_.boundary) {
            Stencil s = boundary_stencil(bc, accuracy_, grid_.nodes(), grid_.h());
            Scalar acc(0);
            for (std::size_t p = 0; p < s.weights.size(); ++p) acc += s.weights[p] * u[s.first + static_cast<int>(p)];
            out.push_back(acc);
        }
        return out;
    }

private:
    static std::pair<std::uint64_t, std::uint64_t> bits(Scalar v) {
        std::complex<double> z(v);
        return {std::bit_cast<std::uint64_t>(z.real()), std::bit_cast<std::uint64_t>(z.imag())};
    }

    IBVProblem<Scalar> problem_;
    Grid1D grid_;
    DiscreteOperator<Scalar> op_;
    int accuracy_;
    NonlinearForm<Scalar> nonlinear_;
    std::vector<bool> mask_;
    double op_norm_ = 0.0;
    mutable std::map<std::pair<std::uint64_t, std::uint64_t>, std::unique_ptr<ShiftedSolver<Scalar>>> cache_;
};

/// Per boundary condition c, the s stage values.
template <class Scalar>
using StageBoundaryValues = std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;

/// Weights w = A^{-T} b, so that b^T A^{-1} v = w . v.
inline RealVector btainv(const ButcherTableau& t) {
    Eigen::FullPivLU<RealMatrix> lu(t.A());
    lu.setThreshold(1e-14);
    if (!lu.isInvertible()) throw InvalidInput("scheme " + t.name() + ": A is singular");
    return t.A().transpose().fullPivLu().solve(t.b());
}

/**
 * Stage boundary data for one step from t_n.
 *
 * MBC of order p:  g^n e + sum_j dt^j [ g^(j) A^{j-1} c + sum_{k=2}^{j-1} (L^{j-k-1} f^(k)) (A^{j-k} c^k/k! - A^{j-1} c) ],
 * applied to the data of every condition (for Neumann conditions the data is u_x and
 * the forcing terms are differentiated in x). MBC* adds the rank-1 correction along A^{-T} b.
 */
template <class Scalar>
StageBoundaryValues<Scalar> stage_boundary_values(const BCPolicy& policy, const ButcherTableau& t,
                                                  const IBVProblem<Scalar>& problem, double t_n, double dt) {
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    const int s = t.stages();
    const std::size_t nc = problem.boundary.size();
    StageBoundaryValues<Scalar> out(nc, Vec(s));

    if (policy.kind == BCPolicy::Kind::Conventional) {
        for (std::size_t c = 0; c < nc; ++c)
            for (int i = 0; i < s; ++i) out[c][i] = problem.boundary_value(c, t_n + t.c()[i] * dt, 0);
        return out;
    }

    const int p = policy.order;
    if (p < 1) throw InvalidInput("MBC order must be >= 1");
    if (p > verified_order(t))
        throw InvalidInput("MBC order " + std::to_string(p) + " exceeds the order of scheme " + t.name());
    if (!problem.linear() && p >= 3)
        throw InvalidInput("MBC order not derivable from data: " + problem.id + " is nonlinear (order <= 2 only)");

    // A^{j-1} c for j = 1..p
    std::vector<RealVector> Ajc(p + 1);
    Ajc[1] = t.c();
    for (int j = 2; j <= p; ++j) Ajc[j] = t.A() * Ajc[j - 1];

    for (std::size_t c = 0; c < nc; ++c) {
        Vec g = Vec::Constant(s, problem.boundary_value(c, t_n, 0));
        double dtj = 1.0;
        for (int j = 1; j <= p; ++j) {
            dtj *= dt;
            Vec term = problem.boundary_value(c, t_n, j) * Ajc[j].cast<Scalar>();
            for (int k = 2; k <= j - 1; ++k) {
                RealVector w = detail::cpow(t.c(), k) / detail::factorial(k);
                for (int r = 0; r < j - k; ++r) w = t.A() * w;
                w -= Ajc[j];
                term += problem.boundary_forcing(c, t_n, j - k - 1, k) * w.cast<Scalar>();
            }
            g += dtj * term;
        }
        if (policy.kind == BCPolicy::Kind::MBCStar) {
            RealVector w = btainv(t);
            Scalar gn = problem.boundary_value(c, t_n, 0);
            Scalar gn1 = problem.boundary_value(c, t_n + dt, 0);
            Scalar defect = w.cast<Scalar>().dot(g - Vec::Constant(s, gn)) + gn - gn1;
            // dot() conjugates its first argument; w is real so the cast is harmless.
            g -= defect * (w / w.squaredNorm()).cast<Scalar>();
        }
        out[c] = g;
    }
    return out;
}

/// Data for one implicit stage v - gamma N(v) = rhs (PDE rows), B v = values (boundary rows).
template <class Scalar>
struct NewtonStageData {
    Scalar gamma;
    GridVector<Scalar> rhs;
    std::vector<Scalar> values;
    GridVector<Scalar> guess;
    double tol = 1e-12;
    int max_iterations = 25;
};

struct NewtonReport {
    int iterations = 0;
    double residual = 0.0;
};

/**
 * Newton iteration with the Jacobian refactored every iteration. Converged when the residual
 * or the Newton update drops below tol * (1 + |v|_inf).
 */
template <class Scalar>
GridVector<Scalar> newton_stage(const Discretization<Scalar>& disc, const NonlinearForm<Scalar>& form,
                                const NewtonStageData<Scalar>& d, NewtonReport* report = nullptr) {
    const auto& layout = disc.problem().boundary;
    const int N = disc.grid().nodes();
    const std::vector<int> rows = boundary_rows(layout, N);
    GridVector<Scalar> v = d.guess;

    auto residual = [&](const GridVector<Scalar>& x) {
        GridVector<Scalar> F = x - d.gamma * form.apply(x) - d.rhs;
        std::vector<Scalar> bv = disc.boundary_values_of(x);
        for (std::size_t c = 0; c < rows.size(); ++c) F[rows[c]] = bv[c] - d.values[c];
        return F;
    };

    double res = 0.0;
    for (int it = 0; it <= d.max_iterations; ++it) {
        GridVector<Scalar> F = residual(v);
        res = F.cwiseAbs().maxCoeff();
        const double scale = d.tol * (1.0 + v.cwiseAbs().maxCoeff());
        if (!std::isfinite(res)) break;
        if (res < scale) {
            if (report) *report = {it, res};
            return v;
        }
        if (it == d.max_iterations) break;
        BandMatrix<Scalar> J = form.jacobian(v).template shifted_identity<Scalar>(d.gamma);
        install_boundary_rows(J, layout, disc.accuracy(), disc.grid().h());
        BandLU<Scalar> lu(std::move(J), 1e14, std::complex<double>(d.gamma));
        GridVector<Scalar> delta = -F;
        lu.solve_in_place(delta);
        v += delta;
        if (!v.allFinite()) {
            res = INFINITY;
            break;
        }
        if (delta.cwiseAbs().maxCoeff() < d.tol * (1.0 + v.cwiseAbs().maxCoeff())) {
            GridVector<Scalar> F2 = residual(v);
            if (report) *report = {it + 1, F2.cwiseAbs().maxCoeff()};
            return v;
        }
    }
    throw NewtonDivergence("Newton iteration did not converge (final residual " + detail::sci(res) + ")", res,
                           d.max_iterations);
}

/// Per-step extras for diagnostics.
template <class Scalar>
struct StepDiagnostics {
    std::vector<GridVector<Scalar>> stages;
    StageBoundaryValues<Scalar> boundary;
    int newton_iterations = 0;
};

/// u^n + b^T A^{-1} (U - u^n e).
template <class Scalar>
GridVector<Scalar> explicit_update(const GridVector<Scalar>& un, const ButcherTableau& t,
                                   const std::vector<GridVector<Scalar>>& stages) {
    if (static_cast<int>(stages.size()) != t.stages()) throw InvalidInput("explicit_update: need s stages");
    const int s = t.stages();
    if (t.A().row(s - 1).transpose() == t.b()) return stages.back();  // b^T A^{-1} = e_s^T
    RealVector w = btainv(t);
    GridVector<Scalar> out = un;
    for (int j = 0; j < t.stages(); ++j) out += w[j] * (stages[j] - un);
    return out;
}

/**
 * One DIRK step. Stage i solves (I - dt a_ii L_h) U_i = u^n + dt sum_{j<i} a_ij K_j + dt a_ii f_i with
 * boundary rows from `policy`. For linear problems K_j is recovered algebraically as (U_j - base)/(dt a_jj);
 * nonlinear problems evaluate K_j = N(U_j) + f_j at PDE rows. The input state is never modified.
 */
template <class Scalar>
StepperState<Scalar> dirk_step(const StepperState<Scalar>& state, const ButcherTableau& t, double dt,
                               const Discretization<Scalar>& disc, const BCPolicy& policy,
                               StepDiagnostics<Scalar>* diag = nullptr) {
    if (!(dt > 0.0)) throw InvalidInput("dirk_step: dt must be positive");
    if (!t.is_dirk()) throw InvalidInput("scheme " + t.name() + " is not a DIRK (lower triangular, positive diagonal)");
    const int s = t.stages();
    const int N = disc.grid().nodes();
    if (state.u.size() != N) throw InvalidInput("dirk_step: state does not match the grid");
    const double tn = state.t;
    const auto& mask = disc.boundary_mask();

    StageBoundaryValues<Scalar> bcv = stage_boundary_values(policy, t, disc.problem(), tn, dt);
    std::vector<GridVector<Scalar>> K(s), U(s);
    int newton_total = 0;

    for (int i = 0; i < s; ++i) {
        const double aii = t.A()(i, i);
        const Scalar gamma = Scalar(dt * aii);
        GridVector<Scalar> base = state.u;
        for (int j = 0; j < i; ++j)
            if (t.A()(i, j) != 0.0) base += (dt * t.A()(i, j)) * K[j];
        GridVector<Scalar> fi = disc.forcing(tn + t.c()[i] * dt);
        GridVector<Scalar> rhs = base + gamma * fi;
        std::vector<Scalar> values(bcv.size());
        for (std::size_t c = 0; c < bcv.size(); ++c) values[c] = bcv[c][i];

        if (disc.linear()) {
            U[i] = disc.shifted(gamma).solve(rhs, values);
            // From the stage equation; applying L_h instead would amplify the solve's rounding by |L_h|.
            K[i] = (U[i] - base) / gamma;
        } else {
            NewtonStageData<Scalar> nd{gamma, rhs, values, i == 0 ? state.u : U[i - 1]};
            NewtonReport rep;
            U[i] = newton_stage(disc, disc.nonlinear(), nd, &rep);
            newton_total += rep.iterations;
            K[i] = disc.nonlinear().apply(U[i]) + fi;
            for (int r = 0; r < N; ++r)
                if (mask[r]) K[i][r] = (U[i][r] - base[r]) / gamma;
        }
    }

    StepperState<Scalar> next;
    next.t = tn + dt;
    next.step_count = state.step_count + 1;
    next.u = state.u;
    for (int j = 0; j < s; ++j) next.u += (dt * t.b()[j]) * K[j];

    if (t.stiffly_accurate()) {
        // Agreement up to the rounding of the last stage solve.
        const double scale = std::max(1.0, dt * t.A()(s - 1, s - 1) * disc.operator_norm());
        const double gap = (next.u - U[s - 1]).cwiseAbs().maxCoeff();
        const double tol = 1e-12 * scale * (1.0 + U[s - 1].cwiseAbs().maxCoeff()) + t.tolerance();
        if (!(gap <= tol))
            throw NumericalFailure("stiffly accurate update differs from the last stage by " + detail::sci(gap));
        next.u = U[s - 1];
    }
    if (!next.u.allFinite()) throw NumericalFailure("non-finite solution after step at t=" + detail::sci(tn));

    if (diag) {
        diag->stages = std::move(U);
        diag->boundary = std::move(bcv);
        diag->newton_iterations = newton_total;
    }
    return next;
}

// ---------------------------------------------------------------------------
// BDF

/// u^{n+s} = sum_m a[m] u^{n+s-1-m} + dt beta (L u^{n+s} + f^{n+s}).
struct BDFCoefficients {
    std::vector<double> a;  // most recent level first
    double beta;
};

inline BDFCoefficients bdf_coefficients(int k) {
    switch (k) {
        case 1: return {{1.0}, 1.0};
        case 2: return {{4.0 / 3, -1.0 / 3}, 2.0 / 3};
        case 3: return {{18.0 / 11, -9.0 / 11, 2.0 / 11}, 6.0 / 11};
        case 4: return {{48.0 / 25, -36.0 / 25, 16.0 / 25, -3.0 / 25}, 12.0 / 25};
        default: throw InvalidInput("BDF order must be 1..4");
    }
}

/// State at t = (k-1) dt with k-1 older levels, all from the exact solution.
template <class Scalar>
StepperState<Scalar> prime_lmm(const Discretization<Scalar>& disc, int k, double dt, double t0 = 0.0) {
    bdf_coefficients(k);
    StepperState<Scalar> s = disc.exact_state(t0 + (k - 1) * dt);
    for (int m = k - 2; m >= 0; --m) s.history.push_back({t0 + m * dt, disc.problem().sample_exact(disc.grid(), t0 + m * dt)});
    s.step_count = k - 1;
    return s;
}

template <class Scalar>
StepperState<Scalar> lmm_step(const StepperState<Scalar>& state, int k, double dt, const Discretization<Scalar>& disc) {
    if (!disc.linear()) throw InvalidInput("lmm_step: linear problems only");
    const BDFCoefficients co = bdf_coefficients(k);
    if (static_cast<int>(state.history.size()) < k - 1)
        throw InvalidInput("lmm_step: history not primed (need " + std::to_string(k - 1) + " previous levels)");
    const double t1 = state.t + dt;
    GridVector<Scalar> rhs = co.a[0] * state.u;
    for (int m = 1; m < k; ++m) rhs += co.a[m] * state.history[m - 1].second;
    const Scalar gamma = Scalar(dt * co.beta);
    rhs += gamma * disc.forcing(t1);
    std::vector<Scalar> values;
    for (std::size_t c = 0; c < disc.problem().boundary.size(); ++c) values.push_back(disc.problem().boundary_value(c, t1));

    StepperState<Scalar> next;
    next.t = t1;
    next.step_count = state.step_count + 1;
    next.u = disc.shifted(gamma).solve(rhs, values);
    if (k > 1) {
        next.history = state.history;
        next.history.push_front({state.t, state.u});
        next.history.resize(k - 1);
    }
    if (!next.u.allFinite()) throw NumericalFailure("non-finite solution in lmm_step");
    return next;
}

// ---------------------------------------------------------------------------
// Time loops

/// Step sizes reaching t_final exactly; the last one shrinks when t_final/dt is not integral.
inline std::vector<double> step_sizes(double t0, double t_final, double dt) {
    if (!(dt > 0.0) || !(t_final > t0)) throw InvalidInput("step_sizes: need dt > 0 and t_final > t0");
    const double span = t_final - t0;
    long n = static_cast<long>(std::floor(span / dt + 1e-9));
    std::vector<double> out(n, dt);
    double rest = span - n * dt;
    if (rest > 1e-12 * span) out.push_back(rest);
    return out;
}

template <class Scalar>
using StepObserver = std::function<void(const StepperState<Scalar>&, const StepDiagnostics<Scalar>&)>;

template <class Scalar>
StepperState<Scalar> integrate(const Discretization<Scalar>& disc, const ButcherTableau& t, const BCPolicy& policy,
                               double dt, double t_final, const StepObserver<Scalar>& observer = {}) {
    StepperState<Scalar> s = disc.exact_state(0.0);
    long n = 0;
    for (double h : step_sizes(0.0, t_final, dt)) {
        StepDiagnostics<Scalar> diag;
        const double tn = (h == dt) ? n * dt : s.t;
        s.t = tn;
        s = dirk_step(s, t, h, disc, policy, observer ? &diag : nullptr);
        ++n;
        if (observer) observer(s, diag);
    }
    s.t = t_final;
    return s;
}

template <class Scalar>
StepperState<Scalar> integrate_lmm(const Discretization<Scalar>& disc, int k, double dt, double t_final) {
    StepperState<Scalar> s = prime_lmm(disc, k, dt);
    long total = std::lround(t_final / dt);
    if (std::abs(total * dt - t_final) > 1e-9 * t_final) throw InvalidInput("integrate_lmm: t_final/dt must be integral");
    for (long n = k - 1; n < total; ++n) {
        s.t = n * dt;
        s = lmm_step(s, k, dt, disc);
    }
    s.t = t_final;
    return s;
}

}  // namespace orlab
