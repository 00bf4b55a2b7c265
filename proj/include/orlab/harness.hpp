#pragma once

#include <chrono>
#include <cmath>
#include <complex>
#include <future>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "orlab/errors.hpp"
#include "orlab/fit.hpp"
#include "orlab/problems.hpp"
#include "orlab/spatial.hpp"
#include "orlab/spectra.hpp"
#include "orlab/stepper.hpp"
#include "orlab/tableau.hpp"

namespace orlab {

// ---------------------------------------------------------------------------
// What is measured

/// u and its x-derivatives.
enum class Quantity { U = 0, Ux = 1, Uxx = 2, Uxxx = 3 };

inline const char* to_string(Quantity q) {
    switch (q) {
        case Quantity::U: return "u";
        case Quantity::Ux: return "u_x";
        case Quantity::Uxx: return "u_xx";
        case Quantity::Uxxx: return "u_xxx";
    }
    return "?";
}

inline Quantity parse_quantity(const std::string& text) {
    const std::string s = detail::lower(text);
    if (s == "u") return Quantity::U;
    if (s == "u_x" || s == "ux") return Quantity::Ux;
    if (s == "u_xx" || s == "uxx") return Quantity::Uxx;
    if (s == "u_xxx" || s == "uxxx") return Quantity::Uxxx;
    throw InvalidInput("unknown quantity: " + text);
}

inline int derivative_order(Quantity q) { return static_cast<int>(q); }

/// Subset of the domain, as fractions of its length.
struct Region {
    std::string name = "full";
    double lo = 0.0;
    double hi = 1.0;

    static Region full() { return {"full", 0.0, 1.0}; }
    static Region interior_third() { return {"interior", 1.0 / 3.0, 2.0 / 3.0}; }
    static Region custom(double lo, double hi) {
        if (!(lo >= 0.0 && hi <= 1.0 && lo < hi)) throw InvalidInput("region must satisfy 0 <= lo < hi <= 1");
        std::ostringstream os;
        os << "custom[" << lo << "," << hi << "]";
        return {os.str(), lo, hi};
    }

    bool contains(const Grid1D& g, int i) const {
        const double f = (g.x(i) - g.x_min()) / (g.x_max() - g.x_min());
        return f >= lo - 1e-12 && f <= hi + 1e-12;
    }
};

/// "full", "interior" or "lo:hi".
inline Region parse_region(const std::string& text) {
    const std::string s = detail::lower(text);
    if (s == "full") return Region::full();
    if (s == "interior" || s == "interior-third") return Region::interior_third();
    auto colon = s.find(':');
    if (colon == std::string::npos) throw InvalidInput("unknown region: " + text);
    try {
        return Region::custom(std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1)));
    } catch (const std::logic_error&) {
        throw InvalidInput("bad region: " + text);
    }
}

enum class Norm { Max, L2 };

inline const char* to_string(Norm n) { return n == Norm::Max ? "max" : "l2"; }

template <class T>
double region_norm(const Grid1D& g, const GridVector<T>& e, const Region& r, Norm norm) {
    double acc = 0.0;
    for (int i = 0; i < g.nodes(); ++i) {
        if (!r.contains(g, i)) continue;
        const double a = std::abs(e[i]);
        if (norm == Norm::Max) acc = std::max(acc, a);
        else acc += a * a;
    }
    return norm == Norm::Max ? acc : std::sqrt(acc * g.h());
}

// ---------------------------------------------------------------------------
// Time integrators

/// A DIRK with a boundary policy, or a BDF method.
struct Method {
    std::optional<ButcherTableau> tableau;
    BCPolicy policy;
    int bdf_steps = 0;

    static Method rk(ButcherTableau t, BCPolicy p = BCPolicy::conventional()) { return {std::move(t), p, 0}; }
    static Method bdf(int k) {
        bdf_coefficients(k);
        return {std::nullopt, BCPolicy::conventional(), k};
    }

    std::string scheme_label() const { return tableau ? tableau->name() : "BDF" + std::to_string(bdf_steps); }
    std::string policy_label() const { return policy.label(); }
};

/// Throws InvalidInput when `m` cannot run on `p` at all (as opposed to failing numerically).
template <class S>
void validate_method(const IBVProblem<S>& p, const Method& m) {
    if (m.tableau) {
        if (!m.tableau->is_dirk()) throw InvalidInput("scheme " + m.tableau->name() + " is not a DIRK");
        stage_boundary_values(m.policy, *m.tableau, p, 0.0, 1e-3);
    } else if (!p.linear()) {
        throw InvalidInput("BDF runs need a linear problem; " + p.id + " is nonlinear");
    }
}

template <class S>
StepperState<S> run_to_final(const Discretization<S>& disc, const Method& m, double dt) {
    const double tf = disc.problem().t_final;
    return m.tableau ? integrate(disc, *m.tableau, m.policy, dt, tf) : integrate_lmm(disc, m.bdf_steps, dt, tf);
}

// ---------------------------------------------------------------------------
// Fits

/// Least-squares order of err ~ C dt^p.
inline LogLogFit fit_order(const std::vector<double>& dts, const std::vector<double>& errors) {
    if (dts.size() != errors.size()) throw InvalidInput("fit_order: size mismatch");
    if (dts.size() < 3) throw InvalidInput("fit_order: need at least three points");
    for (double e : errors)
        if (!(e > 0.0) || !std::isfinite(e)) throw InvalidInput("fit_order: errors must be positive and finite");
    return fit_loglog(dts, errors);
}

inline constexpr int kMinReportedPoints = 4;
inline constexpr double kMaxReportedResidual = 0.2;

/// Local slopes between neighbours; the kink is where consecutive slopes differ most.
inline std::optional<double> kink_location(const std::vector<double>& dts, const std::vector<double>& errors) {
    if (dts.size() < 3 || dts.size() != errors.size()) return std::nullopt;
    std::vector<double> slope;
    for (std::size_t i = 0; i + 1 < dts.size(); ++i)
        slope.push_back(std::log(errors[i + 1] / errors[i]) / std::log(dts[i + 1] / dts[i]));
    std::size_t best = 0;
    double jump = -1.0;
    for (std::size_t i = 0; i + 1 < slope.size(); ++i) {
        const double d = std::abs(slope[i + 1] - slope[i]);
        if (std::isfinite(d) && d > jump) {
            jump = d;
            best = i + 1;
        }
    }
    if (jump < 0) return std::nullopt;
    return dts[best];
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepOptions {
    std::vector<double> dts{1e-2, 5e-3, 2.5e-3, 1.25e-3};
    std::vector<Quantity> quantities{Quantity::U, Quantity::Ux, Quantity::Uxx};
    std::vector<Region> regions{Region::full(), Region::interior_third()};
    int n = 2000;
    int accuracy = 4;
    Norm norm = Norm::Max;
    bool parallel = true;
};

/// Halving sequence dt0, dt0/2, ...
inline std::vector<double> halving(double dt0, int count) {
    std::vector<double> out;
    for (int i = 0; i < count; ++i) out.push_back(dt0 / std::pow(2.0, i));
    return out;
}

struct DtRun {
    double dt = 0.0;
    bool ok = false;
    double runtime = 0.0;  // seconds
    std::string diagnostic;
};

struct ErrorSeries {
    Quantity quantity = Quantity::U;
    Region region;
    std::vector<double> errors;  // NaN where the run failed
    std::optional<LogLogFit> fit;

    /// The order is only reported with enough points and a straight enough line.
    bool reported() const {
        return fit && fit->points >= kMinReportedPoints && fit->residual < kMaxReportedResidual;
    }
    std::optional<double> order() const {
        if (!reported()) return std::nullopt;
        return fit->slope;
    }
};

struct ConvergenceReport {
    std::string problem;
    std::string scheme;
    std::string policy;
    int n = 0;
    int accuracy = 4;
    Norm norm = Norm::Max;
    double t_final = 0.0;
    std::vector<double> dts;
    std::vector<DtRun> runs;
    std::vector<ErrorSeries> series;

    const ErrorSeries& at(Quantity q, const std::string& region = "full") const {
        for (const auto& s : series)
            if (s.quantity == q && s.region.name == region) return s;
        throw InvalidInput(std::string("report has no series for ") + to_string(q) + " on " + region);
    }
    std::optional<double> order(Quantity q, const std::string& region = "full") const { return at(q, region).order(); }
    bool all_ok() const {
        for (const auto& r : runs)
            if (!r.ok) return false;
        return true;
    }
};

namespace detail {

/// Pre-conditions on the dt list: positive, halving, and t_final a whole number of steps.
inline void check_sweep(const std::vector<double>& dts, double t_final) {
    if (dts.empty()) throw InvalidInput("dt list is empty");
    for (std::size_t i = 0; i < dts.size(); ++i) {
        const double dt = dts[i];
        if (!(dt > 0.0)) throw InvalidInput("dt must be positive");
        const double steps = t_final / dt;
        if (std::abs(steps - std::round(steps)) > 1e-9 * steps)
            throw InvalidInput("t_final/dt is not integral for dt=" + detail::sci(dt));
        if (i > 0 && std::abs(dts[i - 1] / dt - 2.0) > 1e-9)
            throw InvalidInput("dt list must halve from one entry to the next");
    }
}

struct DtMeasurement {
    DtRun run;
    std::vector<double> errors;  // quantities x regions, row-major
};

template <class S>
DtMeasurement measure_dt(const IBVProblem<S>& p, const Method& m, double dt, const SweepOptions& o) {
    DtMeasurement out;
    out.run.dt = dt;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        Discretization<S> disc(p, o.n, o.accuracy);
        StepperState<S> s = run_to_final(disc, m, dt);
        GridVector<S> err = s.u - p.sample_exact(disc.grid(), p.t_final);
        for (Quantity q : o.quantities) {
            GridVector<S> e = q == Quantity::U ? err : apply_derivative(disc.grid(), err, derivative_order(q), o.accuracy);
            for (const auto& r : o.regions) out.errors.push_back(region_norm(disc.grid(), e, r, o.norm));
        }
        out.run.ok = true;
    } catch (const NumericalFailure& e) {
        out.run.diagnostic = e.what();
        out.errors.assign(o.quantities.size() * o.regions.size(), std::numeric_limits<double>::quiet_NaN());
    }
    out.run.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

template <class S>
ConvergenceReport run_convergence_typed(const IBVProblem<S>& p, const Method& m, const SweepOptions& o) {
    check_sweep(o.dts, p.t_final);
    if (o.quantities.empty() || o.regions.empty()) throw InvalidInput("need at least one quantity and one region");
    validate_method(p, m);
    Discretization<S> probe(p, o.n, o.accuracy);  // grid and stencil checks before any task starts

    std::vector<DtMeasurement> results;
    if (o.parallel && o.dts.size() > 1) {
        std::vector<std::future<DtMeasurement>> tasks;
        for (double dt : o.dts)
            tasks.push_back(std::async(std::launch::async, [&p, &m, &o, dt] { return measure_dt(p, m, dt, o); }));
        for (auto& f : tasks) results.push_back(f.get());
    } else {
        for (double dt : o.dts) results.push_back(measure_dt(p, m, dt, o));
    }

    ConvergenceReport rep;
    rep.problem = p.id;
    rep.scheme = m.scheme_label();
    rep.policy = m.policy_label();
    rep.n = o.n;
    rep.accuracy = o.accuracy;
    rep.norm = o.norm;
    rep.t_final = p.t_final;
    rep.dts = o.dts;
    for (auto& r : results) rep.runs.push_back(r.run);
    std::size_t col = 0;
    for (Quantity q : o.quantities) {
        for (const auto& region : o.regions) {
            ErrorSeries s{q, region, {}, std::nullopt};
            std::vector<double> d, e;
            for (std::size_t k = 0; k < results.size(); ++k) {
                const double v = results[k].errors[col];
                s.errors.push_back(v);
                if (v > 0.0 && std::isfinite(v)) {
                    d.push_back(o.dts[k]);
                    e.push_back(v);
                }
            }
            if (d.size() >= 3) s.fit = fit_order(d, e);
            rep.series.push_back(std::move(s));
            ++col;
        }
    }
    return rep;
}

}  // namespace detail

/// Steps to t_final for every dt and measures errors of u and its FD derivatives against u*.
inline ConvergenceReport run_convergence(const AnyProblem& problem, const Method& m, const SweepOptions& o = {}) {
    return std::visit([&](const auto& p) { return detail::run_convergence_typed(p, m, o); }, problem);
}

inline ConvergenceReport run_convergence(const std::string& problem, const Method& m, const SweepOptions& o = {}) {
    return run_convergence(find_problem(problem), m, o);
}

// ---------------------------------------------------------------------------
// Error shapes

enum class ShapeKind { Local, Global };

inline const char* to_string(ShapeKind k) { return k == ShapeKind::Local ? "local" : "global"; }

inline ShapeKind parse_shape_kind(const std::string& s) {
    if (s == "local") return ShapeKind::Local;
    if (s == "global") return ShapeKind::Global;
    throw InvalidInput("shape must be local or global: " + s);
}

struct ErrorShape {
    std::string problem;
    std::string scheme;
    std::string policy;
    ShapeKind kind = ShapeKind::Global;
    double dt = 0.0;
    double time = 0.0;  // where the error is taken
    Grid1D grid{1};
    GridVector<cplx> error;
    LayerEstimate left;
    LayerEstimate right;
};

namespace detail {

template <class S>
ErrorShape shape_typed(const IBVProblem<S>& p, const Method& m, double dt, int n, ShapeKind kind, int accuracy,
                       const LayerDetectOptions& lo) {
    validate_method(p, m);
    Discretization<S> disc(p, n, accuracy);
    ErrorShape out;
    out.problem = p.id;
    out.scheme = m.scheme_label();
    out.policy = m.policy_label();
    out.kind = kind;
    out.dt = dt;
    out.grid = disc.grid();
    StepperState<S> s;
    if (kind == ShapeKind::Global) {
        detail::check_sweep({dt}, p.t_final);
        s = run_to_final(disc, m, dt);
    } else if (m.tableau) {
        s = dirk_step(disc.exact_state(0.0), *m.tableau, dt, disc, m.policy);
    } else {
        s = lmm_step(prime_lmm(disc, m.bdf_steps, dt), m.bdf_steps, dt, disc);
    }
    out.time = kind == ShapeKind::Global ? p.t_final : s.t;
    GridVector<S> err = s.u - p.sample_exact(disc.grid(), out.time);
    out.error = err.template cast<cplx>();
    out.left = detect_layer_width(out.grid, out.error, Side::Left, lo);
    out.right = detect_layer_width(out.grid, out.error, Side::Right, lo);
    return out;
}

}  // namespace detail

/// Error profile after one step from exact data (local) or at t_final (global), with layer estimates.
inline ErrorShape error_shape_snapshot(const AnyProblem& problem, const Method& m, double dt, int n, ShapeKind kind,
                                      int accuracy = 4, const LayerDetectOptions& lo = {}) {
    return std::visit([&](const auto& p) { return detail::shape_typed(p, m, dt, n, kind, accuracy, lo); }, problem);
}

namespace detail {

template <class S>
std::vector<double> mismatch_typed(const IBVProblem<S>& p, const Method& m, double dt, int n, int accuracy) {
    validate_method(p, m);
    check_sweep({dt}, p.t_final);
    Discretization<S> disc(p, n, accuracy);
    std::vector<double> out;
    integrate<S>(disc, *m.tableau, m.policy, dt, p.t_final, [&](const StepperState<S>& s, const StepDiagnostics<S>&) {
        std::vector<S> bv = disc.boundary_values_of(s.u);
        double worst = 0.0;
        for (std::size_t c = 0; c < bv.size(); ++c) worst = std::max(worst, std::abs(bv[c] - p.boundary_value(c, s.t, 0)));
        out.push_back(worst);
    });
    return out;
}

}  // namespace detail

/// max over conditions of |B u^n - g(t_n)| after each step of a DIRK run to t_final.
inline std::vector<double> boundary_mismatch(const AnyProblem& problem, const Method& m, double dt, int n,
                                             int accuracy = 4) {
    if (!m.tableau) throw InvalidInput("boundary_mismatch: BDF imposes g exactly");
    return std::visit([&](const auto& p) { return detail::mismatch_typed(p, m, dt, n, accuracy); }, problem);
}

// ---------------------------------------------------------------------------
// Expected orders

struct OrderExpectation {
    Quantity quantity;
    double order;
};

struct ExpectedOrders {
    std::string id;
    std::string problem;
    std::string scheme;  // built-in name, or "bdfK"
    std::string policy = "conventional";
    std::vector<OrderExpectation> orders;
    double tolerance = 0.25;
    int desk_n = 2000;
    std::vector<double> dts{1e-2, 5e-3, 2.5e-3, 1.25e-3};
    std::string region = "full";

    Method method() const {
        const std::string s = detail::lower(scheme);
        if (s.rfind("bdf", 0) == 0) return Method::bdf(std::stoi(s.substr(3)));
        return Method::rk(builtin(scheme), BCPolicy::parse(policy));
    }

    SweepOptions sweep(int n) const {
        SweepOptions o;
        o.dts = dts;
        o.n = n;
        o.quantities.clear();
        for (const auto& e : orders) o.quantities.push_back(e.quantity);
        o.regions = {parse_region(region)};
        return o;
    }
};

/**
 * Orders the reproduction suite checks. Advection uses a finer grid so that its O(dt)
 * outflow layer is resolved; Airy a coarser one, since dt/h^3 conditioning puts a rounding
 * floor under the finest runs at n >= 2000.
 */
inline std::vector<ExpectedOrders> expected_order_fixtures() {
    using Q = Quantity;
    const std::vector<OrderExpectation> intro_rk{{Q::U, 2}, {Q::Ux, 1.5}, {Q::Uxx, 1}, {Q::Uxxx, 0.5}};
    std::vector<ExpectedOrders> f;
    f.push_back({"intro-be", "intro-heat", "BE", "conventional", {{Q::U, 1}, {Q::Ux, 1}, {Q::Uxx, 1}, {Q::Uxxx, 1}}, 0.2});
    f.push_back({"intro-dirk2", "intro-heat", "DIRK2", "conventional", intro_rk, 0.2});
    f.push_back({"intro-dirk3", "intro-heat", "DIRK3", "conventional", intro_rk, 0.2});
    f.push_back({"intro-dirk4", "intro-heat", "DIRK4", "conventional", intro_rk, 0.2});
    f.push_back({"heat-dirk3", "heat", "DIRK3", "conventional", {{Q::U, 2}, {Q::Ux, 1.5}}, 0.25});
    f.push_back({"heat-dirk3-mbc3", "heat", "DIRK3", "mbc3", {{Q::U, 3}, {Q::Ux, 3}, {Q::Uxx, 3}}, 0.25});
    f.push_back({"heat-dirk3-mbc2", "heat", "DIRK3", "mbc2", {{Q::U, 3}, {Q::Ux, 2.5}, {Q::Uxx, 2}}, 0.25});
    f.push_back({"heat-wso2", "heat", "WSO2", "conventional", {{Q::U, 3}, {Q::Ux, 2.5}}, 0.25});
    f.push_back({"advection-wso2", "advection", "WSO2", "conventional", {{Q::U, 3}, {Q::Ux, 2}, {Q::Uxx, 1}}, 0.3, 10000});
    f.push_back({"advection-dirk3-mbc3", "advection", "DIRK3", "mbc3", {{Q::U, 3}, {Q::Ux, 3}, {Q::Uxx, 2}}, 0.3, 10000});
    f.push_back({"airy-wso2", "airy", "WSO2", "conventional", {{Q::U, 3}, {Q::Ux, 2.67}, {Q::Uxx, 2.33}}, 0.3, 1000});
    f.push_back({"airy-dirk3-mbc3", "airy", "DIRK3", "mbc3", {{Q::U, 3}, {Q::Ux, 3}, {Q::Uxx, 3}}, 0.3, 1000});
    f.push_back({"burgers-dirk3-mbc2", "burgers", "DIRK3", "mbc2", {{Q::U, 3}}, 0.25});
    f.push_back({"heat-bdf3", "heat", "bdf3", "conventional", {{Q::U, 3}, {Q::Ux, 3}}, 0.2});
    return f;
}

inline const ExpectedOrders& find_fixture(const std::vector<ExpectedOrders>& fx, const std::string& problem,
                                          const std::string& scheme, const std::string& policy) {
    for (const auto& f : fx)
        if (f.problem == problem && detail::lower(f.scheme) == detail::lower(scheme) &&
            detail::lower(f.policy) == detail::lower(policy))
            return f;
    throw InvalidInput("no expected orders for " + problem + " / " + scheme + " / " + policy);
}

struct OrderCheck {
    std::string fixture;
    Quantity quantity;
    double expected = 0.0;
    double tolerance = 0.0;
    std::optional<double> measured;  // empty when the fit was not reportable
    bool pass = false;
};

inline std::vector<OrderCheck> check_orders(const ConvergenceReport& rep, const ExpectedOrders& f) {
    std::vector<OrderCheck> out;
    for (const auto& e : f.orders) {
        OrderCheck c{f.id, e.quantity, e.order, f.tolerance, rep.order(e.quantity, parse_region(f.region).name), false};
        c.pass = c.measured && std::abs(*c.measured - e.order) <= f.tolerance;
        out.push_back(c);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reproduction suite

enum class SuiteScale { Desk, Full };

struct SuiteResult {
    std::vector<ConvergenceReport> reports;
    std::vector<OrderCheck> checks;
    std::vector<std::string> notes;  // informational findings, not gating

    bool passed() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

/// Every fixture at its desk grid (or n = 10000), plus the advection-diffusion kink and the Schrodinger band.
inline SuiteResult reproduction_suite(SuiteScale scale, const std::vector<ExpectedOrders>& fixtures = expected_order_fixtures()) {
    SuiteResult out;
    const auto n_for = [&](int desk) { return scale == SuiteScale::Desk ? desk : 10000; };
    for (const auto& f : fixtures) {
        ConvergenceReport rep = run_convergence(f.problem, f.method(), f.sweep(n_for(f.desk_n)));
        for (auto& c : check_orders(rep, f)) out.checks.push_back(c);
        out.reports.push_back(std::move(rep));
    }

    {
        SweepOptions o;
        o.dts = halving(8e-2, 7);
        o.n = n_for(2000);
        o.quantities = {Quantity::U, Quantity::Ux};
        o.regions = {Region::full()};
        ConvergenceReport rep = run_convergence("advdiff", Method::rk(tableaux::dirk3()), o);
        const auto& s = rep.at(Quantity::Ux);
        std::ostringstream os;
        os << "advdiff DIRK3 u_x kink at dt ";
        if (auto k = kink_location(rep.dts, s.errors)) os << *k;
        else os << "n/a";
        os << " (nu^(2/3) = " << std::pow(1e-3, 2.0 / 3.0) << ")";
        out.notes.push_back(os.str());
        out.reports.push_back(std::move(rep));
    }
    {
        SweepOptions o;
        o.n = n_for(2000);
        o.quantities = {Quantity::U};
        o.regions = {Region::interior_third()};
        ConvergenceReport rep = run_convergence("schrodinger", Method::rk(tableaux::dirk3()), o);
        const auto& s = rep.at(Quantity::U, "interior");
        std::ostringstream os;
        os << "schrodinger DIRK3 interior u order ";
        if (s.fit) os << s.fit->slope << " (informational band [2.2, 2.8])";
        else os << "n/a";
        out.notes.push_back(os.str());
        out.reports.push_back(std::move(rep));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Output

namespace detail {

inline std::string fmt(double v) {
    if (!std::isfinite(v)) return "nan";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace detail

inline void write_csv_header(std::ostream& os) { os << "problem,scheme,policy,quantity,region,dt,error,order_fit,residual\n"; }

/// One row per (series, dt); order_fit and residual are blank when the order is not reportable.
inline void write_report_csv(std::ostream& os, const ConvergenceReport& r, bool header = true) {
    if (header) write_csv_header(os);
    for (const auto& s : r.series) {
        const std::string order = s.reported() ? detail::fmt(s.fit->slope) : "";
        const std::string res = s.reported() ? detail::fmt(s.fit->residual) : "";
        for (std::size_t k = 0; k < r.dts.size(); ++k)
            os << r.problem << ',' << r.scheme << ',' << r.policy << ',' << to_string(s.quantity) << ',' << s.region.name
               << ',' << detail::fmt(r.dts[k]) << ',' << detail::fmt(s.errors[k]) << ',' << order << ',' << res << '\n';
    }
}

/// Everything except wall-clock times, so identical configs give identical files.
inline nlohmann::json report_to_json(const ConvergenceReport& r) {
    nlohmann::json j;
    j["problem"] = r.problem;
    j["scheme"] = r.scheme;
    j["policy"] = r.policy;
    j["n"] = r.n;
    j["accuracy"] = r.accuracy;
    j["norm"] = to_string(r.norm);
    j["t_final"] = r.t_final;
    j["dts"] = r.dts;
    nlohmann::json fails = nlohmann::json::array();
    for (const auto& run : r.runs)
        if (!run.ok) fails.push_back({{"dt", run.dt}, {"diagnostic", run.diagnostic}});
    j["failures"] = fails;
    nlohmann::json series = nlohmann::json::array();
    for (const auto& s : r.series) {
        nlohmann::json e;
        e["quantity"] = to_string(s.quantity);
        e["region"] = s.region.name;
        nlohmann::json errs = nlohmann::json::array();
        for (double v : s.errors) errs.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
        e["errors"] = errs;
        if (s.fit) e["fit"] = {{"slope", s.fit->slope}, {"residual", s.fit->residual}, {"points", s.fit->points}};
        e["order"] = s.reported() ? nlohmann::json(s.fit->slope) : nlohmann::json(nullptr);
        series.push_back(e);
    }
    j["series"] = series;
    return j;
}

inline nlohmann::json timings_to_json(const ConvergenceReport& r) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& run : r.runs) j.push_back({{"dt", run.dt}, {"seconds", run.runtime}, {"ok", run.ok}});
    return j;
}

inline nlohmann::json checks_to_json(const std::vector<OrderCheck>& checks) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& c : checks)
        j.push_back({{"fixture", c.fixture},
                     {"quantity", to_string(c.quantity)},
                     {"expected", c.expected},
                     {"tolerance", c.tolerance},
                     {"measured", c.measured ? nlohmann::json(*c.measured) : nlohmann::json(nullptr)},
                     {"pass", c.pass}});
    return j;
}

/// Fixed-width summary: one line per series.
inline std::string report_table(const ConvergenceReport& r) {
    std::ostringstream os;
    os << r.problem << " " << r.scheme << " " << r.policy << " (n=" << r.n << ")\n";
    os << "  " << std::left << std::setw(7) << "qty" << std::setw(10) << "region";
    for (double dt : r.dts) {
        std::ostringstream h;
        h << std::setprecision(6) << dt;
        os << std::setw(12) << h.str();
    }
    os << "order\n";
    for (const auto& s : r.series) {
        os << "  " << std::setw(7) << to_string(s.quantity) << std::setw(10) << s.region.name;
        for (double e : s.errors) {
            std::ostringstream v;
            v << std::scientific << std::setprecision(3) << e;
            os << std::setw(12) << v.str();
        }
        if (s.reported()) os << std::fixed << std::setprecision(2) << s.fit->slope << std::defaultfloat;
        else if (s.fit) os << "(" << std::fixed << std::setprecision(2) << s.fit->slope << std::defaultfloat << ", rough)";
        else os << "-";
        os << "\n";
    }
    for (const auto& run : r.runs)
        if (!run.ok) os << "  dt=" << run.dt << " failed: " << run.diagnostic << "\n";
    return os.str();
}

/// Log-log plot of every series in `r`, with a reference slope line per fitted series.
inline void write_loglog_svg(std::ostream& os, const ConvergenceReport& r) {
    constexpr double W = 640, H = 440, L = 70, R = 170, T = 30, B = 50;
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (double dt : r.dts) {
        xmin = std::min(xmin, std::log10(dt));
        xmax = std::max(xmax, std::log10(dt));
    }
    for (const auto& s : r.series)
        for (double e : s.errors)
            if (e > 0 && std::isfinite(e)) {
                ymin = std::min(ymin, std::log10(e));
                ymax = std::max(ymax, std::log10(e));
            }
    if (!std::isfinite(ymin)) ymin = -1, ymax = 0;
    xmin = std::floor(xmin * 2) / 2, xmax = std::ceil(xmax * 2) / 2;
    ymin = std::floor(ymin), ymax = std::ceil(ymax);
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;
    auto px = [&](double lx) { return L + (lx - xmin) / (xmax - xmin) * (W - L - R); };
    auto py = [&](double ly) { return H - B - (ly - ymin) / (ymax - ymin) * (H - T - B); };
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

    os << std::setprecision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << L << "\" y=\"18\">" << r.problem << " " << r.scheme << " " << r.policy << " (n=" << r.n << ")</text>\n";
    for (int d = static_cast<int>(ymin); d <= static_cast<int>(ymax); ++d) {
        os << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << py(d) << "\" y2=\"" << py(d) << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << L - 8 << "\" y=\"" << py(d) + 4 << "\" text-anchor=\"end\">1e" << d << "</text>\n";
    }
    for (double dt : r.dts) {
        const double x = px(std::log10(dt));
        os << "<line x1=\"" << x << "\" x2=\"" << x << "\" y1=\"" << T << "\" y2=\"" << H - B << "\" stroke=\"#eee\"/>\n";
        os << "<text x=\"" << x << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << dt << "</text>\n";
    }
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">dt</text>\n";

    int idx = 0;
    for (const auto& s : r.series) {
        const char* col = colors[idx % 8];
        std::ostringstream pts;
        for (std::size_t k = 0; k < r.dts.size(); ++k) {
            if (!(s.errors[k] > 0) || !std::isfinite(s.errors[k])) continue;
            const double x = px(std::log10(r.dts[k])), y = py(std::log10(s.errors[k]));
            pts << x << ',' << y << ' ';
            os << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"3\" fill=\"" << col << "\"/>\n";
        }
        os << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << col << "\"/>\n";
        if (s.fit) {
            auto line = [&](double lx) { return py(s.fit->intercept + s.fit->slope * lx); };
            os << "<line x1=\"" << px(xmin) << "\" y1=\"" << line(xmin) << "\" x2=\"" << px(xmax) << "\" y2=\"" << line(xmax)
               << "\" stroke=\"" << col << "\" stroke-dasharray=\"4 3\" opacity=\"0.5\"/>\n";
        }
        const double ly = T + 16 + 18 * idx;
        os << "<rect x=\"" << W - R + 10 << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\"" << col << "\"/>\n";
        os << "<text x=\"" << W - R + 26 << "\" y=\"" << ly << "\">" << to_string(s.quantity) << " " << s.region.name;
        if (s.fit) os << " " << std::fixed << std::setprecision(2) << s.fit->slope << std::defaultfloat << std::setprecision(6);
        os << "</text>\n";
        ++idx;
    }
    os << "</svg>\n";
}

inline nlohmann::json layer_to_json(const LayerEstimate& e) {
    nlohmann::json j{{"found", e.found}, {"amplitude", e.amplitude}};
    j["width"] = e.found ? nlohmann::json(e.width) : nlohmann::json(nullptr);
    if (!e.found) j["reason"] = e.reason;
    return j;
}

inline nlohmann::json shape_to_json(const ErrorShape& s) {
    return {{"problem", s.problem}, {"scheme", s.scheme}, {"policy", s.policy}, {"kind", to_string(s.kind)},
            {"dt", s.dt},           {"time", s.time},     {"n", s.grid.n()},    {"max_error", s.error.cwiseAbs().maxCoeff()},
            {"left", layer_to_json(s.left)}, {"right", layer_to_json(s.right)}};
}

}  // namespace orlab
