// Command-line front end: audit, converge, modal, shape, stiff, lmm, replay.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "orlab/orlab.hpp"

namespace fs = std::filesystem;
using namespace orlab;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kNumerical = 3, kMismatch = 4 };

/// Thrown by a command whose --check comparison failed after all artifacts were written.
struct CheckMismatch {
    std::string what;
};

std::string fmt(double v) { return detail::fmt(v); }

std::string brief(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << v;
    return os.str();
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : ",") + fmt(x);
    return s;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
    return s;
}

/// Lower case, with anything outside [a-z0-9.-] turned into '-'.
std::string slug(std::string s) {
    for (char& c : s) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-') c = '-';
    }
    return s;
}

struct Output {
    std::string root;
    std::string label;
    bool json_out = false;
    bool table_out = false;

    void add(CLI::App* c) {
        c->add_option("--out", root, "Output root (default $ORLAB_OUTDIR or ./orlab-out)");
        c->add_option("--label", label, "Run directory name under <out>/<command>/");
        c->add_flag("--json", json_out, "Print the JSON summary");
        c->add_flag("--table", table_out, "Print a human-readable table");
    }

    ArtifactDir open(const std::string& command, const std::string& fallback_label) const {
        return ArtifactDir(root.empty() ? default_output_root() : fs::path(root), command,
                           label.empty() ? slug(fallback_label) : label);
    }
};

/// --scheme NAME or --tableau FILE.
struct SchemeChoice {
    std::string scheme;
    std::string tableau_file;

    void add(CLI::App* c, bool required = true) {
        auto* s = c->add_option("--scheme", scheme, "Built-in scheme (be, dirk2, dirk3_2s, dirk3, dirk4, wso2, midpoint)");
        auto* t = c->add_option("--tableau", tableau_file, "Butcher tableau JSON file");
        s->excludes(t);
        t->excludes(s);
        if (required) c->callback([s, t] {
            if (s->count() + t->count() == 0) throw CLI::RequiredError("--scheme or --tableau");
        });
    }

    ButcherTableau resolve() const {
        if (!tableau_file.empty()) return load_tableau_file(tableau_file);
        return builtin(scheme);
    }

    void record(json& cfg) const {
        if (!tableau_file.empty()) cfg["tableau"] = fs::absolute(tableau_file).string();
        else cfg["scheme"] = scheme;
    }
};

// ---------------------------------------------------------------------------

struct AuditCmd {
    SchemeChoice sc;
    Output out;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("audit", "Verify order, stage order, weak stage order and stability of a tableau");
        sc.add(c);
        out.add(c);
    }

    int run() const {
        ButcherTableau t = sc.resolve();
        SchemeAudit a = audit(t);
        json j = audit_to_json(t, a);
        ArtifactDir dir = out.open("audit", t.name());
        dir.write_json("audit.json", j);
        dir.write_json("tableau.json", tableau_to_json(t));
        json cfg;
        sc.record(cfg);
        dir.write_manifest("audit", cfg);
        if (out.table_out) std::cout << audit_table(t, a);
        else std::cout << j.dump(2) << "\n";
        if (!a.mismatches.empty()) throw CheckMismatch{"declared metadata disagrees with the audit: " + join(a.mismatches)};
        return kOk;
    }
};

// ---------------------------------------------------------------------------

struct ConvergeCmd {
    std::string problem;
    SchemeChoice sc;
    std::string policy = "conventional";
    std::vector<double> dts;
    double dt0 = 0.0;
    int count = 4;
    int n = 0;
    int accuracy = 4;
    std::vector<std::string> quantities;
    std::vector<std::string> regions;
    std::string norm = "max";
    bool check = false;
    bool serial = false;
    Output out;
    CLI::Option* n_opt = nullptr;
    CLI::Option* dts_opt = nullptr;
    CLI::Option* dt0_opt = nullptr;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("converge", "dt sweep with error norms and fitted orders");
        c->add_option("--problem", problem, "Problem id")->required();
        sc.add(c);
        c->add_option("--policy", policy, "conventional, mbcP or mbcstarP");
        dts_opt = c->add_option("--dts", dts, "Comma-separated dt list (halving)")->delimiter(',');
        dt0_opt = c->add_option("--dt0", dt0, "Largest dt of a halving sweep");
        c->add_option("--count", count, "Number of dts with --dt0");
        n_opt = c->add_option("--n", n, "Interior grid nodes (default 2000)");
        c->add_option("--accuracy", accuracy, "Finite-difference accuracy");
        c->add_option("--quantities", quantities, "u,u_x,u_xx,u_xxx")->delimiter(',');
        c->add_option("--regions", regions, "full, interior or lo:hi")->delimiter(',');
        c->add_option("--norm", norm, "max or l2")->check(CLI::IsMember({"max", "l2"}));
        c->add_flag("--check", check, "Compare against the expected-order fixture; exit 4 on mismatch");
        c->add_flag("--serial", serial, "Run the dts one after another");
        out.add(c);
    }

    int run() const {
        ButcherTableau t = sc.resolve();
        const AnyProblem p = find_problem(problem);
        const Method m = Method::rk(t, BCPolicy::parse(policy));

        std::optional<ExpectedOrders> fixture;
        if (check) fixture = find_fixture(expected_order_fixtures(), problem, t.name(), m.policy_label());

        SweepOptions o;
        if (fixture) o = fixture->sweep(fixture->desk_n);
        if (n_opt->count()) o.n = n;
        if (dts_opt->count()) o.dts = dts;
        else if (dt0_opt->count()) o.dts = halving(dt0, count);
        if (!quantities.empty()) {
            o.quantities.clear();
            for (const auto& q : quantities) o.quantities.push_back(parse_quantity(q));
        }
        if (!regions.empty()) {
            o.regions.clear();
            for (const auto& r : regions) o.regions.push_back(parse_region(r));
        }
        o.accuracy = accuracy;
        o.norm = norm == "l2" ? Norm::L2 : Norm::Max;
        o.parallel = !serial;
        if (fixture && o.norm != Norm::Max) throw InvalidInput("--check compares max-norm orders");

        ConvergenceReport rep = run_convergence(p, m, o);
        std::vector<OrderCheck> checks;
        if (fixture) {
            bool has_region = false;
            for (const auto& r : o.regions) has_region |= r.name == parse_region(fixture->region).name;
            if (!has_region) throw InvalidInput("--check needs region " + fixture->region);
            checks = check_orders(rep, *fixture);
        }

        ArtifactDir dir = out.open("converge", problem + "-" + t.name() + "-" + m.policy_label() + "-n" + std::to_string(o.n));
        dir.write("report.csv", [&](std::ostream& os) { write_report_csv(os, rep); });
        json summary = report_to_json(rep);
        if (fixture) summary["check"] = checks_to_json(checks);
        dir.write_json("summary.json", summary);
        dir.write("plot.svg", [&](std::ostream& os) { write_loglog_svg(os, rep); });
        dir.write_json("timing.json", timings_to_json(rep));

        json cfg{{"problem", problem}, {"policy", m.policy_label()}, {"dts", join(o.dts)}, {"n", std::to_string(o.n)},
                 {"accuracy", std::to_string(o.accuracy)}, {"norm", norm}};
        sc.record(cfg);
        std::vector<std::string> qs, rs;
        for (auto q : o.quantities) qs.push_back(to_string(q));
        for (const auto& r : o.regions) rs.push_back(r.name == "full" || r.name == "interior" ? r.name : fmt(r.lo) + ":" + fmt(r.hi));
        cfg["quantities"] = join(qs);
        cfg["regions"] = join(rs);
        cfg["check"] = check;
        dir.write_manifest("converge", cfg);

        if (out.json_out) std::cout << summary.dump(2) << "\n";
        else std::cout << report_table(rep);
        for (const auto& c : checks)
            std::cout << (c.pass ? "PASS " : "FAIL ") << c.fixture << " " << to_string(c.quantity) << " expected "
                      << c.expected << " +- " << c.tolerance << " measured "
                      << (c.measured ? brief(*c.measured) : std::string("not reportable")) << "\n";
        std::cout << "artifacts: " << dir.path().string() << "\n";

        if (!rep.all_ok()) {
            for (const auto& r : rep.runs)
                if (!r.ok) std::cerr << "dt=" << r.dt << ": " << r.diagnostic << "\n";
            return kNumerical;
        }
        for (const auto& c : checks)
            if (!c.pass) throw CheckMismatch{"fitted orders outside the expected band"};
        return kOk;
    }
};

// ---------------------------------------------------------------------------

struct ModalCmd {
    SchemeChoice sc;
    double omega = 15.0;
    double dt = 1e-3;
    int n = 2000;
    int terms = -1;
    Output out;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("modal", "Spectrum of M and eigenmode decomposition of the periodic error");
        sc.add(c);
        c->add_option("--omega", omega, "Forcing frequency");
        c->add_option("--dt", dt, "Time step");
        c->add_option("--n", n, "Interior grid nodes");
        c->add_option("--terms", terms, "Taylor terms J of the truncation error (default p+2)");
        out.add(c);
    }

    int run() const {
        ButcherTableau t = sc.resolve();
        PeriodicSetup setup = periodic_heat(n);
        ModalDecomposition dec = analyze_periodic(t, setup.op, setup.layout, setup.Ustar, omega, dt, terms);
        const Grid1D& g = setup.op.grid();

        json info;
        info["scheme"] = t.name();
        info["problem"] = setup.id;
        info["omega"] = omega;
        info["dt"] = dt;
        info["n"] = n;
        info["terms"] = dec.J;
        info["fallback_coupled"] = dec.modes.empty();
        auto cj = [](cplx v) { return json::array({v.real(), v.imag()}); };
        info["amplitudes"] = json::array();
        for (cplx a : dec.amplitudes) info["amplitudes"].push_back(cj(a));
        info["weights"] = json::array();
        for (cplx w : dec.weights) info["weights"].push_back(cj(w));
        info["psi0_max"] = dec.lte.psi0.cwiseAbs().maxCoeff();
        info["eps0_max"] = dec.eps0.cwiseAbs().maxCoeff();
        info["eps0_interior_max"] = region_norm(g, dec.eps0, Region::interior_third(), Norm::Max);
        info["layer_left"] = layer_to_json(detect_layer_width(g, dec.eps0, Side::Left));

        ArtifactDir dir = out.open("modal", t.name() + "-w" + fmt(omega) + "-dt" + fmt(dt) + "-n" + std::to_string(n));
        dir.write("modes.csv", [&](std::ostream& os) { write_modes_csv(os, g, dec); });
        dir.write_json("spectrum.json", spectrum_to_json(dec.spectrum));
        dir.write_json("modal.json", info);
        json cfg{{"omega", fmt(omega)}, {"dt", fmt(dt)}, {"n", std::to_string(n)}, {"terms", std::to_string(terms)}};
        sc.record(cfg);
        dir.write_manifest("modal", cfg);

        if (out.json_out) {
            std::cout << json{{"modal", info}, {"spectrum", spectrum_to_json(dec.spectrum)}}.dump(2) << "\n";
        } else {
            const auto& s = dec.spectrum;
            std::cout << t.name() << " omega=" << omega << " dt=" << dt << "  z=" << s.z << "\n";
            for (int i = 0; i < s.eigenvalues.size(); ++i)
                std::cout << "  lambda_" << i + 1 << " = " << s.eigenvalues(i) << (i < s.n_big ? "  (big)" : "") << "\n";
            std::cout << "  |lambda_1 - 1/(i omega)| = " << s.big_gap << ", cond(T) = " << s.cond_T << "\n";
            std::cout << "  max|eps0| = " << info["eps0_max"] << ", interior " << info["eps0_interior_max"]
                      << ", max|psi0| = " << info["psi0_max"] << "\n";
            for (const auto& v : s.violations) std::cout << "  violation: " << v << "\n";
            std::cout << "artifacts: " << dir.path().string() << "\n";
        }
        return dec.spectrum.ok() ? kOk : kNumerical;
    }
};

// ---------------------------------------------------------------------------

struct ShapeCmd {
    std::string problem = "intro-heat";
    SchemeChoice sc;
    std::string policy = "conventional";
    double dt = 1e-2;
    int n = 2000;
    std::string kind = "global";
    Output out;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("shape", "Spatial error profile (local or global) with boundary-layer estimates");
        c->add_option("--problem", problem, "Problem id");
        sc.add(c);
        c->add_option("--policy", policy, "Boundary policy");
        c->add_option("--dt", dt, "Time step");
        c->add_option("--n", n, "Interior grid nodes");
        c->add_option("--kind", kind, "local or global")->check(CLI::IsMember({"local", "global"}));
        out.add(c);
    }

    int run() const {
        ButcherTableau t = sc.resolve();
        const Method m = Method::rk(t, BCPolicy::parse(policy));
        ErrorShape s = error_shape_snapshot(find_problem(problem), m, dt, n, parse_shape_kind(kind));
        json j = shape_to_json(s);
        ArtifactDir dir = out.open("shape", problem + "-" + t.name() + "-" + m.policy_label() + "-" + kind + "-dt" + fmt(dt));
        dir.write("error.csv", [&](std::ostream& os) { write_grid_csv(os, s.grid, s.error); });
        dir.write_json("shape.json", j);
        json cfg{{"problem", problem}, {"policy", m.policy_label()}, {"dt", fmt(dt)}, {"n", std::to_string(n)}, {"kind", kind}};
        sc.record(cfg);
        dir.write_manifest("shape", cfg);
        if (out.json_out) {
            std::cout << j.dump(2) << "\n";
        } else {
            auto side = [](const char* name, const LayerEstimate& e) {
                std::cout << "  " << name << ": ";
                if (e.found) std::cout << "layer width " << e.width << ", amplitude " << e.amplitude << "\n";
                else std::cout << "none (" << e.reason << ")\n";
            };
            std::cout << problem << " " << t.name() << " " << m.policy_label() << " " << kind << " dt=" << dt
                      << "  max|err| = " << s.error.cwiseAbs().maxCoeff() << "\n";
            side("left", s.left);
            side("right", s.right);
            std::cout << "artifacts: " << dir.path().string() << "\n";
        }
        return kOk;
    }
};

// ---------------------------------------------------------------------------

struct StiffCmd {
    SchemeChoice sc;
    double lambda = -1e6;
    double dt_ref = 1e-2;
    double dt0 = 0.1;
    int count = 6;
    double phase = 1.0;
    bool fixed_lambda = false;
    bool check = false;
    Output out;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("stiff", "Prothero-Robinson one-step error orders");
        sc.add(c);
        c->add_option("--lambda", lambda, "Stiffness at --dt-ref (real, negative)");
        c->add_option("--dt-ref", dt_ref, "dt at which lambda is attained; zeta = lambda * dt-ref is held fixed");
        c->add_option("--dt0", dt0, "Largest dt");
        c->add_option("--count", count, "Number of halvings");
        c->add_option("--phase", phase, "phi(t) = cos(t + phase)");
        c->add_flag("--fixed-lambda", fixed_lambda, "Keep lambda fixed instead of zeta");
        c->add_flag("--check", check, "Compare with min(q~+1, p+1) (stiff, fixed zeta) or p+1 (non-stiff, fixed lambda); exit 4 on mismatch");
        out.add(c);
    }

    int run() const {
        ButcherTableau t = sc.resolve();
        if (!(lambda < 0)) throw InvalidInput("--lambda must be negative");
        const std::vector<double> dts = halving(dt0, count);
        PROrderSweep r = pr_order_sweep(t, lambda, dt_ref, fixed_lambda ? PRSweep::FixedLambda : PRSweep::FixedZeta, dts,
                                        AnalyticProfile::cosine(1.0, phase));
        SchemeAudit a = audit(t);
        double zmin = INFINITY, zmax = 0;
        for (std::size_t k = 0; k < dts.size(); ++k) {
            zmin = std::min(zmin, std::abs(r.lambdas[k]) * dts[k]);
            zmax = std::max(zmax, std::abs(r.lambdas[k]) * dts[k]);
        }
        std::string regime = "transition";
        std::optional<double> expected;
        if (zmax <= 1.0) {
            regime = "non-stiff";
            if (fixed_lambda) expected = a.p + 1;
        } else if (zmin >= 100.0) {
            regime = "stiff";
            if (!fixed_lambda) expected = std::min(a.q_tilde + 1, a.p + 1);
        }

        json j{{"scheme", t.name()},
               {"mode", fixed_lambda ? "fixed-lambda" : "fixed-zeta"},
               {"regime", regime},
               {"order", r.fit.slope},
               {"residual", r.fit.residual},
               {"max_relative_gap", r.max_relative_gap},
               {"p", a.p},
               {"wso", a.q_tilde}};
        j["expected"] = expected ? json(*expected) : json(nullptr);
        ArtifactDir dir = out.open("stiff", t.name() + (fixed_lambda ? "-lambda" : "-zeta") + fmt(lambda * (fixed_lambda ? 1 : dt_ref)));
        dir.write("stiff.csv", [&](std::ostream& os) {
            os << "dt,lambda,direct,series\n";
            for (std::size_t k = 0; k < dts.size(); ++k)
                os << fmt(dts[k]) << ',' << fmt(r.lambdas[k].real()) << ',' << fmt(r.direct[k]) << ',' << fmt(r.series[k]) << '\n';
        });
        dir.write_json("stiff.json", j);
        json cfg{{"lambda", fmt(lambda)}, {"dt-ref", fmt(dt_ref)}, {"dt0", fmt(dt0)}, {"count", std::to_string(count)},
                 {"phase", fmt(phase)}, {"fixed-lambda", fixed_lambda}, {"check", check}};
        sc.record(cfg);
        dir.write_manifest("stiff", cfg);

        if (out.json_out) std::cout << j.dump(2) << "\n";
        else {
            std::cout << t.name() << " " << regime << " (" << (fixed_lambda ? "lambda" : "zeta") << " fixed): order "
                      << r.fit.slope << " (residual " << r.fit.residual << ")";
            if (expected) std::cout << ", expected " << *expected;
            std::cout << "\n";
        }
        if (check) {
            if (!expected) throw InvalidInput(std::string("no expected order for a ") + regime + " sweep with fixed " + (fixed_lambda ? "lambda" : "zeta"));
            if (std::abs(r.fit.slope - *expected) > 0.2) throw CheckMismatch{"one-step order outside expected +- 0.2"};
        }
        return kOk;
    }
};

// ---------------------------------------------------------------------------

struct LmmCmd {
    int k = 3;
    std::string problem = "heat";
    std::vector<double> dts{1e-2, 5e-3, 2.5e-3, 1.25e-3};
    int n = 2000;
    double omega = 15.0;
    bool check = false;
    Output out;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("lmm", "BDF convergence sweep and companion M-spectrum");
        c->add_option("--bdf", k, "BDF order 1..4");
        c->add_option("--problem", problem, "Problem id (linear)");
        c->add_option("--dts", dts, "Comma-separated dt list")->delimiter(',');
        c->add_option("--n", n, "Interior grid nodes");
        c->add_option("--omega", omega, "Frequency for the M-spectrum");
        c->add_flag("--check", check, "Orders k +- 0.2 for u and u_x and k-1 zero eigenvalues; exit 4 on mismatch");
        out.add(c);
    }

    int run() const {
        const Method m = Method::bdf(k);
        SweepOptions o;
        o.dts = dts;
        o.n = n;
        o.quantities = {Quantity::U, Quantity::Ux, Quantity::Uxx};
        o.regions = {Region::full()};
        ConvergenceReport rep = run_convergence(problem, m, o);

        json spec = json::array();
        bool zeros_ok = true;
        for (double dt : dts) {
            LMMSpectrum s = lmm_spectrum(k, omega, dt);
            json e = json::array();
            for (int i = 0; i < s.eigenvalues.size(); ++i) e.push_back({s.eigenvalues(i).real(), s.eigenvalues(i).imag()});
            spec.push_back({{"dt", dt}, {"eigenvalues", e}, {"n_zero", s.n_zero}, {"n_big", s.n_big}});
            zeros_ok &= s.n_zero == k - 1;
        }
        ExpectedOrders f{"bdf" + std::to_string(k), problem, "bdf" + std::to_string(k), "conventional",
                         {{Quantity::U, double(k)}, {Quantity::Ux, double(k)}}, 0.2, n, dts};
        std::vector<OrderCheck> checks = check_orders(rep, f);

        json summary = report_to_json(rep);
        summary["spectrum"] = spec;
        if (check) summary["check"] = checks_to_json(checks);
        ArtifactDir dir = out.open("lmm", problem + "-bdf" + std::to_string(k) + "-n" + std::to_string(n));
        dir.write("report.csv", [&](std::ostream& os) { write_report_csv(os, rep); });
        dir.write_json("summary.json", summary);
        dir.write("plot.svg", [&](std::ostream& os) { write_loglog_svg(os, rep); });
        json cfg{{"bdf", std::to_string(k)}, {"problem", problem}, {"dts", join(dts)}, {"n", std::to_string(n)},
                 {"omega", fmt(omega)}, {"check", check}};
        dir.write_manifest("lmm", cfg);

        if (out.json_out) std::cout << summary.dump(2) << "\n";
        else {
            std::cout << report_table(rep);
            std::cout << "  zero eigenvalues of M: " << (zeros_ok ? "k-1 at every dt" : "MISMATCH") << "\n";
        }
        if (!rep.all_ok()) return kNumerical;
        if (check) {
            for (const auto& c : checks)
                if (!c.pass) throw CheckMismatch{"BDF order outside expected +- 0.2"};
            if (!zeros_ok) throw CheckMismatch{"M-spectrum does not have k-1 zero eigenvalues"};
        }
        return kOk;
    }
};

// ---------------------------------------------------------------------------

struct Cli {
    CLI::App app{"Order-reduction laboratory for Runge-Kutta time stepping of IBVPs"};
    AuditCmd audit;
    ConvergeCmd converge;
    ModalCmd modal;
    ShapeCmd shape;
    StiffCmd stiff;
    LmmCmd lmm;
    std::string manifest;
    Output replay_out;
    CLI::App* replay = nullptr;

    Cli() {
        app.set_config("--config", "", "TOML file with one table per command; flags win");
        app.require_subcommand(1);
        audit.add(app);
        converge.add(app);
        modal.add(app);
        shape.add(app);
        stiff.add(app);
        lmm.add(app);
        replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
        replay->add_option("manifest", manifest, "manifest.json")->required();
        replay_out.add(replay);
    }

    int dispatch() {
        if (app.got_subcommand("audit")) return audit.run();
        if (app.got_subcommand("converge")) return converge.run();
        if (app.got_subcommand("modal")) return modal.run();
        if (app.got_subcommand("shape")) return shape.run();
        if (app.got_subcommand("stiff")) return stiff.run();
        if (app.got_subcommand("lmm")) return lmm.run();
        return run_replay();
    }

    int run_replay();
};

int run_args(std::vector<std::string> args);

/// argv from a manifest: --key value for every config entry, --key alone for true flags.
int Cli::run_replay() {
    json m = read_json_file(manifest);
    if (!m.contains("command") || !m.contains("config")) throw InvalidInput(manifest + ": not a run manifest");
    std::vector<std::string> args{"orlab_cli", m["command"].get<std::string>()};
    for (const auto& [key, value] : m["config"].items()) {
        if (value.is_boolean()) {
            if (value.get<bool>()) args.push_back("--" + key);
        } else {
            args.push_back("--" + key);
            args.push_back(value.is_string() ? value.get<std::string>() : value.dump());
        }
    }
    const fs::path run_dir = fs::absolute(manifest).parent_path();
    args.push_back("--out");
    args.push_back(replay_out.root.empty() ? run_dir.parent_path().parent_path().string() : replay_out.root);
    args.push_back("--label");
    args.push_back(replay_out.label.empty() ? run_dir.filename().string() + "-replay" : replay_out.label);
    if (replay_out.json_out) args.push_back("--json");
    if (replay_out.table_out) args.push_back("--table");
    return run_args(args);
}

int run_args(std::vector<std::string> args) {
    auto cli = std::make_unique<Cli>();
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    try {
        cli->app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = cli->app.exit(e);
        return code == 0 ? kOk : kConfig;
    }
    try {
        return cli->dispatch();
    } catch (const CheckMismatch& e) {
        std::cerr << "check failed: " << e.what << "\n";
        return kMismatch;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    }
}

}  // namespace

int main(int argc, char** argv) { return run_args(std::vector<std::string>(argv, argv + argc)); }
