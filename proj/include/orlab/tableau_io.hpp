#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "orlab/tableau.hpp"

namespace orlab {

namespace detail {

/// Significant digits in a decimal literal ("0.4358665215" -> 10).
inline int significant_digits(const std::string& s) {
    int digits = 0;
    bool leading = true;
    for (char ch : s) {
        if (ch == 'e' || ch == 'E') break;
        if (ch < '0' || ch > '9') continue;
        if (leading && ch == '0') continue;
        leading = false;
        ++digits;
    }
    return digits;
}

struct CoefficientReader {
    int min_long_digits = 0;

    double operator()(const nlohmann::json& v) {
        if (v.is_number()) return v.get<double>();
        if (!v.is_string()) throw InvalidInput("tableau JSON: coefficient must be a decimal string or number");
        const std::string s = v.get<std::string>();
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(s, &used);
        } catch (const std::exception&) {
            throw InvalidInput("tableau JSON: bad coefficient '" + s + "'");
        }
        if (used != s.size()) throw InvalidInput("tableau JSON: bad coefficient '" + s + "'");
        // Short literals ("1", "0.25") are taken as exact; long ones as rounded.
        int d = significant_digits(s);
        if (d >= 6 && (min_long_digits == 0 || d < min_long_digits)) min_long_digits = d;
        return x;
    }

    double inferred_tolerance() const {
        if (min_long_digits == 0) return 1e-12;
        return std::max(1e-12, std::pow(10.0, 2 - min_long_digits));
    }
};

inline std::string exact_decimal(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace detail

/// Parse the tableau exchange format. Coefficients are decimal strings; A may be flat (row-major) or nested.
inline ButcherTableau tableau_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidInput("tableau JSON: expected an object");
    for (const char* key : {"A", "b"})
        if (!j.contains(key)) throw InvalidInput(std::string("tableau JSON: missing field ") + key);
    detail::CoefficientReader read;
    const auto& jb = j.at("b");
    if (!jb.is_array() || jb.empty()) throw InvalidInput("tableau JSON: b must be a non-empty array");
    const int s = j.contains("s") ? j.at("s").get<int>() : static_cast<int>(jb.size());
    if (s < 1 || static_cast<int>(jb.size()) != s) throw InvalidInput("tableau JSON: b must have length s");

    RealMatrix A(s, s);
    const auto& jA = j.at("A");
    if (!jA.is_array()) throw InvalidInput("tableau JSON: A must be an array");
    if (static_cast<int>(jA.size()) == s * s && !jA.front().is_array()) {
        for (int i = 0; i < s * s; ++i) A(i / s, i % s) = read(jA[i]);
    } else if (static_cast<int>(jA.size()) == s) {
        for (int i = 0; i < s; ++i) {
            if (!jA[i].is_array() || static_cast<int>(jA[i].size()) != s)
                throw InvalidInput("tableau JSON: A must be s x s");
            for (int k = 0; k < s; ++k) A(i, k) = read(jA[i][k]);
        }
    } else {
        throw InvalidInput("tableau JSON: A must have s*s entries");
    }
    RealVector b(s);
    for (int i = 0; i < s; ++i) b(i) = read(jb[i]);

    std::optional<RealVector> c;
    if (j.contains("c")) {
        const auto& jc = j.at("c");
        if (!jc.is_array() || static_cast<int>(jc.size()) != s)
            throw InvalidInput("tableau JSON: c must have length s");
        RealVector cv(s);
        for (int i = 0; i < s; ++i) cv(i) = read(jc[i]);
        c = cv;
    }
    std::optional<DeclaredMetadata> declared;
    if (j.contains("declared")) {
        const auto& d = j.at("declared");
        declared = DeclaredMetadata{d.value("p", 0), d.value("q", 0), d.value("wso", 0),
                                    d.value("stiffly_accurate", false)};
    }
    double tol = j.contains("tol") ? read(j.at("tol")) : read.inferred_tolerance();
    return ButcherTableau(j.value("name", std::string("custom")), A, b, c, declared, tol);
}

inline nlohmann::json tableau_to_json(const ButcherTableau& t) {
    using detail::exact_decimal;
    nlohmann::json j;
    j["name"] = t.name();
    j["s"] = t.stages();
    nlohmann::json A = nlohmann::json::array();
    for (int i = 0; i < t.stages(); ++i)
        for (int k = 0; k < t.stages(); ++k) A.push_back(exact_decimal(t.A()(i, k)));
    j["A"] = A;
    j["b"] = nlohmann::json::array();
    j["c"] = nlohmann::json::array();
    for (int i = 0; i < t.stages(); ++i) {
        j["b"].push_back(exact_decimal(t.b()(i)));
        j["c"].push_back(exact_decimal(t.c()(i)));
    }
    if (const auto& d = t.declared())
        j["declared"] = {{"p", d->p}, {"q", d->q}, {"wso", d->wso}, {"stiffly_accurate", d->stiffly_accurate}};
    j["tol"] = exact_decimal(t.tolerance());
    return j;
}

inline ButcherTableau load_tableau_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open tableau file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput("tableau file " + path + ": " + e.what());
    }
    return tableau_from_json(j);
}

/// Built-in name or path to a JSON file.
inline ButcherTableau resolve_tableau(const std::string& name_or_path) {
    if (auto t = find_builtin(name_or_path)) return *t;
    return load_tableau_file(name_or_path);
}

inline nlohmann::json audit_to_json(const ButcherTableau& t, const SchemeAudit& a) {
    nlohmann::json j;
    j["name"] = t.name();
    j["s"] = t.stages();
    j["p"] = a.p;
    j["q"] = a.q;
    j["wso"] = a.q_tilde;
    j["eigenvector_criterion_order"] = a.q_eig;
    j["stiffly_accurate"] = a.stiffly_accurate;
    j["a_invertible"] = a.a_invertible;
    if (a.a_invertible) j["bTAinv_e"] = a.bTAinv_e;
    else j["bTAinv_e"] = nullptr;
    j["l_stable_estimate"] = a.l_stable_estimate;
    j["a_stable_sampled"] = a.a_stable_sampled;
    j["eig_A_nonneg_real"] = a.eig_A_nonneg_real;
    j["mismatches"] = a.mismatches;
    if (const auto& d = t.declared())
        j["declared"] = {{"p", d->p}, {"q", d->q}, {"wso", d->wso}, {"stiffly_accurate", d->stiffly_accurate}};
    return j;
}

inline std::string audit_table(const ButcherTableau& t, const SchemeAudit& a) {
    std::ostringstream os;
    auto row = [&](const std::string& k, const std::string& v) {
        os << "  " << k << std::string(k.size() < 22 ? 22 - k.size() : 1, ' ') << v << "\n";
    };
    auto yn = [](bool b) { return std::string(b ? "yes" : "no"); };
    os << "scheme " << t.name() << " (s=" << t.stages() << ")\n";
    row("order p", std::to_string(a.p));
    row("stage order q", std::to_string(a.q));
    row("weak stage order q~", std::to_string(a.q_tilde));
    row("eigvec criterion", std::to_string(a.q_eig));
    row("stiffly accurate", yn(a.stiffly_accurate));
    row("A invertible", yn(a.a_invertible));
    {
        std::ostringstream v;
        if (a.a_invertible) v << a.bTAinv_e;
        else v << "n/a";
        row("b^T A^-1 e", v.str());
    }
    {
        std::ostringstream v;
        v << a.l_stable_estimate;
        row("|R(-1e8)|", v.str());
    }
    row("A-stable (sampled)", yn(a.a_stable_sampled));
    row("Re eig(A) >= 0", yn(a.eig_A_nonneg_real));
    if (!a.mismatches.empty()) {
        std::string m;
        for (auto& s : a.mismatches) m += (m.empty() ? "" : ", ") + s;
        row("DECLARED MISMATCH", m);
    }
    return os.str();
}

}  // namespace orlab
