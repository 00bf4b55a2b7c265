#pragma once

#include <cmath>
#include <vector>

#include "orlab/errors.hpp"

namespace orlab {

/// Least-squares line through (log10 dt, log10 err).
struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // rms misfit in decades
    int points = 0;
};

inline LogLogFit fit_loglog(const std::vector<double>& dt, const std::vector<double>& err) {
    if (dt.size() != err.size()) throw InvalidInput("fit_loglog: size mismatch");
    std::vector<double> x, y;
    for (std::size_t i = 0; i < dt.size(); ++i) {
        if (!(dt[i] > 0) || !(err[i] > 0) || !std::isfinite(err[i])) continue;
        x.push_back(std::log10(dt[i]));
        y.push_back(std::log10(err[i]));
    }
    LogLogFit f;
    f.points = static_cast<int>(x.size());
    if (f.points < 2) throw InvalidInput("fit_loglog: need at least two positive samples");
    double mx = 0, my = 0;
    for (int i = 0; i < f.points; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= f.points;
    my /= f.points;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < f.points; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw InvalidInput("fit_loglog: dt values must differ");
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0;
    for (int i = 0; i < f.points; ++i) {
        double r = y[i] - (f.intercept + f.slope * x[i]);
        ss += r * r;
    }
    f.residual = std::sqrt(ss / f.points);
    return f;
}

}  // namespace orlab
