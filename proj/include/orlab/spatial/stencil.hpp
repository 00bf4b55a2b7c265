#pragma once

#include <vector>

#include "orlab/errors.hpp"

namespace orlab {

/**
 * Finite-difference weights for the m-th derivative at x0 from nodes xs (Fornberg 1988).
 * Returns weights for derivative order m only.
 */
inline std::vector<double> fd_weights(double x0, const std::vector<double>& xs, int m) {
    const int n = static_cast<int>(xs.size());
    if (m < 0 || n <= m) throw InvalidInput("fd_weights: need more nodes than the derivative order");
    std::vector<std::vector<double>> c(n, std::vector<double>(m + 1, 0.0));
    double c1 = 1.0, c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        int mn = std::min(i, m);
        double c2 = 1.0, c5 = c4;
        c4 = xs[i] - x0;
        for (int j = 0; j < i; ++j) {
            double c3 = xs[i] - xs[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = c[i][m];
    return w;
}

/// Stencil of integer offsets (relative to the target node) with weights for unit spacing.
struct Stencil {
    int first = 0;  // offset of weights[0]
    std::vector<double> weights;
};

/**
 * Stencil for the k-th derivative with formal accuracy `accuracy` at node i of a grid with
 * nodes 0..N-1: centered when it fits, otherwise shifted to stay inside with the same point count.
 */
inline Stencil derivative_stencil(int k, int accuracy, int i, int N) {
    if (k < 0 || k > 4) throw InvalidInput("derivative_stencil: derivative order must be 0..4");
    if (accuracy < 1) throw InvalidInput("derivative_stencil: accuracy must be positive");
    if (k == 0) return {0, {1.0}};
    // Centered stencils reach accuracy with 2*floor((k+1)/2)-1+accuracy points; one-sided ones need k+accuracy.
    int centered = 2 * ((k + 1) / 2) - 1 + accuracy;
    int half = centered / 2;
    int first, npts;
    if (i - half >= 0 && i + half <= N - 1) {
        first = -half;
        npts = centered;
    } else {
        npts = k + accuracy;
        if (npts > N) throw InvalidInput("grid too small for the finite-difference stencil");
        int lo = i - npts / 2;
        lo = std::max(0, std::min(lo, N - npts));
        first = lo - i;
    }
    std::vector<double> xs(npts);
    for (int p = 0; p < npts; ++p) xs[p] = first + p;
    return {first, fd_weights(0.0, xs, k)};
}

}  // namespace orlab
