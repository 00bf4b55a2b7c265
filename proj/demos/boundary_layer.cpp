// Global error of DIRK2 on the introductory heat problem: the boundary layer
// shrinks like sqrt(dt) while its amplitude drops like dt^2.
//
//   demo_boundary_layer [n] [csv-dir]

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "orlab/orlab.hpp"

int main(int argc, char** argv) {
    using namespace orlab;
    const int n = argc > 1 ? std::atoi(argv[1]) : 2000;
    const std::filesystem::path dir = argc > 2 ? argv[2] : "";

    try {
        const Method m = Method::rk(builtin("dirk2"));
        const AnyProblem p = find_problem("intro-heat");

        std::cout << "DIRK2, intro-heat, n=" << n << "\n";
        std::cout << std::setw(10) << "dt" << std::setw(14) << "max|err|" << std::setw(14) << "amplitude"
                  << std::setw(10) << "ratio" << std::setw(12) << "width" << std::setw(10) << "ratio" << "\n";
        double prev_amp = 0, prev_width = 0;
        for (double dt : halving(1e-2, 4)) {
            ErrorShape s = error_shape_snapshot(p, m, dt, n, ShapeKind::Global);
            if (!dir.empty()) {
                std::filesystem::create_directories(dir);
                std::ofstream os(dir / ("dirk2-dt" + detail::fmt(dt) + ".csv"));
                write_grid_csv(os, s.grid, s.error);
            }
            std::cout << std::setw(10) << dt << std::setw(14) << std::setprecision(4) << s.error.cwiseAbs().maxCoeff();
            if (!s.left.found) {
                std::cout << "  no layer: " << s.left.reason << "\n";
                continue;
            }
            std::cout << std::setw(14) << s.left.amplitude << std::setw(10)
                      << (prev_amp > 0 ? prev_amp / s.left.amplitude : NAN) << std::setw(12) << s.left.width
                      << std::setw(10) << (prev_width > 0 ? prev_width / s.left.width : NAN) << "\n";
            prev_amp = s.left.amplitude;
            prev_width = s.left.width;
        }
        std::cout << "expected ratios: amplitude 4, width sqrt(2) = 1.414\n";
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 0;
}
