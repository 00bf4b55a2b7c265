// Eigenvalues of the derivative coefficient matrix for a DIRK scheme under
// time-periodic forcing, and how well the composite expansion reproduces
// the numerically solved boundary-layer modes.
//
//   demo_spectrum [scheme] [omega]

#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>

#include "orlab/orlab.hpp"

int main(int argc, char** argv) {
    using namespace orlab;
    const std::string scheme = argc > 1 ? argv[1] : "dirk3";
    const double omega = argc > 2 ? std::atof(argv[2]) : 15.0;

    try {
        const ButcherTableau t = builtin(scheme);
        const PeriodicSetup setup = periodic_heat(1000);
        std::cout << t.name() << ", omega = " << omega << ", 1/(i omega) = " << cplx(1.0) / cplx(0.0, omega) << "\n";

        for (double dt : {1e-2, 5e-3, 2.5e-3}) {
            ModalDecomposition dec = analyze_periodic(t, setup.op, setup.layout, setup.Ustar, omega, dt);
            const SpectrumReport& s = dec.spectrum;
            std::cout << "\ndt = " << dt << "  (threshold " << std::setprecision(3) << s.threshold << ")\n";
            std::cout << "  big:   " << std::setprecision(8) << s.big_eig << "  gap " << std::setprecision(3) << s.big_gap
                      << "\n";
            for (const auto& e : s.small_eigs)
                std::cout << "  small: " << std::setprecision(6) << e.lambda << "  dt*mu0 = " << e.predicted
                          << "  |lambda/dt - mu0| = " << std::setprecision(3) << e.mismatch << "\n";

            if (dec.modes.empty()) {
                std::cout << "  M near-defective, coupled solve used\n";
                continue;
            }
            CompositeExpansion ce = composite_expansion(dec, setup.op, setup.Ustar, 2);
            for (const auto& cm : ce.modes) {
                const auto& psi = dec.modes[cm.index];
                const double rel = (cm.composite - psi).cwiseAbs().maxCoeff() / psi.cwiseAbs().maxCoeff();
                std::cout << "  mode " << cm.index + 1 << ": composite vs solved, relative max error " << rel << "\n";
            }
        }
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 0;
}
