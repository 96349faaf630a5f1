#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "amplitude.hpp"
#include "hom.hpp"
#include "schmidt.hpp"

namespace etmsim {

/// 17 significant digits: round-trips every double.
inline std::string format17(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string amplitude_csv(const PairAmplitude& amp) {
    std::ostringstream out;
    out << "k1,k2,re,im\n";
    for (std::size_t i = 0; i < amp.grid.size(); ++i)
        for (std::size_t j = 0; j < amp.grid.size(); ++j) {
            const auto v = amp.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            out << format17(amp.grid[i]) << ',' << format17(amp.grid[j]) << ',' << format17(v.real()) << ','
                << format17(v.imag()) << '\n';
        }
    return out.str();
}

inline std::string spectrum_csv(const SchmidtSpectrum& spec) {
    std::ostringstream out;
    out << "n,p_n\n";
    for (std::size_t n = 0; n < spec.size(); ++n) out << n + 1 << ',' << format17(spec.probs[n]) << '\n';
    return out.str();
}

/// k followed by re/im columns of psi_n and phi_n for the first `modes` modes.
inline std::string modes_csv(const SchmidtSpectrum& spec, std::size_t modes) {
    modes = std::min(modes, spec.size());
    std::ostringstream out;
    out << 'k';
    for (std::size_t n = 1; n <= modes; ++n) out << ",psi_" << n << "_re,psi_" << n << "_im";
    for (std::size_t n = 1; n <= modes; ++n) out << ",phi_" << n << "_re,phi_" << n << "_im";
    out << '\n';
    for (std::size_t i = 0; i < spec.grid.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out << format17(spec.grid[i]);
        for (std::size_t n = 0; n < modes; ++n) {
            const auto v = spec.modes_psi(r, static_cast<Eigen::Index>(n));
            out << ',' << format17(v.real()) << ',' << format17(v.imag());
        }
        for (std::size_t n = 0; n < modes; ++n) {
            const auto v = spec.modes_phi(r, static_cast<Eigen::Index>(n));
            out << ',' << format17(v.real()) << ',' << format17(v.imag());
        }
        out << '\n';
    }
    return out.str();
}

inline std::string scan_csv(const CoincidenceScan& scan) {
    std::ostringstream out;
    out << "delta_over_lambda_p,p12\n";
    for (std::size_t i = 0; i < scan.deltas.size(); ++i)
        out << format17(scan.deltas[i]) << ',' << format17(scan.p12[i]) << '\n';
    return out.str();
}

} // namespace etmsim
