#pragma once

// Fermionic Hong-Ou-Mandel coincidence probability behind two balanced beam
// splitters:
//
//   P12(dl) = 1/2 + 1/2 sum_nm sqrt(p_n p_m) |I_nm(dl)|^2,
//   I_nm(dl) = sum_k phi_n^*(k) phi_m(k) exp(-i 2 pi k dl) dk,
//
// with dl measured in units of lambda_p.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "params.hpp"
#include "schmidt.hpp"

namespace etmsim {

struct HomOptions {
    double mode_cut = 1e-10; ///< modes with p_n <= mode_cut are dropped from the double sum
};

struct CoincidenceScan {
    std::vector<double> deltas; ///< dl / lambda_p
    std::vector<double> p12;
    double fwhm = std::numeric_limits<double>::quiet_NaN(); ///< width at half of (peak - 1/2)
    double baseline = 0.5;                                   ///< mean over the outermost |dl| samples
    double truncated_weight = 0.0;
    double kappa = 1.0;
    std::size_t modes_used = 0;
    std::string spectrum_ref;
};

inline double overlap_phase_argument(double k, double delta) { return -2.0 * std::numbers::pi * k * delta; }

inline std::complex<double> overlap_integral(const SchmidtSpectrum& spec, std::size_t n, std::size_t m, double delta) {
    if (n >= spec.size() || m >= spec.size())
        throw DomainError("overlap_integral: mode index out of range (" + std::to_string(n) + ", " +
                          std::to_string(m) + " of " + std::to_string(spec.size()) + ")");
    if (!(spec.probs[n] > kProbabilityFloor && spec.probs[m] > kProbabilityFloor))
        throw DomainError("overlap_integral: mode probability below floor");
    const auto cn = spec.modes_phi.col(static_cast<Eigen::Index>(n));
    const auto cm = spec.modes_phi.col(static_cast<Eigen::Index>(m));
    std::complex<double> sum = 0.0;
    for (std::size_t i = 0; i < spec.grid.size(); ++i) {
        const auto e = std::polar(1.0, overlap_phase_argument(spec.grid[i], delta));
        const auto idx = static_cast<Eigen::Index>(i);
        sum += std::conj(cn(idx)) * cm(idx) * e;
    }
    return sum * spec.grid.step();
}

/// Peak width at half of (peak - 1/2), linear interpolation between samples.
/// NaN when either crossing lies outside the scanned range.
inline double half_width_full(std::span<const double> deltas, std::span<const double> values) {
    if (deltas.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto peak_it = std::max_element(values.begin(), values.end());
    const auto peak = static_cast<std::size_t>(peak_it - values.begin());
    const double half = 0.5 + 0.5 * (*peak_it - 0.5);
    if (!(*peak_it > 0.5)) return std::numeric_limits<double>::quiet_NaN();

    auto crossing = [&](std::size_t a, std::size_t b) {
        const double t = (values[a] - half) / (values[a] - values[b]);
        return deltas[a] + t * (deltas[b] - deltas[a]);
    };
    double left = std::numeric_limits<double>::quiet_NaN(), right = left;
    for (std::size_t i = peak; i > 0; --i)
        if (values[i - 1] < half) {
            left = crossing(i, i - 1);
            break;
        }
    for (std::size_t i = peak; i + 1 < values.size(); ++i)
        if (values[i + 1] < half) {
            right = crossing(i, i + 1);
            break;
        }
    return right - left;
}

inline double tail_baseline(std::span<const double> deltas, std::span<const double> values) {
    if (deltas.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::vector<std::size_t> order(deltas.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(deltas[a]) > std::abs(deltas[b]); });
    const std::size_t take = std::max<std::size_t>(1, deltas.size() / 10);
    double sum = 0.0;
    for (std::size_t i = 0; i < take; ++i) sum += values[order[i]];
    return sum / static_cast<double>(take);
}

namespace detail {

struct DifferenceProfile {
    std::vector<double> h; ///< h(d) for d >= 0; h(-d) = h(d)
    double truncated_weight = 0.0;
    std::size_t modes_used = 0;
};

/// h(d) = sum_{i-j=d} |G(k_i,k_j)|^2 with G(k, k') = sum_n sqrt(p_n) phi_n^*(k) phi_n(k')
/// over the modes above `mode_cut`.
inline DifferenceProfile difference_profile(const SchmidtSpectrum& spec, double mode_cut) {
    DifferenceProfile out;
    std::vector<Eigen::Index> kept;
    for (std::size_t n = 0; n < spec.size(); ++n) {
        if (spec.probs[n] > mode_cut)
            kept.push_back(static_cast<Eigen::Index>(n));
        else
            out.truncated_weight += spec.probs[n];
    }
    out.modes_used = kept.size();

    const auto npts = static_cast<Eigen::Index>(spec.grid.size());
    Eigen::MatrixXcd weighted(npts, static_cast<Eigen::Index>(kept.size()));
    Eigen::MatrixXcd plain(npts, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t c = 0; c < kept.size(); ++c) {
        const auto col = spec.modes_phi.col(kept[c]);
        plain.col(static_cast<Eigen::Index>(c)) = col;
        weighted.col(static_cast<Eigen::Index>(c)) = col * std::sqrt(spec.probs[static_cast<std::size_t>(kept[c])]);
    }
    const Eigen::MatrixXcd g = weighted.conjugate() * plain.transpose();
    out.h.assign(static_cast<std::size_t>(npts), 0.0);
    for (Eigen::Index j = 0; j < npts; ++j)
        for (Eigen::Index i = j; i < npts; ++i) out.h[static_cast<std::size_t>(i - j)] += std::norm(g(i, j));
    return out;
}

} // namespace detail

/// Coincidence probability over `deltas`.
///
/// On a uniform grid sum_nm sqrt(p_n p_m)|I_nm|^2 = dk^2 sum_d h(d) cos(2 pi d dk dl),
/// so each delta costs O(N) once h is tabulated.
inline CoincidenceScan coincidence_scan(const SchmidtSpectrum& spec, std::span<const double> deltas,
                                        const HomOptions& options = {}, unsigned jobs = 1) {
    if (deltas.empty()) throw DomainError("coincidence_scan: empty delta list");
    for (double d : deltas)
        if (!std::isfinite(d)) throw DomainError("coincidence_scan: non-finite delta");

    CoincidenceScan scan;
    scan.deltas.assign(deltas.begin(), deltas.end());
    scan.kappa = spec.kappa;
    scan.spectrum_ref = std::string(to_string(spec.method)) + " n=" + std::to_string(spec.grid.size()) +
                        " kappa=" + std::to_string(spec.kappa);

    const auto profile = detail::difference_profile(spec, options.mode_cut);
    scan.truncated_weight = profile.truncated_weight;
    scan.modes_used = profile.modes_used;
    const std::vector<double>& h = profile.h;
    const double dk = spec.grid.step();

    scan.p12.resize(deltas.size());
    parallel_for(deltas.size(), jobs, [&](std::size_t s) {
        const double delta = deltas[s];
        double sum = h[0];
        for (std::size_t d = 1; d < h.size(); ++d)
            sum += 2.0 * h[d] * std::cos(2.0 * std::numbers::pi * static_cast<double>(d) * dk * delta);
        scan.p12[s] = 0.5 + 0.5 * sum * dk * dk;
    });

    scan.fwhm = half_width_full(scan.deltas, scan.p12);
    scan.baseline = tail_baseline(scan.deltas, scan.p12);
    return scan;
}

/// Linearly spaced samples a, ..., b (count >= 1).
inline std::vector<double> linspace(double a, double b, std::size_t count) {
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = a;
        return out;
    }
    for (std::size_t i = 0; i < count; ++i)
        out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1);
    return out;
}

/// Gaussian-equivalent peak width 2 sqrt(2 ln 2) / (2 pi s), where s is the
/// standard deviation of k - k' under |G(k, k')|^2. For a single Gaussian mode
/// of momentum spread sigma this is 2 sqrt(ln 2) / (2 pi sigma).
inline double estimated_peak_width(const SchmidtSpectrum& spec, const HomOptions& options = {}) {
    const auto profile = detail::difference_profile(spec, options.mode_cut);
    const double dk = spec.grid.step();
    double w = profile.h[0], m2 = 0.0;
    for (std::size_t d = 1; d < profile.h.size(); ++d) {
        const double x = static_cast<double>(d) * dk;
        w += 2.0 * profile.h[d];
        m2 += 2.0 * profile.h[d] * x * x;
    }
    const double s = std::sqrt(std::max(m2 / w, 1e-300));
    return 2.0 * std::sqrt(2.0 * std::numbers::ln2) / (2.0 * std::numbers::pi * s);
}

/// Symmetric default scan range of +-5 estimated peak widths, kept inside the
/// alias-free band |dl| < 1 / (2 dk) of the momentum grid.
inline std::vector<double> default_deltas(const SchmidtSpectrum& spec, std::size_t count = 201,
                                          const HomOptions& options = {}) {
    const double reach = std::min(5.0 * estimated_peak_width(spec, options), 0.45 / spec.grid.step());
    return linspace(-reach, reach, count);
}

struct WidthRow {
    double T_I = 0.0;
    double sigma_e = 0.0;
    double kappa = 0.0;
    double fwhm = 0.0;
};

/// (kappa, fwhm) table sorted by kappa; each entry is scanned over `deltas`,
/// or over its default range when `deltas` is empty.
inline std::vector<WidthRow> peak_width_vs_kappa(
    const std::vector<std::pair<ControlParams, SchmidtSpectrum>>& sweep, std::span<const double> deltas = {},
    const HomOptions& options = {}) {
    if (sweep.size() < 2) throw DomainError("peak_width_vs_kappa needs at least two entries");
    std::vector<WidthRow> rows;
    rows.reserve(sweep.size());
    for (const auto& [params, spec] : sweep) {
        const std::vector<double> own = deltas.empty() ? default_deltas(spec, 201, options) : std::vector<double>{};
        const auto scan = coincidence_scan(spec, deltas.empty() ? std::span<const double>(own) : deltas, options);
        rows.push_back({params.T_I, params.sigma_e, spec.kappa, scan.fwhm});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const WidthRow& a, const WidthRow& b) { return a.kappa < b.kappa; });
    return rows;
}

} // namespace etmsim
