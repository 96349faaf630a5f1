#pragma once

// ETM discrimination: coincidence of an incoming temporal mode with a shaped
// probe, and seeded Monte-Carlo mode counting.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "hom.hpp"
#include "params.hpp"
#include "schmidt.hpp"

namespace etmsim {

struct ProbeMode {
    MomentumGrid grid;
    Eigen::VectorXcd samples;
    std::string label;
    bool normalized = false;
};

/// Unit-normalizes `samples` on `grid`.
inline ProbeMode make_probe(const MomentumGrid& grid, Eigen::VectorXcd samples, std::string label) {
    if (static_cast<std::size_t>(samples.size()) != grid.size())
        throw DomainError("probe sample count does not match the grid");
    const double norm = std::sqrt(samples.squaredNorm() * grid.step());
    if (!(norm > 0.0 && std::isfinite(norm))) throw DomainError("probe has zero or non-finite norm");
    samples /= norm;
    return {grid, std::move(samples), std::move(label), true};
}

inline ProbeMode probe_from_mode(const SchmidtSpectrum& spec, std::size_t n) {
    if (n >= spec.size()) throw DomainError("probe_from_mode: index out of range");
    return make_probe(spec.grid, spec.modes_phi.col(static_cast<Eigen::Index>(n)), "phi_" + std::to_string(n + 1));
}

namespace detail {

inline void require_same_grid(const SchmidtSpectrum& spec, const ProbeMode& probe) {
    if (!(spec.grid == probe.grid)) throw DomainError("probe '" + probe.label + "' lives on a different grid");
    if (!probe.normalized) throw DomainError("probe '" + probe.label + "' is not normalized");
}

inline std::complex<double> probe_overlap(const SchmidtSpectrum& spec, std::size_t n, const ProbeMode& probe,
                                          double delta) {
    const auto mode = spec.modes_phi.col(static_cast<Eigen::Index>(n));
    std::complex<double> sum = 0.0;
    for (std::size_t i = 0; i < spec.grid.size(); ++i) {
        const auto idx = static_cast<Eigen::Index>(i);
        sum += std::conj(mode(idx)) * probe.samples(idx) * std::polar(1.0, overlap_phase_argument(spec.grid[i], delta));
    }
    return sum * spec.grid.step();
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t sample_index(std::span<const double> cumulative, double u) {
    const double target = u * cumulative.back();
    std::size_t i = 0;
    while (i + 1 < cumulative.size() && cumulative[i] <= target) ++i;
    return i;
}

} // namespace detail

/// P(dl) = 1/2 + 1/2 |sum_k phi_n^*(k) probe(k) exp(-i 2 pi k dl) dk|^2.
inline CoincidenceScan probe_coincidence(const SchmidtSpectrum& spec, std::size_t n, const ProbeMode& probe,
                                         std::span<const double> deltas) {
    if (n >= spec.size()) throw DomainError("probe_coincidence: mode index out of range");
    detail::require_same_grid(spec, probe);
    if (deltas.empty()) throw DomainError("probe_coincidence: empty delta list");
    CoincidenceScan scan;
    scan.deltas.assign(deltas.begin(), deltas.end());
    scan.kappa = spec.kappa;
    scan.modes_used = 1;
    scan.spectrum_ref = "mode " + std::to_string(n + 1) + " vs probe " + probe.label;
    scan.p12.reserve(deltas.size());
    for (double d : deltas) scan.p12.push_back(0.5 + 0.5 * std::norm(detail::probe_overlap(spec, n, probe, d)));
    scan.fwhm = half_width_full(scan.deltas, scan.p12);
    scan.baseline = tail_baseline(scan.deltas, scan.p12);
    return scan;
}

struct TomographyResult {
    std::vector<double> estimates;  ///< match frequency per probe
    std::vector<double> std_errors; ///< binomial sqrt(p(1-p)/shots)
    std::vector<double> true_probs; ///< p_n of the modes the probes were built from
    std::vector<std::uint64_t> counts;
    double unmatched = 0.0; ///< frequency of shots that fired no probe (the "other" bucket)
    std::size_t shots = 0;
    std::uint64_t seed = 0;
    double threshold = 0.25;
};

/// Each shot draws an incoming mode (first M modes or, with the remaining
/// weight, a tail mode) and fires probe j when its zero-delay coincidence
/// exceeds 1/2 + threshold.
inline TomographyResult run_tomography(const SchmidtSpectrum& spec, const std::vector<ProbeMode>& probes,
                                       std::size_t shots, std::uint64_t seed, double threshold = 0.25) {
    if (shots == 0) throw DomainError("run_tomography: shots must be >= 1");
    if (probes.empty()) throw DomainError("run_tomography: no probes");
    if (probes.size() > spec.size()) throw DomainError("run_tomography: more probes than modes");
    for (const auto& p : probes) detail::require_same_grid(spec, p);

    const std::size_t m = probes.size();
    // Live modes and the zero-delay response of every probe to each of them.
    std::vector<std::size_t> live;
    for (std::size_t n = 0; n < spec.size(); ++n)
        if (spec.probs[n] > kProbabilityFloor || n < m) live.push_back(n);

    std::vector<double> head_cumulative(m + 1);
    double acc = 0.0;
    for (std::size_t n = 0; n < m; ++n) head_cumulative[n] = (acc += spec.probs[n]);
    double tail_weight = 0.0;
    std::vector<double> tail_cumulative;
    std::vector<std::size_t> tail_modes;
    for (std::size_t n : live)
        if (n >= m) {
            tail_weight += spec.probs[n];
            tail_modes.push_back(n);
            tail_cumulative.push_back(tail_weight);
        }
    head_cumulative[m] = acc + tail_weight;

    auto fires = [&](std::size_t mode, std::size_t probe) {
        return 0.5 + 0.5 * std::norm(detail::probe_overlap(spec, mode, probes[probe], 0.0)) > 0.5 + threshold;
    };
    std::vector<std::vector<char>> response(spec.size());
    auto response_of = [&](std::size_t mode) -> const std::vector<char>& {
        auto& r = response[mode];
        if (r.empty()) {
            r.resize(m);
            for (std::size_t j = 0; j < m; ++j) r[j] = fires(mode, j) ? 1 : 0;
        }
        return r;
    };

    TomographyResult result;
    result.shots = shots;
    result.seed = seed;
    result.threshold = threshold;
    result.counts.assign(m, 0);
    std::mt19937_64 rng(seed);
    std::uint64_t silent = 0;
    for (std::size_t s = 0; s < shots; ++s) {
        std::size_t bucket = detail::sample_index(head_cumulative, detail::unit_uniform(rng));
        std::size_t mode = bucket;
        if (bucket == m) {
            if (tail_modes.empty()) {
                ++silent;
                continue;
            }
            mode = tail_modes[detail::sample_index(tail_cumulative, detail::unit_uniform(rng))];
        }
        const auto& r = response_of(mode);
        bool any = false;
        for (std::size_t j = 0; j < m; ++j) {
            result.counts[j] += static_cast<std::uint64_t>(r[j]);
            any = any || r[j];
        }
        if (!any) ++silent;
    }
    result.unmatched = static_cast<double>(silent) / static_cast<double>(shots);

    for (std::size_t j = 0; j < m; ++j) {
        const double p = static_cast<double>(result.counts[j]) / static_cast<double>(shots);
        result.estimates.push_back(p);
        result.std_errors.push_back(std::sqrt(p * (1.0 - p) / static_cast<double>(shots)));
        result.true_probs.push_back(spec.probs[j]);
    }
    return result;
}

} // namespace etmsim
