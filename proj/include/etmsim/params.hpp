#pragma once

// Dimensionless unit system and control parameters.
//
// Momenta are measured in units of the polariton wavevector k_p = 2*pi/lambda_p
// and taken relative to the mean electron momentum k0; lengths are measured in
// units of lambda_p.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace etmsim {

inline constexpr double kComptonWavelengthNm = 2.42631023867e-3;

/// Relative edge weight below which the q-quadrature window is considered to
/// cover the coupling function.
inline constexpr double kChiEdgeTolerance = 1e-6;

struct PhysicalSetup {
    double L = 1000.0;                         ///< film length along propagation [nm]
    double lambda_p = 100.0;                   ///< polariton wavelength [nm]
    double beta = 0.5;                         ///< v / c
    double lambda_C = kComptonWavelengthNm;    ///< electron Compton wavelength [nm]
    double y0 = 5.0;                           ///< beam-film distance [nm]
    double sigma_y = 0.5;                      ///< [nm]
    std::optional<double> sigma_x;             ///< [1/nm], defaults to 2*pi/lambda_p
    double d = 1.0;                            ///< film thickness [nm]

    double resolved_sigma_x() const {
        return sigma_x.value_or(2.0 * std::numbers::pi / lambda_p);
    }

    std::vector<std::string> validate() const {
        std::vector<std::string> issues;
        auto positive = [&](std::string_view name, double v) {
            if (!(std::isfinite(v) && v > 0.0))
                issues.push_back("setup." + std::string(name) + " must be a positive length (got " +
                                 std::to_string(v) + ")");
        };
        positive("L", L);
        positive("lambda_p", lambda_p);
        positive("lambda_C", lambda_C);
        positive("y0", y0);
        positive("sigma_y", sigma_y);
        positive("sigma_x", resolved_sigma_x());
        positive("d", d);
        if (!(std::isfinite(beta) && beta > 0.0 && beta < 1.0))
            issues.push_back("setup.beta must satisfy 0 < beta < 1 (got " + std::to_string(beta) + ")");
        return issues;
    }
};

/// T_I = L * lambda_C / (beta * lambda_p^2).
inline double dimensionless_time(const PhysicalSetup& setup) {
    throw_if_issues(setup.validate());
    return setup.L * setup.lambda_C / (setup.beta * setup.lambda_p * setup.lambda_p);
}

/// Factor c_s such that the sinc argument on dimensionless momenta reads
/// c_s * q * (k1 - k2). From hbar*T/m = T_I * lambda_p^2 / (2 pi) and
/// k = k~ * 2 pi / lambda_p.
inline double sinc_argument_scale(double T_I) {
    if (!(T_I > 0.0)) throw DomainError("sinc_argument_scale: T_I must be positive");
    return 2.0 * std::numbers::pi * T_I;
}

/// Unnormalized sinc, sin(x)/x with sinc(0) = 1.
inline double sinc(double x) {
    if (std::abs(x) < 1e-4) {
        const double x2 = x * x;
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
    }
    return std::sin(x) / x;
}

enum class ChiKind { lorentzian_pair, gaussian_pair, flat_band };

inline std::string_view to_string(ChiKind kind) {
    switch (kind) {
    case ChiKind::lorentzian_pair: return "lorentzian-pair";
    case ChiKind::gaussian_pair: return "gaussian-pair";
    case ChiKind::flat_band: return "flat-band";
    }
    return "?";
}

inline std::optional<ChiKind> parse_chi_kind(std::string_view s) {
    if (s == "lorentzian-pair") return ChiKind::lorentzian_pair;
    if (s == "gaussian-pair") return ChiKind::gaussian_pair;
    if (s == "flat-band") return ChiKind::flat_band;
    return std::nullopt;
}

/// Effective longitudinal exchange coupling chi(q~).
///
/// Built-in kinds are a symmetric pair of lobes at +-center with half-width
/// `width`, weighted by the evanescent factor exp(-4 pi |q~| y0/lambda_p).
/// A custom callable, when set, replaces the built-in form entirely.
struct ChiModel {
    ChiKind kind = ChiKind::lorentzian_pair;
    double center = 1.0;
    double width = 0.1;
    double evanescent_scale = 0.05;
    std::function<std::complex<double>(double)> custom;

    bool is_real() const { return !custom; }

    double lobe(double x) const {
        switch (kind) {
        case ChiKind::lorentzian_pair: return width * width / (x * x + width * width);
        case ChiKind::gaussian_pair: return std::exp(-0.5 * x * x / (width * width));
        case ChiKind::flat_band: return std::abs(x) <= width ? 1.0 : 0.0;
        }
        return 0.0;
    }

    double evanescent_weight(double q) const {
        return std::exp(-4.0 * std::numbers::pi * std::abs(q) * evanescent_scale);
    }

    /// Built-in real value; only meaningful when is_real().
    double real_value(double q) const {
        return (lobe(q - center) + lobe(q + center)) * evanescent_weight(q);
    }

    std::complex<double> operator()(double q) const {
        if (custom) return custom(q);
        return real_value(q);
    }

    std::vector<std::string> validate() const {
        std::vector<std::string> issues;
        if (!(std::isfinite(width) && width > 0.0))
            issues.push_back("chi.width must be positive (got " + std::to_string(width) + ")");
        if (!(std::isfinite(center) && center >= 0.0))
            issues.push_back("chi.center must be non-negative (got " + std::to_string(center) + ")");
        if (!(std::isfinite(evanescent_scale) && evanescent_scale >= 0.0))
            issues.push_back("chi.evanescent_scale must be non-negative (got " +
                             std::to_string(evanescent_scale) + ")");
        return issues;
    }
};

/// Uniform grid symmetric about zero: k_i = W (2i - (n-1)) / (n-1).
class MomentumGrid {
public:
    MomentumGrid() = default;
    MomentumGrid(std::size_t n, double half_window) : n_(n), half_window_(half_window) {
        if (n < 2) throw DomainError("MomentumGrid needs at least two points");
        if (!(half_window > 0.0)) throw DomainError("MomentumGrid half window must be positive");
    }

    std::size_t size() const { return n_; }
    double half_window() const { return half_window_; }
    double step() const { return 2.0 * half_window_ / static_cast<double>(n_ - 1); }

    double operator[](std::size_t i) const {
        return half_window_ * (2.0 * static_cast<double>(i) - static_cast<double>(n_ - 1)) /
               static_cast<double>(n_ - 1);
    }

    std::vector<double> points() const {
        std::vector<double> out(n_);
        for (std::size_t i = 0; i < n_; ++i) out[i] = (*this)[i];
        return out;
    }

    friend bool operator==(const MomentumGrid&, const MomentumGrid&) = default;

private:
    std::size_t n_ = 0;
    double half_window_ = 0.0;
};

struct GridSpec {
    std::size_t n_points = 800;
    std::optional<double> half_window;    ///< default 5 sigma_e + 3 center
    std::size_t q_points = 1024;
    std::optional<double> q_half_window;  ///< default: see resolved_q_half_window

    std::vector<std::string> validate() const {
        std::vector<std::string> issues;
        if (n_points < 8) issues.push_back("grid.n_points must be >= 8 (got " + std::to_string(n_points) + ")");
        if (q_points < 3) issues.push_back("grid.q_points must be >= 3 (got " + std::to_string(q_points) + ")");
        if (half_window && !(std::isfinite(*half_window) && *half_window > 0.0))
            issues.push_back("grid.half_window must be positive");
        if (q_half_window && !(std::isfinite(*q_half_window) && *q_half_window > 0.0))
            issues.push_back("grid.q_half_window must be positive");
        return issues;
    }
};

/// Trapezoid nodes on [-W, W], symmetric about zero.
inline std::vector<double> quadrature_nodes(double half_window, std::size_t count) {
    MomentumGrid g(count, half_window);
    return g.points();
}

/// |chi(+-W)| relative to the largest |chi| over the quadrature nodes.
inline double chi_edge_ratio(const ChiModel& chi, double half_window, std::size_t q_points) {
    double peak = 0.0;
    for (double q : quadrature_nodes(half_window, q_points)) peak = std::max(peak, std::abs(chi(q)));
    // Lobe maxima can fall between nodes.
    if (chi.center <= half_window) peak = std::max(peak, std::abs(chi(chi.center)));
    if (peak == 0.0) return std::numeric_limits<double>::infinity();
    const double edge = std::max(std::abs(chi(half_window)), std::abs(chi(-half_window)));
    return edge / peak;
}

struct ControlParams {
    double T_I = 1e-3;
    double sigma_e = 2.0;
    ChiModel chi;
    GridSpec grid;

    std::vector<std::string> validate() const {
        std::vector<std::string> issues;
        if (!(std::isfinite(T_I) && T_I > 0.0))
            issues.push_back("T_I must be positive (got " + std::to_string(T_I) + ")");
        if (!(std::isfinite(sigma_e) && sigma_e > 0.0))
            issues.push_back("sigma_e must be positive (got " + std::to_string(sigma_e) + ")");
        for (auto& s : chi.validate()) issues.push_back(std::move(s));
        for (auto& s : grid.validate()) issues.push_back(std::move(s));
        return issues;
    }

    double resolved_half_window() const {
        return grid.half_window.value_or(5.0 * sigma_e + 3.0 * chi.center);
    }

    /// Starts from 3 center + 5 width and widens by 1.25x until the coupling
    /// has decayed below kChiEdgeTolerance at the window edge.
    double resolved_q_half_window() const {
        if (grid.q_half_window) return *grid.q_half_window;
        double w = 3.0 * chi.center + 5.0 * chi.width;
        for (int iter = 0; iter < 200; ++iter, w *= 1.25) {
            if (chi_edge_ratio(chi, w, grid.q_points) < kChiEdgeTolerance) return w;
        }
        throw ConfigurationError("could not find a q window where chi decays below " +
                                 std::to_string(kChiEdgeTolerance) + " of its peak");
    }

    MomentumGrid momentum_grid() const { return {grid.n_points, resolved_half_window()}; }
};

} // namespace etmsim
