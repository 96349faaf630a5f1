#pragma once

// Pair amplitude
//
//   Phi(k1, k2) = N^{-1/2} sum_q w_q sinc[c_s q (k1 - k2)] a1(k1 - q) chi(q) a2(k2 + q)
//
// evaluated on a MomentumGrid with a trapezoid rule over the exchange momentum q.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <type_traits>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "params.hpp"

namespace etmsim {

/// Gaussian single-electron momentum amplitude, |a|^2 has standard deviation sigma_e.
struct SingleElectronAmplitude {
    double sigma_e = 1.0;
    double center = 0.0;

    double operator()(double k) const {
        const double x = k - center;
        return std::pow(2.0 * std::numbers::pi * sigma_e * sigma_e, -0.25) *
               std::exp(-x * x / (4.0 * sigma_e * sigma_e));
    }

    /// Samples on `grid`, rescaled so that sum |a|^2 dk = 1.
    Eigen::VectorXd sample(const MomentumGrid& grid) const {
        Eigen::VectorXd v(static_cast<Eigen::Index>(grid.size()));
        for (std::size_t i = 0; i < grid.size(); ++i) v(static_cast<Eigen::Index>(i)) = (*this)(grid[i]);
        v /= std::sqrt(v.squaredNorm() * grid.step());
        return v;
    }
};

struct PairAmplitude {
    MomentumGrid grid;
    Eigen::MatrixXcd values;    ///< (i, j) = Phi(k1_i, k2_j)
    double norm_constant = 1.0; ///< N^{-1/2} applied to the raw quadrature sum
    bool real_valued = true;    ///< imaginary parts are identically zero

    double step() const { return grid.step(); }

    /// sum |Phi|^2 dk^2
    double norm_squared() const { return values.squaredNorm() * step() * step(); }
};

/// Rescales `values` to unit discrete L2 norm. Returns the applied factor.
inline double normalize_amplitude(Eigen::MatrixXcd& values, double step) {
    const double s = values.squaredNorm() * step * step;
    if (!(std::isfinite(s) && s > 0.0)) throw NumericalError("pair amplitude has zero or non-finite norm");
    const double factor = 1.0 / std::sqrt(s);
    values *= factor;
    return factor;
}

namespace detail {

template <class Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Scalar, class A1, class A2, class Chi>
Eigen::MatrixXcd assemble_amplitude(const MomentumGrid& grid, const A1& a1, const A2& a2, const Chi& chi,
                                    double c_s, const std::vector<double>& q, double q_step,
                                    unsigned jobs) {
    const auto n = static_cast<Eigen::Index>(grid.size());
    const auto nq = static_cast<Eigen::Index>(q.size());
    const std::vector<double> k = grid.points();
    const double dk = grid.step();

    // Rows indexed by grid point, columns by quadrature node.
    RowMatrix<Scalar> left(n, nq), right(n, nq);
    RowMatrix<double> sinc_table(2 * n - 1, nq);
    for (Eigen::Index j = 0; j < nq; ++j) {
        const double w = (j == 0 || j == nq - 1) ? 0.5 * q_step : q_step;
        const Scalar cw = static_cast<Scalar>(chi(q[j])) * w;
        for (Eigen::Index i = 0; i < n; ++i) {
            left(i, j) = static_cast<Scalar>(a1(k[i] - q[j]));
            right(i, j) = static_cast<Scalar>(a2(k[i] + q[j])) * cw;
        }
        for (Eigen::Index d = -(n - 1); d <= n - 1; ++d)
            sinc_table(d + n - 1, j) = sinc(c_s * q[j] * static_cast<double>(d) * dk);
    }

    Eigen::MatrixXcd out(n, n);
    parallel_for(static_cast<std::size_t>(n), jobs, [&](std::size_t row) {
        const auto i = static_cast<Eigen::Index>(row);
        for (Eigen::Index l = 0; l < n; ++l) {
            const Scalar v = (sinc_table.row(i - l + n - 1).template cast<Scalar>().array() *
                              left.row(i).array() * right.row(l).array())
                                 .sum();
            out(i, l) = v;
        }
    });
    return out;
}

} // namespace detail

/// Lower-level builder with explicit single-electron amplitudes. a1/a2 are
/// callables k -> amplitude (real or complex).
template <class A1, class A2>
PairAmplitude build_amplitude(const MomentumGrid& grid, const A1& a1, const A2& a2, const ChiModel& chi,
                              double T_I, std::size_t q_points, double q_half_window, unsigned jobs = 1) {
    throw_if_issues(chi.validate());
    if (q_points < 3) throw ValidationError({"grid.q_points must be >= 3"});
    const double edge = chi_edge_ratio(chi, q_half_window, q_points);
    if (!(edge < kChiEdgeTolerance))
        throw ConfigurationError("q quadrature window " + std::to_string(q_half_window) +
                                 " truncates chi: edge weight " + std::to_string(edge) + " of peak (limit " +
                                 std::to_string(kChiEdgeTolerance) + ")");

    const double c_s = sinc_argument_scale(T_I);
    const std::vector<double> q = quadrature_nodes(q_half_window, q_points);
    const double q_step = 2.0 * q_half_window / static_cast<double>(q_points - 1);

    constexpr bool real_inputs = std::is_floating_point_v<std::invoke_result_t<A1, double>> &&
                                 std::is_floating_point_v<std::invoke_result_t<A2, double>>;
    PairAmplitude amp;
    amp.grid = grid;
    bool built = false;
    if constexpr (real_inputs) {
        if (chi.is_real()) {
            auto chi_real = [&](double x) { return chi.real_value(x); };
            amp.values = detail::assemble_amplitude<double>(grid, a1, a2, chi_real, c_s, q, q_step, jobs);
            amp.real_valued = true;
            built = true;
        }
    }
    if (!built) {
        auto a1c = [&](double x) { return std::complex<double>(a1(x)); };
        auto a2c = [&](double x) { return std::complex<double>(a2(x)); };
        amp.values = detail::assemble_amplitude<std::complex<double>>(grid, a1c, a2c, chi, c_s, q, q_step, jobs);
        amp.real_valued = false;
    }

    for (Eigen::Index j = 0; j < amp.values.cols(); ++j)
        for (Eigen::Index i = 0; i < amp.values.rows(); ++i)
            if (!std::isfinite(amp.values(i, j).real()) || !std::isfinite(amp.values(i, j).imag()))
                throw NumericalError("non-finite pair amplitude at grid indices (" + std::to_string(i) + ", " +
                                     std::to_string(j) + ")");

    amp.norm_constant = normalize_amplitude(amp.values, grid.step());
    return amp;
}

/// Pair amplitude for identical Gaussian electrons described by `params`.
inline PairAmplitude build_amplitude(const ControlParams& params, unsigned jobs = 1) {
    throw_if_issues(params.validate());
    const SingleElectronAmplitude alpha{params.sigma_e, 0.0};
    return build_amplitude(params.momentum_grid(), alpha, alpha, params.chi, params.T_I, params.grid.q_points,
                           params.resolved_q_half_window(), jobs);
}

enum class CrossSectionAxis { diagonal, antidiagonal };

struct CrossSection {
    std::vector<double> coordinate; ///< k1 along the cut
    std::vector<double> magnitude;  ///< |Phi|
};

/// |Phi| along k1 = k2 (diagonal) or k1 = -k2 (antidiagonal).
inline CrossSection amplitude_cross_section(const PairAmplitude& amp, CrossSectionAxis axis) {
    const std::size_t n = amp.grid.size();
    CrossSection cs;
    cs.coordinate.resize(n);
    cs.magnitude.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = axis == CrossSectionAxis::diagonal ? i : n - 1 - i;
        cs.coordinate[i] = amp.grid[i];
        cs.magnitude[i] = std::abs(amp.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    return cs;
}

/// RMS width of |Phi|^2 along a cut, about its mean.
inline double rms_extent(const CrossSection& cs) {
    double w = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < cs.coordinate.size(); ++i) {
        const double p = cs.magnitude[i] * cs.magnitude[i];
        w += p;
        m1 += p * cs.coordinate[i];
        m2 += p * cs.coordinate[i] * cs.coordinate[i];
    }
    if (w == 0.0) return 0.0;
    m1 /= w;
    return std::sqrt(std::max(0.0, m2 / w - m1 * m1));
}

} // namespace etmsim
