#pragma once

// Schmidt decomposition of a pair amplitude into electronic temporal modes.
//
// Two independent routes are provided:
//   kernel-eig  diagonalize the reduced single-electron kernels
//               K1(k,k') = sum_k2 Phi(k,k2) Phi*(k',k2) dk and its partner K2,
//               then pair modes through phi_n = Phi^T psi_n^* dk / sqrt(p_n);
//   svd-oracle  singular value decomposition of Phi dk, p_n = s_n^2.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "amplitude.hpp"
#include "errors.hpp"
#include "params.hpp"

namespace etmsim {

/// Eigenvalues at or below this are treated as numerical noise.
inline constexpr double kProbabilityFloor = 1e-12;
/// Adjacent probabilities closer than this are reported as degenerate.
inline constexpr double kDegeneracyTolerance = 1e-10;
inline constexpr double kNormalizationTolerance = 1e-8;

enum class SchmidtMethod { kernel_eig, svd_oracle };

inline std::string_view to_string(SchmidtMethod m) {
    return m == SchmidtMethod::kernel_eig ? "kernel-eig" : "svd-oracle";
}

struct RefinementStep {
    std::size_t n_points = 0;
    double kappa = 0.0;
    double relative_change = 0.0; ///< symmetric change vs the previous step (0 for the first)
};

struct SchmidtSpectrum {
    std::vector<double> probs;  ///< descending
    Eigen::MatrixXcd modes_psi; ///< column n = psi_n(k), unit continuum norm
    Eigen::MatrixXcd modes_phi; ///< column n = phi_n(k)
    double h2 = 0.0;            ///< collision entropy, bits
    double kappa = 1.0;         ///< Schmidt number
    MomentumGrid grid;
    SchmidtMethod method = SchmidtMethod::kernel_eig;
    std::size_t paired_count = 0; ///< modes with p_n > kProbabilityFloor
    std::vector<std::pair<std::size_t, std::size_t>> degenerate_blocks; ///< [first, last] index ranges
    bool converged = true;
    std::vector<RefinementStep> history;

    std::size_t size() const { return probs.size(); }
};

namespace detail {

inline double probability_sum_of_squares(std::span<const double> probs) {
    if (probs.empty()) throw DomainError("probability list is empty");
    double total = 0.0, squares = 0.0;
    for (double p : probs) {
        total += p;
        if (p > kProbabilityFloor) squares += p * p;
    }
    if (std::abs(total - 1.0) > 1e-6)
        throw DomainError("probabilities must sum to 1 (got " + std::to_string(total) + ")");
    if (!(squares > 0.0)) throw DomainError("no probability above the floor");
    return squares;
}

} // namespace detail

/// H2 = -log2(sum p_n^2).
inline double collision_entropy(std::span<const double> probs) {
    return -std::log2(detail::probability_sum_of_squares(probs));
}

/// kappa = 1 / sum p_n^2 = 2^H2.
inline double schmidt_number(std::span<const double> probs) {
    return 1.0 / detail::probability_sum_of_squares(probs);
}

struct Kernels {
    Eigen::MatrixXcd k1;
    Eigen::MatrixXcd k2;
    double step = 0.0;
};

inline void require_normalized(const PairAmplitude& amp) {
    const double norm = amp.norm_squared();
    if (!(std::abs(norm - 1.0) <= kNormalizationTolerance))
        throw ContractViolation("pair amplitude is not normalized (sum |Phi|^2 dk^2 = " + std::to_string(norm) +
                                ")");
}

/// Reduced kernels K1 = Phi Phi^H dk and K2 = Phi^T Phi^* dk.
inline Kernels reduce_kernels(const PairAmplitude& amp) {
    require_normalized(amp);
    const double dk = amp.step();
    Kernels out;
    out.step = dk;
    out.k1 = amp.values * amp.values.adjoint() * dk;
    out.k2 = amp.values.transpose() * amp.values.conjugate() * dk;
    return out;
}

namespace detail {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Descending eigen-decomposition of a Hermitian matrix.
template <class Scalar>
std::pair<Eigen::VectorXd, Matrix<Scalar>> descending_eigen(const Matrix<Scalar>& m, bool vectors) {
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(m, vectors ? Eigen::ComputeEigenvectors
                                                                     : Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("Hermitian eigen-solver did not converge");
    Eigen::VectorXd values = solver.eigenvalues().reverse();
    Matrix<Scalar> vecs;
    if (vectors) vecs = solver.eigenvectors().rowwise().reverse();
    return {std::move(values), std::move(vecs)};
}

template <class Scalar>
Matrix<Scalar> amplitude_as(const PairAmplitude& amp) {
    if constexpr (std::is_same_v<Scalar, double>) {
        return amp.values.real();
    } else {
        return amp.values;
    }
}

inline std::vector<double> clip_probabilities(const Eigen::VectorXd& values) {
    std::vector<double> probs(static_cast<std::size_t>(values.size()));
    for (Eigen::Index i = 0; i < values.size(); ++i) probs[static_cast<std::size_t>(i)] = std::max(0.0, values(i));
    return probs;
}

/// Gram-Schmidt the columns of `modes` in order (Householder QR), keeping each
/// column's phase aligned with the input. Columns are continuum-normalized.
inline Eigen::MatrixXcd orthonormalize_columns(const Eigen::MatrixXcd& modes, double dk) {
    const Eigen::MatrixXcd scaled = modes * std::sqrt(dk);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(scaled);
    Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(scaled.rows(), scaled.cols());
    const Eigen::MatrixXcd& r = qr.matrixQR();
    for (Eigen::Index c = 0; c < q.cols(); ++c) {
        const std::complex<double> d = r(c, c);
        if (std::abs(d) > 0.0) q.col(c) *= d / std::abs(d);
    }
    return q / std::sqrt(dk);
}

template <class Scalar>
SchmidtSpectrum kernel_route(const PairAmplitude& amp) {
    const double dk = amp.step();
    const Matrix<Scalar> phi = amplitude_as<Scalar>(amp);
    const Eigen::Index n = phi.rows();

    // K * dk so that eigenvalues are probabilities directly.
    const Matrix<Scalar> m1 = phi * phi.adjoint() * (dk * dk);
    const Matrix<Scalar> m2 = phi.transpose() * phi.conjugate() * (dk * dk);
    auto [values1, vecs1] = descending_eigen<Scalar>(m1, true);
    auto [values2, vecs2] = descending_eigen<Scalar>(m2, true);

    SchmidtSpectrum spec;
    spec.method = SchmidtMethod::kernel_eig;
    spec.grid = amp.grid;
    spec.probs = clip_probabilities(values1);
    spec.modes_psi = vecs1.template cast<std::complex<double>>() / std::sqrt(dk);

    Eigen::MatrixXcd phi_modes(n, n);
    const Eigen::MatrixXcd phi_c = amp.values;
    // Pair through Phi down to p = 0, not just the floor: sub-floor modes still
    // carry enough weight to matter for reconstruction. K2 fills the null space.
    for (Eigen::Index c = 0; c < n; ++c) {
        const double p = spec.probs[static_cast<std::size_t>(c)];
        if (p > 0.0) {
            phi_modes.col(c) = phi_c.transpose() * spec.modes_psi.col(c).conjugate() * (dk / std::sqrt(p));
        } else {
            phi_modes.col(c) = vecs2.col(c).template cast<std::complex<double>>() / std::sqrt(dk);
        }
    }
    spec.paired_count = static_cast<std::size_t>(
        std::count_if(spec.probs.begin(), spec.probs.end(), [](double p) { return p > kProbabilityFloor; }));
    spec.modes_phi = orthonormalize_columns(phi_modes, dk);
    return spec;
}

template <class Scalar>
SchmidtSpectrum svd_route(const PairAmplitude& amp) {
    const double dk = amp.step();
    const Matrix<Scalar> phi = amplitude_as<Scalar>(amp) * dk;
    Eigen::BDCSVD<Matrix<Scalar>> svd(phi, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.info() != Eigen::Success) throw NumericalError("SVD did not converge");

    SchmidtSpectrum spec;
    spec.method = SchmidtMethod::svd_oracle;
    spec.grid = amp.grid;
    const Eigen::VectorXd s = svd.singularValues();
    spec.probs.resize(static_cast<std::size_t>(s.size()));
    for (Eigen::Index i = 0; i < s.size(); ++i) spec.probs[static_cast<std::size_t>(i)] = s(i) * s(i);
    spec.modes_psi = svd.matrixU().template cast<std::complex<double>>() / std::sqrt(dk);
    spec.modes_phi = svd.matrixV().template cast<std::complex<double>>().conjugate() / std::sqrt(dk);
    spec.paired_count = static_cast<std::size_t>(
        std::count_if(spec.probs.begin(), spec.probs.end(), [](double p) { return p > kProbabilityFloor; }));
    return spec;
}

inline void finish_spectrum(SchmidtSpectrum& spec) {
    spec.h2 = collision_entropy(spec.probs);
    spec.kappa = schmidt_number(spec.probs);
    spec.degenerate_blocks.clear();
    std::size_t i = 0;
    while (i < spec.paired_count) {
        std::size_t j = i;
        while (j + 1 < spec.paired_count && spec.probs[i] - spec.probs[j + 1] <= kDegeneracyTolerance) ++j;
        if (j > i) spec.degenerate_blocks.emplace_back(i, j);
        i = j + 1;
    }
}

} // namespace detail

inline SchmidtSpectrum schmidt_decompose(const PairAmplitude& amp, SchmidtMethod method = SchmidtMethod::kernel_eig) {
    require_normalized(amp);
    SchmidtSpectrum spec;
    if (method == SchmidtMethod::kernel_eig) {
        spec = amp.real_valued ? detail::kernel_route<double>(amp) : detail::kernel_route<std::complex<double>>(amp);
    } else {
        spec = amp.real_valued ? detail::svd_route<double>(amp) : detail::svd_route<std::complex<double>>(amp);
    }
    detail::finish_spectrum(spec);
    return spec;
}

/// Schmidt probabilities only (no modes), via the kernel eigenvalues.
inline std::vector<double> schmidt_probabilities(const PairAmplitude& amp) {
    require_normalized(amp);
    const double dk2 = amp.step() * amp.step();
    if (amp.real_valued) {
        const Eigen::MatrixXd phi = amp.values.real();
        const Eigen::MatrixXd m = phi * phi.transpose() * dk2;
        return detail::clip_probabilities(detail::descending_eigen<double>(m, false).first);
    }
    const Eigen::MatrixXcd m = amp.values * amp.values.adjoint() * dk2;
    return detail::clip_probabilities(detail::descending_eigen<std::complex<double>>(m, false).first);
}

/// Reconstructs sum_n sqrt(p_n) psi_n(k1) phi_n(k2) from the first `modes` terms (all when 0).
inline Eigen::MatrixXcd reconstruct(const SchmidtSpectrum& spec, std::size_t modes = 0) {
    const auto m = static_cast<Eigen::Index>(modes == 0 ? spec.size() : std::min(modes, spec.size()));
    Eigen::VectorXd weights(m);
    for (Eigen::Index i = 0; i < m; ++i) weights(i) = std::sqrt(spec.probs[static_cast<std::size_t>(i)]);
    return spec.modes_psi.leftCols(m) * weights.asDiagonal() * spec.modes_phi.leftCols(m).transpose();
}

struct ConvergenceOptions {
    double tol = 0.05;
    double growth = 1.5;
    std::size_t max_points = 3200;

    std::vector<std::string> validate() const {
        std::vector<std::string> issues;
        if (!(tol >= 0.0)) issues.push_back("convergence.tol must be >= 0");
        if (!(growth > 1.0)) issues.push_back("convergence.growth must be > 1");
        if (max_points < 8) issues.push_back("convergence.max_points must be >= 8");
        return issues;
    }
};

/// 2 |a - b| / (a + b)
inline double symmetric_relative_change(double previous, double current) {
    const double denom = previous + current;
    return denom == 0.0 ? 0.0 : 2.0 * std::abs(current - previous) / denom;
}

/// Refines the momentum grid (window fixed, n <- ceil(growth n)) until kappa
/// changes by at most `tol` between successive grids, or the next grid would
/// exceed max_points (converged = false). Returns the full decomposition on
/// the last grid together with the refinement history.
inline SchmidtSpectrum converge_spectrum(const ControlParams& params, const ConvergenceOptions& options = {},
                                         unsigned jobs = 1) {
    throw_if_issues(params.validate());
    throw_if_issues(options.validate());
    if (params.grid.n_points > options.max_points)
        throw ValidationError({"grid.n_points exceeds convergence.max_points"});

    ControlParams current = params;
    current.grid.half_window = params.resolved_half_window();
    current.grid.q_half_window = params.resolved_q_half_window();

    std::vector<RefinementStep> history;
    PairAmplitude amp;
    bool converged = false;
    for (;;) {
        amp = build_amplitude(current, jobs);
        const double kappa = schmidt_number(schmidt_probabilities(amp));
        RefinementStep step{current.grid.n_points, kappa, 0.0};
        if (!history.empty()) step.relative_change = symmetric_relative_change(history.back().kappa, kappa);
        history.push_back(step);
        if (history.size() >= 2 && step.relative_change <= options.tol) {
            converged = true;
            break;
        }
        const auto next = static_cast<std::size_t>(
            std::ceil(options.growth * static_cast<double>(current.grid.n_points)));
        if (next > options.max_points) break;
        current.grid.n_points = next;
    }

    SchmidtSpectrum spec = schmidt_decompose(amp, SchmidtMethod::kernel_eig);
    spec.converged = converged;
    spec.history = std::move(history);
    return spec;
}

/// Marginal momentum density sum_n p_n |phi_n(k)|^2.
inline Eigen::VectorXd marginal_density(const SchmidtSpectrum& spec) {
    Eigen::VectorXd rho = Eigen::VectorXd::Zero(spec.modes_phi.rows());
    for (std::size_t n = 0; n < spec.size(); ++n)
        if (spec.probs[n] > kProbabilityFloor)
            rho += spec.probs[n] * spec.modes_phi.col(static_cast<Eigen::Index>(n)).cwiseAbs2();
    return rho;
}

} // namespace etmsim
