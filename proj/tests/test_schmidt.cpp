#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "etmsim/schmidt.hpp"

using namespace etmsim;

namespace {

// Discretely orthonormal Hermite-Gauss functions on the grid.
Eigen::MatrixXd hermite_basis(const MomentumGrid& g, int count) {
    Eigen::MatrixXd h(g.size(), count);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g[i];
        double prev = 0.0, cur = std::pow(std::numbers::pi, -0.25) * std::exp(-x * x / 2.0);
        for (int n = 0; n < count; ++n) {
            h(i, n) = cur;
            const double next = std::sqrt(2.0 / (n + 1)) * x * cur - std::sqrt(double(n) / (n + 1)) * prev;
            prev = cur;
            cur = next;
        }
    }
    // Gram-Schmidt on the grid so the discrete inner products are exact.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(h * std::sqrt(g.step()));
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(h.rows(), count);
    for (int c = 0; c < count; ++c)
        if (q.col(c).dot(h.col(c)) < 0) q.col(c) *= -1.0;
    return q / std::sqrt(g.step());
}

PairAmplitude from_values(const MomentumGrid& g, Eigen::MatrixXcd v) {
    PairAmplitude amp;
    amp.grid = g;
    normalize_amplitude(v, g.step());
    amp.real_valued = v.imag().cwiseAbs().maxCoeff() == 0.0;
    amp.values = std::move(v);
    amp.norm_constant = 1.0;
    return amp;
}

ControlParams small_params(double t, double s, std::size_t n = 64) {
    ControlParams p;
    p.T_I = t;
    p.sigma_e = s;
    p.grid.n_points = n;
    p.grid.q_points = 512;
    return p;
}

std::vector<PairAmplitude> sample_amplitudes() {
    std::vector<PairAmplitude> out;
    for (auto [t, s] : {std::pair{1e-4, 0.05}, {1e-2, 2.0}, {0.3, 2.0}, {0.1, 0.5}})
        out.push_back(build_amplitude(small_params(t, s, 72)));
    return out;
}

} // namespace

TEST(Entropy, WorkedValues) {
    const std::vector<double> one{1.0};
    EXPECT_EQ(collision_entropy(one), 0.0);
    EXPECT_EQ(schmidt_number(one), 1.0);
    for (int m : {2, 5, 16}) {
        std::vector<double> u(m, 1.0 / m);
        EXPECT_NEAR(collision_entropy(u), std::log2(m), 1e-12);
        EXPECT_NEAR(schmidt_number(u), m, 1e-12);
    }
    const std::vector<double> p{0.7, 0.2, 0.1};
    EXPECT_NEAR(collision_entropy(p), -std::log2(0.54), 1e-12);
    EXPECT_NEAR(collision_entropy(p), 0.8890, 1e-4);
    EXPECT_NEAR(schmidt_number(p), std::exp2(collision_entropy(p)), 1e-12);
}

TEST(Entropy, BoundsOnRandomDistributions) {
    std::mt19937_64 rng(3);
    std::exponential_distribution<double> e(1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> p(1 + trial % 9);
        double total = 0.0;
        for (double& x : p) total += (x = e(rng));
        for (double& x : p) x /= total;
        const double h = collision_entropy(p);
        EXPECT_GE(h, -1e-15);
        EXPECT_LE(h, std::log2(double(p.size())) + 1e-12);
        EXPECT_GE(schmidt_number(p), 1.0 - 1e-12);
    }
}

TEST(Entropy, RejectsBadInput) {
    EXPECT_THROW(collision_entropy(std::vector<double>{}), DomainError);
    EXPECT_THROW(schmidt_number(std::vector<double>{0.5, 0.2}), DomainError);
}

TEST(Kernels, ProductStateGivesRankOneProjector) {
    MomentumGrid g(61, 7.0);
    const Eigen::MatrixXd h = hermite_basis(g, 1);
    const auto amp = from_values(g, (h.col(0) * h.col(0).transpose()).cast<std::complex<double>>());
    const Kernels k = reduce_kernels(amp);
    const Eigen::MatrixXcd m = k.k1 * k.step;
    EXPECT_LT((m * m - m).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(m.trace().real(), 1.0, 1e-12);
    const auto spec = schmidt_decompose(amp);
    EXPECT_NEAR(spec.probs[0], 1.0, 1e-12);
    EXPECT_NEAR(spec.kappa, 1.0, 1e-12);
}

TEST(Kernels, PartnerSpectraAgreeAndTraceIsOne) {
    for (const auto& amp : sample_amplitudes()) {
        const Kernels k = reduce_kernels(amp);
        EXPECT_NEAR(k.k1.trace().real() * k.step, 1.0, 1e-9);
        EXPECT_NEAR(k.k2.trace().real() * k.step, 1.0, 1e-9);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> e1(k.k1 * k.step, Eigen::EigenvaluesOnly);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> e2(k.k2 * k.step, Eigen::EigenvaluesOnly);
        EXPECT_LT((e1.eigenvalues() - e2.eigenvalues()).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Kernels, RejectsUnnormalizedAmplitude) {
    auto amp = build_amplitude(small_params(1e-3, 1.0, 32));
    amp.values *= 1.01;
    EXPECT_THROW(reduce_kernels(amp), ContractViolation);
    EXPECT_THROW(schmidt_decompose(amp), ContractViolation);
    EXPECT_THROW(schmidt_probabilities(amp), ContractViolation);
}

TEST(Schmidt, SymmetrizedTwoModeToy) {
    MomentumGrid g(81, 8.0);
    const Eigen::MatrixXd h = hermite_basis(g, 2);
    const Eigen::MatrixXd v = (h.col(0) * h.col(1).transpose() + h.col(1) * h.col(0).transpose()) / std::sqrt(2.0);
    const auto amp = from_values(g, v.cast<std::complex<double>>());
    for (auto method : {SchmidtMethod::kernel_eig, SchmidtMethod::svd_oracle}) {
        const auto spec = schmidt_decompose(amp, method);
        EXPECT_NEAR(spec.probs[0], 0.5, 1e-12);
        EXPECT_NEAR(spec.probs[1], 0.5, 1e-12);
        EXPECT_NEAR(spec.kappa, 2.0, 1e-10);
        EXPECT_NEAR(spec.h2, 1.0, 1e-10);
        EXPECT_EQ(spec.paired_count, 2u);
        ASSERT_EQ(spec.degenerate_blocks.size(), 1u);
        EXPECT_EQ(spec.degenerate_blocks[0], std::make_pair(std::size_t{0}, std::size_t{1}));
    }
}

TEST(Schmidt, KernelRouteAgreesWithSvd) {
    for (const auto& amp : sample_amplitudes()) {
        const auto eig = schmidt_decompose(amp, SchmidtMethod::kernel_eig);
        const auto svd = schmidt_decompose(amp, SchmidtMethod::svd_oracle);
        for (std::size_t n = 0; n < eig.size(); ++n) EXPECT_NEAR(eig.probs[n], svd.probs[n], 1e-8);
        const double dk = amp.step();
        for (std::size_t n = 0; n + 1 < eig.size(); ++n) {
            // Compare modes only where the level is nondegenerate and resolvable.
            if (eig.probs[n] < 1e-6) break;
            if (eig.probs[n] - eig.probs[n + 1] < 1e-6) continue;
            if (n > 0 && eig.probs[n - 1] - eig.probs[n] < 1e-6) continue;
            const auto c = static_cast<Eigen::Index>(n);
            const double overlap = std::abs(eig.modes_psi.col(c).dot(svd.modes_psi.col(c))) * dk;
            EXPECT_NEAR(overlap, 1.0, 1e-6) << "mode " << n;
        }
        EXPECT_NEAR(eig.kappa, svd.kappa, 1e-8 * svd.kappa);
    }
}

TEST(Schmidt, ModesAreOrthonormal) {
    for (const auto& amp : sample_amplitudes())
        for (auto method : {SchmidtMethod::kernel_eig, SchmidtMethod::svd_oracle}) {
            const auto spec = schmidt_decompose(amp, method);
            const double dk = amp.step();
            const auto id = Eigen::MatrixXcd::Identity(spec.modes_psi.cols(), spec.modes_psi.cols());
            EXPECT_LT((spec.modes_psi.adjoint() * spec.modes_psi * dk - id).cwiseAbs().maxCoeff(), 1e-8);
            EXPECT_LT((spec.modes_phi.adjoint() * spec.modes_phi * dk - id).cwiseAbs().maxCoeff(), 1e-8);
        }
}

TEST(Schmidt, ReconstructionAndNormalization) {
    for (const auto& amp : sample_amplitudes())
        for (auto method : {SchmidtMethod::kernel_eig, SchmidtMethod::svd_oracle}) {
            const auto spec = schmidt_decompose(amp, method);
            double total = 0.0;
            for (double p : spec.probs) {
                EXPECT_GE(p, 0.0);
                total += p;
            }
            EXPECT_NEAR(total, 1.0, 1e-10);
            EXPECT_TRUE(std::is_sorted(spec.probs.rbegin(), spec.probs.rend()));
            const double scale = amp.values.cwiseAbs().maxCoeff();
            EXPECT_LE((reconstruct(spec) - amp.values).cwiseAbs().maxCoeff() / scale, 1e-6) << to_string(method) << " n=" << amp.grid.size();
            EXPECT_GE(spec.kappa, 1.0 - 1e-12);
            EXPECT_LE(spec.kappa, double(spec.size()));
            EXPECT_NEAR(spec.kappa, std::exp2(spec.h2), 1e-10 * spec.kappa);
        }
}

TEST(Schmidt, ComplexAmplitudeDecomposes) {
    ControlParams p = small_params(5e-2, 0.8, 48);
    p.chi.kind = ChiKind::gaussian_pair;
    p.chi.width = 0.3;
    ChiModel builtin = p.chi;
    p.chi.custom = [builtin](double q) { return builtin.real_value(q) * std::polar(1.0, 0.9 * q * q * q); };
    const auto amp = build_amplitude(p);
    ASSERT_FALSE(amp.real_valued);
    const auto eig = schmidt_decompose(amp, SchmidtMethod::kernel_eig);
    const auto svd = schmidt_decompose(amp, SchmidtMethod::svd_oracle);
    for (std::size_t n = 0; n < eig.size(); ++n) EXPECT_NEAR(eig.probs[n], svd.probs[n], 1e-8);
    const double scale = amp.values.cwiseAbs().maxCoeff();
    EXPECT_LE((reconstruct(eig) - amp.values).cwiseAbs().maxCoeff() / scale, 1e-6);
}

TEST(Schmidt, TransposeInvariance) {
    for (const auto& amp : sample_amplitudes()) {
        PairAmplitude t = amp;
        t.values = amp.values.transpose();
        const auto a = schmidt_probabilities(amp);
        const auto b = schmidt_probabilities(t);
        for (std::size_t n = 0; n < a.size(); ++n) EXPECT_NEAR(a[n], b[n], 1e-10);
    }
}

TEST(Schmidt, ProbabilitiesOnlyMatchFullDecomposition) {
    const auto amp = build_amplitude(small_params(0.1, 2.0, 80));
    const auto probs = schmidt_probabilities(amp);
    const auto spec = schmidt_decompose(amp);
    ASSERT_EQ(probs.size(), spec.probs.size());
    for (std::size_t n = 0; n < probs.size(); ++n) EXPECT_NEAR(probs[n], spec.probs[n], 1e-13);
}

TEST(Schmidt, MarginalDensityMatchesRowSums) {
    const auto amp = build_amplitude(small_params(0.1, 1.0, 64));
    const auto spec = schmidt_decompose(amp);
    const Eigen::VectorXd rho = marginal_density(spec);
    // rho(k2) = sum_k1 |Phi(k1, k2)|^2 dk
    const Eigen::VectorXd direct = amp.values.cwiseAbs2().colwise().sum().transpose() * amp.step();
    EXPECT_LT((rho - direct).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Convergence, SymmetricRelativeChange) {
    EXPECT_DOUBLE_EQ(symmetric_relative_change(1.0, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(symmetric_relative_change(1.0, 3.0), 1.0);
    EXPECT_DOUBLE_EQ(symmetric_relative_change(3.0, 1.0), 1.0);
}

TEST(Convergence, SeparableCaseStopsAtFirstRefinement) {
    ControlParams p = small_params(1e-8, 1.0, 40);
    p.chi.kind = ChiKind::flat_band;
    p.chi.center = 0.0;
    p.chi.width = 1e-7;
    const auto spec = converge_spectrum(p);
    EXPECT_TRUE(spec.converged);
    ASSERT_EQ(spec.history.size(), 2u);
    EXPECT_EQ(spec.history[0].n_points, 40u);
    EXPECT_EQ(spec.history[1].n_points, 60u);
    EXPECT_NEAR(spec.kappa, 1.0, 1e-6);
}

TEST(Convergence, HistorySatisfiesCriterion) {
    ConvergenceOptions opt;
    opt.tol = 1e-3;
    opt.max_points = 400;
    const auto spec = converge_spectrum(small_params(0.1, 2.0, 48), opt);
    ASSERT_GE(spec.history.size(), 2u);
    for (std::size_t i = 1; i < spec.history.size(); ++i) {
        EXPECT_EQ(spec.history[i].n_points,
                  static_cast<std::size_t>(std::ceil(1.5 * double(spec.history[i - 1].n_points))));
        EXPECT_NEAR(spec.history[i].relative_change,
                    symmetric_relative_change(spec.history[i - 1].kappa, spec.history[i].kappa), 1e-15);
    }
    if (spec.converged) {
        EXPECT_LE(spec.history.back().relative_change, opt.tol);
        for (std::size_t i = 1; i + 1 < spec.history.size(); ++i) EXPECT_GT(spec.history[i].relative_change, opt.tol);
    }
    EXPECT_EQ(spec.grid.size(), spec.history.back().n_points);
    EXPECT_NEAR(spec.kappa, spec.history.back().kappa, 1e-9 * spec.kappa);
}

TEST(Convergence, ZeroToleranceHitsCap) {
    ConvergenceOptions opt;
    opt.tol = 0.0;
    opt.max_points = 100;
    const auto spec = converge_spectrum(small_params(0.1, 2.0, 32), opt);
    EXPECT_FALSE(spec.converged);
    EXPECT_LE(spec.grid.size(), 100u);
    // 32 -> 48 -> 72 -> 108 exceeds the cap
    EXPECT_EQ(spec.history.size(), 3u);
}

TEST(Convergence, RejectsBadOptions) {
    ConvergenceOptions opt;
    opt.growth = 1.0;
    EXPECT_THROW(converge_spectrum(small_params(1e-3, 1.0), opt), ValidationError);
    opt = {};
    opt.max_points = 16;
    EXPECT_THROW(converge_spectrum(small_params(1e-3, 1.0, 32), opt), ValidationError);
}
