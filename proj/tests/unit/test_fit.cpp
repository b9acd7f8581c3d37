#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "oksim/fit.hpp"

using namespace oksim;

namespace {

std::vector<double> linspace(double a, double b, std::size_t n)
{
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k)
        x[k] = a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1);
    return x;
}

std::vector<double> sample(const GaussianParams& p, const std::vector<double>& x)
{
    std::vector<double> y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k)
        y[k] = gaussian(p, x[k]);
    return y;
}

} // namespace

TEST(Fit, NoiselessGaussianRecovered)
{
    const GaussianParams truth{100.0, 10.0, 144.0, 0.0};
    const auto x = linspace(-1500.0, 1500.0, 129);
    const auto r = fit_gaussian(x, sample(truth, x));
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.amplitude() / 100.0, 1.0, 1e-3);
    EXPECT_NEAR(r.center() / 10.0, 1.0, 1e-3);
    EXPECT_NEAR(r.sigma() / 144.0, 1.0, 1e-3);
    EXPECT_NEAR(r.offset(), 0.0, 1e-6);
    EXPECT_LT(r.residual_rms, 1e-8);
}

TEST(Fit, TranslationAndScaleEquivariance)
{
    const GaussianParams p{40.0, 25.0, 80.0, 3.0};
    const auto x = linspace(-400.0, 400.0, 101);
    const auto base = fit_gaussian(x, sample(p, x));
    for (auto [alpha, beta] : {std::pair{2.5, 30.0}, std::pair{-0.5, -12.0}, std::pair{1.0, 200.0}}) {
        std::vector<double> y(x.size());
        for (std::size_t k = 0; k < x.size(); ++k)
            y[k] = gaussian(p, alpha * x[k] + beta);
        const auto r = fit_gaussian(x, y);
        ASSERT_TRUE(r.converged);
        EXPECT_NEAR(r.center(), (base.center() - beta) / alpha, 1e-6 * std::abs(base.sigma() / alpha)) << alpha;
        EXPECT_NEAR(r.sigma(), base.sigma() / std::abs(alpha), 1e-7 * r.sigma()) << alpha;
    }
}

TEST(Fit, PoissonNoiseCoveredByReportedErrors)
{
    const GaussianParams truth{500.0, 0.0, 150.0, 20.0};
    const auto x = linspace(-1000.0, 1000.0, 81);
    const Eigen::Vector4d expect(truth.amplitude, truth.center, truth.sigma, truth.offset);
    Eigen::Vector4i covered = Eigen::Vector4i::Zero();
    const int seeds = 200;
    double sum_sigma = 0.0;
    for (int s = 0; s < seeds; ++s) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(s));
        std::vector<double> y(x.size());
        for (std::size_t k = 0; k < x.size(); ++k)
            y[k] = static_cast<double>(std::poisson_distribution<long>(gaussian(truth, x[k]))(rng));
        const auto r = fit_gaussian(x, y);
        ASSERT_TRUE(r.converged);
        const Eigen::Vector4d got(r.amplitude(), r.center(), r.sigma(), r.offset());
        for (int k = 0; k < 4; ++k)
            covered[k] += std::abs(got[k] - expect[k]) <= 3.0 * r.error(k);
        sum_sigma += r.sigma();
    }
    for (int k = 0; k < 4; ++k)
        EXPECT_GE(covered[k], 0.95 * seeds) << "parameter " << k;
    EXPECT_NEAR(sum_sigma / seeds, truth.sigma, 1.0);
}

TEST(Fit, PoissonWeightsAlsoCover)
{
    const GaussianParams truth{500.0, 0.0, 150.0, 20.0};
    const auto x = linspace(-1000.0, 1000.0, 81);
    int covered = 0, seeds = 200;
    FitOptions opt;
    opt.weights = FitWeights::poisson;
    for (int s = 0; s < seeds; ++s) {
        std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(s));
        std::vector<double> y(x.size());
        for (std::size_t k = 0; k < x.size(); ++k)
            y[k] = static_cast<double>(std::poisson_distribution<long>(gaussian(truth, x[k]))(rng));
        const auto r = fit_gaussian(x, y, opt);
        covered += r.converged && std::abs(r.sigma() - truth.sigma) <= 3.0 * r.sigma_error();
    }
    EXPECT_GE(covered, 0.95 * seeds);
}

TEST(Fit, SubtractedBackgroundWithNegativeDips)
{
    const GaussianParams truth{500.0, 0.0, 150.0, 0.0};
    const double background = 3000.0;
    const auto x = linspace(-1000.0, 1000.0, 81);
    const int seeds = 200;
    double sum = 0.0, sum2 = 0.0;
    bool saw_negative = false;
    for (int s = 0; s < seeds; ++s) {
        std::mt19937_64 rng(7000 + static_cast<std::uint64_t>(s));
        std::vector<double> y(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double raw = static_cast<double>(std::poisson_distribution<long>(gaussian(truth, x[k]) + background)(rng));
            const double bg = static_cast<double>(std::poisson_distribution<long>(background)(rng));
            y[k] = raw - bg;
            saw_negative |= y[k] < 0;
        }
        const auto r = fit_gaussian(x, y);
        ASSERT_TRUE(r.converged) << s;
        sum += r.sigma();
        sum2 += r.sigma() * r.sigma();
    }
    EXPECT_TRUE(saw_negative);
    const double mean = sum / seeds;
    const double sd = std::sqrt(sum2 / seeds - mean * mean);
    EXPECT_NEAR(mean, truth.sigma, 3.0 * sd / std::sqrt(seeds));
}

TEST(Fit, CovarianceSymmetricPositiveSemidefinite)
{
    const GaussianParams truth{10.0, -5.0, 30.0, 1.0};
    const auto x = linspace(-200.0, 200.0, 60);
    auto y = sample(truth, x);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 0.3);
    for (auto& v : y)
        v += n(rng);
    const auto r = fit_gaussian(x, y);
    EXPECT_LT((r.covariance - r.covariance.transpose()).cwiseAbs().maxCoeff(), 1e-15 * r.covariance.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(r.covariance);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * es.eigenvalues().maxCoeff());
    EXPECT_GT(r.sigma(), 0.0);
}

TEST(Fit, Errors)
{
    const auto x = linspace(0.0, 1.0, 10);
    EXPECT_THROW(fit_gaussian(x, std::vector<double>(10, 3.0)), FitError);
    EXPECT_THROW(fit_gaussian(linspace(0.0, 1.0, 7), std::vector<double>(7, 1.0)), FitError);
    EXPECT_THROW(fit_gaussian(x, std::vector<double>(9, 1.0)), FitError);
    auto y = sample({1.0, 0.5, 0.1, 0.0}, x);
    y[3] = std::nan("");
    EXPECT_THROW(fit_gaussian(x, y), FitError);
}

TEST(Fit, NonConvergenceIsFlagged)
{
    const auto x = linspace(-100.0, 100.0, 50);
    const auto y = sample({5.0, 20.0, 10.0, 0.0}, x);
    FitOptions opt;
    opt.initial = GaussianParams{1.0, -60.0, 40.0, 1.0};
    opt.max_iterations = 2;
    const auto r = fit_gaussian(x, y, opt);
    EXPECT_FALSE(r.converged);
    opt.max_iterations = 200;
    EXPECT_TRUE(fit_gaussian(x, y, opt).converged);
}
