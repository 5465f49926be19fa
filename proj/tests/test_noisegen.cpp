#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rsslim/noisegen.hpp"

using namespace rsslim;

namespace {

constexpr double kLambda = 0.125;

SetupConfig coarse(double density = 2.0) { return with_density(SetupConfig{}, density); }

}  // namespace

TEST(SampleNoise, IdentityCovarianceVariance) {
    const double sigma = 1.68;
    const PositionList pos{Vec2(0, 0), Vec2(1, 0), Vec2(0, 1), Vec2(1, 1)};
    const auto cov = build_covariance(CorrelationKernel::independent(), pos, sigma);
    const Eigen::Index draws = 100000;
    const Eigen::MatrixXd x = sample_noise(cov, 42, draws);
    ASSERT_EQ(x.rows(), draws);
    ASSERT_EQ(x.cols(), 4);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double mean = x.col(j).mean();
        const double var = (x.col(j).array() - mean).square().sum() / static_cast<double>(draws - 1);
        EXPECT_NEAR(var / (sigma * sigma), 1.0, 0.02) << j;
        EXPECT_NEAR(mean, 0.0, 4.0 * sigma / std::sqrt(static_cast<double>(draws))) << j;
    }
    // Off-diagonal sample covariance near zero.
    const double c01 = (x.col(0).array() * x.col(1).array()).mean();
    EXPECT_NEAR(c01, 0.0, 4.0 * sigma * sigma / std::sqrt(static_cast<double>(draws)));
}

TEST(SampleNoise, RankOneDrawsHaveEqualComponents) {
    CovarianceMatrix cov{Eigen::MatrixXd::Constant(2, 2, 2.25), 1.5};
    const Eigen::MatrixXd x = sample_noise(cov, 9, 1000);
    const NoiseFactor f = factorize(cov);
    EXPECT_EQ(f.rank, 1);
    EXPECT_TRUE(f.clipped);
    for (Eigen::Index d = 0; d < x.rows(); ++d) EXPECT_NEAR(x(d, 0), x(d, 1), 1e-12 * (1 + std::abs(x(d, 0))));
    const double var = x.col(0).squaredNorm() / static_cast<double>(x.rows());
    EXPECT_NEAR(var, 2.25, 0.25);
}

TEST(SampleNoise, DiffractionRankMatchesEigenOracle) {
    const PositionList all = perimeter_positions(SetupConfig{});
    const PositionList pos(all.begin(), all.begin() + 200);
    const auto cov = build_covariance(CorrelationKernel::diffraction(kLambda), pos, 1.68);
    const NoiseFactor f = factorize(cov);

    std::vector<std::vector<double>> a(200, std::vector<double>(200));
    for (int i = 0; i < 200; ++i)
        for (int j = 0; j < 200; ++j) a[i][j] = cov.entries(i, j);
    const auto ev = oracle::jacobi_eigenvalues(a);
    const double threshold = 1e-10 * 1.68 * 1.68;
    long above = 0;
    for (double v : ev) above += v > threshold;

    EXPECT_EQ(f.rank, above);
    EXPECT_LT(f.rank, 200 / 4);
    EXPECT_TRUE(f.clipped);
    EXPECT_DOUBLE_EQ(f.clip_threshold, threshold);
    EXPECT_GT(f.retained_variance_fraction, 0.999999);
}

TEST(SampleNoise, SampleCovarianceApproachesRegularized) {
    const PositionList pos{Vec2(0, 0), Vec2(0.02, 0), Vec2(0.05, 0), Vec2(0.2, 0)};
    const auto k = CorrelationKernel::exponential(kLambda);
    const auto cov = build_covariance(k, pos, 1.0);
    const Eigen::Index draws = 50000;
    const Eigen::MatrixXd x = sample_noise(cov, 2024, draws);
    const Eigen::MatrixXd s = x.transpose() * x / static_cast<double>(draws);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) EXPECT_NEAR(s(i, j), cov.entries(i, j), 0.03) << i << "," << j;
}

TEST(SampleNoise, RowsFollowSeedStreams) {
    const PositionList pos = perimeter_positions(coarse(0.5));
    const auto cov = build_covariance(CorrelationKernel::exponential(kLambda), pos, 1.68);
    const Eigen::MatrixXd a = sample_noise(cov, 77, 6);
    const Eigen::MatrixXd b = sample_noise(cov, 77, 3);
    EXPECT_TRUE((a.topRows(3).array() == b.array()).all());
    const NoiseFactor f = factorize(cov);
    EXPECT_TRUE((draw(f, 77, 4).transpose().array() == a.row(4).array()).all());
    EXPECT_FALSE((sample_noise(cov, 78, 3).array() == b.array()).all());
}

TEST(SampleNoise, PathologicalCovarianceIsRejected) {
    // All of the variance sits below the clip threshold.
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 4);
    m(0, 0) = 1e-12;
    m(0, 1) = m(1, 0) = 1e-13;
    CovarianceMatrix tiny{m, 1.0};
    EXPECT_THROW(factorize(tiny), DegenerateError);
}

TEST(Synthesize, ZeroSigmaGivesMeanPowers) {
    PropagationParams p;
    p.sigma_db = 0.0;
    const SetupConfig cfg = coarse();
    for (const auto& k : {CorrelationKernel::independent(), CorrelationKernel::diffraction(kLambda)}) {
        const MeasurementSet m = synthesize(cfg, p, k, 2, 5);
        const auto mean = mean_power_vector(p, m.positions, cfg.blind_position);
        for (std::size_t i = 0; i < m.positions.size(); ++i)
            for (int r = 0; r < 2; ++r) EXPECT_EQ(m.power(i, r), mean[static_cast<Eigen::Index>(i)]);
    }
}

TEST(Synthesize, IndependentResidualStd) {
    const SetupConfig cfg;
    const PropagationParams p;
    const Synthesizer syn(cfg, p, CorrelationKernel::independent());
    double ss = 0.0;
    std::size_t count = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const MeasurementSet m = syn(1, seed);
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double r = m.powers[i] - syn.mean()[static_cast<Eigen::Index>(i)];
            ss += r * r;
            ++count;
        }
    }
    ASSERT_GE(count, 10000u);
    EXPECT_NEAR(std::sqrt(ss / static_cast<double>(count)) / p.sigma_db, 1.0, 0.03);
}

TEST(Synthesize, SameSeedIsBitIdentical) {
    const SetupConfig cfg = coarse(4.0);
    const PropagationParams p;
    for (const auto& k : {CorrelationKernel::independent(), CorrelationKernel::diffraction(kLambda),
                          CorrelationKernel::exponential(kLambda)}) {
        const MeasurementSet a = synthesize(cfg, p, k, 3, 99, SynthesisOptions{0.5});
        const MeasurementSet b = synthesize(cfg, p, k, 3, 99, SynthesisOptions{0.5});
        EXPECT_EQ(a.powers, b.powers);
        EXPECT_EQ(a.positions, b.positions);
        EXPECT_EQ(a.seed, 99u);
        const MeasurementSet c = synthesize(cfg, p, k, 3, 100, SynthesisOptions{0.5});
        EXPECT_NE(a.powers, c.powers);
    }
}

TEST(Synthesize, LayoutAndDefaultRepeatModel) {
    const SetupConfig cfg = coarse();
    const MeasurementSet m = synthesize(cfg, PropagationParams{}, CorrelationKernel::diffraction(kLambda), 4, 3);
    EXPECT_EQ(m.repeats, 4);
    EXPECT_EQ(m.powers.size(), m.positions.size() * 4);
    EXPECT_NO_THROW(validate(m));
    for (std::size_t i = 0; i < m.positions.size(); ++i)
        for (int r = 1; r < 4; ++r) EXPECT_EQ(m.power(i, r), m.power(i, 0));
    // The spatial draw does not depend on the repeat count.
    const MeasurementSet one = synthesize(cfg, PropagationParams{}, CorrelationKernel::diffraction(kLambda), 1, 3);
    for (std::size_t i = 0; i < m.positions.size(); ++i) EXPECT_EQ(one.powers[i], m.power(i, 0));
}

TEST(Synthesize, TemporalNoiseIsIndependentAcrossRepeats) {
    const SetupConfig cfg;
    const double temporal = 0.8;
    const MeasurementSet m =
        synthesize(cfg, PropagationParams{}, CorrelationKernel::independent(), 3, 12, SynthesisOptions{temporal});
    double s01 = 0, s00 = 0;
    const std::size_t n = m.positions.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double a = m.power(i, 0) - m.power(i, 2);
        const double b = m.power(i, 1) - m.power(i, 2);
        s01 += a * b;
        s00 += a * a;
    }
    // Var(a) = 2τ², Cov(a, b) = τ².
    EXPECT_NEAR(s00 / static_cast<double>(n) / (2 * temporal * temporal), 1.0, 0.1);
    EXPECT_NEAR(s01 / static_cast<double>(n) / (temporal * temporal), 1.0, 0.15);
    EXPECT_THROW(Synthesizer(cfg, PropagationParams{}, CorrelationKernel::independent(), SynthesisOptions{-1.0}),
                 DomainError);
}

TEST(Synthesize, ResidualsShowNoDistanceTrend) {
    const SetupConfig cfg;
    const PropagationParams p;
    const Synthesizer syn(cfg, p, CorrelationKernel::independent());
    const MeasurementSet m = syn(1, 31);
    std::vector<double> r, dist;
    for (std::size_t i = 0; i < m.size(); ++i) {
        dist.push_back(distance(m.positions[i], cfg.blind_position));
        r.push_back(m.powers[i] - syn.mean()[static_cast<Eigen::Index>(i)]);
    }
    const auto fit = oracle::line_fit(dist, r);
    double mean_d = 0, sdd = 0;
    for (double v : dist) mean_d += v / static_cast<double>(dist.size());
    for (double v : dist) sdd += (v - mean_d) * (v - mean_d);
    const double slope_se = fit[2] / std::sqrt(sdd);
    EXPECT_LT(std::abs(fit[1]), 4.0 * slope_se);
}

TEST(Synthesize, RejectsBadInput) {
    EXPECT_THROW(synthesize(coarse(), PropagationParams{}, CorrelationKernel::independent(), 0, 1), ConfigError);
    EXPECT_THROW(synthesize(coarse(), PropagationParams{-16.7, -1, 1.68, 1}, CorrelationKernel::independent(), 1, 1),
                 DomainError);
    MeasurementSet bad{{Vec2(1, 0)}, {1.0, 2.0}, 1, 0};
    EXPECT_THROW(validate(bad), ConfigError);
}
