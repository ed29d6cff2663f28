#include "pmbm/densities.hpp"
#include "pmbm/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace pmbm;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

GaussianDensity scalar(double mean, double var) { return {vec({mean}), Matrix::Constant(1, 1, var)}; }

LinearGaussianSensor scalar_sensor(double r, double pd = 1.0) {
    return {Matrix::Identity(1, 1), Matrix::Constant(1, 1, r), pd};
}

double scalar_log_normal(double x, double mean, double var) {
    return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * (x - mean) * (x - mean) / var;
}

}  // namespace

TEST(LogDomain, SumExpAndNormalize) {
    std::vector<double> w{std::log(1.0), std::log(3.0), kNegInf};
    EXPECT_NEAR(log_sum_exp(w), std::log(4.0), 1e-15);
    EXPECT_EQ(log_sum_exp(std::vector<double>{}), kNegInf);
    EXPECT_EQ(log_sum_exp(std::vector<double>{kNegInf, kNegInf}), kNegInf);
    EXPECT_NEAR(log_add(std::log(2.0), std::log(5.0)), std::log(7.0), 1e-15);
    EXPECT_EQ(log_add(kNegInf, 1.5), 1.5);

    const double z = normalize_log_weights(w);
    EXPECT_NEAR(z, std::log(4.0), 1e-15);
    EXPECT_NEAR(std::exp(w[0]), 0.25, 1e-15);
    EXPECT_NEAR(std::exp(w[1]), 0.75, 1e-15);
    EXPECT_EQ(w[2], kNegInf);
}

TEST(LogDomain, HugeMagnitudesDoNotOverflow) {
    std::vector<double> w{-2000.0, -2000.0 + std::log(3.0)};
    EXPECT_NEAR(log_sum_exp(w), -2000.0 + std::log(4.0), 1e-12);
}

TEST(Gaussian, Validity) {
    EXPECT_TRUE(scalar(0.0, 1.0).is_valid());
    EXPECT_FALSE(scalar(0.0, -1.0).is_valid());
    Matrix asym(2, 2);
    asym << 1.0, 0.5, 0.4, 1.0;
    EXPECT_FALSE((GaussianDensity{vec({0, 0}), asym}.is_valid()));
    EXPECT_THROW(GaussianDensity::checked(vec({0, 0}), asym), ModelError);
}

TEST(KalmanPredict, IdentityWithoutNoiseIsNoOp) {
    Matrix p(2, 2);
    p << 2.0, 0.3, 0.3, 1.0;
    const GaussianDensity d{vec({1.0, -2.0}), p};
    const LinearGaussianMotion m{Matrix::Identity(2, 2), Matrix::Zero(2, 2), 1.0};
    const auto out = kalman_predict(d, m);
    EXPECT_TRUE(out.mean.isApprox(d.mean));
    EXPECT_TRUE(out.covariance.isApprox(d.covariance));
}

TEST(KalmanPredict, AdditiveNoise) {
    Matrix p(2, 2);
    p << 2.0, 0.3, 0.3, 1.0;
    const GaussianDensity d{Vector::Zero(2), p};
    const LinearGaussianMotion m{Matrix::Identity(2, 2), Matrix::Identity(2, 2), 1.0};
    const auto out = kalman_predict(d, m);
    EXPECT_TRUE(out.covariance.isApprox(p + Matrix::Identity(2, 2)));
    EXPECT_TRUE(out.mean.isZero());
}

TEST(KalmanPredict, ConstantVelocityMovesPosition) {
    const auto m = LinearGaussianMotion::constant_velocity(1.0, 0.01, 0.99);
    const GaussianDensity d{vec({0, 1, 0, 0}), Matrix::Identity(4, 4)};
    const auto out = kalman_predict(d, m);
    EXPECT_TRUE(out.mean.isApprox(vec({1, 1, 0, 0})));
    EXPECT_TRUE(out.is_valid());

    Matrix q_block(2, 2);
    q_block << 1.0 / 3.0, 0.5, 0.5, 1.0;
    EXPECT_TRUE(m.process_noise.block(0, 0, 2, 2).isApprox(0.01 * q_block));
    EXPECT_TRUE(m.process_noise.block(2, 2, 2, 2).isApprox(0.01 * q_block));
    EXPECT_TRUE(m.process_noise.block(0, 2, 2, 2).isZero());
}

TEST(KalmanPredict, DimensionMismatchThrows) {
    const auto m = LinearGaussianMotion::constant_velocity(1.0, 0.01, 0.99);
    EXPECT_THROW(kalman_predict(scalar(0.0, 1.0), m), ModelError);
}

TEST(KalmanUpdate, UninformativeMeasurement) {
    const auto d = scalar(3.0, 2.0);
    const auto u = kalman_update(d, scalar_sensor(1e12), vec({10.0}));
    EXPECT_LT(std::abs(u.posterior.mean(0) - 3.0), 1e-6 * 7.0);
    EXPECT_NEAR(u.posterior.covariance(0, 0), 2.0, 1e-9);
}

TEST(KalmanUpdate, EqualPrecisionFusion) {
    Matrix p(2, 2);
    p << 2.0, 0.5, 0.5, 1.0;
    const GaussianDensity d{vec({1.0, 2.0}), p};
    const LinearGaussianSensor s{Matrix::Identity(2, 2), p, 1.0};
    const Vector z = vec({3.0, -4.0});
    const auto u = kalman_update(d, s, z);
    EXPECT_TRUE(u.posterior.mean.isApprox((d.mean + z) / 2.0, 1e-12));
    EXPECT_TRUE(u.posterior.covariance.isApprox(p / 2.0, 1e-12));
}

TEST(KalmanUpdate, ScalarClosedForm) {
    const auto u = kalman_update(scalar(0.0, 1.0), scalar_sensor(1.0), vec({2.0}));
    EXPECT_NEAR(u.posterior.mean(0), 1.0, 1e-15);
    EXPECT_NEAR(u.posterior.covariance(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(u.log_likelihood, scalar_log_normal(2.0, 0.0, 2.0), 1e-14);
}

TEST(KalmanUpdate, PositionSensorOnConstantVelocityState) {
    const auto s = LinearGaussianSensor::position(4.0, 0.9);
    Matrix h(2, 4);
    h << 1, 0, 0, 0, 0, 0, 1, 0;
    EXPECT_TRUE(s.observation.isApprox(h));
    EXPECT_TRUE(s.noise.isApprox(4.0 * Matrix::Identity(2, 2)));

    const GaussianDensity d{vec({10, 1, 20, -1}), Matrix::Identity(4, 4) * 9.0};
    const auto u = kalman_update(d, s, vec({13, 16}));
    // Independent axes: position gain 9/13.
    EXPECT_NEAR(u.posterior.mean(0), 10 + 3.0 * 9.0 / 13.0, 1e-12);
    EXPECT_NEAR(u.posterior.mean(2), 20 - 4.0 * 9.0 / 13.0, 1e-12);
    EXPECT_NEAR(u.posterior.mean(1), 1.0, 1e-12);
    EXPECT_NEAR(u.log_likelihood, scalar_log_normal(13, 10, 13) + scalar_log_normal(16, 20, 13), 1e-12);
    EXPECT_TRUE(u.posterior.is_valid());
    EXPECT_TRUE(u.posterior.covariance.isApprox(u.posterior.covariance.transpose(), 0.0));
}

TEST(KalmanUpdate, SingularInnovationThrows) {
    const LinearGaussianSensor s{Matrix::Identity(1, 1), Matrix::Zero(1, 1), 1.0};
    EXPECT_THROW(kalman_update(scalar(0.0, 0.0), s, vec({1.0})), NumericalError);
}

TEST(KalmanUpdate, PositiveDefiniteUnderTinyNoise) {
    const auto s = LinearGaussianSensor::position(1e-10, 1.0);
    GaussianDensity d{vec({0, 0, 0, 0}), Matrix::Identity(4, 4) * 1e4};
    const auto m = LinearGaussianMotion::constant_velocity(1.0, 0.01, 1.0);
    for (int k = 0; k < 50; ++k) {
        d = kalman_update(kalman_predict(d, m), s, vec({double(k), double(-k)})).posterior;
        ASSERT_TRUE(d.is_valid()) << "step " << k;
    }
}

TEST(KalmanUpdate, LikelihoodIntegratesToOne) {
    const auto d = scalar(1.0, 2.0);
    const auto s = scalar_sensor(0.5);
    double integral = 0.0;
    const double dz = 1e-3;
    for (double z = -20.0; z <= 22.0; z += dz) integral += std::exp(kalman_update(d, s, vec({z})).log_likelihood) * dz;
    EXPECT_NEAR(integral, 1.0, 0.02);
}

TEST(Gate, CenterAndExamples) {
    EXPECT_TRUE(ellipsoidal_gate(scalar(5.0, 1.0), scalar_sensor(1.0), vec({5.0}), 20.0));
    EXPECT_DOUBLE_EQ(innovation_distance(scalar(5.0, 1.0), scalar_sensor(1.0), vec({5.0})), 0.0);

    // Innovation variance 1, offset 10: distance 100.
    EXPECT_NEAR(innovation_distance(scalar(0.0, 0.5), scalar_sensor(0.5), vec({10.0})), 100.0, 1e-12);
    EXPECT_FALSE(ellipsoidal_gate(scalar(0.0, 0.5), scalar_sensor(0.5), vec({10.0}), 20.0));

    // Innovation variance 4, offset 8: distance 16.
    EXPECT_NEAR(innovation_distance(scalar(0.0, 3.0), scalar_sensor(1.0), vec({8.0})), 16.0, 1e-12);
    EXPECT_TRUE(ellipsoidal_gate(scalar(0.0, 3.0), scalar_sensor(1.0), vec({8.0}), 20.0));
}

TEST(Gate, MonotoneInThreshold) {
    const auto d = scalar(0.0, 1.0);
    const auto s = scalar_sensor(1.0);
    for (double z = -10.0; z <= 10.0; z += 0.37) {
        bool seen = false;
        for (double t = 0.5; t <= 60.0; t += 0.5) {
            const bool g = ellipsoidal_gate(d, s, vec({z}), t);
            EXPECT_TRUE(!seen || g);
            seen = seen || g;
        }
    }
}

TEST(Gate, RejectsNonPositiveThreshold) {
    EXPECT_THROW(ellipsoidal_gate(scalar(0.0, 1.0), scalar_sensor(1.0), vec({0.0}), 0.0), ModelError);
}

TEST(LogGaussian, MatchesScalarFormula) {
    EXPECT_NEAR(log_gaussian(vec({1.3}), vec({0.2}), Matrix::Constant(1, 1, 2.5)), scalar_log_normal(1.3, 0.2, 2.5),
                1e-14);
}

TEST(MomentMatch, TwoScalarComponents) {
    // 0.25 N(0, 1) + 0.75 N(4, 2): mean 3, var 0.25*1 + 0.75*2 + 0.25*9 + 0.75*1 = 4.75.
    const std::vector<double> w{std::log(1.0), std::log(3.0)};
    const std::vector<GaussianDensity> c{scalar(0.0, 1.0), scalar(4.0, 2.0)};
    const auto m = moment_match(w, c);
    EXPECT_NEAR(m.mean(0), 3.0, 1e-14);
    EXPECT_NEAR(m.covariance(0, 0), 4.75, 1e-13);
    EXPECT_THROW(moment_match(std::vector<double>{kNegInf}, std::vector<GaussianDensity>{scalar(0, 1)}), NumericalError);
}

TEST(Models, Validation) {
    EXPECT_THROW((LinearGaussianMotion{Matrix::Identity(2, 2), Matrix::Identity(2, 2), 1.5}.validate()), ModelError);
    EXPECT_THROW((LinearGaussianMotion{Matrix::Identity(2, 2), -Matrix::Identity(2, 2), 0.5}.validate()), ModelError);
    EXPECT_THROW((LinearGaussianSensor{Matrix::Identity(1, 1), Matrix::Zero(1, 1), 0.5}.validate()), ModelError);
    EXPECT_THROW((LinearGaussianSensor{Matrix::Identity(1, 1), Matrix::Identity(1, 1), -0.1}.validate()), ModelError);
    EXPECT_NO_THROW(LinearGaussianMotion::constant_velocity(1.0, 0.01, 0.99).validate());
}
