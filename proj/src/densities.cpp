#include "pmbm/densities.hpp"

#include "pmbm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace pmbm {

double log_sum_exp(std::span<const double> values) {
    if (values.empty()) return kNegInf;
    const double max = *std::max_element(values.begin(), values.end());
    if (!std::isfinite(max)) return max;
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - max);
    return max + std::log(sum);
}

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double normalize_log_weights(std::span<double> log_weights) {
    const double total = log_sum_exp(log_weights);
    if (!std::isfinite(total)) return total;
    for (double& w : log_weights) w -= total;
    return total;
}

bool GaussianDensity::is_valid(double rel_tol) const {
    if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) return false;
    if (!mean.allFinite() || !covariance.allFinite()) return false;
    const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
    if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > rel_tol * scale) return false;
    Eigen::LLT<Matrix> llt(covariance);
    return llt.info() == Eigen::Success;
}

GaussianDensity GaussianDensity::checked(Vector mean, Matrix covariance) {
    GaussianDensity d{std::move(mean), std::move(covariance)};
    if (!d.is_valid()) throw ModelError("Gaussian covariance must be symmetric positive definite");
    return d;
}

void LinearGaussianMotion::validate() const {
    if (transition.rows() != transition.cols())
        throw ModelError("transition matrix must be square");
    if (process_noise.rows() != transition.rows() || process_noise.cols() != transition.cols())
        throw ModelError("process noise dimension does not match the transition matrix");
    if (!(survival >= 0.0 && survival <= 1.0))
        throw ModelError("survival probability must lie in [0, 1]");
    if ((process_noise - process_noise.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw ModelError("process noise must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(process_noise);
    if (eig.eigenvalues().minCoeff() < -1e-12)
        throw ModelError("process noise must be positive semi-definite");
}

LinearGaussianMotion LinearGaussianMotion::constant_velocity(double period, double noise_intensity,
                                                            double survival, int axes) {
    Eigen::Matrix2d f;
    f << 1.0, period, 0.0, 1.0;
    Eigen::Matrix2d q;
    q << period * period * period / 3.0, period * period / 2.0, period * period / 2.0, period;
    q *= noise_intensity;
    LinearGaussianMotion m;
    m.transition = Matrix::Zero(2 * axes, 2 * axes);
    m.process_noise = Matrix::Zero(2 * axes, 2 * axes);
    for (int a = 0; a < axes; ++a) {
        m.transition.block<2, 2>(2 * a, 2 * a) = f;
        m.process_noise.block<2, 2>(2 * a, 2 * a) = q;
    }
    m.survival = survival;
    m.validate();
    return m;
}

void LinearGaussianSensor::validate() const {
    if (noise.rows() != observation.rows() || noise.cols() != observation.rows())
        throw ModelError("measurement noise dimension does not match the observation matrix");
    if (!(detection >= 0.0 && detection <= 1.0))
        throw ModelError("detection probability must lie in [0, 1]");
    if ((noise - noise.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw ModelError("measurement noise must be symmetric");
    Eigen::LLT<Matrix> llt(noise);
    if (llt.info() != Eigen::Success) throw ModelError("measurement noise must be positive definite");
}

LinearGaussianSensor LinearGaussianSensor::position(double noise_variance, double detection, int axes) {
    LinearGaussianSensor s;
    s.observation = Matrix::Zero(axes, 2 * axes);
    for (int a = 0; a < axes; ++a) s.observation(a, 2 * a) = 1.0;
    s.noise = noise_variance * Matrix::Identity(axes, axes);
    s.detection = detection;
    s.validate();
    return s;
}

GaussianDensity kalman_predict(const GaussianDensity& d, const LinearGaussianMotion& m) {
    if (m.transition.cols() != d.dim() || m.process_noise.rows() != m.transition.rows())
        throw ModelError("kalman_predict: state dimension " + std::to_string(d.dim()) +
                         " does not match transition matrix with " +
                         std::to_string(m.transition.cols()) + " columns");
    GaussianDensity out;
    out.mean = m.transition * d.mean;
    Matrix cov = m.transition * d.covariance * m.transition.transpose() + m.process_noise;
    out.covariance = 0.5 * (cov + cov.transpose());
    return out;
}

namespace {

void check_sensor_dims(const GaussianDensity& d, const LinearGaussianSensor& s, const Vector& z) {
    if (s.observation.cols() != d.dim())
        throw ModelError("sensor observation matrix does not match the state dimension");
    if (z.size() != s.observation.rows())
        throw ModelError("measurement dimension " + std::to_string(z.size()) +
                         " does not match observation matrix rows " +
                         std::to_string(s.observation.rows()));
}

}  // namespace

KalmanUpdate kalman_update(const GaussianDensity& d, const LinearGaussianSensor& s, const Vector& z) {
    check_sensor_dims(d, s, z);
    const Matrix& h = s.observation;
    const Matrix pht = d.covariance * h.transpose();
    Matrix innov_cov = h * pht + s.noise;
    innov_cov = 0.5 * (innov_cov + innov_cov.transpose());
    Eigen::LLT<Matrix> llt(innov_cov);
    if (llt.info() != Eigen::Success)
        throw NumericalError("kalman_update: innovation covariance is not positive definite");

    const Vector innovation = z - h * d.mean;
    const Matrix gain = llt.solve(pht.transpose()).transpose();

    KalmanUpdate out;
    out.posterior.mean = d.mean + gain * innovation;
    const Matrix i_kh = Matrix::Identity(d.dim(), d.dim()) - gain * h;
    Matrix cov = i_kh * d.covariance * i_kh.transpose() + gain * s.noise * gain.transpose();
    out.posterior.covariance = 0.5 * (cov + cov.transpose());

    const Matrix l = llt.matrixL();
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    const double maha = llt.matrixL().solve(innovation).squaredNorm();
    out.log_likelihood = -0.5 * (static_cast<double>(z.size()) * std::log(2.0 * std::numbers::pi) +
                                 log_det + maha);
    return out;
}

double innovation_distance(const GaussianDensity& d, const LinearGaussianSensor& s, const Vector& z) {
    check_sensor_dims(d, s, z);
    Matrix innov_cov = s.observation * d.covariance * s.observation.transpose() + s.noise;
    Eigen::LLT<Matrix> llt(0.5 * (innov_cov + innov_cov.transpose()));
    if (llt.info() != Eigen::Success)
        throw NumericalError("innovation covariance is not positive definite");
    return llt.matrixL().solve(z - s.observation * d.mean).squaredNorm();
}

bool ellipsoidal_gate(const GaussianDensity& d, const LinearGaussianSensor& s, const Vector& z,
                      double threshold) {
    if (!(threshold > 0.0)) throw ModelError("gating threshold must be positive");
    return innovation_distance(d, s, z) <= threshold;
}

double log_gaussian(const Vector& x, const Vector& mean, const Matrix& cov) {
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalError("log_gaussian: covariance is not positive definite");
    const Matrix l = llt.matrixL();
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    const double maha = llt.matrixL().solve(x - mean).squaredNorm();
    return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) + log_det + maha);
}

GaussianDensity moment_match(std::span<const double> log_weights,
                             std::span<const GaussianDensity> components) {
    if (components.empty() || components.size() != log_weights.size())
        throw ModelError("moment_match: need one weight per component");
    std::vector<double> w(log_weights.begin(), log_weights.end());
    if (!std::isfinite(normalize_log_weights(w)))
        throw NumericalError("moment_match: mixture has zero total weight");
    if (components.size() == 1) return components.front();

    const auto dim = components.front().dim();
    Vector mean = Vector::Zero(dim);
    for (std::size_t c = 0; c < components.size(); ++c) mean += std::exp(w[c]) * components[c].mean;
    Matrix cov = Matrix::Zero(dim, dim);
    for (std::size_t c = 0; c < components.size(); ++c) {
        const Vector diff = components[c].mean - mean;
        cov += std::exp(w[c]) * (components[c].covariance + diff * diff.transpose());
    }
    return {std::move(mean), 0.5 * (cov + cov.transpose())};
}

}  // namespace pmbm
