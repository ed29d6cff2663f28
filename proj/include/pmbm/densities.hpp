#pragma once

#include <Eigen/Dense>

#include <limits>
#include <span>
#include <vector>

namespace pmbm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ---- log-domain helpers ----

/// log(sum(exp(values))); returns -inf for an empty range or all -inf inputs.
double log_sum_exp(std::span<const double> values);

/// log(exp(a) + exp(b))
double log_add(double a, double b);

/// Normalizes log-weights in place so that they exponentiate to one. Returns the log normalizer.
double normalize_log_weights(std::span<double> log_weights);

// ---- single-target densities ----

struct GaussianDensity {
    Vector mean;
    Matrix covariance;

    [[nodiscard]] Eigen::Index dim() const { return mean.size(); }

    /// Symmetric within `rel_tol` (relative to the largest entry) and positive definite.
    [[nodiscard]] bool is_valid(double rel_tol = 1e-9) const;

    /// Constructs and validates; throws ModelError on malformed input.
    static GaussianDensity checked(Vector mean, Matrix covariance);
};

/// Linear-Gaussian transition x' ~ N(F x, Q) with constant survival probability.
struct LinearGaussianMotion {
    Matrix transition;
    Matrix process_noise;
    double survival = 1.0;

    void validate() const;

    /// Nearly-constant velocity model with state [px, vx, py, vy, ...] over `axes` axes.
    static LinearGaussianMotion constant_velocity(double period, double noise_intensity,
                                                  double survival, int axes = 2);
};

/// Linear-Gaussian sensor z ~ N(H x, R) with constant detection probability.
struct LinearGaussianSensor {
    Matrix observation;
    Matrix noise;
    double detection = 1.0;

    void validate() const;

    /// Position-only sensor for constant-velocity states (H = I_axes (x) [1 0]).
    static LinearGaussianSensor position(double noise_variance, double detection, int axes = 2);
};

GaussianDensity kalman_predict(const GaussianDensity& d, const LinearGaussianMotion& m);

struct KalmanUpdate {
    GaussianDensity posterior;
    /// log N(z; H mean, H P H' + R); detection probability is not included.
    double log_likelihood = kNegInf;
};

/// Joseph-form Kalman update. Throws NumericalError when the innovation covariance is singular.
KalmanUpdate kalman_update(const GaussianDensity& d, const LinearGaussianSensor& s, const Vector& z);

/// Squared Mahalanobis distance of z under the predicted measurement density.
double innovation_distance(const GaussianDensity& d, const LinearGaussianSensor& s, const Vector& z);

/// True iff the squared Mahalanobis distance of z is at most `threshold`.
bool ellipsoidal_gate(const GaussianDensity& d, const LinearGaussianSensor& s, const Vector& z,
                      double threshold);

/// log N(x; mean, cov)
double log_gaussian(const Vector& x, const Vector& mean, const Matrix& cov);

/// Moment-matched Gaussian of a mixture given by log-weights (need not be normalized).
GaussianDensity moment_match(std::span<const double> log_weights,
                             std::span<const GaussianDensity> components);

}  // namespace pmbm
