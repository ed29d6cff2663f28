#pragma once

#include "pmbm/densities.hpp"

#include <optional>
#include <span>
#include <variant>

namespace pmbm {

/// At most one measurement per target: detected with p^D, then z ~ N(Hx, R).
struct PointTargetModel {
    LinearGaussianSensor sensor;
};

/// Detected with probability `detection`, then a Poisson number (mean `rate`) of IID
/// measurements from the sensor likelihood. `sensor.detection` is not used.
struct ExtendedTargetModel {
    double detection = 1.0;
    double rate = 1.0;
    LinearGaussianSensor sensor;

    void validate() const;
};

/// log <d, f(Z|.)> for the point-target model.
double point_set_density(const PointTargetModel& model, std::span<const Vector> z,
                         const GaussianDensity& d);

/// log f(Z|x) for the extended-target model at a fixed state.
double extended_set_density(const ExtendedTargetModel& model, std::span<const Vector> z, const Vector& x);

/// log <d, f(Z|.)> for the extended-target model. With constant detection probability and
/// measurement rate the integral is exact: sequential Kalman updates over the elements of Z.
double extended_set_density(const ExtendedTargetModel& model, std::span<const Vector> z,
                            const GaussianDensity& d);

struct SetUpdate {
    double log_likelihood = kNegInf;  ///< log <p, f(Z|.)>
    GaussianDensity posterior;        ///< f(Z|x) p(x) / <p, f(Z|.)>
};

/// Target-generated measurement-set density f(Z|x) as used by the filter update.
class MeasurementModel {
public:
    MeasurementModel(PointTargetModel m);      // NOLINT(google-explicit-constructor)
    MeasurementModel(ExtendedTargetModel m);   // NOLINT(google-explicit-constructor)

    /// Only subsets of size at most one can be target generated.
    [[nodiscard]] bool point_target() const { return std::holds_alternative<PointTargetModel>(model_); }

    [[nodiscard]] const LinearGaussianSensor& sensor() const;

    /// log <p, f(emptyset|.)>. Both models have state-independent f(emptyset|x), so the
    /// misdetection posterior equals the prior.
    [[nodiscard]] double log_miss() const;

    /// Update with a non-empty measurement subset. nullopt when f(Z|x) = 0 identically.
    [[nodiscard]] std::optional<SetUpdate> update(const GaussianDensity& prior,
                                                  std::span<const Vector> z) const;

    /// Update with a subset of `scan` given by indices.
    [[nodiscard]] std::optional<SetUpdate> update(const GaussianDensity& prior,
                                                  std::span<const Vector> scan,
                                                  std::span<const int> subset) const;

    [[nodiscard]] const std::variant<PointTargetModel, ExtendedTargetModel>& variant() const {
        return model_;
    }

private:
    std::variant<PointTargetModel, ExtendedTargetModel> model_;
};

}  // namespace pmbm
