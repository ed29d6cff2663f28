#include "pmbm/measmodel.hpp"

#include "pmbm/errors.hpp"

#include <cmath>
#include <vector>

namespace pmbm {

void ExtendedTargetModel::validate() const {
    if (!(detection >= 0.0 && detection <= 1.0))
        throw ModelError("extended target detection probability must lie in [0, 1]");
    if (!(rate > 0.0)) throw ModelError("extended target measurement rate must be positive");
    sensor.validate();
}

double point_set_density(const PointTargetModel& model, std::span<const Vector> z,
                         const GaussianDensity& d) {
    const double pd = model.sensor.detection;
    if (z.empty()) return std::log1p(-pd);
    if (z.size() > 1 || pd == 0.0) return kNegInf;
    return std::log(pd) + kalman_update(d, model.sensor, z.front()).log_likelihood;
}

namespace {

double extended_empty(const ExtendedTargetModel& m) {
    return std::log(1.0 - m.detection + m.detection * std::exp(-m.rate));
}

template <class Get>
std::optional<SetUpdate> extended_update(const ExtendedTargetModel& m, const GaussianDensity& prior,
                                         std::size_t count, Get&& get) {
    if (m.detection == 0.0) return std::nullopt;
    SetUpdate out;
    out.posterior = prior;
    double log_lik = std::log(m.detection) + static_cast<double>(count) * std::log(m.rate) - m.rate;
    for (std::size_t i = 0; i < count; ++i) {
        auto step = kalman_update(out.posterior, m.sensor, get(i));
        log_lik += step.log_likelihood;
        out.posterior = std::move(step.posterior);
    }
    out.log_likelihood = log_lik;
    return out;
}

}  // namespace

double extended_set_density(const ExtendedTargetModel& model, std::span<const Vector> z, const Vector& x) {
    if (z.empty()) return extended_empty(model);
    if (model.detection == 0.0) return kNegInf;
    double v = std::log(model.detection) + static_cast<double>(z.size()) * std::log(model.rate) - model.rate;
    const Vector mean = model.sensor.observation * x;
    for (const auto& zi : z) v += log_gaussian(zi, mean, model.sensor.noise);
    return v;
}

double extended_set_density(const ExtendedTargetModel& model, std::span<const Vector> z,
                            const GaussianDensity& d) {
    if (z.empty()) return extended_empty(model);
    auto u = extended_update(model, d, z.size(), [&](std::size_t i) -> const Vector& { return z[i]; });
    return u ? u->log_likelihood : kNegInf;
}

MeasurementModel::MeasurementModel(PointTargetModel m) : model_(std::move(m)) {
    std::get<PointTargetModel>(model_).sensor.validate();
}

MeasurementModel::MeasurementModel(ExtendedTargetModel m) : model_(std::move(m)) {
    std::get<ExtendedTargetModel>(model_).validate();
}

const LinearGaussianSensor& MeasurementModel::sensor() const {
    return std::visit([](const auto& m) -> const LinearGaussianSensor& { return m.sensor; }, model_);
}

double MeasurementModel::log_miss() const {
    if (const auto* p = std::get_if<PointTargetModel>(&model_)) return std::log1p(-p->sensor.detection);
    return extended_empty(std::get<ExtendedTargetModel>(model_));
}

std::optional<SetUpdate> MeasurementModel::update(const GaussianDensity& prior,
                                                  std::span<const Vector> z) const {
    std::vector<int> all(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) all[i] = static_cast<int>(i);
    return update(prior, z, all);
}

std::optional<SetUpdate> MeasurementModel::update(const GaussianDensity& prior,
                                                  std::span<const Vector> scan,
                                                  std::span<const int> subset) const {
    if (subset.empty()) throw ModelError("MeasurementModel::update needs a non-empty subset");
    if (const auto* p = std::get_if<PointTargetModel>(&model_)) {
        if (subset.size() > 1 || p->sensor.detection == 0.0) return std::nullopt;
        auto ku = kalman_update(prior, p->sensor, scan[static_cast<std::size_t>(subset.front())]);
        return SetUpdate{std::log(p->sensor.detection) + ku.log_likelihood, std::move(ku.posterior)};
    }
    const auto& e = std::get<ExtendedTargetModel>(model_);
    return extended_update(e, prior, subset.size(), [&](std::size_t i) -> const Vector& {
        return scan[static_cast<std::size_t>(subset[i])];
    });
}

}  // namespace pmbm
