#pragma once

#include "pmbm/densities.hpp"

#include <optional>
#include <random>
#include <span>
#include <variant>
#include <vector>

namespace pmbm {

/// Axis-aligned box [lower, upper] in measurement space.
struct Region {
    Vector lower;
    Vector upper;

    [[nodiscard]] double volume() const;
    [[nodiscard]] bool contains(const Vector& z) const;
    void validate() const;

    static Region box(std::span<const double> lower, std::span<const double> upper);
};

/// PPP clutter with total rate `rate`, uniform over `region`.
struct PoissonClutter {
    double rate = 0.0;
    Region region;

    /// log lambda^C(z) = log(rate / |A|) inside A, -inf outside.
    [[nodiscard]] double log_intensity(const Vector& z) const;
    void validate() const;
};

struct PoissonCardinality {
    double mean = 0.0;
};

struct NegBinomialCardinality {
    double r = 1.0;
    double p = 1.0;
};

using Cardinality = std::variant<PoissonCardinality, NegBinomialCardinality>;

/// log NB(m; r, p) via log-gamma.
double nb_pmf(const NegBinomialCardinality& card, int m);

/// NB with the given mean and variance-to-mean ratio (dispersion > 1).
NegBinomialCardinality nb_from_mean_dispersion(double mean, double dispersion);

double log_pmf(const Cardinality& card, int m);
double mean(const Cardinality& card);
double variance(const Cardinality& card);
void validate(const Cardinality& card);

/// Smallest M with P(count <= M) >= 1 - tail.
int truncation_point(const Cardinality& card, double tail = 1e-14);

/// Poisson draw for the Poisson case; gamma-mixed Poisson for the negative binomial.
int sample_count(const Cardinality& card, std::mt19937_64& rng);

/// IID cluster process with uniform single-measurement density on `region`.
struct IidClusterClutter {
    Cardinality cardinality;
    Region region;

    void validate() const;
};

double iid_cluster_density(const IidClusterClutter& c, std::span<const Vector> z);

/// Independent clutter source at a fixed location: present with probability `detection`,
/// then a Poisson number (mean `rate`) of measurements from N(location, spread).
struct ClutterSource {
    double detection = 1.0;
    double rate = 1.0;
    Vector location;
    Matrix spread;

    void validate() const;
};

/// log c^s(Z) for a single source.
double source_density(const ClutterSource& s, std::span<const Vector> z);

/// Union of PPP clutter and independent sources.
struct CompositeClutter {
    PoissonClutter ppp;
    std::vector<ClutterSource> sources;

    void validate() const;
};

inline constexpr std::size_t kCompositeEnumerationLimit = 12;

/// log c(Z) by summing over all assignments of measurements to the PPP or a source.
/// Throws SizeError for |Z| > kCompositeEnumerationLimit.
double composite_clutter_density(const CompositeClutter& c, std::span<const Vector> z);

/// D(Poisson || NB) between a Poisson and the NB with the same mean and given dispersion.
double poisson_nb_kld(double mean, double dispersion);

/// Evaluable clutter-set density c(.) for any family.
class ClutterModel {
public:
    using Family = std::variant<PoissonClutter, IidClusterClutter, CompositeClutter>;

    ClutterModel(PoissonClutter c);      // NOLINT(google-explicit-constructor)
    ClutterModel(IidClusterClutter c);   // NOLINT(google-explicit-constructor)
    ClutterModel(CompositeClutter c);    // NOLINT(google-explicit-constructor)

    [[nodiscard]] double log_density(std::span<const Vector> z) const;
    /// log c of the subset of `scan` selected by `subset` (indices into scan).
    [[nodiscard]] double log_density(std::span<const Vector> scan, std::span<const int> subset) const;

    /// Set when the model is an IID cluster process with uniform spatial density.
    [[nodiscard]] const IidClusterClutter* uniform_iid() const;

    [[nodiscard]] std::vector<Vector> sample(std::mt19937_64& rng) const;

    [[nodiscard]] const Family& family() const { return family_; }

private:
    Family family_;
};

}  // namespace pmbm
