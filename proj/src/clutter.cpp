#include "pmbm/clutter.hpp"

#include "pmbm/errors.hpp"

#include <cmath>
#include <string>

namespace pmbm {

double Region::volume() const {
    double v = 1.0;
    for (Eigen::Index i = 0; i < lower.size(); ++i) v *= upper[i] - lower[i];
    return v;
}

bool Region::contains(const Vector& z) const {
    if (z.size() != lower.size()) return false;
    for (Eigen::Index i = 0; i < z.size(); ++i)
        if (z[i] < lower[i] || z[i] > upper[i]) return false;
    return true;
}

void Region::validate() const {
    if (lower.size() == 0 || lower.size() != upper.size())
        throw ModelError("region bounds must be non-empty and of equal dimension");
    if (!(volume() > 0.0) || ((upper - lower).array() <= 0.0).any())
        throw ModelError("region must have positive extent along every axis");
}

Region Region::box(std::span<const double> lower, std::span<const double> upper) {
    Region r{Eigen::Map<const Vector>(lower.data(), static_cast<Eigen::Index>(lower.size())),
             Eigen::Map<const Vector>(upper.data(), static_cast<Eigen::Index>(upper.size()))};
    r.validate();
    return r;
}

double PoissonClutter::log_intensity(const Vector& z) const {
    if (rate == 0.0 || !region.contains(z)) return kNegInf;
    return std::log(rate / region.volume());
}

void PoissonClutter::validate() const {
    if (!(rate >= 0.0)) throw ModelError("clutter rate must be non-negative");
    region.validate();
}

// ---- cardinality distributions ----

double nb_pmf(const NegBinomialCardinality& card, int m) {
    if (m < 0) throw RangeError("nb_pmf: count must be non-negative");
    const double md = static_cast<double>(m);
    const double tail = (card.p == 1.0) ? (m == 0 ? 0.0 : kNegInf) : md * std::log1p(-card.p);
    return std::lgamma(card.r + md) - std::lgamma(card.r) - std::lgamma(md + 1.0) +
           card.r * std::log(card.p) + tail;
}

NegBinomialCardinality nb_from_mean_dispersion(double mean, double dispersion) {
    if (!(mean > 0.0)) throw ModelError("negative binomial mean must be positive");
    if (!(dispersion > 1.0))
        throw ModelError("negative binomial dispersion must exceed 1 (it is always over-dispersed)");
    return {mean / (dispersion - 1.0), 1.0 / dispersion};
}

namespace {

double poisson_log_pmf(double mean, int m) {
    if (m < 0) throw RangeError("count must be non-negative");
    if (mean == 0.0) return m == 0 ? 0.0 : kNegInf;
    const double md = static_cast<double>(m);
    return md * std::log(mean) - mean - std::lgamma(md + 1.0);
}

}  // namespace

double log_pmf(const Cardinality& card, int m) {
    if (const auto* p = std::get_if<PoissonCardinality>(&card)) return poisson_log_pmf(p->mean, m);
    return nb_pmf(std::get<NegBinomialCardinality>(card), m);
}

double mean(const Cardinality& card) {
    if (const auto* p = std::get_if<PoissonCardinality>(&card)) return p->mean;
    const auto& nb = std::get<NegBinomialCardinality>(card);
    return (1.0 - nb.p) * nb.r / nb.p;
}

double variance(const Cardinality& card) {
    if (const auto* p = std::get_if<PoissonCardinality>(&card)) return p->mean;
    const auto& nb = std::get<NegBinomialCardinality>(card);
    return (1.0 - nb.p) * nb.r / (nb.p * nb.p);
}

void validate(const Cardinality& card) {
    if (const auto* p = std::get_if<PoissonCardinality>(&card)) {
        if (!(p->mean >= 0.0)) throw ModelError("Poisson cardinality mean must be non-negative");
        return;
    }
    const auto& nb = std::get<NegBinomialCardinality>(card);
    if (!(nb.r > 0.0)) throw ModelError("negative binomial r must be positive");
    if (!(nb.p > 0.0 && nb.p <= 1.0)) throw ModelError("negative binomial p must lie in (0, 1]");
}

int truncation_point(const Cardinality& card, double tail) {
    constexpr int kMaxCount = 1'000'000;
    double cumulative = 0.0;
    for (int m = 0; m < kMaxCount; ++m) {
        cumulative += std::exp(log_pmf(card, m));
        if (cumulative >= 1.0 - tail) return m;
    }
    throw SizeError("cardinality truncation did not converge");
}

int sample_count(const Cardinality& card, std::mt19937_64& rng) {
    double rate = 0.0;
    if (const auto* p = std::get_if<PoissonCardinality>(&card)) {
        rate = p->mean;
    } else {
        const auto& nb = std::get<NegBinomialCardinality>(card);
        if (nb.p == 1.0) return 0;
        std::gamma_distribution<double> gamma(nb.r, (1.0 - nb.p) / nb.p);
        rate = gamma(rng);
    }
    if (rate <= 0.0) return 0;
    std::poisson_distribution<int> poisson(rate);
    return poisson(rng);
}

// ---- clutter families ----

void IidClusterClutter::validate() const {
    pmbm::validate(cardinality);
    region.validate();
}

void ClutterSource::validate() const {
    if (!(detection >= 0.0 && detection <= 1.0))
        throw ModelError("clutter source probability must lie in [0, 1]");
    if (!(rate > 0.0)) throw ModelError("clutter source measurement rate must be positive");
    GaussianDensity::checked(location, spread);
}

void CompositeClutter::validate() const {
    ppp.validate();
    for (const auto& s : sources) s.validate();
}

namespace {

// Evaluation kernels over an indexed view of measurements.
struct View {
    std::span<const Vector> scan;
    std::span<const int> subset;
    bool all = true;

    [[nodiscard]] std::size_t size() const { return all ? scan.size() : subset.size(); }
    [[nodiscard]] const Vector& operator[](std::size_t i) const {
        return all ? scan[i] : scan[static_cast<std::size_t>(subset[i])];
    }
};

double ppp_density(const PoissonClutter& c, const View& z) {
    double v = -c.rate;
    for (std::size_t i = 0; i < z.size(); ++i) v += c.log_intensity(z[i]);
    return v;
}

double iid_density(const IidClusterClutter& c, const View& z) {
    const auto n = static_cast<int>(z.size());
    const double log_volume = std::log(c.region.volume());
    double v = std::lgamma(n + 1.0) + log_pmf(c.cardinality, n);
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (!c.region.contains(z[i])) return kNegInf;
        v -= log_volume;
    }
    return v;
}

double source_density_view(const ClutterSource& s, const View& z) {
    if (z.size() == 0) return std::log(1.0 - s.detection + s.detection * std::exp(-s.rate));
    if (s.detection == 0.0) return kNegInf;
    double v = std::log(s.detection) + static_cast<double>(z.size()) * std::log(s.rate) - s.rate;
    for (std::size_t i = 0; i < z.size(); ++i) v += log_gaussian(z[i], s.location, s.spread);
    return v;
}

double composite_density(const CompositeClutter& c, const View& z) {
    const std::size_t m = z.size();
    if (m > kCompositeEnumerationLimit)
        throw SizeError("composite clutter density enumerates at most " +
                        std::to_string(kCompositeEnumerationLimit) + " measurements, got " +
                        std::to_string(m));
    const std::size_t cells = c.sources.size() + 1;

    // Per-measurement Gaussian terms, shared across assignments.
    std::vector<double> ppp_term(m);
    Matrix src_term(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(c.sources.size()));
    for (std::size_t j = 0; j < m; ++j) {
        ppp_term[j] = c.ppp.log_intensity(z[j]);
        for (std::size_t s = 0; s < c.sources.size(); ++s)
            src_term(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s)) =
                log_gaussian(z[j], c.sources[s].location, c.sources[s].spread);
    }

    std::vector<std::size_t> label(m, 0);
    std::vector<double> terms;
    while (true) {
        std::vector<int> count(cells, 0);
        double v = -c.ppp.rate;
        for (std::size_t j = 0; j < m; ++j) {
            ++count[label[j]];
            v += label[j] == 0 ? ppp_term[j]
                               : src_term(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(label[j] - 1));
        }
        for (std::size_t s = 0; s < c.sources.size(); ++s) {
            const auto& src = c.sources[s];
            const int n = count[s + 1];
            if (n == 0) {
                v += std::log(1.0 - src.detection + src.detection * std::exp(-src.rate));
            } else {
                v += (src.detection == 0.0) ? kNegInf
                                            : std::log(src.detection) + n * std::log(src.rate) - src.rate;
            }
        }
        terms.push_back(v);

        std::size_t pos = 0;
        while (pos < m && ++label[pos] == cells) label[pos++] = 0;
        if (pos == m) break;
    }
    return log_sum_exp(terms);
}

double evaluate(const ClutterModel::Family& family, const View& z) {
    return std::visit(
        [&](const auto& c) -> double {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, PoissonClutter>) return ppp_density(c, z);
            else if constexpr (std::is_same_v<T, IidClusterClutter>) return iid_density(c, z);
            else return composite_density(c, z);
        },
        family);
}

}  // namespace

double iid_cluster_density(const IidClusterClutter& c, std::span<const Vector> z) {
    return iid_density(c, View{z, {}, true});
}

double source_density(const ClutterSource& s, std::span<const Vector> z) {
    return source_density_view(s, View{z, {}, true});
}

double composite_clutter_density(const CompositeClutter& c, std::span<const Vector> z) {
    return composite_density(c, View{z, {}, true});
}

double poisson_nb_kld(double mean, double dispersion) {
    const Cardinality poisson = PoissonCardinality{mean};
    const auto nb = nb_from_mean_dispersion(mean, dispersion);
    const int last = truncation_point(poisson, 1e-14);
    double kld = 0.0;
    for (int m = 0; m <= last; ++m) {
        const double lp = log_pmf(poisson, m);
        kld += std::exp(lp) * (lp - nb_pmf(nb, m));
    }
    return std::max(kld, 0.0);
}

// ---- ClutterModel ----

ClutterModel::ClutterModel(PoissonClutter c) : family_(std::move(c)) {
    std::get<PoissonClutter>(family_).validate();
}

ClutterModel::ClutterModel(IidClusterClutter c) : family_(std::move(c)) {
    std::get<IidClusterClutter>(family_).validate();
}

ClutterModel::ClutterModel(CompositeClutter c) : family_(std::move(c)) {
    std::get<CompositeClutter>(family_).validate();
}

double ClutterModel::log_density(std::span<const Vector> z) const {
    return evaluate(family_, View{z, {}, true});
}

double ClutterModel::log_density(std::span<const Vector> scan, std::span<const int> subset) const {
    return evaluate(family_, View{scan, subset, false});
}

const IidClusterClutter* ClutterModel::uniform_iid() const {
    return std::get_if<IidClusterClutter>(&family_);
}

namespace {

Vector sample_uniform(const Region& region, std::mt19937_64& rng) {
    Vector z(region.lower.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        std::uniform_real_distribution<double> u(region.lower[i], region.upper[i]);
        z[i] = u(rng);
    }
    return z;
}

void sample_uniform_set(const Region& region, int count, std::mt19937_64& rng, std::vector<Vector>& out) {
    for (int i = 0; i < count; ++i) out.push_back(sample_uniform(region, rng));
}

}  // namespace

std::vector<Vector> ClutterModel::sample(std::mt19937_64& rng) const {
    std::vector<Vector> out;
    std::visit(
        [&](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, PoissonClutter>) {
                sample_uniform_set(c.region, sample_count(PoissonCardinality{c.rate}, rng), rng, out);
            } else if constexpr (std::is_same_v<T, IidClusterClutter>) {
                sample_uniform_set(c.region, sample_count(c.cardinality, rng), rng, out);
            } else {
                sample_uniform_set(c.ppp.region, sample_count(PoissonCardinality{c.ppp.rate}, rng), rng, out);
                for (const auto& src : c.sources) {
                    std::bernoulli_distribution present(src.detection);
                    if (!present(rng)) continue;
                    const int n = sample_count(PoissonCardinality{src.rate}, rng);
                    const Matrix chol = Eigen::LLT<Matrix>(src.spread).matrixL();
                    std::normal_distribution<double> normal;
                    for (int i = 0; i < n; ++i) {
                        Vector e(src.location.size());
                        for (Eigen::Index d = 0; d < e.size(); ++d) e[d] = normal(rng);
                        out.push_back(src.location + chol * e);
                    }
                }
            }
        },
        family_);
    return out;
}

}  // namespace pmbm
