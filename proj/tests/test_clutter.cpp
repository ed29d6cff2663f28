#include "pmbm/clutter.hpp"
#include "pmbm/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>

using namespace pmbm;

namespace {

Vector v2(double x, double y) { return (Vector(2) << x, y).finished(); }
Vector v1(double x) { return Vector::Constant(1, x); }

Region square300() { return {v2(0, 0), v2(300, 300)}; }
Region unit_interval(double lo, double hi) { return {v1(lo), v1(hi)}; }

double log_factorial(int n) { return std::lgamma(n + 1.0); }

double normal2(const Vector& z, const Vector& mu, double var) {
    return std::exp(-0.5 * (z - mu).squaredNorm() / var) / (2.0 * std::numbers::pi * var);
}

}  // namespace

TEST(NegativeBinomial, PmfClosedForms) {
    const NegBinomialCardinality nb{10.0 / 19.0, 0.05};
    EXPECT_NEAR(nb_pmf(nb, 0), nb.r * std::log(nb.p), 1e-15);
    EXPECT_NEAR(nb_pmf(NegBinomialCardinality{1.0, 0.5}, 1), std::log(0.25), 1e-15);
    EXPECT_THROW(nb_pmf(nb, -1), RangeError);
}

TEST(NegativeBinomial, PmfSumsToOne) {
    const Cardinality nb = NegBinomialCardinality{10.0 / 19.0, 0.05};
    const int last = truncation_point(nb, 1e-14);
    double total = 0.0;
    for (int m = 0; m <= last; ++m) total += std::exp(log_pmf(nb, m));
    EXPECT_NEAR(total, 1.0, 1e-10);
}

TEST(NegativeBinomial, FromMeanDispersion) {
    const auto a = nb_from_mean_dispersion(10.0, 20.0);
    EXPECT_EQ(a.r, 10.0 / 19.0);
    EXPECT_EQ(a.p, 0.05);
    const auto b = nb_from_mean_dispersion(1.0, 2.0);
    EXPECT_EQ(b.r, 1.0);
    EXPECT_EQ(b.p, 0.5);
    EXPECT_NEAR(mean(Cardinality{a}), 10.0, 1e-12);
    EXPECT_NEAR(variance(Cardinality{a}), 200.0, 1e-10);
    EXPECT_THROW(nb_from_mean_dispersion(10.0, 1.0), ModelError);
    EXPECT_THROW(nb_from_mean_dispersion(10.0, 0.5), ModelError);
    EXPECT_THROW(nb_from_mean_dispersion(0.0, 2.0), ModelError);
}

TEST(NegativeBinomial, SampledMoments) {
    const Cardinality nb = nb_from_mean_dispersion(10.0, 20.0);
    std::mt19937_64 rng(12345);
    const int n = 1'000'000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = sample_count(nb, rng);
        s += x;
        s2 += x * x;
    }
    const double m = s / n;
    const double v = s2 / n - m * m;
    EXPECT_NEAR(m, 10.0, 0.2);
    EXPECT_NEAR(v, 200.0, 4.0);
}

TEST(Cardinality, PoissonPmfAndValidation) {
    const Cardinality p = PoissonCardinality{3.0};
    EXPECT_NEAR(log_pmf(p, 2), std::log(std::exp(-3.0) * 9.0 / 2.0), 1e-14);
    EXPECT_EQ(log_pmf(PoissonCardinality{0.0}, 0), 0.0);
    EXPECT_EQ(log_pmf(PoissonCardinality{0.0}, 1), kNegInf);
    EXPECT_THROW(validate(Cardinality{NegBinomialCardinality{-1.0, 0.5}}), ModelError);
    EXPECT_THROW(validate(Cardinality{NegBinomialCardinality{1.0, 0.0}}), ModelError);
}

TEST(IidCluster, Examples) {
    const IidClusterClutter c{nb_from_mean_dispersion(10.0, 20.0), square300()};
    EXPECT_NEAR(iid_cluster_density(c, {}), log_pmf(c.cardinality, 0), 1e-15);
    const std::vector<Vector> two{v2(10, 20), v2(200, 100)};
    EXPECT_NEAR(iid_cluster_density(c, two), std::log(2.0) + log_pmf(c.cardinality, 2) - 2.0 * std::log(9e4), 1e-12);
    const std::vector<Vector> outside{v2(10, 20), v2(301, 100)};
    EXPECT_EQ(iid_cluster_density(c, outside), kNegInf);
}

TEST(IidCluster, PoissonCardinalityEqualsPpp) {
    const PoissonClutter ppp{7.0, square300()};
    const IidClusterClutter iid{PoissonCardinality{7.0}, square300()};
    const ClutterModel a(ppp), b(iid);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 300.0);
    std::vector<Vector> z;
    for (int n = 0; n < 12; ++n) {
        EXPECT_NEAR(a.log_density(z), b.log_density(z), 1e-10) << n;
        z.push_back(v2(u(rng), u(rng)));
    }
}

TEST(Ppp, DensityAndIntensity) {
    const PoissonClutter c{10.0, square300()};
    EXPECT_NEAR(c.log_intensity(v2(1, 1)), std::log(10.0 / 9e4), 1e-15);
    EXPECT_EQ(c.log_intensity(v2(-1, 1)), kNegInf);
    const std::vector<Vector> z{v2(1, 1), v2(2, 2)};
    EXPECT_NEAR(ClutterModel(c).log_density(z), -10.0 + 2 * std::log(10.0 / 9e4), 1e-12);
    EXPECT_THROW((PoissonClutter{-1.0, square300()}.validate()), ModelError);
}

TEST(Composite, NoSourcesEqualsPpp) {
    const PoissonClutter ppp{3.0, square300()};
    const CompositeClutter c{ppp, {}};
    const std::vector<Vector> z{v2(1, 1), v2(50, 20), v2(299, 3)};
    EXPECT_EQ(composite_clutter_density(c, z), ClutterModel(ppp).log_density(z));
}

TEST(Composite, EmptySetIsProductOfEmptyDensities) {
    const ClutterSource s1{0.98, 10.0, v2(50, 50), Matrix::Identity(2, 2) * 4.0};
    const ClutterSource s2{0.5, 2.0, v2(150, 50), Matrix::Identity(2, 2)};
    const CompositeClutter c{PoissonClutter{3.0, square300()}, {s1, s2}};
    EXPECT_NEAR(composite_clutter_density(c, {}),
                -3.0 + source_density(s1, {}) + source_density(s2, {}), 1e-14);
    EXPECT_NEAR(source_density(s1, {}), std::log(0.02 + 0.98 * std::exp(-10.0)), 1e-15);
}

TEST(Composite, OneSourceTwoMeasurementsHandEnumeration) {
    const double pd = 0.9, rate = 2.0, var = 3.0, lam = 4.0;
    const Region a = square300();
    const ClutterSource s{pd, rate, v2(10, 10), Matrix::Identity(2, 2) * var};
    const CompositeClutter c{PoissonClutter{lam, a}, {s}};
    const std::vector<Vector> z{v2(11, 9), v2(8, 12)};

    const double intensity = lam / 9e4;
    const double empty_src = 1 - pd + pd * std::exp(-rate);
    auto src = [&](std::initializer_list<Vector> zs) {
        double v = pd * std::exp(-rate);
        for (const auto& zi : zs) v *= rate * normal2(zi, s.location, var);
        return v;
    };
    const double both_ppp = std::exp(-lam) * intensity * intensity * empty_src;
    const double first_src = std::exp(-lam) * intensity * src({z[0]});
    const double second_src = std::exp(-lam) * intensity * src({z[1]});
    const double both_src = std::exp(-lam) * src({z[0], z[1]});
    EXPECT_NEAR(composite_clutter_density(c, z), std::log(both_ppp + first_src + second_src + both_src), 1e-12);
}

TEST(Composite, EnumerationGuard) {
    const CompositeClutter c{PoissonClutter{1.0, square300()}, {}};
    std::vector<Vector> z(kCompositeEnumerationLimit + 1, v2(1, 1));
    EXPECT_THROW(composite_clutter_density(c, z), SizeError);
}

TEST(Composite, SetIntegralIsOne) {
    // 1-D set integral sum_n 1/n! int c({z_1..z_n}) dz, importance-sampled per cardinality.
    const Region a = unit_interval(0.0, 10.0);
    const ClutterSource src{0.7, 1.2, v1(5.0), Matrix::Constant(1, 1, 1.0)};
    const CompositeClutter c{PoissonClutter{1.0, a}, {src}};
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::normal_distribution<double> g(5.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    auto q = [](double z) {
        const double uni = (z >= 0.0 && z <= 10.0) ? 0.1 : 0.0;
        return 0.5 * uni + 0.5 * std::exp(-0.5 * (z - 5.0) * (z - 5.0)) / std::sqrt(2 * std::numbers::pi);
    };
    double total = std::exp(composite_clutter_density(c, {}));
    for (int n = 1; n <= 10; ++n) {
        const int samples = 20000;
        double acc = 0.0;
        std::vector<Vector> z(static_cast<std::size_t>(n));
        for (int s = 0; s < samples; ++s) {
            double log_q = 0.0;
            for (auto& zi : z) {
                zi = v1(coin(rng) ? u(rng) : g(rng));
                log_q += std::log(q(zi(0)));
            }
            acc += std::exp(composite_clutter_density(c, z) - log_q);
        }
        total += acc / samples * std::exp(-log_factorial(n));
    }
    EXPECT_NEAR(total, 1.0, 0.01);
}

TEST(IidCluster, SamplerMatchesDensityOnCoarseBins) {
    // Two bins on [0, 1]; P(n, bin multiset) from the density vs sampler frequency.
    const IidClusterClutter c{nb_from_mean_dispersion(1.5, 2.0), unit_interval(0.0, 1.0)};
    const ClutterModel model(c);
    std::mt19937_64 rng(77);
    const int draws = 200000;
    std::map<std::pair<int, int>, int> counts;  // (n, number in left bin)
    for (int i = 0; i < draws; ++i) {
        const auto z = model.sample(rng);
        if (z.size() > 2) continue;
        int left = 0;
        for (const auto& zi : z) left += zi(0) < 0.5;
        ++counts[{static_cast<int>(z.size()), left}];
    }
    // With |A| = 1 the set integral over a bin configuration is rho(n) C(n, left) 2^-n.
    auto expected = [&](int n, int left) {
        const std::vector<Vector> z(static_cast<std::size_t>(n), v1(0.25));
        const double per_ordering = std::exp(iid_cluster_density(c, z) - log_factorial(n));
        return per_ordering * std::exp(log_factorial(n) - log_factorial(left) - log_factorial(n - left)) * std::pow(0.5, n);
    };
    for (int n = 0; n <= 2; ++n)
        for (int left = 0; left <= n; ++left) {
            const double p = expected(n, left);
            const double f = static_cast<double>(counts[{n, left}]) / draws;
            EXPECT_NEAR(f, p, 0.05 * p) << "n=" << n << " left=" << left;
        }
}

TEST(Kld, PoissonVersusNegativeBinomial) {
    EXPECT_LT(poisson_nb_kld(1.0, 1.001), 1e-3);
    double prev = 0.0;
    for (double a : {1.5, 2.0, 5.0, 10.0, 20.0}) {
        const double k = poisson_nb_kld(10.0, a);
        EXPECT_GT(k, prev) << a;
        prev = k;
    }
    EXPECT_GT(poisson_nb_kld(10.0, 20.0), poisson_nb_kld(10.0, 2.0));

    // Direct summation oracle.
    const double lam = 10.0, a = 5.0;
    const double r = lam / (a - 1.0), p = 1.0 / a;
    double direct = 0.0;
    for (int m = 0; m < 200; ++m) {
        const double lp = -lam + m * std::log(lam) - std::lgamma(m + 1.0);
        const double lnb = std::lgamma(r + m) - std::lgamma(r) - std::lgamma(m + 1.0) + r * std::log(p) + m * std::log1p(-p);
        direct += std::exp(lp) * (lp - lnb);
    }
    EXPECT_NEAR(poisson_nb_kld(lam, a), direct, 1e-12);
}

TEST(ClutterModel, SubsetViewMatchesCopy) {
    const ClutterModel m(IidClusterClutter{nb_from_mean_dispersion(3.0, 4.0), square300()});
    const std::vector<Vector> scan{v2(1, 1), v2(2, 2), v2(3, 3), v2(4, 4)};
    const std::vector<int> idx{1, 3};
    const std::vector<Vector> copy{scan[1], scan[3]};
    EXPECT_EQ(m.log_density(scan, idx), m.log_density(copy));
    EXPECT_NE(m.uniform_iid(), nullptr);
    EXPECT_EQ(ClutterModel(PoissonClutter{1.0, square300()}).uniform_iid(), nullptr);
}
