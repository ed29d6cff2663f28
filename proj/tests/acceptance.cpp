// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include "pmbm/clutter.hpp"
#include "pmbm/gibbs.hpp"
#include "pmbm/gospa.hpp"
#include "pmbm/harness.hpp"
#include "pmbm/hypotheses.hpp"
#include "pmbm/oracle.hpp"
#include "pmbm/pmbm.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>

using namespace pmbm;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what) {
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Vector pos(double x, double y) { return (Vector(2) << x, y).finished(); }

void table_one() {
    const auto start = std::chrono::steady_clock::now();
    struct Row {
        TargetKind t;
        ClutterKind c;
        int n;
        std::uint64_t values[6];
    };
    const int ms[] = {1, 2, 3, 4, 5, 10};
    const Row rows[] = {
        {TargetKind::point, ClutterKind::ppp, 0, {1, 1, 1, 1, 1, 1}},
        {TargetKind::point, ClutterKind::ppp, 1, {2, 3, 4, 5, 6, 11}},
        {TargetKind::point, ClutterKind::ppp, 4, {5, 21, 73, 209, 501, 8501}},
        {TargetKind::point, ClutterKind::arbitrary, 0, {2, 4, 8, 16, 32, 1024}},
        {TargetKind::point, ClutterKind::arbitrary, 1, {3, 8, 20, 48, 112, 6144}},
        {TargetKind::point, ClutterKind::arbitrary, 4, {6, 32, 152, 648, 2512, 850944}},
        {TargetKind::general, ClutterKind::ppp, 0, {1, 2, 5, 15, 52, 115975}},
        {TargetKind::general, ClutterKind::ppp, 1, {2, 5, 15, 52, 203, 678570}},
        {TargetKind::general, ClutterKind::ppp, 4, {5, 26, 141, 799, 4736, 67310847}},
        {TargetKind::general, ClutterKind::arbitrary, 0, {2, 5, 15, 52, 203, 678570}},
        {TargetKind::general, ClutterKind::arbitrary, 1, {3, 10, 37, 151, 674, 3535027}},
        {TargetKind::general, ClutterKind::arbitrary, 4, {6, 37, 235, 1540, 10427, 247126450}},
    };
    int entries = 0, wrong = 0;
    for (const auto& r : rows)
        for (int i = 0; i < 6; ++i, ++entries)
            if (count_hypotheses(r.t, r.c, r.n, ms[i]) != r.values[i]) ++wrong;
    const double s = seconds_since(start);
    report(1, wrong == 0 && s < 1.0, fmt("hypothesis count table, %d entries, %d mismatches, %.3f s", entries, wrong, s));
}

void update_oracle() {
    const auto start = std::chrono::steady_clock::now();
    const auto r = oracle::check_update(200, 1);
    const double s = seconds_since(start);
    report(2, r.failures == 0 && r.instances == 200 && s < 60.0,
           fmt("update vs enumeration, %d instances, %d failures, worst %.2g, %.1f s", r.instances, r.failures,
               r.worst, s));
}

void composite_consistency() {
    const auto r = oracle::check_thm2(96, 1);
    report(3, r.failures == 0, fmt("composite clutter update, %d instances, %d failures, worst %.2g", r.instances,
                                   r.failures, r.worst));
}

double new_track_existence(const PmbmDensity& d) {
    const auto r = marginal_existence(d);
    for (std::size_t i = 0; i < d.trees.size(); ++i)
        for (const auto& h : d.trees[i].hypotheses)
            if (h.measurements == PairSet{{1, 1}}) return r[i];
    return -1.0;
}

void spooky_action() {
    const Region area{pos(-10, -10), pos(30, 30)};
    const auto sensor = LinearGaussianSensor::position(1.0, 0.8);
    const MeasurementModel meas(PointTargetModel{sensor});
    PmbmDensity prior = PmbmDensity::initial(1);
    prior.ppp.push_back({std::log(1.5), GaussianDensity{(Vector(4) << 10, 0, 10, 0).finished(), Matrix::Identity(4, 4) * 25.0}});
    FilterConfig cfg;
    cfg.gate = std::numeric_limits<double>::infinity();
    cfg.association = AssociationMethod::exhaustive;

    const std::vector<Vector> one{pos(9, 11)}, two{pos(9, 11), pos(29, -9)};
    const double l = 1.5 * 0.8 * std::exp(kalman_update(prior.ppp[0].density, sensor, one[0]).log_likelihood);
    const double expected = l / (4.0 / area.volume() + l);

    const ClutterModel ppp(PoissonClutter{4.0, area});
    const double p1 = new_track_existence(update_thm1(prior, one, 1, meas, ppp, cfg));
    const double p2 = new_track_existence(update_thm1(prior, two, 1, meas, ppp, cfg));
    const ClutterModel nb(IidClusterClutter{nb_from_mean_dispersion(4.0, 20.0), area});
    const double n1 = new_track_existence(update_thm1(prior, one, 1, meas, nb, cfg));
    const double n2 = new_track_existence(update_thm1(prior, two, 1, meas, nb, cfg));
    const double ppp_err = std::max(std::abs(p1 - expected), std::abs(p2 - expected));
    report(4, ppp_err < 1e-10 && std::abs(n1 - n2) > 1e-6,
           fmt("PPP existence error %.2g (both scans), NB change %.3g when a far measurement is added", ppp_err,
               std::abs(n1 - n2)));
}

void gibbs() {
    const auto start = std::chrono::steady_clock::now();
    const auto r = oracle::check_gibbs(100000, 1);
    const auto p = oracle::gibbs_reference_problem();
    double worst = 0.0;
    for (const auto& a : enumerate_associations(p))
        for (int q = 0; q < p.measurements; ++q) {
            const auto uni = gibbs_conditional(p, a.gamma, q, ConditionalForm::uniform);
            const auto gen = gibbs_conditional(p, a.gamma, q, ConditionalForm::generic);
            double total = 0.0;
            std::vector<double> w(gen.size());
            for (std::size_t v = 0; v < gen.size(); ++v) {
                auto g = a.gamma;
                g[static_cast<std::size_t>(q)] = static_cast<int>(v);
                w[v] = std::exp(assoc_log_weight(p, g));
                total += w[v];
            }
            for (std::size_t v = 0; v < gen.size(); ++v)
                worst = std::max({worst, std::abs(uni[v] - w[v] / total), std::abs(gen[v] - w[v] / total)});
        }
    const double s = seconds_since(start);
    report(5, r.failures == 0 && worst < 1e-12 && s < 30.0,
           fmt("Gibbs total variation %.4f (limit 0.05), conditional error %.2g, %.1f s", r.worst, worst, s));
}

void nb_moments() {
    const auto nb = nb_from_mean_dispersion(10.0, 20.0);
    const bool exact = nb.r == 10.0 / 19.0 && nb.p == 0.05;
    std::mt19937_64 rng(1);
    const int draws = 100000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double x = sample_count(nb, rng);
        s += x;
        s2 += x * x;
    }
    const double mean = s / draws, var = s2 / draws - mean * mean;
    report(6, exact && std::abs(mean - 10.0) <= 0.3 && std::abs(var - 200.0) <= 6.0,
           fmt("NB(r=%.10g, p=%.10g), sampled mean %.3f, variance %.2f", nb.r, nb.p, mean, var));
}

void kld_trend() {
    double prev = -1.0;
    bool increasing = true;
    std::string values;
    for (double a : {1.5, 2.0, 5.0, 10.0, 20.0}) {
        const double k = poisson_nb_kld(10.0, a);
        increasing = increasing && k > prev;
        prev = k;
        values += fmt(" %.4g", k);
    }
    const double near = poisson_nb_kld(1.0, 1.001);
    report(7, increasing && near < 1e-3, fmt("KLD at mean 10:%s; at (1, 1.001) %.2g", values.c_str(), near));
}

struct Experiment {
    std::string metrics;
    std::string curves;
    std::vector<FilterSummary> summaries;
    double seconds = 0.0;
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

Experiment experiment(const std::filesystem::path& dir) {
    const ScenarioConfig cfg;
    const std::vector<FilterKind> filters{FilterKind::a_pmbm, FilterKind::a_pmb, FilterKind::pmbm, FilterKind::pmb};
    const auto start = std::chrono::steady_clock::now();
    const auto records = run_experiment(cfg, filters);
    Experiment e;
    e.seconds = seconds_since(start);
    e.summaries = aggregate_metrics(records, cfg.gospa);
    write_outputs(dir, cfg, records, e.summaries);
    e.metrics = slurp(dir / "metrics.csv");
    e.curves = slurp(dir / "curves.csv");
    return e;
}

int paired_wins(const FilterSummary& a, const FilterSummary& b) {
    int wins = 0;
    for (std::size_t i = 0; i < a.per_run.size() && i < b.per_run.size(); ++i)
        if (a.per_run[i] <= b.per_run[i]) ++wins;
    return wins;
}

void gospa_suite() {
    double err = 0.0;
    const GospaConfig cfg;
    const auto e0 = gospa({}, {}, cfg);
    err = std::max({err, e0.total, e0.localisation, e0.missed, e0.false_targets});
    const std::vector<Vector> y{pos(1, 2)};
    err = std::max(err, std::abs(gospa({}, y, cfg).total - 10.0 / std::sqrt(2.0)));
    const std::vector<Vector> a{pos(0, 0)}, b{pos(3, 4)};
    const auto e2 = gospa(a, b, cfg);
    err = std::max({err, std::abs(e2.total - 5.0), std::abs(e2.localisation - 25.0), e2.missed, e2.false_targets});

    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> n(0, 5);
    std::uniform_real_distribution<double> u(0.0, 30.0);
    for (int t = 0; t < 500; ++t) {
        std::vector<Vector> x(static_cast<std::size_t>(n(rng))), z(static_cast<std::size_t>(n(rng)));
        for (auto& v : x) v = pos(u(rng), u(rng));
        for (auto& v : z) v = pos(u(rng), u(rng));
        const auto f = gospa(x, z, cfg), r = gospa(z, x, cfg);
        const double scale = std::max(1.0, f.total * f.total);
        err = std::max({err, std::abs(f.total - r.total), std::abs(f.missed - r.false_targets) / scale,
                        std::abs(f.total * f.total - (f.localisation + f.missed + f.false_targets)) / scale});
    }
    report(9, err <= 1e-12, fmt("GOSPA examples, symmetry and decomposition, worst relative error %.2g", err));
}

}  // namespace

int main() {
    table_one();
    update_oracle();
    composite_consistency();
    spooky_action();
    gibbs();
    nb_moments();
    kld_trend();

    const auto base = std::filesystem::temp_directory_path() / "pmbm_acceptance";
    std::filesystem::remove_all(base);
    Experiment first;
    try {
        first = experiment(base / "first");
        const auto& s = first.summaries;
        const bool bands = s[0].rms_total >= 4.5 && s[0].rms_total <= 7.0 && s[1].rms_total >= 4.5 &&
                           s[1].rms_total <= 7.0;
        const int w_pmbm = paired_wins(s[0], s[2]);
        const int w_pmb = paired_wins(s[1], s[3]);
        const bool all_ok = s[0].successful_runs == 20 && s[1].successful_runs == 20 && s[2].successful_runs == 20 &&
                            s[3].successful_runs == 20;
        report(8, bands && all_ok && w_pmbm >= 15 && w_pmb >= 15 && first.seconds < 900.0,
               fmt("RMS-GOSPA A-PMBM %.3f, A-PMB %.3f, PMBM %.3f, PMB %.3f; paired wins %d/20 and %d/20; %.0f s",
                   s[0].rms_total, s[1].rms_total, s[2].rms_total, s[3].rms_total, w_pmbm, w_pmb, first.seconds));
    } catch (const std::exception& e) {
        report(8, false, std::string("experiment failed: ") + e.what());
    }

    gospa_suite();

    try {
        const auto second = experiment(base / "second");
        report(10, !first.metrics.empty() && first.metrics == second.metrics && first.curves == second.curves,
               fmt("repeat run: metrics.csv %zu bytes, curves.csv %zu bytes, identical %s", second.metrics.size(),
                   second.curves.size(), first.metrics == second.metrics && first.curves == second.curves ? "yes" : "no"));
    } catch (const std::exception& e) {
        report(10, false, std::string("repeat experiment failed: ") + e.what());
    }
    std::filesystem::remove_all(base);

    std::printf("%d of 10 criteria passed\n", 10 - failures);
    return failures == 0 ? 0 : 1;
}
