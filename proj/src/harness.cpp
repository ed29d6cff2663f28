#include "pmbm/harness.hpp"

#include "pmbm/errors.hpp"
#include "pmbm/gibbs.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace pmbm {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTruthStream = 0x7472757468;
constexpr std::uint64_t kScanStream = 0x7363616e;
constexpr std::uint64_t kFilterStream = 0x66696c74;

json vec(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector read_vec(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

const char* family_name(ClutterFamily f) {
    switch (f) {
        case ClutterFamily::none: return "none";
        case ClutterFamily::poisson: return "poisson";
        case ClutterFamily::negative_binomial: return "negative_binomial";
    }
    return "";
}

ClutterFamily parse_family(const std::string& s) {
    if (s == "none") return ClutterFamily::none;
    if (s == "poisson") return ClutterFamily::poisson;
    if (s == "negative_binomial") return ClutterFamily::negative_binomial;
    throw ModelError("unknown clutter family '" + s + "'");
}

const char* mode_name(AssociationMethod m) {
    switch (m) {
        case AssociationMethod::automatic: return "automatic";
        case AssociationMethod::exhaustive: return "exhaustive";
        case AssociationMethod::gibbs: return "gibbs";
    }
    return "";
}

AssociationMethod parse_method(const std::string& s) {
    if (s == "automatic") return AssociationMethod::automatic;
    if (s == "exhaustive") return AssociationMethod::exhaustive;
    if (s == "gibbs") return AssociationMethod::gibbs;
    throw ModelError("unknown association method '" + s + "'");
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

// ---- configuration ----

void ScenarioConfig::validate() const {
    if (steps < 0) throw ModelError("steps must be non-negative");
    if (runs < 1) throw ModelError("runs must be at least 1");
    if (!(period > 0.0) || noise_intensity < 0.0 || !(measurement_noise > 0.0))
        throw ModelError("period and measurement noise must be positive, process noise non-negative");
    for (double p : {survival, detection})
        if (!(p >= 0.0 && p <= 1.0)) throw ModelError("probabilities must lie in [0, 1]");
    if (birth_weight_first < 0.0 || birth_weight < 0.0) throw ModelError("birth weights must be non-negative");
    if (birth_mean.size() != 4 || birth_covariance.rows() != 4 || birth_covariance.cols() != 4)
        throw ModelError("birth density must be four-dimensional");
    region.validate();
    if (region.lower.size() != 2) throw ModelError("surveillance region must be two-dimensional");
    if (clutter != ClutterFamily::none && clutter_mean < 0.0) throw ModelError("clutter mean must be non-negative");
    if (clutter == ClutterFamily::negative_binomial && !(clutter_dispersion > 1.0))
        throw ModelError("negative binomial dispersion must exceed 1");
    filter.validate();
    gospa.validate();
}

LinearGaussianMotion ScenarioConfig::motion() const {
    return LinearGaussianMotion::constant_velocity(period, noise_intensity, survival);
}

LinearGaussianSensor ScenarioConfig::sensor() const {
    return LinearGaussianSensor::position(measurement_noise, detection);
}

Cardinality ScenarioConfig::clutter_cardinality() const {
    switch (clutter) {
        case ClutterFamily::none: return PoissonCardinality{0.0};
        case ClutterFamily::poisson: return PoissonCardinality{clutter_mean};
        case ClutterFamily::negative_binomial: return nb_from_mean_dispersion(clutter_mean, clutter_dispersion);
    }
    return PoissonCardinality{0.0};
}

ScenarioConfig scenario_from_json(const std::string& text) {
    ScenarioConfig c;
    json j;
    try {
        j = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ModelError(std::string("malformed scenario config: ") + e.what());
    }
    try {
        c.steps = j.value("steps", c.steps);
        c.period = j.value("period", c.period);
        c.noise_intensity = j.value("noise_intensity", c.noise_intensity);
        c.survival = j.value("survival", c.survival);
        if (j.contains("birth_mean")) c.birth_mean = read_vec(j["birth_mean"]);
        if (j.contains("birth_variances")) c.birth_covariance = read_vec(j["birth_variances"]).asDiagonal();
        c.birth_weight_first = j.value("birth_weight_first", c.birth_weight_first);
        c.birth_weight = j.value("birth_weight", c.birth_weight);
        c.measurement_noise = j.value("measurement_noise", c.measurement_noise);
        c.detection = j.value("detection", c.detection);
        if (j.contains("region")) {
            c.region.lower = read_vec(j["region"].at("lower"));
            c.region.upper = read_vec(j["region"].at("upper"));
        }
        if (j.contains("clutter")) {
            const auto& cl = j["clutter"];
            c.clutter = parse_family(cl.value("family", std::string(family_name(c.clutter))));
            c.clutter_mean = cl.value("mean", c.clutter_mean);
            c.clutter_dispersion = cl.value("dispersion", c.clutter_dispersion);
        }
        if (j.contains("truth")) {
            const auto t = j["truth"].get<std::string>();
            if (t == "fixed") c.truth = TruthMode::fixed;
            else if (t == "sample") c.truth = TruthMode::sample;
            else throw ModelError("truth must be 'fixed' or 'sample'");
        }
        c.runs = j.value("runs", c.runs);
        c.seed = j.value("seed", c.seed);
        if (j.contains("filter")) {
            const auto& f = j["filter"];
            c.filter.max_hypotheses = f.value("max_hypotheses", c.filter.max_hypotheses);
            c.filter.hypothesis_prune = f.value("hypothesis_prune", c.filter.hypothesis_prune);
            c.filter.ppp_prune = f.value("ppp_prune", c.filter.ppp_prune);
            c.filter.bernoulli_prune = f.value("bernoulli_prune", c.filter.bernoulli_prune);
            c.filter.gate = f.value("gate", c.filter.gate);
            c.filter.mbm_birth_split = f.value("mbm_birth_split", c.filter.mbm_birth_split);
            if (f.contains("association")) c.filter.association = parse_method(f["association"].get<std::string>());
        }
        if (j.contains("gospa")) {
            const auto& g = j["gospa"];
            c.gospa.order = g.value("order", c.gospa.order);
            c.gospa.cutoff = g.value("cutoff", c.gospa.cutoff);
            c.gospa.alpha = g.value("alpha", c.gospa.alpha);
        }
    } catch (const json::exception& e) {
        throw ModelError(std::string("invalid scenario config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string scenario_to_json(const ScenarioConfig& c) {
    json j;
    j["steps"] = c.steps;
    j["period"] = c.period;
    j["noise_intensity"] = c.noise_intensity;
    j["survival"] = c.survival;
    j["birth_mean"] = vec(c.birth_mean);
    j["birth_variances"] = vec(c.birth_covariance.diagonal());
    j["birth_weight_first"] = c.birth_weight_first;
    j["birth_weight"] = c.birth_weight;
    j["measurement_noise"] = c.measurement_noise;
    j["detection"] = c.detection;
    j["region"] = {{"lower", vec(c.region.lower)}, {"upper", vec(c.region.upper)}};
    j["clutter"] = {{"family", family_name(c.clutter)}, {"mean", c.clutter_mean}, {"dispersion", c.clutter_dispersion}};
    j["truth"] = c.truth == TruthMode::fixed ? "fixed" : "sample";
    j["runs"] = c.runs;
    j["seed"] = c.seed;
    j["filter"] = {{"max_hypotheses", c.filter.max_hypotheses},
                   {"hypothesis_prune", c.filter.hypothesis_prune},
                   {"ppp_prune", c.filter.ppp_prune},
                   {"bernoulli_prune", c.filter.bernoulli_prune},
                   {"gate", c.filter.gate},
                   {"mbm_birth_split", c.filter.mbm_birth_split},
                   {"association", mode_name(c.filter.association)}};
    j["gospa"] = {{"order", c.gospa.order}, {"cutoff", c.gospa.cutoff}, {"alpha", c.gospa.alpha}};
    return j.dump(2);
}

std::string config_hash(const ScenarioConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : scenario_to_json(cfg)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---- simulation ----

std::vector<Vector> GroundTruth::states_at(int step) const {
    std::vector<Vector> out;
    for (const auto& t : trajectories)
        if (step >= t.birth && step <= t.death) out.push_back(t.states[static_cast<std::size_t>(step - t.birth)]);
    return out;
}

std::vector<Vector> GroundTruth::positions_at(int step) const {
    auto states = states_at(step);
    std::vector<Vector> out;
    out.reserve(states.size());
    for (const auto& x : states) out.push_back((Vector(2) << x(0), x(2)).finished());
    return out;
}

GroundTruth sample_ground_truth(const ScenarioConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    const auto motion = cfg.motion();
    const Eigen::LLT<Matrix> q_chol(motion.process_noise);
    const Matrix q_l = q_chol.matrixL();
    const Eigen::LLT<Matrix> b_chol(cfg.birth_covariance);
    const Matrix b_l = b_chol.matrixL();
    std::normal_distribution<double> normal;
    auto gaussian = [&](const Vector& mean, const Matrix& l) {
        Vector e(mean.size());
        for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = normal(rng);
        return Vector(mean + l * e);
    };

    GroundTruth truth;
    std::vector<std::size_t> alive;
    for (int k = 1; k <= cfg.steps; ++k) {
        std::vector<std::size_t> next;
        for (std::size_t i : alive) {
            auto& t = truth.trajectories[i];
            if (std::bernoulli_distribution(cfg.survival)(rng)) {
                t.states.push_back(gaussian(motion.transition * t.states.back(), q_l));
                t.death = k;
                next.push_back(i);
            }
        }
        const double w = cfg.birth_weight_at(k);
        const int births = w > 0.0 ? std::poisson_distribution<int>(w)(rng) : 0;
        for (int b = 0; b < births; ++b) {
            next.push_back(truth.trajectories.size());
            truth.trajectories.push_back({k, k, {gaussian(cfg.birth_mean, b_l)}});
        }
        alive = std::move(next);
    }
    return truth;
}

std::vector<Vector> sample_measurements(const std::vector<Vector>& states, const ScenarioConfig& cfg,
                                        std::mt19937_64& rng) {
    const auto sensor = cfg.sensor();
    const double sd = std::sqrt(cfg.measurement_noise);
    std::normal_distribution<double> normal;
    std::vector<Vector> scan;
    for (const auto& x : states) {
        if (!std::bernoulli_distribution(cfg.detection)(rng)) continue;
        Vector z = sensor.observation * x;
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) += sd * normal(rng);
        scan.push_back(std::move(z));
    }
    if (cfg.clutter != ClutterFamily::none) {
        const ClutterModel clutter(IidClusterClutter{cfg.clutter_cardinality(), cfg.region});
        for (auto& z : clutter.sample(rng)) scan.push_back(std::move(z));
    }
    std::shuffle(scan.begin(), scan.end(), rng);
    return scan;
}

// ---- filters ----

std::string filter_name(FilterKind f) {
    switch (f) {
        case FilterKind::a_pmbm: return "A-PMBM";
        case FilterKind::a_pmb: return "A-PMB";
        case FilterKind::pmbm: return "PMBM";
        case FilterKind::pmb: return "PMB";
        case FilterKind::mbm: return "MBM";
    }
    return "";
}

FilterKind parse_filter(const std::string& name) {
    std::string s = name;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "a-pmbm") return FilterKind::a_pmbm;
    if (s == "a-pmb") return FilterKind::a_pmb;
    if (s == "pmbm") return FilterKind::pmbm;
    if (s == "pmb") return FilterKind::pmb;
    if (s == "mbm") return FilterKind::mbm;
    throw ModelError("unknown filter '" + name + "'");
}

GroundTruth truth_for_run(const ScenarioConfig& cfg, int run) {
    const std::uint64_t key = cfg.truth == TruthMode::fixed ? 0 : static_cast<std::uint64_t>(run) + 1;
    std::mt19937_64 rng(derive_seed(cfg.seed, kTruthStream, key));
    return sample_ground_truth(cfg, rng);
}

std::vector<std::vector<Vector>> scans_for_run(const ScenarioConfig& cfg, const GroundTruth& truth, int run) {
    std::mt19937_64 rng(derive_seed(cfg.seed, kScanStream, static_cast<std::uint64_t>(run)));
    std::vector<std::vector<Vector>> scans;
    scans.reserve(static_cast<std::size_t>(cfg.steps));
    for (int k = 1; k <= cfg.steps; ++k) scans.push_back(sample_measurements(truth.states_at(k), cfg, rng));
    return scans;
}

RunRecord run_filter(const ScenarioConfig& cfg, FilterKind filter, const GroundTruth& truth,
                     const std::vector<std::vector<Vector>>& scans, int run) {
    RunRecord rec;
    rec.filter = filter;
    rec.run = run;
    rec.seed = derive_seed(cfg.seed, kFilterStream, static_cast<std::uint64_t>(run));

    FilterConfig fc = cfg.filter;
    fc.seed = rec.seed;
    const bool arbitrary = filter == FilterKind::a_pmbm || filter == FilterKind::a_pmb;
    fc.regime = arbitrary ? ClutterRegime::arbitrary : ClutterRegime::ppp_merged;
    fc.mode = filter == FilterKind::mbm ? FilterMode::mbm
              : (filter == FilterKind::a_pmb || filter == FilterKind::pmb) ? FilterMode::pmb
                                                                            : FilterMode::pmbm;

    const MeasurementModel meas(PointTargetModel{cfg.sensor()});
    const auto motion = cfg.motion();
    const ClutterModel arbitrary_clutter(IidClusterClutter{cfg.clutter_cardinality(), cfg.region});
    CompositeClutter ppp_clutter;
    ppp_clutter.ppp = PoissonClutter{cfg.clutter == ClutterFamily::none ? 0.0 : cfg.clutter_mean, cfg.region};
    const EstimatorSpec estimator{EstimatorKind::estimator3};

    const auto start = std::chrono::steady_clock::now();
    try {
        PmbmDensity d = PmbmDensity::initial(arbitrary ? 1 : 0);
        for (int k = 1; k <= cfg.steps; ++k) {
            const double w = cfg.birth_weight_at(k);
            std::vector<PppComponent> birth;
            if (w > 0.0) birth.push_back({std::log(w), GaussianDensity{cfg.birth_mean, cfg.birth_covariance}});
            d = predict(d, motion, birth, fc);
            const auto& scan = scans[static_cast<std::size_t>(k - 1)];
            d = arbitrary ? update_thm1(d, scan, k, meas, arbitrary_clutter, fc)
                          : update_thm2(d, scan, k, meas, ppp_clutter, fc);
            d = reduce(d, fc);
            const auto estimates = estimate(d, estimator);
            if (fc.mode == FilterMode::pmb) d = project_to_pmb(d);

            std::vector<Vector> positions;
            for (const auto& x : estimates) positions.push_back((Vector(2) << x(0), x(2)).finished());
            rec.steps.push_back(gospa(positions, truth.positions_at(k), cfg.gospa));
        }
    } catch (const std::exception& e) {
        rec.failed = true;
        rec.diagnostics = e.what();
    }
    rec.milliseconds =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

std::vector<RunRecord> run_trial(const ScenarioConfig& cfg, std::span<const FilterKind> filters, int run) {
    const auto truth = truth_for_run(cfg, run);
    const auto scans = scans_for_run(cfg, truth, run);
    std::vector<RunRecord> out;
    for (auto f : filters) out.push_back(run_filter(cfg, f, truth, scans, run));
    return out;
}

std::vector<RunRecord> run_experiment(const ScenarioConfig& cfg, std::span<const FilterKind> filters, int threads) {
    cfg.validate();
    if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min(threads, cfg.runs);

    std::vector<std::vector<RunRecord>> results(static_cast<std::size_t>(cfg.runs));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int r = next++; r < cfg.runs; r = next++) results[static_cast<std::size_t>(r)] = run_trial(cfg, filters, r);
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::vector<RunRecord> out;
    for (auto& r : results)
        for (auto& rec : r) out.push_back(std::move(rec));
    return out;
}

// ---- aggregation ----

std::vector<FilterSummary> aggregate_metrics(std::span<const RunRecord> records, const GospaConfig& gospa) {
    const double p = gospa.order;
    std::vector<FilterSummary> out;
    for (const auto& rec : records) {
        auto it = std::find_if(out.begin(), out.end(), [&](const FilterSummary& s) { return s.filter == rec.filter; });
        if (it == out.end()) {
            out.push_back({});
            out.back().filter = rec.filter;
            it = std::prev(out.end());
        }
    }

    for (auto& s : out) {
        std::vector<const RunRecord*> ok;
        for (const auto& rec : records) {
            if (rec.filter != s.filter) continue;
            s.per_run.push_back(std::numeric_limits<double>::quiet_NaN());
            if (rec.failed) continue;
            ok.push_back(&rec);
            double sq = 0.0;
            for (const auto& g : rec.steps) sq += g.total * g.total;
            s.per_run.back() = rec.steps.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(rec.steps.size()));
        }
        if (ok.empty()) throw ModelError("filter " + filter_name(s.filter) + " has no successful run");
        s.successful_runs = static_cast<int>(ok.size());

        const std::size_t steps = ok.front()->steps.size();
        double all_t = 0.0, all_l = 0.0, all_m = 0.0, all_f = 0.0;
        for (std::size_t k = 0; k < steps; ++k) {
            double t = 0.0, l = 0.0, m = 0.0, f = 0.0;
            for (const auto* rec : ok) {
                const auto& g = rec->steps[k];
                t += g.total * g.total;
                l += std::pow(std::pow(g.localisation, 1.0 / p), 2.0);
                m += std::pow(std::pow(g.missed, 1.0 / p), 2.0);
                f += std::pow(std::pow(g.false_targets, 1.0 / p), 2.0);
            }
            const double n = static_cast<double>(ok.size());
            s.total.push_back(std::sqrt(t / n));
            s.localisation.push_back(std::sqrt(l / n));
            s.missed.push_back(std::sqrt(m / n));
            s.false_targets.push_back(std::sqrt(f / n));
            all_t += t;
            all_l += l;
            all_m += m;
            all_f += f;
        }
        const double n = static_cast<double>(ok.size() * std::max<std::size_t>(steps, 1));
        s.rms_total = std::sqrt(all_t / n);
        s.rms_localisation = std::sqrt(all_l / n);
        s.rms_missed = std::sqrt(all_m / n);
        s.rms_false = std::sqrt(all_f / n);
    }
    return out;
}

// ---- output ----

std::string metrics_csv(std::span<const RunRecord> records) {
    std::ostringstream os;
    os << "filter,run,step,total,loc,missed,false\n";
    for (const auto& rec : records) {
        for (std::size_t k = 0; k < rec.steps.size(); ++k) {
            const auto& g = rec.steps[k];
            os << filter_name(rec.filter) << ',' << rec.run << ',' << k + 1 << ',' << fmt(g.total) << ','
               << fmt(g.localisation) << ',' << fmt(g.missed) << ',' << fmt(g.false_targets) << '\n';
        }
    }
    return os.str();
}

void write_outputs(const std::filesystem::path& dir, const ScenarioConfig& cfg, std::span<const RunRecord> records,
                   std::span<const FilterSummary> summaries) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name);
        if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
        return f;
    };

    open("metrics.csv") << metrics_csv(records);

    {
        auto f = open("timings.csv");
        f << "filter,run,ms,failed\n";
        for (const auto& rec : records)
            f << filter_name(rec.filter) << ',' << rec.run << ',' << fmt(rec.milliseconds) << ',' << rec.failed << '\n';
    }
    {
        auto f = open("curves.csv");
        f << "filter,step,total,loc,missed,false\n";
        for (const auto& s : summaries)
            for (std::size_t k = 0; k < s.total.size(); ++k)
                f << filter_name(s.filter) << ',' << k + 1 << ',' << fmt(s.total[k]) << ',' << fmt(s.localisation[k])
                  << ',' << fmt(s.missed[k]) << ',' << fmt(s.false_targets[k]) << '\n';
    }

    json summary;
    summary["schema_version"] = kOutputSchemaVersion;
    summary["config_hash"] = config_hash(cfg);
    summary["seed"] = cfg.seed;
    summary["runs"] = cfg.runs;
    json filters = json::array();
    for (const auto& s : summaries) {
        json failures = json::array();
        for (const auto& rec : records)
            if (rec.filter == s.filter && rec.failed) failures.push_back({{"run", rec.run}, {"error", rec.diagnostics}});
        filters.push_back({{"filter", filter_name(s.filter)},
                           {"successful_runs", s.successful_runs},
                           {"rms_total", s.rms_total},
                           {"rms_localisation", s.rms_localisation},
                           {"rms_missed", s.rms_missed},
                           {"rms_false", s.rms_false},
                           {"failures", std::move(failures)}});
    }
    summary["filters"] = std::move(filters);
    open("summary.json") << summary.dump(2) << '\n';
}

}  // namespace pmbm
