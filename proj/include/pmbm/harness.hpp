#pragma once

#include "pmbm/clutter.hpp"
#include "pmbm/densities.hpp"
#include "pmbm/gospa.hpp"
#include "pmbm/pmbm.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace pmbm {

enum class ClutterFamily { none, poisson, negative_binomial };
enum class TruthMode { fixed, sample };

struct ScenarioConfig {
    int steps = 81;
    double period = 1.0;
    double noise_intensity = 0.01;
    double survival = 0.99;
    Vector birth_mean = (Vector(4) << 150.0, 0.0, 150.0, 0.0).finished();
    Matrix birth_covariance = Vector((Vector(4) << 2500.0, 1.0, 2500.0, 1.0).finished()).asDiagonal();
    double birth_weight_first = 5.0;
    double birth_weight = 0.1;
    double measurement_noise = 4.0;
    double detection = 0.9;
    Region region{(Vector(2) << 0.0, 0.0).finished(), (Vector(2) << 300.0, 300.0).finished()};
    ClutterFamily clutter = ClutterFamily::negative_binomial;
    double clutter_mean = 10.0;
    double clutter_dispersion = 20.0;
    TruthMode truth = TruthMode::fixed;
    int runs = 20;
    std::uint64_t seed = 1;
    FilterConfig filter{.max_hypotheses = 500};
    GospaConfig gospa;

    void validate() const;
    [[nodiscard]] double birth_weight_at(int step) const { return step == 1 ? birth_weight_first : birth_weight; }
    [[nodiscard]] LinearGaussianMotion motion() const;
    [[nodiscard]] LinearGaussianSensor sensor() const;
    /// Cardinality distribution of the simulated clutter (Poisson mean 0 when clutter is off).
    [[nodiscard]] Cardinality clutter_cardinality() const;
};

ScenarioConfig scenario_from_json(const std::string& text);
std::string scenario_to_json(const ScenarioConfig& cfg);
/// FNV-1a of the canonical JSON form.
std::string config_hash(const ScenarioConfig& cfg);

struct Trajectory {
    int birth = 1;
    int death = 1;  ///< last step alive
    std::vector<Vector> states;
};

struct GroundTruth {
    std::vector<Trajectory> trajectories;

    [[nodiscard]] std::vector<Vector> states_at(int step) const;
    [[nodiscard]] std::vector<Vector> positions_at(int step) const;
};

GroundTruth sample_ground_truth(const ScenarioConfig& cfg, std::mt19937_64& rng);
std::vector<Vector> sample_measurements(const std::vector<Vector>& states, const ScenarioConfig& cfg,
                                        std::mt19937_64& rng);

enum class FilterKind { a_pmbm, a_pmb, pmbm, pmb, mbm };

std::string filter_name(FilterKind f);
/// Accepts `a-pmbm`, `a-pmb`, `pmbm`, `pmb`, `mbm`.
FilterKind parse_filter(const std::string& name);

struct RunRecord {
    FilterKind filter = FilterKind::a_pmbm;
    int run = 0;
    std::uint64_t seed = 0;
    std::vector<GospaResult> steps;
    double milliseconds = 0.0;
    bool failed = false;
    std::string diagnostics;
};

/// Truth used by `run`: shared across runs in fixed mode, resampled per run otherwise.
GroundTruth truth_for_run(const ScenarioConfig& cfg, int run);
/// Measurement scans for `run`, shared by every filter.
std::vector<std::vector<Vector>> scans_for_run(const ScenarioConfig& cfg, const GroundTruth& truth, int run);

RunRecord run_filter(const ScenarioConfig& cfg, FilterKind filter, const GroundTruth& truth,
                     const std::vector<std::vector<Vector>>& scans, int run);
/// One record per filter, all on the same truth and scans.
std::vector<RunRecord> run_trial(const ScenarioConfig& cfg, std::span<const FilterKind> filters, int run);
/// All runs, parallel over run index; results ordered by (run, filter).
std::vector<RunRecord> run_experiment(const ScenarioConfig& cfg, std::span<const FilterKind> filters,
                                      int threads = 0);

struct FilterSummary {
    FilterKind filter = FilterKind::a_pmbm;
    int successful_runs = 0;
    /// RMS over runs per step, components as RMS of the p-th power sums raised to 1/p.
    std::vector<double> total, localisation, missed, false_targets;
    /// RMS over runs and steps.
    double rms_total = 0.0, rms_localisation = 0.0, rms_missed = 0.0, rms_false = 0.0;
    /// Per run: RMS over steps of the total error (NaN for failed runs).
    std::vector<double> per_run;
};

/// Throws ModelError when a filter has no successful run.
std::vector<FilterSummary> aggregate_metrics(std::span<const RunRecord> records, const GospaConfig& gospa);

inline constexpr int kOutputSchemaVersion = 1;

/// metrics.csv, timings.csv, curves.csv and summary.json in `dir`.
void write_outputs(const std::filesystem::path& dir, const ScenarioConfig& cfg, std::span<const RunRecord> records,
                   std::span<const FilterSummary> summaries);
std::string metrics_csv(std::span<const RunRecord> records);

}  // namespace pmbm
