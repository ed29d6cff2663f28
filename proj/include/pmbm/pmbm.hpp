#pragma once

#include "pmbm/clutter.hpp"
#include "pmbm/densities.hpp"
#include "pmbm/hypotheses.hpp"
#include "pmbm/measmodel.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pmbm {

/// Weighted Gaussian component of a PPP intensity.
struct PppComponent {
    double log_weight = kNegInf;
    GaussianDensity density;
};

/// Poisson multi-Bernoulli mixture in track-oriented form.
struct PmbmDensity {
    std::vector<PppComponent> ppp;
    std::vector<BernoulliTree> trees;
    std::vector<ClutterTree> clutter;
    std::vector<GlobalHypothesis> globals;
    /// Scans whose measurement pairs the global hypotheses must partition.
    std::vector<ScanRecord> history;

    /// Empty MBM: no Bernoulli components, `clutter_slots` clutter trees each with a single
    /// empty local hypothesis, one global hypothesis with weight one.
    static PmbmDensity initial(int clutter_slots);

    [[nodiscard]] bool globals_normalized(double tol = 1e-9) const;
    /// Every global hypothesis satisfies validate_global.
    [[nodiscard]] bool all_globals_valid() const;
};

enum class FilterMode { pmbm, pmb, mbm };

/// arbitrary: one clutter tree, any clutter density (update_thm1).
/// composite: one clutter tree per independent source, PPP clutter folded into new Bernoullis.
/// ppp_merged: no clutter trees, PPP clutter folded into new Bernoullis (standard PMBM update).
enum class ClutterRegime { arbitrary, composite, ppp_merged };

enum class AssociationMethod { automatic, exhaustive, gibbs };

struct FilterConfig {
    std::size_t max_hypotheses = 5000;
    double hypothesis_prune = 1e-4;
    double ppp_prune = 1e-5;
    double bernoulli_prune = 1e-5;
    double gate = 20.0;
    FilterMode mode = FilterMode::pmbm;
    ClutterRegime regime = ClutterRegime::arbitrary;
    AssociationMethod association = AssociationMethod::automatic;
    std::uint64_t seed = 0;
    /// MBM mode: a birth component with expected count w > 1 becomes this many Bernoullis with
    /// existence w / split.
    int mbm_birth_split = 9;

    void validate() const;
};

/// Standard PMBM prediction. In MBM mode the PPP stays empty and every birth component is added
/// as new Bernoulli components present in all global hypotheses.
PmbmDensity predict(const PmbmDensity& d, const LinearGaussianMotion& motion,
                    std::span<const PppComponent> birth, const FilterConfig& cfg);

/// Update for arbitrary clutter with a single clutter hypothesis tree.
PmbmDensity update_thm1(const PmbmDensity& d, std::span<const Vector> scan, int step,
                        const MeasurementModel& meas, const ClutterModel& clutter, const FilterConfig& cfg);

/// Update for clutter formed by PPP clutter plus independent sources. With no sources this is the
/// standard PMBM update for PPP clutter.
PmbmDensity update_thm2(const PmbmDensity& d, std::span<const Vector> scan, int step,
                        const MeasurementModel& meas, const CompositeClutter& clutter, const FilterConfig& cfg);

/// KLD-minimizing projection onto a single multi-Bernoulli plus the PPP.
PmbmDensity project_to_pmb(const PmbmDensity& d);

/// Global-hypothesis pruning and capping, local hypothesis compaction, Bernoulli and PPP pruning.
PmbmDensity reduce(const PmbmDensity& d, const FilterConfig& cfg);

enum class EstimatorKind { estimator1, estimator3 };

struct EstimatorSpec {
    EstimatorKind kind = EstimatorKind::estimator3;
    double threshold = 0.4;  ///< existence threshold for estimator 1
};

std::vector<Vector> estimate(const PmbmDensity& d, const EstimatorSpec& spec);

/// Marginal existence of each Bernoulli tree: sum over global hypotheses of w^a r^{i,a^i}.
std::vector<double> marginal_existence(const PmbmDensity& d);

// ---- serialization (versioned JSON) ----

inline constexpr int kStateFormatVersion = 1;

std::string to_json(const PmbmDensity& d, int indent = -1);
/// Throws ModelError on malformed documents or unsupported versions.
PmbmDensity from_json(const std::string& text);

}  // namespace pmbm
