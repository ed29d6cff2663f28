#pragma once

#include "pmbm/densities.hpp"

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace pmbm {

/// Measurement z_k^j, referenced by time step k >= 1 and 1-based index j within the scan.
struct MeasurementPair {
    int step = 0;
    int index = 0;

    auto operator<=>(const MeasurementPair&) const = default;
};

/// Sorted, duplicate-free set of measurement pairs.
using PairSet = std::vector<MeasurementPair>;

/// One association history of a Bernoulli component.
struct LocalHypothesis {
    double log_weight = 0.0;
    double existence = 0.0;
    GaussianDensity density;  ///< meaningless when existence == 0
    PairSet measurements;
    int parent = -1;  ///< index in the predicted tree this hypothesis was extended from
};

/// One association history of a clutter source.
struct ClutterLocalHypothesis {
    double log_weight = 0.0;
    PairSet measurements;
    int parent = -1;
};

struct BernoulliTree {
    int birth_step = 0;
    std::vector<LocalHypothesis> hypotheses;
};

struct ClutterTree {
    std::vector<ClutterLocalHypothesis> hypotheses;
};

/// Selection of one local hypothesis per clutter tree and per Bernoulli tree.
struct GlobalHypothesis {
    double log_weight = 0.0;  ///< normalized over the density's global hypotheses
    std::vector<int> clutter;
    std::vector<int> bernoulli;
    /// Measurement pairs held by Bernoulli components that were pruned under this hypothesis.
    PairSet dropped;
};

/// Number of measurements received at one time step.
struct ScanRecord {
    int step = 0;
    int count = 0;
};

/// True iff the measurement sets of the selected local hypotheses partition all measurement
/// pairs in `history`. Throws RangeError on out-of-range indices.
bool validate_global(const GlobalHypothesis& g, std::span<const BernoulliTree> trees,
                     std::span<const ClutterTree> clutter, std::span<const ScanRecord> history);

PairSet pair_union(const PairSet& a, const PairSet& b);

// ---- hypothesis counting ----

enum class TargetKind { point, general };
enum class ClutterKind { ppp, arbitrary };

inline constexpr int kMaxExactCount = 20;

std::uint64_t binomial(int n, int k);
/// Bell number B_m, 0 <= m <= 20.
std::uint64_t bell(int m);
/// Stirling number of the second kind, 0 <= l <= m <= 20.
std::uint64_t stirling2(int m, int l);

/// Number of global hypotheses generated when updating a PMB with n Bernoulli components
/// with m measurements. Throws RangeError outside the exact 64-bit range.
std::uint64_t count_hypotheses(TargetKind target, ClutterKind clutter, int n, int m);

/// One local hypothesis per line: `B <tree> <hyp> <parent> <r> <log_w> <pairs>` for Bernoulli
/// trees and `C <tree> <hyp> <parent> - <log_w> <pairs>` for clutter trees, pairs as `k:j,...`.
void dump_trees(std::ostream& os, std::span<const BernoulliTree> trees, std::span<const ClutterTree> clutter);

}  // namespace pmbm
