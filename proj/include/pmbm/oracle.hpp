#pragma once

#include "pmbm/clutter.hpp"
#include "pmbm/gibbs.hpp"
#include "pmbm/measmodel.hpp"
#include "pmbm/pmbm.hpp"

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace pmbm::oracle {

/// Posterior Bernoulli component attached to one association event.
struct EventBernoulli {
    std::vector<int> cell;  ///< measurements that created it; empty for predicted components
    double existence = 0.0;
    GaussianDensity density;
};

/// Posterior global hypothesis described by its data association: the prior global hypothesis
/// index and a label per measurement (`c<s>` clutter slot s, `c` PPP clutter, `t<i>` predicted
/// Bernoulli i, `n<j>` new Bernoulli whose smallest measurement index is j).
struct Event {
    int prior = 0;
    std::vector<std::string> labels;
    double log_weight = kNegInf;  ///< normalized over the table
    std::vector<EventBernoulli> bernoullis;

    [[nodiscard]] std::string key() const;
};

using EventTable = std::map<std::string, Event>;

using SetDensity = std::function<double(std::span<const Vector>)>;

/// Clutter as seen by the oracle: independent slots with their own set densities, plus optional
/// PPP clutter merged into singleton new Bernoullis.
struct OracleClutter {
    std::vector<SetDensity> slots;
    const PoissonClutter* merged = nullptr;
};

/// Posterior by direct enumeration of every labelled partition of the scan.
EventTable brute_force_update(const PmbmDensity& prior, std::span<const Vector> scan, const MeasurementModel& meas,
                              const OracleClutter& clutter);

/// Event table of a filter posterior, keyed like brute_force_update.
EventTable describe(const PmbmDensity& posterior, const PmbmDensity& prior, int step);

/// Splits merged singleton new Bernoullis into clutter and target events, relabels every clutter
/// slot as `c0` and merges events with equal keys.
EventTable marginalize_clutter(const EventTable& t);

struct Comparison {
    bool ok = true;
    double max_weight_error = 0.0;  ///< in probability
    double max_log_weight_error = 0.0;
    double max_existence_error = 0.0;
    double max_moment_error = 0.0;
    std::string message;
};

/// Probability, existence and moment tolerances are absolute; log-weight errors are reported
/// for events with probability above 1e-300.
Comparison compare(const EventTable& expected, const EventTable& actual, double tol, double log_tol);

/// Total-variation distance between the empirical visit distribution of run_gibbs and the
/// enumerated target distribution.
double gibbs_total_variation(const AssociationProblem& p, int sweeps, std::uint64_t seed);

struct CheckReport {
    int instances = 0;
    int failures = 0;
    double worst = 0.0;
    std::string detail;
};

/// Randomized equivalence suites shared by the tests and the CLI.
CheckReport check_update(int instances, std::uint64_t seed);
CheckReport check_thm2(int instances, std::uint64_t seed);
CheckReport check_gibbs(int sweeps, std::uint64_t seed);

/// Point-target problem with NB clutter used by the Gibbs checks (m = 3, n = 2).
AssociationProblem gibbs_reference_problem();

}  // namespace pmbm::oracle
