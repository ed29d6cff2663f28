#pragma once

#include "pmbm/densities.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace pmbm {

/// gamma[j] for measurement j (0-based): 0 = clutter, 1..n = predicted Bernoulli,
/// n + j + 1 = the new Bernoulli initiated by measurement j.
using AssociationVector = std::vector<int>;

/// Uniform IID-cluster clutter summary enabling the closed-form conditional.
struct UniformIidClutter {
    std::vector<double> log_cardinality;  ///< log rho_c(0..m)
    double log_volume = 0.0;               ///< log |A|
};

/// Point-target data association problem for one predicted global hypothesis.
struct AssociationProblem {
    int measurements = 0;
    int targets = 0;
    /// m x (n + m) table of log eta^j(gamma_j); -inf where the association is impossible.
    Matrix log_eta;
    /// log c(Z_c) for the ascending clutter measurement indices Z_c.
    std::function<double(std::span<const int>)> log_clutter;
    /// Set only for uniform IID-cluster clutter with every measurement inside the region.
    std::optional<UniformIidClutter> uniform;

    void validate() const;
    [[nodiscard]] int new_target(int j) const { return targets + j + 1; }
};

/// Membership in the set of valid association vectors.
bool is_valid_association(const AssociationProblem& p, const AssociationVector& gamma);

/// Unnormalized log p(gamma); -inf outside the valid set.
double assoc_log_weight(const AssociationProblem& p, const AssociationVector& gamma);

enum class ConditionalForm { automatic, generic, uniform };

/// Normalized categorical p(gamma_q | gamma_{-q}) over values 0..n+m.
std::vector<double> gibbs_conditional(const AssociationProblem& p, const AssociationVector& gamma, int q,
                                      ConditionalForm form = ConditionalForm::automatic);

struct WeightedAssociation {
    AssociationVector gamma;
    double log_weight = kNegInf;
    int visits = 0;
};

/// Systematic-scan Gibbs sampler starting from the all-clutter vector. Every post-sweep state
/// is recorded; duplicates are merged (visit counts kept), in order of first visit.
std::vector<WeightedAssociation> run_gibbs(const AssociationProblem& p, int sweeps, std::uint64_t seed);

/// Stream key for (base seed, a, b) via splitmix64 mixing; used to give every run, time step
/// and predicted hypothesis its own reproducible RNG stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

inline constexpr std::uint64_t kEnumerationLimit = 1'000'000;

/// Every valid association (gamma_j in {0, 1..n, n+j+1}) with normalized log-weights.
/// Throws SizeError when the count exceeds kEnumerationLimit.
std::vector<WeightedAssociation> enumerate_associations(const AssociationProblem& p);

}  // namespace pmbm
