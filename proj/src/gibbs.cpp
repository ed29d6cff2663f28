#include "pmbm/gibbs.hpp"

#include "pmbm/errors.hpp"
#include "pmbm/hypotheses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>

namespace pmbm {

void AssociationProblem::validate() const {
    if (measurements < 0 || targets < 0) throw ModelError("association problem sizes must be non-negative");
    if (log_eta.rows() != measurements || log_eta.cols() != targets + measurements)
        throw ModelError("association table must be m x (n + m)");
    if (measurements > 0 && !log_clutter) throw ModelError("association problem needs a clutter density");
    if (uniform && static_cast<int>(uniform->log_cardinality.size()) < measurements + 1)
        throw ModelError("uniform clutter summary needs rho_c(0..m)");
}

bool is_valid_association(const AssociationProblem& p, const AssociationVector& gamma) {
    if (static_cast<int>(gamma.size()) != p.measurements) return false;
    std::vector<char> used(static_cast<std::size_t>(p.targets + p.measurements) + 1, 0);
    for (int v : gamma) {
        if (v < 0 || v > p.targets + p.measurements) return false;
        if (v == 0) continue;
        if (used[static_cast<std::size_t>(v)]) return false;
        used[static_cast<std::size_t>(v)] = 1;
    }
    return true;
}

namespace {

std::vector<int> clutter_indices(const AssociationVector& gamma) {
    std::vector<int> idx;
    for (std::size_t j = 0; j < gamma.size(); ++j)
        if (gamma[j] == 0) idx.push_back(static_cast<int>(j));
    return idx;
}

double eta(const AssociationProblem& p, int j, int value) { return p.log_eta(j, value - 1); }

}  // namespace

double assoc_log_weight(const AssociationProblem& p, const AssociationVector& gamma) {
    if (!is_valid_association(p, gamma)) return kNegInf;
    if (p.measurements == 0) return 0.0;
    double w = p.log_clutter(clutter_indices(gamma));
    for (int j = 0; j < p.measurements; ++j)
        if (gamma[static_cast<std::size_t>(j)] > 0) w += eta(p, j, gamma[static_cast<std::size_t>(j)]);
    return w;
}

std::vector<double> gibbs_conditional(const AssociationProblem& p, const AssociationVector& gamma, int q,
                                      ConditionalForm form) {
    if (q < 0 || q >= p.measurements) throw RangeError("gibbs_conditional: position out of range");
    const int values = p.targets + p.measurements + 1;
    if (form == ConditionalForm::automatic) form = p.uniform ? ConditionalForm::uniform : ConditionalForm::generic;
    if (form == ConditionalForm::uniform && !p.uniform)
        throw ModelError("uniform conditional requested for non-uniform clutter");

    std::vector<char> taken(static_cast<std::size_t>(values), 0);
    for (int j = 0; j < p.measurements; ++j)
        if (j != q) taken[static_cast<std::size_t>(gamma[static_cast<std::size_t>(j)])] = 1;

    double log_target_clutter = 0.0;  // clutter factor when gamma_q > 0
    double log_clutter_clutter = 0.0; // clutter factor when gamma_q = 0
    if (form == ConditionalForm::uniform) {
        int mc = 0;
        for (int j = 0; j < p.measurements; ++j)
            if (j != q && gamma[static_cast<std::size_t>(j)] == 0) ++mc;
        const auto& u = *p.uniform;
        log_target_clutter = u.log_cardinality[static_cast<std::size_t>(mc)] + std::lgamma(mc + 1.0) - mc * u.log_volume;
        log_clutter_clutter = u.log_cardinality[static_cast<std::size_t>(mc) + 1] + std::lgamma(mc + 2.0) -
                              (mc + 1) * u.log_volume;
    } else {
        std::vector<int> rest;
        std::vector<int> with_q;
        for (int j = 0; j < p.measurements; ++j) {
            const bool clutter = (j == q) || gamma[static_cast<std::size_t>(j)] == 0;
            if (!clutter) continue;
            with_q.push_back(j);
            if (j != q) rest.push_back(j);
        }
        log_target_clutter = p.log_clutter(rest);
        log_clutter_clutter = p.log_clutter(with_q);
    }

    std::vector<double> logp(static_cast<std::size_t>(values), kNegInf);
    logp[0] = log_clutter_clutter;
    for (int v = 1; v < values; ++v) {
        if (taken[static_cast<std::size_t>(v)]) continue;
        logp[static_cast<std::size_t>(v)] = log_target_clutter + eta(p, q, v);
    }
    const double total = log_sum_exp(logp);
    std::vector<double> prob(static_cast<std::size_t>(values), 0.0);
    if (!std::isfinite(total)) {
        // Every alternative is impossible; gamma_q = 0 is always in the valid set.
        prob[0] = 1.0;
        return prob;
    }
    for (int v = 0; v < values; ++v) prob[static_cast<std::size_t>(v)] = std::exp(logp[static_cast<std::size_t>(v)] - total);
    return prob;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    auto mix = [](std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    };
    return mix(mix(mix(base) ^ a) ^ b);
}

std::vector<WeightedAssociation> run_gibbs(const AssociationProblem& p, int sweeps, std::uint64_t seed) {
    if (sweeps < 1) throw ModelError("run_gibbs: need at least one sweep");
    p.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    AssociationVector gamma(static_cast<std::size_t>(p.measurements), 0);
    std::vector<WeightedAssociation> out;
    std::map<AssociationVector, std::size_t> seen;
    for (int k = 0; k < sweeps; ++k) {
        for (int q = 0; q < p.measurements; ++q) {
            const auto prob = gibbs_conditional(p, gamma, q);
            double u = unit(rng);
            int pick = 0;
            for (std::size_t v = 0; v < prob.size(); ++v) {
                if (prob[v] == 0.0) continue;
                pick = static_cast<int>(v);
                u -= prob[v];
                if (u < 0.0) break;
            }
            gamma[static_cast<std::size_t>(q)] = pick;
        }
        auto [it, inserted] = seen.emplace(gamma, out.size());
        if (inserted) out.push_back({gamma, assoc_log_weight(p, gamma), 0});
        ++out[it->second].visits;
    }
    return out;
}

std::vector<WeightedAssociation> enumerate_associations(const AssociationProblem& p) {
    p.validate();
    std::uint64_t count = 0;
    try {
        count = count_hypotheses(TargetKind::point, ClutterKind::arbitrary, p.targets, p.measurements);
    } catch (const RangeError&) {
        throw SizeError("enumerate_associations: problem too large to enumerate");
    }
    if (count > kEnumerationLimit)
        throw SizeError("enumerate_associations: " + std::to_string(count) + " associations exceed the limit");

    std::vector<WeightedAssociation> out;
    out.reserve(count);
    AssociationVector gamma(static_cast<std::size_t>(p.measurements), 0);
    std::vector<char> used(static_cast<std::size_t>(p.targets) + 1, 0);

    auto recurse = [&](auto&& self, int j) -> void {
        if (j == p.measurements) {
            out.push_back({gamma, assoc_log_weight(p, gamma), 0});
            return;
        }
        auto& g = gamma[static_cast<std::size_t>(j)];
        g = 0;
        self(self, j + 1);
        for (int i = 1; i <= p.targets; ++i) {
            if (used[static_cast<std::size_t>(i)]) continue;
            used[static_cast<std::size_t>(i)] = 1;
            g = i;
            self(self, j + 1);
            used[static_cast<std::size_t>(i)] = 0;
        }
        g = p.new_target(j);
        self(self, j + 1);
        g = 0;
    };
    recurse(recurse, 0);

    std::vector<double> w(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) w[i] = out[i].log_weight;
    normalize_log_weights(w);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].log_weight = w[i];
    return out;
}

}  // namespace pmbm
