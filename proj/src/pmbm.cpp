#include "pmbm/pmbm.hpp"

#include "pmbm/association.hpp"
#include "pmbm/errors.hpp"
#include "pmbm/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>

namespace pmbm {

PmbmDensity PmbmDensity::initial(int clutter_slots) {
    if (clutter_slots < 0) throw ModelError("clutter slot count must be non-negative");
    PmbmDensity d;
    d.clutter.assign(static_cast<std::size_t>(clutter_slots), ClutterTree{{ClutterLocalHypothesis{}}});
    GlobalHypothesis g;
    g.clutter.assign(static_cast<std::size_t>(clutter_slots), 0);
    d.globals.push_back(std::move(g));
    return d;
}

bool PmbmDensity::globals_normalized(double tol) const {
    double total = 0.0;
    for (const auto& g : globals) total += std::exp(g.log_weight);
    return std::abs(total - 1.0) <= tol;
}

bool PmbmDensity::all_globals_valid() const {
    return std::all_of(globals.begin(), globals.end(),
                       [&](const GlobalHypothesis& g) { return validate_global(g, trees, clutter, history); });
}

void FilterConfig::validate() const {
    if (max_hypotheses < 1) throw ModelError("maximum number of global hypotheses must be at least 1");
    if (!(hypothesis_prune > 0.0 && ppp_prune > 0.0 && bernoulli_prune > 0.0 && gate > 0.0))
        throw ModelError("filter thresholds must be positive");
    if (mbm_birth_split < 1) throw ModelError("MBM birth split must be at least 1");
}

// ---- prediction ----

PmbmDensity predict(const PmbmDensity& d, const LinearGaussianMotion& motion,
                    std::span<const PppComponent> birth, const FilterConfig& cfg) {
    motion.validate();
    PmbmDensity out = d;
    const double log_ps = std::log(motion.survival);
    for (auto& c : out.ppp) {
        c.log_weight += log_ps;
        c.density = kalman_predict(c.density, motion);
    }
    for (auto& tree : out.trees) {
        for (auto& h : tree.hypotheses) {
            h.existence *= motion.survival;
            if (h.density.dim() > 0) h.density = kalman_predict(h.density, motion);
        }
    }

    if (cfg.mode != FilterMode::mbm) {
        out.ppp.insert(out.ppp.end(), birth.begin(), birth.end());
        return out;
    }

    // Multi-Bernoulli birth.
    const int step = out.history.empty() ? 1 : out.history.back().step + 1;
    for (const auto& b : birth) {
        const double w = std::exp(b.log_weight);
        if (w <= 0.0) continue;
        const int copies = w > 1.0 ? std::max(cfg.mbm_birth_split, static_cast<int>(std::ceil(w))) : 1;
        LocalHypothesis h;
        h.existence = w / copies;
        h.density = b.density;
        for (int c = 0; c < copies; ++c) {
            out.trees.push_back(BernoulliTree{step, {h}});
            for (auto& g : out.globals) g.bernoulli.push_back(0);
        }
    }
    return out;
}

// ---- update ----

namespace {

struct Detection {
    double log_factor = kNegInf;  // log(r * l)
    GaussianDensity posterior;
};

struct NewTarget {
    double log_likelihood = kNegInf;  // log l^{Z^j}
    GaussianDensity posterior;
};

PairSet cell_pairs(const Cell& cell, int step) {
    PairSet s;
    s.reserve(cell.size());
    for (int j : cell) s.push_back({step, j + 1});
    return s;
}

struct UpdateSetup {
    const PmbmDensity& prior;
    std::span<const Vector> scan;
    int step = 0;
    const MeasurementModel& meas;
    const FilterConfig& cfg;
    int slots = 0;
    /// log c^{slot}(cell)
    std::function<double(int, const Cell&)> slot_density;
    /// Thm1 only: the full clutter model (enables the Gibbs engine).
    const ClutterModel* arbitrary = nullptr;
    /// Thm2 only: PPP clutter folded into singleton new Bernoullis.
    const PoissonClutter* merged = nullptr;
};

class Updater {
public:
    explicit Updater(const UpdateSetup& s) : s_(s), m_(static_cast<int>(s.scan.size())) {
        const auto& prior = s.prior;
        if (static_cast<int>(prior.clutter.size()) != s.slots)
            throw ModelError("density has " + std::to_string(prior.clutter.size()) +
                             " clutter trees but the update expects " + std::to_string(s.slots));
        s.cfg.validate();
        log_miss_ = s.meas.log_miss();
        caches_.resize(prior.trees.size());
        for (std::size_t i = 0; i < prior.trees.size(); ++i) caches_[i].resize(prior.trees[i].hypotheses.size());
    }

    PmbmDensity run() {
        const auto& prior = s_.prior;
        std::vector<std::vector<Association>> per_global(prior.globals.size());
        for (std::size_t g = 0; g < prior.globals.size(); ++g) per_global[g] = associations_for(g);
        return assemble(per_global);
    }

private:
    // ---- per-local-hypothesis quantities ----

    struct LocalCache {
        bool ready = false;
        double miss_factor = 0.0;    // log(1 - r + r l_miss)
        double miss_existence = 0.0;
        std::map<Cell, Detection> detections;
    };

    LocalCache& local(std::size_t tree, int hyp) {
        auto& c = caches_[tree][static_cast<std::size_t>(hyp)];
        if (!c.ready) {
            const auto& h = s_.prior.trees[tree].hypotheses[static_cast<std::size_t>(hyp)];
            const double r = h.existence;
            const double miss = 1.0 - r + r * std::exp(log_miss_);
            c.miss_factor = std::log(miss);
            c.miss_existence = miss > 0.0 ? r * std::exp(log_miss_) / miss : 0.0;
            c.ready = true;
        }
        return c;
    }

    const Detection& detection(std::size_t tree, int hyp, const Cell& cell) {
        auto& c = local(tree, hyp);
        auto it = c.detections.find(cell);
        if (it != c.detections.end()) return it->second;
        Detection det;
        const auto& h = s_.prior.trees[tree].hypotheses[static_cast<std::size_t>(hyp)];
        if (h.existence > 0.0 && gated(h.density, cell)) {
            if (auto u = s_.meas.update(h.density, s_.scan, cell)) {
                det.log_factor = std::log(h.existence) + u->log_likelihood;
                det.posterior = std::move(u->posterior);
            }
        }
        return c.detections.emplace(cell, std::move(det)).first->second;
    }

    bool gated(const GaussianDensity& d, const Cell& cell) const {
        if (std::isinf(s_.cfg.gate)) return true;
        return std::all_of(cell.begin(), cell.end(), [&](int j) {
            return ellipsoidal_gate(d, s_.meas.sensor(), s_.scan[static_cast<std::size_t>(j)], s_.cfg.gate);
        });
    }

    const NewTarget& new_target(const Cell& cell) {
        auto it = new_targets_.find(cell);
        if (it != new_targets_.end()) return it->second;
        NewTarget nt;
        std::vector<double> log_w;
        std::vector<GaussianDensity> post;
        for (const auto& c : s_.prior.ppp) {
            if (c.log_weight == kNegInf || !gated(c.density, cell)) continue;
            auto u = s_.meas.update(c.density, s_.scan, cell);
            if (!u || u->log_likelihood == kNegInf) continue;
            log_w.push_back(c.log_weight + u->log_likelihood);
            post.push_back(std::move(u->posterior));
        }
        if (!log_w.empty()) {
            nt.log_likelihood = log_sum_exp(log_w);
            nt.posterior = moment_match(log_w, post);
        }
        return new_targets_.emplace(cell, std::move(nt)).first->second;
    }

    // Weight and existence of the detected local hypothesis of a new Bernoulli.
    std::pair<double, double> new_weight(const Cell& cell) {
        const double log_l = new_target(cell).log_likelihood;
        if (s_.merged == nullptr || cell.size() != 1) return {log_l, 1.0};
        const double log_c = s_.merged->log_intensity(s_.scan[static_cast<std::size_t>(cell.front())]);
        const double log_w = log_add(log_c, log_l);
        const double r = log_w == kNegInf ? 0.0 : std::exp(log_l - log_w);
        return {log_w, r};
    }

    double slot_density(int slot, const Cell& cell) {
        auto key = std::make_pair(slot, cell);
        auto it = slot_cache_.find(key);
        if (it != slot_cache_.end()) return it->second;
        const double v = s_.slot_density(slot, cell);
        slot_cache_.emplace(std::move(key), v);
        return v;
    }

    // ---- association generation ----

    std::vector<Association> associations_for(std::size_t gi) {
        const auto& g = s_.prior.globals[gi];
        const bool point_engine = s_.meas.point_target() && (s_.arbitrary != nullptr || s_.slots == 0);
        std::vector<Association> out = point_engine ? point_associations(gi) : labelled_associations(g);

        std::erase_if(out, [](const Association& a) { return a.log_weight == kNegInf; });
        if (out.empty()) out.push_back(fallback(g));
        return out;
    }

    double miss_total(const GlobalHypothesis& g) {
        double v = 0.0;
        for (std::size_t i = 0; i < g.bernoulli.size(); ++i) v += local(i, g.bernoulli[i]).miss_factor;
        return v;
    }

    std::vector<Association> point_associations(std::size_t gi) {
        const auto& g = s_.prior.globals[gi];
        const int n = static_cast<int>(g.bernoulli.size());
        AssociationProblem p;
        p.measurements = m_;
        p.targets = n;
        p.log_eta = Matrix::Constant(m_, n + m_, kNegInf);
        for (int i = 0; i < n; ++i) {
            const auto ti = static_cast<std::size_t>(i);
            const double miss = local(ti, g.bernoulli[ti]).miss_factor;
            for (int j = 0; j < m_; ++j) {
                const double f = detection(ti, g.bernoulli[ti], Cell{j}).log_factor;
                if (f != kNegInf) p.log_eta(j, i) = f - miss;
            }
        }
        if (s_.arbitrary != nullptr) {
            for (int j = 0; j < m_; ++j) p.log_eta(j, n + j) = new_target(Cell{j}).log_likelihood;
            const ClutterModel* clutter = s_.arbitrary;
            const auto scan = s_.scan;
            p.log_clutter = [clutter, scan](std::span<const int> idx) { return clutter->log_density(scan, idx); };
            if (const auto* iid = clutter->uniform_iid()) {
                const bool inside = std::all_of(scan.begin(), scan.end(),
                                                [&](const Vector& z) { return iid->region.contains(z); });
                if (inside) {
                    UniformIidClutter u;
                    u.log_volume = std::log(iid->region.volume());
                    for (int c = 0; c <= m_; ++c) u.log_cardinality.push_back(log_pmf(iid->cardinality, c));
                    p.uniform = std::move(u);
                }
            }
        } else {
            // PPP clutter merged with new Bernoullis: "clutter" label selects the merged hypothesis.
            std::vector<double> merged(static_cast<std::size_t>(m_));
            for (int j = 0; j < m_; ++j) merged[static_cast<std::size_t>(j)] = new_weight(Cell{j}).first;
            p.log_clutter = [merged](std::span<const int> idx) {
                double v = 0.0;
                for (int j : idx) v += merged[static_cast<std::size_t>(j)];
                return v;
            };
        }

        std::vector<WeightedAssociation> gammas;
        const double log_wg = g.log_weight;
        const auto budget = static_cast<std::uint64_t>(
            std::max(1.0, std::ceil(static_cast<double>(s_.cfg.max_hypotheses) * std::exp(log_wg))));
        bool exhaustive = s_.cfg.association == AssociationMethod::exhaustive;
        if (s_.cfg.association == AssociationMethod::automatic) {
            try {
                exhaustive = count_hypotheses(TargetKind::point, ClutterKind::arbitrary, n, m_) <= budget;
            } catch (const RangeError&) {
                exhaustive = false;
            }
        }
        if (m_ == 0) {
            gammas.push_back({{}, 0.0, 1});
        } else if (exhaustive) {
            gammas = enumerate_associations(p);
        } else {
            const std::uint64_t seed = derive_seed(s_.cfg.seed, static_cast<std::uint64_t>(s_.step), gi);
            gammas = run_gibbs(p, static_cast<int>(std::min<std::uint64_t>(budget, 1u << 30)), seed);
        }

        const double base = miss_total(g);
        std::vector<Association> out;
        out.reserve(gammas.size());
        for (const auto& wa : gammas) {
            Association a;
            a.slot_cells.assign(static_cast<std::size_t>(s_.slots), Cell{});
            a.tree_cells.assign(static_cast<std::size_t>(n), Cell{});
            for (int j = 0; j < m_; ++j) {
                const int v = wa.gamma[static_cast<std::size_t>(j)];
                if (v == 0) {
                    if (s_.slots > 0) a.slot_cells[0].push_back(j);
                    else a.new_cells.push_back({j});
                } else if (v <= n) {
                    a.tree_cells[static_cast<std::size_t>(v - 1)] = {j};
                } else {
                    a.new_cells.push_back({j});
                }
            }
            std::sort(a.new_cells.begin(), a.new_cells.end());
            // Unnormalized weight, recomputed from the table so that enumeration and sampling agree.
            a.log_weight = m_ == 0 ? base : base + assoc_log_weight(p, wa.gamma);
            out.push_back(std::move(a));
        }
        return out;
    }

    std::vector<Association> labelled_associations(const GlobalHypothesis& g) {
        AssociationSpace space;
        space.measurements = m_;
        space.slots = s_.slots;
        space.trees = static_cast<int>(g.bernoulli.size());
        space.singleton_targets = s_.meas.point_target();
        space.tree_allowed = [&](int t, const Cell& cell) {
            const auto ti = static_cast<std::size_t>(t);
            return detection(ti, g.bernoulli[ti], cell).log_factor != kNegInf;
        };
        space.new_allowed = [&](const Cell& cell) { return new_weight(cell).first != kNegInf; };
        auto out = enumerate_labelled(space, kEnumerationLimit);
        for (auto& a : out) a.log_weight = weight_of(g, a);
        return out;
    }

    double weight_of(const GlobalHypothesis& g, const Association& a) {
        double w = 0.0;
        for (int s = 0; s < s_.slots; ++s) w += slot_density(s, a.slot_cells[static_cast<std::size_t>(s)]);
        for (std::size_t i = 0; i < a.tree_cells.size(); ++i) {
            const auto& cell = a.tree_cells[i];
            w += cell.empty() ? local(i, g.bernoulli[i]).miss_factor : detection(i, g.bernoulli[i], cell).log_factor;
        }
        for (const auto& cell : a.new_cells) w += new_weight(cell).first;
        return w;
    }

    // All measurements to clutter (or, without clutter slots, to merged new Bernoullis).
    Association fallback(const GlobalHypothesis& g) {
        Association a;
        a.slot_cells.assign(static_cast<std::size_t>(s_.slots), Cell{});
        a.tree_cells.assign(g.bernoulli.size(), Cell{});
        for (int j = 0; j < m_; ++j) {
            if (s_.slots > 0) a.slot_cells[0].push_back(j);
            else a.new_cells.push_back({j});
        }
        a.log_weight = weight_of(g, a);
        return a;
    }

    // ---- output assembly ----

    PmbmDensity assemble(const std::vector<std::vector<Association>>& per_global) {
        const auto& prior = s_.prior;
        PmbmDensity out;
        out.history = prior.history;
        out.history.push_back({s_.step, m_});

        out.ppp = prior.ppp;
        for (auto& c : out.ppp) c.log_weight += log_miss_;

        out.trees.resize(prior.trees.size());
        for (std::size_t i = 0; i < prior.trees.size(); ++i) out.trees[i].birth_step = prior.trees[i].birth_step;
        out.clutter.resize(prior.clutter.size());

        std::vector<std::map<std::pair<int, Cell>, int>> tree_child(prior.trees.size());
        std::vector<std::map<std::pair<int, Cell>, int>> clutter_child(prior.clutter.size());
        std::map<Cell, std::size_t> new_tree;

        // First pass: new Bernoulli trees in order of first use.
        for (const auto& list : per_global)
            for (const auto& a : list)
                for (const auto& cell : a.new_cells)
                    if (!new_tree.count(cell)) {
                        const std::size_t idx = out.trees.size();
                        new_tree.emplace(cell, idx);
                        out.trees.push_back(make_new_tree(cell));
                    }

        for (std::size_t gi = 0; gi < per_global.size(); ++gi) {
            const auto& g = prior.globals[gi];
            for (const auto& a : per_global[gi]) {
                GlobalHypothesis ng;
                ng.log_weight = g.log_weight + a.log_weight;
                ng.dropped = g.dropped;
                ng.clutter.resize(prior.clutter.size());
                for (std::size_t s = 0; s < prior.clutter.size(); ++s)
                    ng.clutter[s] = clutter_child_index(out, clutter_child, s, g.clutter[s], a.slot_cells[s]);
                ng.bernoulli.assign(out.trees.size(), 0);
                for (std::size_t i = 0; i < prior.trees.size(); ++i)
                    ng.bernoulli[i] = tree_child_index(out, tree_child, i, g.bernoulli[i], a.tree_cells[i]);
                for (const auto& cell : a.new_cells) ng.bernoulli[new_tree.at(cell)] = 1;
                out.globals.push_back(std::move(ng));
            }
        }

        std::vector<double> w(out.globals.size());
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = out.globals[i].log_weight;
        if (!std::isfinite(normalize_log_weights(w)))
            throw NumericalError("update: every data association hypothesis has zero weight");
        for (std::size_t i = 0; i < w.size(); ++i) out.globals[i].log_weight = w[i];
        return out;
    }

    BernoulliTree make_new_tree(const Cell& cell) {
        const auto& nt = new_target(cell);
        const auto [log_w, r] = new_weight(cell);
        BernoulliTree tree;
        tree.birth_step = s_.step;
        LocalHypothesis absent;
        absent.log_weight = 0.0;
        absent.existence = 0.0;
        absent.density = nt.posterior;
        LocalHypothesis present;
        present.log_weight = log_w;
        present.existence = r;
        present.density = nt.posterior;
        present.measurements = cell_pairs(cell, s_.step);
        if (present.density.dim() == 0 && !s_.prior.ppp.empty()) {
            // Only PPP clutter explains this cell; keep a well-formed density for the r = 0 hypothesis.
            present.density = s_.prior.ppp.front().density;
            absent.density = present.density;
        }
        tree.hypotheses = {std::move(absent), std::move(present)};
        return tree;
    }

    int tree_child_index(PmbmDensity& out, std::vector<std::map<std::pair<int, Cell>, int>>& index,
                         std::size_t tree, int parent, const Cell& cell) {
        auto key = std::make_pair(parent, cell);
        auto it = index[tree].find(key);
        if (it != index[tree].end()) return it->second;

        const auto& ph = s_.prior.trees[tree].hypotheses[static_cast<std::size_t>(parent)];
        LocalHypothesis h;
        h.parent = parent;
        if (cell.empty()) {
            const auto& c = local(tree, parent);
            h.log_weight = ph.log_weight + c.miss_factor;
            h.existence = c.miss_existence;
            h.density = ph.density;
            h.measurements = ph.measurements;
        } else {
            const auto& det = detection(tree, parent, cell);
            h.log_weight = ph.log_weight + det.log_factor;
            h.existence = 1.0;
            h.density = det.posterior;
            h.measurements = pair_union(ph.measurements, cell_pairs(cell, s_.step));
        }
        auto& hyps = out.trees[tree].hypotheses;
        const int idx = static_cast<int>(hyps.size());
        hyps.push_back(std::move(h));
        index[tree].emplace(std::move(key), idx);
        return idx;
    }

    int clutter_child_index(PmbmDensity& out, std::vector<std::map<std::pair<int, Cell>, int>>& index,
                            std::size_t slot, int parent, const Cell& cell) {
        auto key = std::make_pair(parent, cell);
        auto it = index[slot].find(key);
        if (it != index[slot].end()) return it->second;
        const auto& ph = s_.prior.clutter[slot].hypotheses[static_cast<std::size_t>(parent)];
        ClutterLocalHypothesis h;
        h.parent = parent;
        h.log_weight = ph.log_weight + slot_density(static_cast<int>(slot), cell);
        h.measurements = pair_union(ph.measurements, cell_pairs(cell, s_.step));
        auto& hyps = out.clutter[slot].hypotheses;
        const int idx = static_cast<int>(hyps.size());
        hyps.push_back(std::move(h));
        index[slot].emplace(std::move(key), idx);
        return idx;
    }

    const UpdateSetup& s_;
    int m_ = 0;
    double log_miss_ = 0.0;
    std::vector<std::vector<LocalCache>> caches_;
    std::map<Cell, NewTarget> new_targets_;
    std::map<std::pair<int, Cell>, double> slot_cache_;
};

std::vector<Vector> subset(std::span<const Vector> scan, const Cell& cell) {
    std::vector<Vector> z;
    z.reserve(cell.size());
    for (int j : cell) z.push_back(scan[static_cast<std::size_t>(j)]);
    return z;
}

}  // namespace

PmbmDensity update_thm1(const PmbmDensity& d, std::span<const Vector> scan, int step,
                        const MeasurementModel& meas, const ClutterModel& clutter, const FilterConfig& cfg) {
    const UpdateSetup s{d, scan, step, meas, cfg, 1,
                        [&](int, const Cell& cell) { return clutter.log_density(scan, cell); }, &clutter, nullptr};
    return Updater(s).run();
}

PmbmDensity update_thm2(const PmbmDensity& d, std::span<const Vector> scan, int step,
                        const MeasurementModel& meas, const CompositeClutter& clutter, const FilterConfig& cfg) {
    clutter.validate();
    const UpdateSetup s{d, scan, step, meas, cfg, static_cast<int>(clutter.sources.size()),
                        [&](int slot, const Cell& cell) {
                            return source_density(clutter.sources[static_cast<std::size_t>(slot)], subset(scan, cell));
                        },
                        nullptr, &clutter.ppp};
    return Updater(s).run();
}

// ---- PMB projection ----

std::vector<double> marginal_existence(const PmbmDensity& d) {
    std::vector<double> r(d.trees.size(), 0.0);
    for (const auto& g : d.globals) {
        const double w = std::exp(g.log_weight);
        for (std::size_t i = 0; i < d.trees.size(); ++i)
            r[i] += w * d.trees[i].hypotheses[static_cast<std::size_t>(g.bernoulli[i])].existence;
    }
    return r;
}

PmbmDensity project_to_pmb(const PmbmDensity& d) {
    if (d.globals.size() == 1) {
        // Already a PMB: keep only the selected local hypotheses.
        PmbmDensity out = d;
        auto& g = out.globals.front();
        g.log_weight = 0.0;
        for (std::size_t i = 0; i < out.trees.size(); ++i) {
            auto& hyps = out.trees[i].hypotheses;
            hyps = {hyps[static_cast<std::size_t>(g.bernoulli[i])]};
            g.bernoulli[i] = 0;
        }
        for (std::size_t s = 0; s < out.clutter.size(); ++s) {
            auto& hyps = out.clutter[s].hypotheses;
            hyps = {hyps[static_cast<std::size_t>(g.clutter[s])]};
            g.clutter[s] = 0;
        }
        return out;
    }

    PmbmDensity out;
    out.ppp = d.ppp;
    out.trees.reserve(d.trees.size());
    for (std::size_t i = 0; i < d.trees.size(); ++i) {
        const auto& tree = d.trees[i];
        std::vector<double> mass(tree.hypotheses.size(), 0.0);
        for (const auto& g : d.globals) mass[static_cast<std::size_t>(g.bernoulli[i])] += std::exp(g.log_weight);

        std::vector<double> log_w;
        std::vector<GaussianDensity> comps;
        double r = 0.0;
        for (std::size_t a = 0; a < tree.hypotheses.size(); ++a) {
            const double rw = mass[a] * tree.hypotheses[a].existence;
            if (rw <= 0.0) continue;
            r += rw;
            log_w.push_back(std::log(rw));
            comps.push_back(tree.hypotheses[a].density);
        }
        LocalHypothesis h;
        h.existence = std::min(r, 1.0);
        h.density = comps.empty() ? tree.hypotheses.front().density : moment_match(log_w, comps);
        out.trees.push_back(BernoulliTree{tree.birth_step, {std::move(h)}});
    }
    out.clutter.assign(d.clutter.size(), ClutterTree{{ClutterLocalHypothesis{}}});
    GlobalHypothesis g;
    g.clutter.assign(d.clutter.size(), 0);
    g.bernoulli.assign(d.trees.size(), 0);
    out.globals.push_back(std::move(g));
    return out;
}

// ---- reduction ----

PmbmDensity reduce(const PmbmDensity& d, const FilterConfig& cfg) {
    cfg.validate();
    PmbmDensity out;
    out.history = d.history;

    // Global hypotheses: threshold, cap, renormalize.
    std::vector<std::size_t> order(d.globals.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return d.globals[a].log_weight > d.globals[b].log_weight; });
    const double log_threshold = std::log(cfg.hypothesis_prune);
    std::vector<GlobalHypothesis> kept;
    for (std::size_t k = 0; k < order.size() && kept.size() < cfg.max_hypotheses; ++k) {
        const auto& g = d.globals[order[k]];
        if (!kept.empty() && g.log_weight < log_threshold) break;
        kept.push_back(g);
    }
    std::vector<double> w(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) w[i] = kept[i].log_weight;
    normalize_log_weights(w);
    for (std::size_t i = 0; i < kept.size(); ++i) kept[i].log_weight = w[i];

    // Compact clutter trees.
    out.clutter.resize(d.clutter.size());
    for (std::size_t s = 0; s < d.clutter.size(); ++s) {
        std::map<int, int> remap;
        for (auto& g : kept) {
            auto [it, inserted] = remap.emplace(g.clutter[s], static_cast<int>(out.clutter[s].hypotheses.size()));
            if (inserted) out.clutter[s].hypotheses.push_back(d.clutter[s].hypotheses[static_cast<std::size_t>(g.clutter[s])]);
            g.clutter[s] = it->second;
        }
    }

    // Compact Bernoulli trees; drop trees that barely exist under every surviving hypothesis.
    std::vector<std::vector<int>> new_index(kept.size());
    for (std::size_t i = 0; i < d.trees.size(); ++i) {
        double max_r = 0.0;
        for (const auto& g : kept)
            max_r = std::max(max_r, d.trees[i].hypotheses[static_cast<std::size_t>(g.bernoulli[i])].existence);
        if (max_r < cfg.bernoulli_prune) {
            for (auto& g : kept) {
                const auto& pairs = d.trees[i].hypotheses[static_cast<std::size_t>(g.bernoulli[i])].measurements;
                if (!pairs.empty()) g.dropped = pair_union(g.dropped, pairs);
            }
            continue;
        }
        BernoulliTree tree{d.trees[i].birth_step, {}};
        std::map<int, int> remap;
        for (std::size_t k = 0; k < kept.size(); ++k) {
            const int a = kept[k].bernoulli[i];
            auto [it, inserted] = remap.emplace(a, static_cast<int>(tree.hypotheses.size()));
            if (inserted) tree.hypotheses.push_back(d.trees[i].hypotheses[static_cast<std::size_t>(a)]);
            new_index[k].push_back(it->second);
        }
        out.trees.push_back(std::move(tree));
    }
    for (std::size_t k = 0; k < kept.size(); ++k) kept[k].bernoulli = std::move(new_index[k]);
    out.globals = std::move(kept);

    const double log_ppp = std::log(cfg.ppp_prune);
    for (const auto& c : d.ppp)
        if (c.log_weight >= log_ppp) out.ppp.push_back(c);
    return out;
}

// ---- estimation ----

std::vector<Vector> estimate(const PmbmDensity& d, const EstimatorSpec& spec) {
    std::vector<Vector> out;
    if (d.globals.empty()) return out;

    if (spec.kind == EstimatorKind::estimator1) {
        const auto best = std::max_element(d.globals.begin(), d.globals.end(),
                                           [](const auto& a, const auto& b) { return a.log_weight < b.log_weight; });
        for (std::size_t i = 0; i < d.trees.size(); ++i) {
            const auto& h = d.trees[i].hypotheses[static_cast<std::size_t>(best->bernoulli[i])];
            if (h.existence > spec.threshold) out.push_back(h.density.mean);
        }
        return out;
    }

    // Estimator 3: within a hypothesis the best deterministic-cardinality subset keeps exactly
    // the Bernoullis with r > 1/2, scoring w^a prod max(r, 1 - r).
    double best_score = kNegInf;
    std::size_t best = 0;
    for (std::size_t k = 0; k < d.globals.size(); ++k) {
        const auto& g = d.globals[k];
        double score = g.log_weight;
        for (std::size_t i = 0; i < d.trees.size(); ++i) {
            const double r = d.trees[i].hypotheses[static_cast<std::size_t>(g.bernoulli[i])].existence;
            score += std::log(std::max(r, 1.0 - r));
        }
        if (score > best_score) {
            best_score = score;
            best = k;
        }
    }
    const auto& g = d.globals[best];
    for (std::size_t i = 0; i < d.trees.size(); ++i) {
        const auto& h = d.trees[i].hypotheses[static_cast<std::size_t>(g.bernoulli[i])];
        if (h.existence > 0.5) out.push_back(h.density.mean);
    }
    return out;
}

}  // namespace pmbm
