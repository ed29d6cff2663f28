#include "pmbm/oracle.hpp"

#include "pmbm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace pmbm::oracle {

std::string Event::key() const {
    std::string k = "g" + std::to_string(prior) + "|";
    for (const auto& l : labels) k += l + ",";
    return k;
}

namespace {

struct Integral {
    double log_value = kNegInf;
    GaussianDensity posterior;
};

// <p, f(Z|.)> and the normalized product, straight from the Kalman recursions.
Integral integrate(const MeasurementModel& meas, const GaussianDensity& p, std::span<const Vector> z) {
    Integral out;
    if (const auto* pt = std::get_if<PointTargetModel>(&meas.variant())) {
        if (z.size() != 1) return out;
        const auto u = kalman_update(p, pt->sensor, z.front());
        out.log_value = std::log(pt->sensor.detection) + u.log_likelihood;
        out.posterior = u.posterior;
        return out;
    }
    const auto& ex = std::get<ExtendedTargetModel>(meas.variant());
    if (ex.detection <= 0.0 || ex.rate <= 0.0) return out;
    double v = std::log(ex.detection) - ex.rate + static_cast<double>(z.size()) * std::log(ex.rate);
    GaussianDensity d = p;
    for (const auto& zi : z) {
        const auto u = kalman_update(d, ex.sensor, zi);
        v += u.log_likelihood;
        d = u.posterior;
    }
    out.log_value = v;
    out.posterior = d;
    return out;
}

double log_miss(const MeasurementModel& meas) {
    if (const auto* pt = std::get_if<PointTargetModel>(&meas.variant())) return std::log1p(-pt->sensor.detection);
    const auto& ex = std::get<ExtendedTargetModel>(meas.variant());
    return std::log(1.0 - ex.detection + ex.detection * std::exp(-ex.rate));
}

std::vector<Vector> pick(std::span<const Vector> scan, const std::vector<int>& idx) {
    std::vector<Vector> z;
    for (int j : idx) z.push_back(scan[static_cast<std::size_t>(j)]);
    return z;
}

void normalize(EventTable& t) {
    std::vector<double> w;
    for (const auto& [k, e] : t) w.push_back(e.log_weight);
    const double total = log_sum_exp(w);
    for (auto& [k, e] : t) e.log_weight -= total;
}

double max_abs(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return std::numeric_limits<double>::infinity();
    return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

EventTable brute_force_update(const PmbmDensity& prior, std::span<const Vector> scan, const MeasurementModel& meas,
                              const OracleClutter& clutter) {
    const int m = static_cast<int>(scan.size());
    const int slots = static_cast<int>(clutter.slots.size());
    const int n = static_cast<int>(prior.trees.size());
    const double miss = log_miss(meas);
    const bool point = meas.point_target();

    EventTable table;
    for (std::size_t gi = 0; gi < prior.globals.size(); ++gi) {
        const auto& g = prior.globals[gi];
        // label[j] < slots: clutter slot; < slots + n: predicted Bernoulli; otherwise new group.
        std::vector<int> label(static_cast<std::size_t>(m), 0);
        auto visit = [&]() {
            const int groups = m == 0 ? 0 : *std::max_element(label.begin(), label.end()) - slots - n + 1;
            std::vector<std::vector<int>> slot_cells(static_cast<std::size_t>(slots)), tree_cells(static_cast<std::size_t>(n)),
                new_cells(static_cast<std::size_t>(std::max(groups, 0)));
            for (int j = 0; j < m; ++j) {
                const int l = label[static_cast<std::size_t>(j)];
                if (l < slots) slot_cells[static_cast<std::size_t>(l)].push_back(j);
                else if (l < slots + n) tree_cells[static_cast<std::size_t>(l - slots)].push_back(j);
                else new_cells[static_cast<std::size_t>(l - slots - n)].push_back(j);
            }

            Event e;
            e.prior = static_cast<int>(gi);
            e.labels.assign(static_cast<std::size_t>(m), "");
            double w = g.log_weight;
            for (int s = 0; s < slots; ++s) {
                const auto& cell = slot_cells[static_cast<std::size_t>(s)];
                w += clutter.slots[static_cast<std::size_t>(s)](pick(scan, cell));
                for (int j : cell) e.labels[static_cast<std::size_t>(j)] = "c" + std::to_string(s);
            }
            for (int i = 0; i < n; ++i) {
                const auto& h = prior.trees[static_cast<std::size_t>(i)].hypotheses[static_cast<std::size_t>(g.bernoulli[static_cast<std::size_t>(i)])];
                const auto& cell = tree_cells[static_cast<std::size_t>(i)];
                const double r = h.existence;
                if (cell.empty()) {
                    const double q = 1.0 - r + r * std::exp(miss);
                    w += std::log(q);
                    e.bernoullis.push_back({{}, q > 0.0 ? r * std::exp(miss) / q : 0.0, h.density});
                    continue;
                }
                if (r <= 0.0 || (point && cell.size() > 1)) return;
                const auto in = integrate(meas, h.density, pick(scan, cell));
                w += std::log(r) + in.log_value;
                e.bernoullis.push_back({{}, 1.0, in.posterior});
                for (int j : cell) e.labels[static_cast<std::size_t>(j)] = "t" + std::to_string(i);
            }
            for (const auto& cell : new_cells) {
                if (point && cell.size() > 1) return;
                std::vector<double> lw;
                std::vector<GaussianDensity> post;
                for (const auto& c : prior.ppp) {
                    const auto in = integrate(meas, c.density, pick(scan, cell));
                    if (in.log_value == kNegInf) continue;
                    lw.push_back(c.log_weight + in.log_value);
                    post.push_back(in.posterior);
                }
                const double log_l = log_sum_exp(lw);
                double weight = log_l;
                double r = 1.0;
                if (clutter.merged != nullptr && cell.size() == 1) {
                    weight = log_add(clutter.merged->log_intensity(scan[static_cast<std::size_t>(cell.front())]), log_l);
                    r = weight == kNegInf ? 0.0 : std::exp(log_l - weight);
                }
                w += weight;
                if (w == kNegInf) return;
                e.bernoullis.push_back({cell, r, lw.empty() ? GaussianDensity{} : moment_match(lw, post)});
                for (int j : cell) e.labels[static_cast<std::size_t>(j)] = "n" + std::to_string(cell.front());
            }
            if (w == kNegInf) return;
            e.log_weight = w;
            table.emplace(e.key(), std::move(e));
        };

        auto rec = [&](auto&& self, int j, int groups) -> void {
            if (j == m) {
                visit();
                return;
            }
            for (int l = 0; l < slots + n + groups + 1; ++l) {
                label[static_cast<std::size_t>(j)] = l;
                self(self, j + 1, l == slots + n + groups ? groups + 1 : groups);
            }
        };
        rec(rec, 0, 0);
    }
    if (table.empty()) throw NumericalError("oracle: every association has zero weight");
    normalize(table);
    return table;
}

EventTable describe(const PmbmDensity& posterior, const PmbmDensity& prior, int step) {
    const std::size_t n_old = prior.trees.size();
    int m = 0;
    for (const auto& r : posterior.history)
        if (r.step == step) m = r.count;

    EventTable table;
    for (const auto& g : posterior.globals) {
        Event e;
        e.log_weight = g.log_weight;
        e.labels.assign(static_cast<std::size_t>(m), "?");

        e.prior = -1;
        for (std::size_t pi = 0; pi < prior.globals.size() && e.prior < 0; ++pi) {
            const auto& pg = prior.globals[pi];
            bool match = true;
            for (std::size_t i = 0; i < n_old && match; ++i)
                match = posterior.trees[i].hypotheses[static_cast<std::size_t>(g.bernoulli[i])].parent == pg.bernoulli[i];
            for (std::size_t s = 0; s < prior.clutter.size() && match; ++s)
                match = posterior.clutter[s].hypotheses[static_cast<std::size_t>(g.clutter[s])].parent == pg.clutter[s];
            if (match) e.prior = static_cast<int>(pi);
        }

        auto cell_at_step = [&](const PairSet& pairs) {
            std::vector<int> cell;
            for (const auto& p : pairs)
                if (p.step == step) cell.push_back(p.index - 1);
            return cell;
        };

        for (std::size_t s = 0; s < posterior.clutter.size(); ++s)
            for (int j : cell_at_step(posterior.clutter[s].hypotheses[static_cast<std::size_t>(g.clutter[s])].measurements))
                e.labels[static_cast<std::size_t>(j)] = "c" + std::to_string(s);

        std::vector<EventBernoulli> fresh;
        for (std::size_t i = 0; i < posterior.trees.size(); ++i) {
            const auto& h = posterior.trees[i].hypotheses[static_cast<std::size_t>(g.bernoulli[i])];
            const auto cell = cell_at_step(h.measurements);
            if (i < n_old) {
                for (int j : cell) e.labels[static_cast<std::size_t>(j)] = "t" + std::to_string(i);
                e.bernoullis.push_back({{}, h.existence, h.density});
            } else if (g.bernoulli[i] != 0) {
                for (int j : cell) e.labels[static_cast<std::size_t>(j)] = "n" + std::to_string(cell.front());
                fresh.push_back({cell, h.existence, h.density});
            }
        }
        std::sort(fresh.begin(), fresh.end(), [](const auto& a, const auto& b) { return a.cell < b.cell; });
        for (auto& b : fresh) e.bernoullis.push_back(std::move(b));
        auto key = e.key();
        if (table.count(key)) throw ModelError("posterior has two global hypotheses with association " + key);
        table.emplace(std::move(key), std::move(e));
    }
    return table;
}

EventTable marginalize_clutter(const EventTable& t) {
    EventTable out;
    auto add = [&](Event e) {
        for (auto& l : e.labels)
            if (!l.empty() && l.front() == 'c') l = "c0";
        auto key = e.key();
        auto it = out.find(key);
        if (it == out.end()) out.emplace(std::move(key), std::move(e));
        else it->second.log_weight = log_add(it->second.log_weight, e.log_weight);
    };
    for (const auto& [k, e] : t) {
        std::vector<std::size_t> split;
        for (std::size_t b = 0; b < e.bernoullis.size(); ++b)
            if (e.bernoullis[b].cell.size() == 1 && e.bernoullis[b].existence < 1.0) split.push_back(b);
        for (std::size_t mask = 0; mask < (std::size_t{1} << split.size()); ++mask) {
            Event x = e;
            std::vector<std::size_t> drop;
            for (std::size_t s = 0; s < split.size(); ++s) {
                auto& b = x.bernoullis[split[s]];
                if (mask & (std::size_t{1} << s)) {
                    x.log_weight += std::log(b.existence);
                    b.existence = 1.0;
                } else {
                    x.log_weight += std::log1p(-b.existence);
                    x.labels[static_cast<std::size_t>(b.cell.front())] = "c";
                    drop.push_back(split[s]);
                }
            }
            for (auto it = drop.rbegin(); it != drop.rend(); ++it)
                x.bernoullis.erase(x.bernoullis.begin() + static_cast<std::ptrdiff_t>(*it));
            if (x.log_weight == kNegInf) continue;
            add(std::move(x));
        }
    }
    return out;
}

Comparison compare(const EventTable& expected, const EventTable& actual, double tol, double log_tol) {
    Comparison c;
    std::ostringstream msg;
    auto fail = [&](const std::string& why) {
        if (c.ok) msg << why;
        c.ok = false;
    };
    for (const auto& [k, e] : expected) {
        auto it = actual.find(k);
        const double pe = std::exp(e.log_weight);
        if (it == actual.end()) {
            c.max_weight_error = std::max(c.max_weight_error, pe);
            if (pe > tol) fail("missing event " + k);
            continue;
        }
        const auto& a = it->second;
        const double pa = std::exp(a.log_weight);
        c.max_weight_error = std::max(c.max_weight_error, std::abs(pe - pa));
        if (std::abs(pe - pa) > tol) fail("weight mismatch at " + k);
        if (pe > 1e-300) {
            const double le = std::abs(e.log_weight - a.log_weight);
            c.max_log_weight_error = std::max(c.max_log_weight_error, le);
            if (le > log_tol) fail("log-weight mismatch at " + k);
        }
        if (e.bernoullis.size() != a.bernoullis.size()) {
            fail("Bernoulli count mismatch at " + k);
            continue;
        }
        for (std::size_t b = 0; b < e.bernoullis.size(); ++b) {
            const auto& eb = e.bernoullis[b];
            const auto& ab = a.bernoullis[b];
            const double re = std::abs(eb.existence - ab.existence);
            c.max_existence_error = std::max(c.max_existence_error, re);
            if (re > tol) fail("existence mismatch at " + k);
            if (eb.existence <= 0.0) continue;
            const double me = std::max(max_abs(eb.density.mean, ab.density.mean),
                                       max_abs(eb.density.covariance, ab.density.covariance));
            c.max_moment_error = std::max(c.max_moment_error, me);
            if (me > tol) fail("moment mismatch at " + k);
        }
    }
    for (const auto& [k, a] : actual) {
        if (expected.count(k)) continue;
        const double pa = std::exp(a.log_weight);
        c.max_weight_error = std::max(c.max_weight_error, pa);
        if (pa > tol) fail("unexpected event " + k);
    }
    c.message = msg.str();
    return c;
}

double gibbs_total_variation(const AssociationProblem& p, int sweeps, std::uint64_t seed) {
    const auto exact = enumerate_associations(p);
    const auto samples = run_gibbs(p, sweeps, seed);
    std::map<AssociationVector, double> diff;
    for (const auto& e : exact) diff[e.gamma] += std::exp(e.log_weight);
    for (const auto& s : samples) diff[s.gamma] -= static_cast<double>(s.visits) / sweeps;
    double tv = 0.0;
    for (const auto& [g, d] : diff) tv += std::abs(d);
    return tv / 2.0;
}

// ---- randomized suites ----

namespace {

struct Instance {
    PmbmDensity core;  // without clutter trees
    std::vector<Vector> scan;
};

GaussianDensity random_density(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> pos(0.0, 10.0), vel(-1.0, 1.0), var(0.5, 3.0);
    Vector mean(4);
    mean << pos(rng), vel(rng), pos(rng), vel(rng);
    Matrix cov = Matrix::Zero(4, 4);
    cov.diagonal() << var(rng), 0.5 * var(rng), var(rng), 0.5 * var(rng);
    cov(0, 1) = cov(1, 0) = 0.2 * std::sqrt(cov(0, 0) * cov(1, 1));
    return {mean, cov};
}

// n predicted Bernoullis, each with two local hypotheses, and one or two global hypotheses.
Instance random_instance(std::mt19937_64& rng, int n, int m) {
    std::uniform_real_distribution<double> unit(0.05, 0.95), pos(0.0, 10.0);
    Instance in;
    in.core.ppp.push_back({std::log(0.3 + unit(rng)), random_density(rng)});
    if (unit(rng) > 0.5) in.core.ppp.push_back({std::log(unit(rng)), random_density(rng)});
    for (int i = 0; i < n; ++i) {
        BernoulliTree t{1, {}};
        for (int a = 0; a < 2; ++a) t.hypotheses.push_back({0.0, unit(rng), random_density(rng), {}, -1});
        in.core.trees.push_back(std::move(t));
    }
    const bool two = n > 0 && unit(rng) > 0.5;
    const double w = unit(rng);
    in.core.globals.push_back({two ? std::log(w) : 0.0, {}, std::vector<int>(static_cast<std::size_t>(n), 0), {}});
    if (two) in.core.globals.push_back({std::log1p(-w), {}, std::vector<int>(static_cast<std::size_t>(n), 1), {}});
    for (int j = 0; j < m; ++j) in.scan.push_back((Vector(2) << pos(rng), pos(rng)).finished());
    return in;
}

PmbmDensity with_slots(const PmbmDensity& core, int slots) {
    PmbmDensity d = core;
    d.clutter.assign(static_cast<std::size_t>(slots), ClutterTree{{ClutterLocalHypothesis{}}});
    for (auto& g : d.globals) g.clutter.assign(static_cast<std::size_t>(slots), 0);
    return d;
}

Region oracle_region() { return {(Vector(2) << -5.0, -5.0).finished(), (Vector(2) << 15.0, 15.0).finished()}; }

ClutterSource random_source(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> pos(0.0, 10.0);
    return {0.7, 1.5, (Vector(2) << pos(rng), pos(rng)).finished(), 2.0 * Matrix::Identity(2, 2)};
}

MeasurementModel model(bool point) {
    const auto sensor = LinearGaussianSensor::position(1.0, 0.8);
    if (point) return PointTargetModel{sensor};
    return ExtendedTargetModel{0.8, 2.0, sensor};
}

FilterConfig exact_config() {
    FilterConfig cfg;
    cfg.gate = std::numeric_limits<double>::infinity();
    cfg.association = AssociationMethod::exhaustive;
    return cfg;
}

void record(CheckReport& r, const Comparison& c, const std::string& what) {
    ++r.instances;
    r.worst = std::max({r.worst, c.max_weight_error, c.max_log_weight_error, c.max_existence_error, c.max_moment_error});
    if (!c.ok) {
        ++r.failures;
        if (r.detail.empty()) r.detail = what + ": " + c.message;
    }
}

}  // namespace

CheckReport check_update(int instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    CheckReport report;
    const auto cfg = exact_config();
    for (int i = 0; i < instances; ++i) {
        const int n = i % 3;
        const int m = (i / 3) % 4;
        const int family = (i / 12) % 3;
        const bool point = (i / 36) % 2 == 0;
        const auto in = random_instance(rng, n, m);
        const auto meas = model(point);

        ClutterModel clutter = PoissonClutter{2.0, oracle_region()};
        if (family == 1) clutter = IidClusterClutter{nb_from_mean_dispersion(2.0, 3.0), oracle_region()};
        if (family == 2) {
            CompositeClutter c{PoissonClutter{1.0, oracle_region()}, {random_source(rng)}};
            if (rng() % 2) c.sources.push_back(random_source(rng));
            clutter = c;
        }

        const auto prior = with_slots(in.core, 1);
        const auto post = update_thm1(prior, in.scan, 1, meas, clutter, cfg);
        OracleClutter oc{{[&](std::span<const Vector> z) { return clutter.log_density(z); }}, nullptr};
        const auto expected = brute_force_update(prior, in.scan, meas, oc);
        std::ostringstream what;
        what << "instance " << i << " (n=" << n << ", m=" << m << ", clutter=" << family
             << ", model=" << (point ? "point" : "general") << ")";
        record(report, compare(expected, describe(post, prior, 1), 1e-9, 1e-8), what.str());
    }
    return report;
}

CheckReport check_thm2(int instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    CheckReport report;
    const auto cfg = exact_config();
    for (int i = 0; i < instances; ++i) {
        const int n = i % 3;
        const int m = (i / 3) % 4;
        const bool point = (i / 12) % 2 == 0;
        const bool reduces = (i / 24) % 2 == 1;
        const auto in = random_instance(rng, n, m);
        const auto meas = model(point);

        CompositeClutter c{PoissonClutter{reduces ? 0.0 : 1.0, oracle_region()}, {random_source(rng)}};
        if (!reduces && rng() % 2) c.sources.push_back(random_source(rng));
        const int slots = static_cast<int>(c.sources.size());

        const auto prior2 = with_slots(in.core, slots);
        const auto prior1 = with_slots(in.core, 1);
        const auto thm2 = describe(update_thm2(prior2, in.scan, 1, meas, c, cfg), prior2, 1);
        const auto thm1 = describe(update_thm1(prior1, in.scan, 1, meas, ClutterModel(c), cfg), prior1, 1);
        std::ostringstream what;
        what << "instance " << i << " (n=" << n << ", m=" << m << ", sources=" << slots
             << (reduces ? ", no PPP clutter" : "") << ")";
        if (reduces) record(report, compare(thm1, thm2, 1e-12, 1e-12), what.str());
        else record(report, compare(marginalize_clutter(thm1), marginalize_clutter(thm2), 1e-9, 1e-8), what.str());
    }
    return report;
}

AssociationProblem gibbs_reference_problem() {
    const auto sensor = LinearGaussianSensor::position(1.0, 0.9);
    const MeasurementModel meas(PointTargetModel{sensor});
    const std::vector<Vector> scan{(Vector(2) << 2.0, 2.0).finished(), (Vector(2) << 3.0, 2.5).finished(),
                                   (Vector(2) << 7.0, 6.0).finished()};
    const std::vector<GaussianDensity> targets{
        {(Vector(4) << 2.2, 0.0, 2.1, 0.0).finished(), Matrix(Vector((Vector(4) << 2.0, 1.0, 2.0, 1.0).finished()).asDiagonal())},
        {(Vector(4) << 2.9, 0.0, 2.6, 0.0).finished(), Matrix(Vector((Vector(4) << 3.0, 1.0, 3.0, 1.0).finished()).asDiagonal())}};
    const std::vector<double> existence{0.8, 0.6};
    const GaussianDensity birth{(Vector(4) << 5.0, 0.0, 5.0, 0.0).finished(),
                                Matrix(Vector((Vector(4) << 16.0, 1.0, 16.0, 1.0).finished()).asDiagonal())};
    const double birth_weight = 0.5;
    const IidClusterClutter clutter{nb_from_mean_dispersion(2.0, 5.0), Region{(Vector(2) << 0.0, 0.0).finished(),
                                                                              (Vector(2) << 10.0, 10.0).finished()}};

    AssociationProblem p;
    p.measurements = 3;
    p.targets = 2;
    p.log_eta = Matrix::Constant(3, 5, kNegInf);
    for (int i = 0; i < 2; ++i) {
        const double r = existence[static_cast<std::size_t>(i)];
        const double miss = std::log(1.0 - r + r * (1.0 - sensor.detection));
        for (int j = 0; j < 3; ++j) {
            const auto u = kalman_update(targets[static_cast<std::size_t>(i)], sensor, scan[static_cast<std::size_t>(j)]);
            p.log_eta(j, i) = std::log(r * sensor.detection) + u.log_likelihood - miss;
        }
    }
    for (int j = 0; j < 3; ++j)
        p.log_eta(j, 2 + j) = std::log(birth_weight * sensor.detection) +
                              kalman_update(birth, sensor, scan[static_cast<std::size_t>(j)]).log_likelihood;
    const ClutterModel model(clutter);
    p.log_clutter = [model, scan](std::span<const int> idx) { return model.log_density(scan, idx); };
    UniformIidClutter u;
    u.log_volume = std::log(clutter.region.volume());
    for (int c = 0; c <= 3; ++c) u.log_cardinality.push_back(log_pmf(clutter.cardinality, c));
    p.uniform = u;
    return p;
}

CheckReport check_gibbs(int sweeps, std::uint64_t seed) {
    CheckReport report;
    auto p = gibbs_reference_problem();
    for (int variant = 0; variant < 2; ++variant) {
        if (variant == 1) p.uniform.reset();
        const double tv = gibbs_total_variation(p, sweeps, derive_seed(seed, static_cast<std::uint64_t>(variant)));
        ++report.instances;
        report.worst = std::max(report.worst, tv);
        if (tv > 0.05) {
            ++report.failures;
            report.detail = "total variation " + std::to_string(tv) + " exceeds 0.05";
        }
    }
    return report;
}

}  // namespace pmbm::oracle
