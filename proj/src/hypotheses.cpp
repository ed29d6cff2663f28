#include "pmbm/hypotheses.hpp"

#include "pmbm/errors.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <string>

namespace pmbm {

namespace {

void append(std::vector<MeasurementPair>& all, const PairSet& s) { all.insert(all.end(), s.begin(), s.end()); }

}  // namespace

bool validate_global(const GlobalHypothesis& g, std::span<const BernoulliTree> trees,
                     std::span<const ClutterTree> clutter, std::span<const ScanRecord> history) {
    if (g.bernoulli.size() != trees.size() || g.clutter.size() != clutter.size())
        throw RangeError("global hypothesis does not select one local hypothesis per tree");

    std::vector<MeasurementPair> covered;
    for (std::size_t i = 0; i < trees.size(); ++i) {
        const int a = g.bernoulli[i];
        if (a < 0 || static_cast<std::size_t>(a) >= trees[i].hypotheses.size())
            throw RangeError("local hypothesis index " + std::to_string(a) + " out of range for tree " +
                             std::to_string(i));
        append(covered, trees[i].hypotheses[static_cast<std::size_t>(a)].measurements);
    }
    for (std::size_t i = 0; i < clutter.size(); ++i) {
        const int a = g.clutter[i];
        if (a < 0 || static_cast<std::size_t>(a) >= clutter[i].hypotheses.size())
            throw RangeError("clutter hypothesis index " + std::to_string(a) + " out of range");
        append(covered, clutter[i].hypotheses[static_cast<std::size_t>(a)].measurements);
    }
    append(covered, g.dropped);
    std::sort(covered.begin(), covered.end());
    if (std::adjacent_find(covered.begin(), covered.end()) != covered.end()) return false;

    std::vector<MeasurementPair> expected;
    for (const auto& scan : history)
        for (int j = 1; j <= scan.count; ++j) expected.push_back({scan.step, j});
    std::sort(expected.begin(), expected.end());
    return covered == expected;
}

PairSet pair_union(const PairSet& a, const PairSet& b) {
    PairSet out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

// ---- counting ----

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
    std::uint64_t r = 0;
    if (__builtin_mul_overflow(a, b, &r)) throw RangeError("hypothesis count exceeds 64-bit range");
    return r;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
    std::uint64_t r = 0;
    if (__builtin_add_overflow(a, b, &r)) throw RangeError("hypothesis count exceeds 64-bit range");
    return r;
}

void check_range(int m, const char* what) {
    if (m < 0 || m > kMaxExactCount)
        throw RangeError(std::string(what) + ": argument must lie in [0, " +
                         std::to_string(kMaxExactCount) + "], got " + std::to_string(m));
}

std::uint64_t factorial(int n) {
    std::uint64_t f = 1;
    for (int i = 2; i <= n; ++i) f = checked_mul(f, static_cast<std::uint64_t>(i));
    return f;
}

// Point targets, PPP clutter: choose p detected targets and p measurements, times p! pairings.
std::uint64_t n_pp(int n, int m) {
    std::uint64_t total = 0;
    for (int p = 0; p <= std::min(n, m); ++p)
        total = checked_add(total, checked_mul(factorial(p), checked_mul(binomial(m, p), binomial(n, p))));
    return total;
}

std::uint64_t n_gp(int n, int m) {
    std::uint64_t total = 0;
    for (int l = 0; l <= m; ++l) total = checked_add(total, checked_mul(stirling2(m, l), n_pp(n, l)));
    return total;
}

template <class Inner>
std::uint64_t with_clutter_subsets(int n, int m, Inner inner) {
    std::uint64_t total = 0;
    for (int c = 0; c <= m; ++c) total = checked_add(total, checked_mul(binomial(m, c), inner(n, m - c)));
    return total;
}

}  // namespace

std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) r = checked_mul(r, static_cast<std::uint64_t>(n - k + i)) / static_cast<std::uint64_t>(i);
    return r;
}

std::uint64_t stirling2(int m, int l) {
    check_range(m, "stirling2");
    if (l < 0 || l > m) throw RangeError("stirling2: need 0 <= l <= m");
    // S(i, j) = j S(i-1, j) + S(i-1, j-1)
    std::vector<std::uint64_t> row(static_cast<std::size_t>(m) + 1, 0);
    row[0] = 1;
    for (int i = 1; i <= m; ++i) {
        for (int j = i; j >= 1; --j)
            row[static_cast<std::size_t>(j)] =
                checked_add(checked_mul(static_cast<std::uint64_t>(j), row[static_cast<std::size_t>(j)]),
                            row[static_cast<std::size_t>(j) - 1]);
        row[0] = 0;
    }
    return row[static_cast<std::size_t>(l)];
}

std::uint64_t bell(int m) {
    check_range(m, "bell");
    std::uint64_t total = 0;
    for (int l = 0; l <= m; ++l) total = checked_add(total, stirling2(m, l));
    return total;
}

std::uint64_t count_hypotheses(TargetKind target, ClutterKind clutter, int n, int m) {
    check_range(m, "count_hypotheses (measurements)");
    if (n < 0) throw RangeError("count_hypotheses: Bernoulli count must be non-negative");
    if (target == TargetKind::point && clutter == ClutterKind::ppp) return n_pp(n, m);
    if (target == TargetKind::general && clutter == ClutterKind::ppp) return n_gp(n, m);
    if (target == TargetKind::point) return with_clutter_subsets(n, m, n_pp);
    return with_clutter_subsets(n, m, n_gp);
}

namespace {

void write_pairs(std::ostream& os, const PairSet& s) {
    if (s.empty()) {
        os << '-';
        return;
    }
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i].step << ':' << s[i].index;
}

}  // namespace

void dump_trees(std::ostream& os, std::span<const BernoulliTree> trees, std::span<const ClutterTree> clutter) {
    const auto flags = os.flags();
    os << std::setprecision(17);
    for (std::size_t t = 0; t < clutter.size(); ++t) {
        for (std::size_t h = 0; h < clutter[t].hypotheses.size(); ++h) {
            const auto& hyp = clutter[t].hypotheses[h];
            os << "C " << t << ' ' << h << ' ' << hyp.parent << " - " << hyp.log_weight << ' ';
            write_pairs(os, hyp.measurements);
            os << '\n';
        }
    }
    for (std::size_t t = 0; t < trees.size(); ++t) {
        for (std::size_t h = 0; h < trees[t].hypotheses.size(); ++h) {
            const auto& hyp = trees[t].hypotheses[h];
            os << "B " << t << ' ' << h << ' ' << hyp.parent << ' ' << hyp.existence << ' ' << hyp.log_weight << ' ';
            write_pairs(os, hyp.measurements);
            os << '\n';
        }
    }
    os.flags(flags);
}

}  // namespace pmbm
