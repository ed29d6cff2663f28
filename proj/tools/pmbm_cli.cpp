#include "pmbm/clutter.hpp"
#include "pmbm/harness.hpp"
#include "pmbm/hypotheses.hpp"
#include "pmbm/oracle.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

std::vector<pmbm::FilterKind> parse_filters(const std::string& list) {
    std::vector<pmbm::FilterKind> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(pmbm::parse_filter(item));
    return out;
}

int simulate(const std::string& config, int runs, long long seed, const std::string& out, const std::string& filters,
             int threads) {
    pmbm::ScenarioConfig cfg;
    if (!config.empty()) {
        std::ifstream f(config);
        if (!f) throw std::runtime_error("cannot read " + config);
        std::stringstream text;
        text << f.rdbuf();
        cfg = pmbm::scenario_from_json(text.str());
    }
    if (runs > 0) cfg.runs = runs;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.validate();

    const auto kinds = parse_filters(filters);
    const auto records = pmbm::run_experiment(cfg, kinds, threads);
    const auto summaries = pmbm::aggregate_metrics(records, cfg.gospa);
    pmbm::write_outputs(out, cfg, records, summaries);

    std::printf("%-8s %6s %10s %10s %10s %10s\n", "filter", "runs", "gospa", "loc", "missed", "false");
    for (const auto& s : summaries)
        std::printf("%-8s %6d %10.4f %10.4f %10.4f %10.4f\n", pmbm::filter_name(s.filter).c_str(), s.successful_runs,
                    s.rms_total, s.rms_localisation, s.rms_missed, s.rms_false);
    return 0;
}

int table1() {
    using pmbm::ClutterKind;
    using pmbm::TargetKind;
    const struct {
        const char* name;
        TargetKind t;
        ClutterKind c;
    } rows[] = {{"point/ppp", TargetKind::point, ClutterKind::ppp},
                {"general/ppp", TargetKind::general, ClutterKind::ppp},
                {"point/arbitrary", TargetKind::point, ClutterKind::arbitrary},
                {"general/arbitrary", TargetKind::general, ClutterKind::arbitrary}};
    const int ns[] = {0, 1, 4};
    const int ms[] = {1, 2, 3, 4, 5, 10};
    for (int n : ns) {
        std::printf("n = %d\n%-18s", n, "m");
        for (int m : ms) std::printf("%14d", m);
        std::printf("\n");
        for (const auto& r : rows) {
            std::printf("%-18s", r.name);
            for (int m : ms)
                std::printf("%14llu", static_cast<unsigned long long>(pmbm::count_hypotheses(r.t, r.c, n, m)));
            std::printf("\n");
        }
    }
    return 0;
}

int check(const std::string& which, long long seed) {
    const auto s = static_cast<std::uint64_t>(seed < 0 ? 1 : seed);
    pmbm::oracle::CheckReport r;
    if (which == "update") r = pmbm::oracle::check_update(200, s);
    else if (which == "thm2") r = pmbm::oracle::check_thm2(96, s);
    else r = pmbm::oracle::check_gibbs(100000, s);
    std::printf("%s: %d instances, %d failures, worst error %.3g\n", which.c_str(), r.instances, r.failures, r.worst);
    if (!r.detail.empty()) std::printf("  %s\n", r.detail.c_str());
    return r.failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PMBM multi-target filtering with arbitrary clutter"};
    app.require_subcommand(1);

    std::string config, out = "out", filters = "a-pmbm,a-pmb,pmbm,pmb";
    int runs = 0, threads = 0;
    long long seed = -1;
    auto* sim = app.add_subcommand("simulate", "Run the Monte Carlo point-target experiment");
    sim->add_option("--config", config, "Scenario JSON file")->check(CLI::ExistingFile);
    sim->add_option("--runs", runs, "Monte Carlo runs (overrides config)");
    sim->add_option("--seed", seed, "Master seed (overrides config)");
    sim->add_option("--out", out, "Output directory");
    sim->add_option("--filters", filters, "Comma-separated: a-pmbm,a-pmb,pmbm,pmb,mbm");
    sim->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");

    bool table = false;
    auto* counts = app.add_subcommand("counts", "Global hypothesis counts");
    counts->add_flag("--table1", table, "Print the table for n in {0, 1, 4}, m in {1..5, 10}");

    double mean = 10.0, dispersion = 20.0;
    auto* kld = app.add_subcommand("kld", "KLD between Poisson and negative binomial with equal mean");
    kld->add_option("--mean", mean, "Mean number of clutter measurements")->required();
    kld->add_option("--dispersion", dispersion, "Variance-to-mean ratio (> 1)")->required();

    std::string which;
    auto* orc = app.add_subcommand("oracle", "Brute-force equivalence checks");
    orc->add_option("--check", which, "update, gibbs or thm2")->required()->check(CLI::IsMember({"update", "gibbs", "thm2"}));
    orc->add_option("--seed", seed, "Seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) return simulate(config, runs, seed, out, filters, threads);
        if (*counts) {
            if (!table) {
                std::cerr << "counts: pass --table1\n";
                return 2;
            }
            return table1();
        }
        if (*kld) {
            std::printf("%.10g\n", pmbm::poisson_nb_kld(mean, dispersion));
            return 0;
        }
        if (*orc) return check(which, seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
