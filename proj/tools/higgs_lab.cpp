// higgs-lab: command line front end for the experiment pipelines.
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "higgs/experiment.hpp"
#include "higgs/io.hpp"

using namespace higgs;

namespace {

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out = "out";
    bool check = false;
    std::vector<std::string> sets;
};

void add_common(CLI::App* sub, Common& c, bool with_config = true) {
    if (with_config) {
        sub->add_option("--config", c.config, "key/value config file");
        sub->add_option("--set", c.sets, "override one key, e.g. --set grid.N=64")->take_all();
        sub->add_option("--seed", c.seed, "seed (overrides the config)")->each([&](const std::string&) { c.seed_set = true; });
    }
    sub->add_option("--out", c.out, "output directory");
    sub->add_flag("--check", c.check, "exit nonzero when a property check fails");
}

ExperimentConfig resolve(const Common& c) {
    ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
    for (const auto& kv : c.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (c.seed_set) cfg.seed = c.seed;
    return cfg;
}

void print_checks(const std::vector<Check>& checks) {
    for (const auto& ch : checks)
        std::printf("%s  %-48s %.3g (limit %.3g)%s%s\n", ch.pass ? "PASS" : "FAIL", ch.name.c_str(), ch.value,
                    ch.limit, ch.detail.empty() ? "" : "  ", ch.detail.c_str());
}

int verdict(const Common& c, bool ok) { return (c.check && !ok) ? 1 : 0; }

int fail(const char* kind, const std::exception& e) {
    nlohmann::json j = {{"error", kind}, {"message", e.what()}, {"code_version", kCodeVersion}};
    std::cerr << j.dump() << '\n';
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Higgs bundle gradient-flow laboratory"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kCodeVersion);

    Common run_c, sweep_c, cmp_c, cls_c, loja_c, sb_c;
    std::string snapshot_path, csv_path;
    double loja_tol = 1e-6;
    int sandbox_trials = 100;

    auto* run = app.add_subcommand("run", "flow one initial pair; writes CSV, snapshots and report.json");
    add_common(run, run_c);
    auto* sweep = app.add_subcommand("sweep", "random seeds plus split runs; writes stratification.csv");
    add_common(sweep, sweep_c);
    auto* cmp = app.add_subcommand("compare", "gradient flow against the gauge-fixed metric heat flow");
    add_common(cmp, cmp_c);
    auto* cls = app.add_subcommand("classify", "critical-point test and type of a snapshot");
    add_common(cls, cls_c, false);
    cls->add_option("snapshot", snapshot_path, "snapshot file")->required();
    auto* loja = app.add_subcommand("loja", "Lojasiewicz fit of an observables CSV");
    add_common(loja, loja_c, false);
    loja->add_option("csv", csv_path, "observables CSV")->required();
    loja->add_option("--grad-tol", loja_tol, "gradient floor of the fit window");
    auto* sb = app.add_subcommand("sandbox", "finite-dimensional identity suite");
    add_common(sb, sb_c, false);
    sb->add_option("--seed", sb_c.seed, "seed");
    sb->add_option("--trials", sandbox_trials, "random inputs per identity");
    auto* keys = app.add_subcommand("keys", "list the config keys and their defaults");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*keys) {
            const ExperimentConfig def;
            std::istringstream canon(def.canonical());
            std::string line;
            for (const auto& k : kConfigKeys) {
                std::getline(canon, line);
                std::printf("%-40s # %s\n", line.c_str(), k.doc);
            }
            return 0;
        }
        if (*run) {
            const ExperimentConfig cfg = resolve(run_c);
            const RunResult r = run_experiment(cfg, run_c.out);
            std::printf("converged %s  t %.6g  steps %ld  grad %.3g  limit type %s  (%s initial %s)\n",
                        r.traj.converged ? "yes" : "no", r.traj.final_time, r.traj.steps,
                        r.traj.rows.back().grad_norm, r.limit_type.str().c_str(), to_string(r.order),
                        r.initial_type.str().c_str());
            print_checks(r.checks);
            return verdict(run_c, r.ok());
        }
        if (*sweep) {
            const ExperimentConfig cfg = resolve(sweep_c);
            const SweepResult r = run_sweep(cfg, sweep_c.out);
            for (const auto& [type, n] : r.frequencies) std::printf("%-28s %d\n", type.c_str(), n);
            print_checks(r.checks);
            return verdict(sweep_c, r.ok());
        }
        if (*cmp) {
            const ExperimentConfig cfg = resolve(cmp_c);
            const CompareResult r = run_compare(cfg, cmp_c.out);
            std::printf("dt %.3g  steps %ld  pair discrepancy %.3g\n", r.report.dt, r.report.steps,
                        r.report.pair_discrepancy);
            print_checks(r.checks);
            return verdict(cmp_c, r.ok());
        }
        if (*cls) {
            const nlohmann::json j = classify_snapshot(snapshot_path);
            write_json(std::filesystem::path(cls_c.out) / "classify.json", j);
            std::cout << j.dump(2) << '\n';
            return verdict(cls_c, j.at("critical").get<bool>() && j.at("type").at("settled").get<bool>());
        }
        if (*loja) {
            const LojaFit f = loja_from_csv(csv_path, loja_tol);
            const nlohmann::json j = {{"command", "loja"}, {"code_version", kCodeVersion}, {"csv", csv_path},
                                      {"theta", f.theta}, {"r2", f.r2}, {"c", f.c}, {"decades", f.decades},
                                      {"first_row", f.first}, {"last_row", f.last},
                                      {"conclusive", f.conclusive}, {"note", f.note}};
            write_json(std::filesystem::path(loja_c.out) / "loja.json", j);
            std::cout << j.dump(2) << '\n';
            const bool ok = f.conclusive && f.theta > 0.0 && f.theta < 0.55 && f.r2 >= 0.95;
            return verdict(loja_c, ok);
        }
        if (*sb) {
            const SandboxSuite s = run_sandbox_suite(sb_c.seed, sandbox_trials);
            print_checks(s.checks);
            nlohmann::json j = {{"command", "sandbox"}, {"code_version", kCodeVersion}, {"seed", sb_c.seed},
                                {"seconds", s.seconds}, {"ok", s.ok()}};
            j["checks"] = nlohmann::json::array();
            for (const auto& c : s.checks) j["checks"].push_back(to_json(c));
            write_json(std::filesystem::path(sb_c.out) / "sandbox.json", j);
            return verdict(sb_c, s.ok());
        }
    } catch (const ConfigError& e) {
        return fail("config", e);
    } catch (const NumericalError& e) {
        return fail("numerical", e);
    } catch (const std::exception& e) {
        return fail("runtime", e);
    }
    return 0;
}
