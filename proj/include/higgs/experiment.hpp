// Experiment configuration and the pipelines behind the higgs-lab subcommands.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "higgs/critical.hpp"
#include "higgs/flow.hpp"
#include "higgs/initial.hpp"

namespace higgs {

enum class InitialKind { random_smooth, split_plus_perturbation, from_snapshot };

// Key/value text, one "key = value" per line, '#' starts a comment. The keys
// and their defaults are listed in kConfigKeys; any other key is an error.
struct ExperimentConfig {
    int N = 32;
    double L = 1.0;
    int rank = 2;
    bool fixed_det = true;
    std::uint64_t seed = 1;

    InitialKind initial = InitialKind::random_smooth;
    RandomSmoothSpec random;
    SplitSpec split;
    std::string split_settled;  // snapshot of a settled split point; built when empty
    double settle_tol = 1e-7;
    double settle_T = 10.0;
    std::string snapshot_in;    // for from_snapshot

    FlowConfig flow;
    CompareConfig compare;
    int sweep_seeds = 50;
    int sweep_split_runs = 10;

    std::string csv_path = "observables.csv";
    std::string snapshot_dir = "snapshots";
    std::string report_path = "report.json";

    ExperimentConfig();
    // canonical "key = value" text of every key, in a fixed order
    std::string canonical() const;
    std::string hash() const;
};

struct ConfigKey {
    const char* name;
    const char* doc;
};
extern const std::vector<ConfigKey> kConfigKeys;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// Initial pair plus construction diagnostics. Split runs settle (or load) the
// split point first.
InitialReport make_initial(const ExperimentConfig& cfg);
// The settled split critical point for cfg (rank 2).
SettleReport settled_split(const ExperimentConfig& cfg);

// A named property check: value compared against a limit.
struct Check {
    std::string name;
    double value = 0.0;
    double limit = 0.0;
    bool pass = false;
    std::string detail;
};
nlohmann::json to_json(const Check& c);

struct RunResult {
    InitialReport initial;
    Trajectory traj;
    CriticalReport critical;
    HNType initial_type, limit_type;
    Order order = Order::incomparable;
    LojaFit loja;
    std::vector<Check> checks;
    bool ok() const;
};

// Flow from the configured initial data; writes CSV, snapshots and a report
// under out_dir when it is non-empty.
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct SweepRow {
    std::uint64_t seed;
    std::string kind;
    HNType initial_type, limit_type;
    Order order;
    bool converged;
    double final_time;
    double grad_norm;
};
struct SweepResult {
    std::vector<SweepRow> rows;
    std::map<std::string, int> frequencies;  // limit type -> count
    std::vector<Check> checks;
    bool ok() const;
};
SweepResult run_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct CompareResult {
    EquivalenceReport report;
    std::vector<Check> checks;
    bool ok() const;
};
CompareResult run_compare(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// Classification of a stored snapshot.
nlohmann::json classify_snapshot(const std::filesystem::path& path);

// Lojasiewicz fit of the ymh and grad_norm columns of an observables CSV.
LojaFit loja_from_csv(const std::filesystem::path& path, double grad_tol);

// The sandbox identity suite on random inputs.
struct SandboxSuite {
    std::vector<Check> checks;
    double seconds = 0.0;
    bool ok() const;
};
SandboxSuite run_sandbox_suite(std::uint64_t seed, int trials = 100);

}  // namespace higgs
