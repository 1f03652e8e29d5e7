#include "higgs/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "higgs/io.hpp"
#include "higgs/mmflow.hpp"

namespace higgs {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || !std::isfinite(x)) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return x;
}

long long to_int(const std::string& key, const std::string& v) {
    long long x = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t x = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

// shortest text that reads back to the same double
std::string fmt(double x) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

const char* kind_name(InitialKind k) {
    switch (k) {
        case InitialKind::random_smooth: return "random_smooth";
        case InitialKind::split_plus_perturbation: return "split_plus_perturbation";
        case InitialKind::from_snapshot: return "from_snapshot";
    }
    return "?";
}

struct KeyDef {
    const char* name;
    const char* doc;
    std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

#define NUM_KEY(NAME, DOC, FIELD)                                                                  \
    KeyDef {                                                                                       \
        NAME, DOC, [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.FIELD = to_double(k, v); }, \
            [](const ExperimentConfig& c) { return fmt(c.FIELD); }                                 \
    }
#define INT_KEY(NAME, DOC, FIELD)                                                                  \
    KeyDef {                                                                                       \
        NAME, DOC, [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.FIELD = decltype(c.FIELD)(to_int(k, v)); }, \
            [](const ExperimentConfig& c) { return std::to_string(c.FIELD); }                      \
    }
#define BOOL_KEY(NAME, DOC, FIELD)                                                                 \
    KeyDef {                                                                                       \
        NAME, DOC, [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.FIELD = to_bool(k, v); }, \
            [](const ExperimentConfig& c) { return std::string(c.FIELD ? "true" : "false"); }      \
    }
#define STR_KEY(NAME, DOC, FIELD)                                                                  \
    KeyDef {                                                                                       \
        NAME, DOC, [](ExperimentConfig& c, const std::string&, const std::string& v) { c.FIELD = v; }, \
            [](const ExperimentConfig& c) { return c.FIELD; }                                      \
    }

const std::vector<KeyDef>& key_table() {
    static const std::vector<KeyDef> table = {
        INT_KEY("grid.N", "sites per axis (>= 8)", N),
        NUM_KEY("grid.L", "torus side length", L),
        INT_KEY("rank", "bundle rank", rank),
        BOOL_KEY("fixed_det", "trace-free A'' and phi", fixed_det),
        KeyDef{"seed", "64-bit seed",
               [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); },
               [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
        KeyDef{"initial", "random_smooth | split_plus_perturbation | from_snapshot",
               [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                   if (v == "random_smooth") c.initial = InitialKind::random_smooth;
                   else if (v == "split_plus_perturbation") c.initial = InitialKind::split_plus_perturbation;
                   else if (v == "from_snapshot") c.initial = InitialKind::from_snapshot;
                   else throw ConfigError(k + ": unknown initial data kind '" + v + "'");
               },
               [](const ExperimentConfig& c) { return std::string(kind_name(c.initial)); }},
        NUM_KEY("random.k0", "spectral cutoff of exp(-|k|^2/k0^2)", random.k0),
        NUM_KEY("random.amplitude", "RMS of A''", random.amplitude),
        NUM_KEY("random.phi_amplitude", "RMS of phi after projection", random.phi_amplitude),
        INT_KEY("split.degree", "block degrees (d, -d)", split.degree),
        NUM_KEY("split.eigen", "phi = diag(c, -c) in the split frame", split.eigen),
        NUM_KEY("split.extension", "L2 size of the upper-triangular phi perturbation", split.extension),
        STR_KEY("split.settled", "snapshot of a settled split point (built when empty)", split_settled),
        NUM_KEY("split.settle_tol", "gradient tolerance when settling the split point", settle_tol),
        NUM_KEY("split.settle_T", "time limit when settling the split point", settle_T),
        STR_KEY("snapshot.path", "input snapshot for from_snapshot", snapshot_in),
        NUM_KEY("flow.c_cfl", "dt = c_cfl h^2 / (1 + sup|M|)", flow.c_cfl),
        NUM_KEY("flow.T_max", "flow time limit", flow.T_max),
        KeyDef{"flow.integrator", "rk4 | euler",
               [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                   if (v == "rk4") c.flow.integrator = Integrator::rk4;
                   else if (v == "euler") c.flow.integrator = Integrator::euler;
                   else throw ConfigError(k + ": unknown integrator '" + v + "'");
               },
               [](const ExperimentConfig& c) {
                   return std::string(c.flow.integrator == Integrator::rk4 ? "rk4" : "euler");
               }},
        NUM_KEY("flow.tol_grad", "stop when |grad| <= tol_grad", flow.tol_grad),
        INT_KEY("flow.snapshot_every", "steps between rows before t = 1", flow.snapshot_every),
        NUM_KEY("flow.geometric_ratio", "row spacing ratio after t = 1", flow.geometric_ratio),
        BOOL_KEY("flow.freeze_dt", "keep the initial dt", flow.freeze_dt),
        BOOL_KEY("flow.keep_snapshots", "keep snapshots in memory and on disk", flow.keep_snapshots),
        INT_KEY("flow.project_every", "steps between projections of phi onto ker D (0: never)", flow.project_every),
        NUM_KEY("compare.T", "comparison horizon", compare.T),
        NUM_KEY("compare.c_cfl", "CFL constant of the comparison", compare.c_cfl),
        INT_KEY("compare.probes", "number of comparison times", compare.probes),
        BOOL_KEY("compare.root_choice", "also run the square-root-choice check", compare.check_root_choice),
        INT_KEY("sweep.seeds", "random seeds in a sweep", sweep_seeds),
        INT_KEY("sweep.split_runs", "split-plus-perturbation runs in a sweep", sweep_split_runs),
        STR_KEY("output.csv", "observables CSV, relative to --out", csv_path),
        STR_KEY("output.snapshot_dir", "snapshot directory, relative to --out", snapshot_dir),
        STR_KEY("output.report", "JSON report, relative to --out", report_path),
    };
    return table;
}

#undef NUM_KEY
#undef INT_KEY
#undef BOOL_KEY
#undef STR_KEY

std::vector<ConfigKey> build_key_list() {
    std::vector<ConfigKey> out;
    for (const auto& k : key_table()) out.push_back({k.name, k.doc});
    return out;
}

}  // namespace

const std::vector<ConfigKey> kConfigKeys = build_key_list();

ExperimentConfig::ExperimentConfig() {
    flow.T_max = 200.0;
    compare.probes = 10;
}

std::string ExperimentConfig::canonical() const {
    std::ostringstream os;
    for (const auto& k : key_table()) os << k.name << " = " << k.get(*this) << '\n';
    return os.str();
}

std::string ExperimentConfig::hash() const { return config_hash(canonical()); }

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& k : key_table())
        if (key == k.name) {
            k.set(cfg, key, value);
            return;
        }
    throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        try {
            set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (cfg.N < 8) throw ConfigError("grid.N must be at least 8");
    if (!(cfg.L > 0.0)) throw ConfigError("grid.L must be positive");
    if (cfg.rank < 1) throw ConfigError("rank must be at least 1");
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

SettleReport settled_split(const ExperimentConfig& cfg) {
    if (!cfg.split_settled.empty() && std::filesystem::exists(cfg.split_settled)) {
        SettleReport rep;
        const SnapshotData d = read_snapshot(cfg.split_settled);
        rep.pair = d.pair;
        rep.time = d.time;
        rep.grad_norm = std::sqrt(grad_norm_sq(grad_ymh(d.pair)));
        rep.converged = rep.grad_norm <= cfg.settle_tol;
        return rep;
    }
    if (cfg.rank != 2) throw ConfigError("split_plus_perturbation needs rank 2");
    const TorusGrid grid(cfg.N, cfg.L);
    SettleConfig sc;
    sc.tol_grad = cfg.settle_tol;
    sc.T_max = cfg.settle_T;
    sc.c_cfl = cfg.flow.c_cfl;
    return settle_split(split_point_analytic(grid, cfg.split), sc);
}

InitialReport make_initial(const ExperimentConfig& cfg) {
    switch (cfg.initial) {
        case InitialKind::random_smooth:
            return make_random_smooth(TorusGrid(cfg.N, cfg.L), cfg.rank, cfg.fixed_det, cfg.random, cfg.seed);
        case InitialKind::split_plus_perturbation: {
            const SettleReport s = settled_split(cfg);
            return make_split_plus_perturbation(s.pair, 1, cfg.split, cfg.seed);
        }
        case InitialKind::from_snapshot: {
            InitialReport rep;
            rep.pair = read_snapshot(cfg.snapshot_in).pair;
            rep.residual = higgs_residual(rep.pair);
            rep.seed_used = cfg.seed;
            return rep;
        }
    }
    throw ConfigError("unknown initial data kind");
}

nlohmann::json to_json(const Check& c) {
    return {{"name", c.name}, {"value", c.value}, {"limit", c.limit}, {"pass", c.pass}, {"detail", c.detail}};
}

namespace {

Check at_most(std::string name, double value, double limit, std::string detail = "") {
    return {std::move(name), value, limit, std::isfinite(value) && value <= limit, std::move(detail)};
}

bool all_pass(const std::vector<Check>& cs) {
    return std::all_of(cs.begin(), cs.end(), [](const Check& c) { return c.pass; });
}

nlohmann::json checks_json(const std::vector<Check>& cs) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& c : cs) a.push_back(to_json(c));
    return a;
}

nlohmann::json type_json(const HNType& t) {
    return {{"type", t.str()}, {"slopes", t.values()}, {"settled", t.settled}, {"note", t.note}};
}

nlohmann::json loja_json(const LojaFit& f) {
    return {{"theta", f.theta}, {"r2", f.r2}, {"c", f.c}, {"decades", f.decades},
            {"conclusive", f.conclusive}, {"theta_shift_plus", f.theta_shift_plus},
            {"theta_shift_minus", f.theta_shift_minus}, {"note", f.note}};
}

nlohmann::json base_report(const ExperimentConfig& cfg, const char* command) {
    return {{"command", command}, {"code_version", kCodeVersion}, {"config_hash", cfg.hash()},
            {"seed", cfg.seed}, {"config", cfg.canonical()}};
}

void write_metadata(const std::filesystem::path& out_dir, const ExperimentConfig& cfg) {
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    write_json(out_dir / "metadata.json",
               {{"unix_time", std::chrono::duration_cast<std::chrono::seconds>(now).count()},
                {"config_hash", cfg.hash()}, {"code_version", kCodeVersion}});
}

// H_k along the recorded rows, relative increase between consecutive rows.
// H_r vanishes identically for trace-free fields, so the floor of the
// relative scale is tied to the initial size of the H_k.
double worst_convex_increase(const Trajectory& tr) {
    double worst = 0.0, floor = 1e-300;
    if (!tr.rows.empty())
        for (double h : tr.rows.front().convex) floor = std::max(floor, 1e-9 * std::abs(h));
    for (std::size_t i = 1; i < tr.rows.size(); ++i)
        for (std::size_t k = 0; k < tr.rows[i].convex.size(); ++k) {
            const double a = tr.rows[i - 1].convex[k], b = tr.rows[i].convex[k];
            const double scale = std::max(std::abs(a), floor);
            worst = std::max(worst, (b - a) / scale);
        }
    return worst;
}

HNType known_initial_type(const ExperimentConfig& cfg) {
    if (cfg.initial == InitialKind::split_plus_perturbation)
        return hn_type_from_slopes({double(cfg.split.degree), -double(cfg.split.degree)});
    // generic degree-zero data is semistable
    return hn_type_from_slopes(std::vector<double>(cfg.rank, 0.0));
}

}  // namespace

bool RunResult::ok() const { return all_pass(checks); }
bool SweepResult::ok() const { return all_pass(checks); }
bool CompareResult::ok() const { return all_pass(checks); }
bool SandboxSuite::ok() const { return all_pass(checks); }

RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    RunResult res;
    res.initial = make_initial(cfg);
    res.traj = run_gradient_flow(res.initial.pair, cfg.flow);
    const HiggsPair& limit = res.traj.final_pair;
    res.critical = is_critical(limit, 1e-5);
    res.limit_type = hn_type(res.critical, limit.grid().area(), limit.rank());
    res.initial_type = known_initial_type(cfg);
    res.order = hn_partial_order(res.limit_type, res.initial_type);
    if (res.traj.rows.size() >= 3) res.loja = loja_fit(res.traj, cfg.flow.tol_grad);

    const Trajectory& tr = res.traj;
    res.checks.push_back(at_most("initial higgs_residual", res.initial.residual, 1e-8));
    res.checks.push_back(at_most("ymh increases above 1e-12 (steps)", double(tr.ymh_violations), 0.0));
    res.checks.push_back(at_most("sup|M| relative increase", tr.worst_sup_increase, 1e-8));
    res.checks.push_back(at_most("higgs_residual drift", tr.max_residual_increase, 1e-8));
    for (std::size_t k = 0; k < tr.trace_drift.size() && k < 2; ++k)
        res.checks.push_back(at_most("tr phi^" + std::to_string(k + 1) + " pointwise drift", tr.trace_drift[k], 1e-8));
    res.checks.push_back(at_most("H_k relative increase", worst_convex_increase(tr), 1e-6));
    res.checks.push_back(
        {"limit type >= initial type", 0.0, 0.0,
         res.order == Order::greater || res.order == Order::equal,
         res.limit_type.str() + " vs " + res.initial_type.str() + ": " + to_string(res.order)});

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_csv(out_dir / cfg.csv_path, tr.rows, limit.rank());
        if (cfg.flow.keep_snapshots) {
            int idx = 0;
            for (const auto& s : tr.snapshots) {
                std::ostringstream name;
                name << "snap_" << std::setw(5) << std::setfill('0') << idx++ << ".bin";
                write_snapshot(out_dir / cfg.snapshot_dir / name.str(), s.pair, s.time,
                               {{"seed", cfg.seed}, {"config_hash", cfg.hash()}});
            }
        }
        nlohmann::json j = base_report(cfg, "run");
        j["initial"] = {{"kind", kind_name(cfg.initial)}, {"residual", res.initial.residual},
                        {"kernel_dim", res.initial.kernel_dim}, {"retries", res.initial.retries},
                        {"seed_used", res.initial.seed_used}};
        j["flow"] = {{"converged", tr.converged}, {"steps", tr.steps}, {"final_time", tr.final_time},
                     {"dt_min", tr.dt_min}, {"dt_max", tr.dt_max},
                     {"worst_ymh_increase", tr.worst_ymh_increase}, {"ymh_violations", tr.ymh_violations},
                     {"worst_sup_increase", tr.worst_sup_increase}, {"trace_drift", tr.trace_drift},
                     {"max_residual_increase", tr.max_residual_increase},
                     {"dissipated", tr.dissipated}, {"projections", tr.projections},
                     {"final_grad_norm", tr.rows.back().grad_norm}, {"final_ymh", tr.rows.back().ymh}};
        j["limit"] = {{"critical", res.critical.critical}, {"grad_norm", res.critical.grad_norm},
                      {"residual_dA", res.critical.residual_dA}, {"residual_phi", res.critical.residual_phi},
                      {"eigen_mean", res.critical.eigen_mean},
                      {"spatial_variance", res.critical.spatial_variance}};
        j["initial_type"] = type_json(res.initial_type);
        j["limit_type"] = type_json(res.limit_type);
        j["order"] = to_string(res.order);
        j["loja"] = loja_json(res.loja);
        j["checks"] = checks_json(res.checks);
        j["ok"] = res.ok();
        write_json(out_dir / cfg.report_path, j);
        write_metadata(out_dir, cfg);
    }
    return res;
}

SweepResult run_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    SweepResult res;
    ExperimentConfig c = cfg;
    c.flow.keep_snapshots = false;
    auto add = [&](const ExperimentConfig& rc, const char* kind) {
        const RunResult r = run_experiment(rc, {});
        SweepRow row{rc.seed, kind, r.initial_type, r.limit_type, r.order, r.traj.converged,
                     r.traj.final_time, r.traj.rows.back().grad_norm};
        res.frequencies[r.limit_type.str() + (r.limit_type.settled ? "" : " (unsettled)")]++;
        res.rows.push_back(row);
        for (const auto& ch : r.checks) {
            Check cc = ch;
            cc.name = std::string(kind) + " seed " + std::to_string(rc.seed) + ": " + ch.name;
            if (!cc.pass) res.checks.push_back(cc);
        }
    };
    c.initial = InitialKind::random_smooth;
    for (int k = 0; k < cfg.sweep_seeds; ++k) {
        c.seed = cfg.seed + std::uint64_t(k);
        add(c, "random_smooth");
    }
    if (cfg.sweep_split_runs > 0) {
        ExperimentConfig s = c;
        s.initial = InitialKind::split_plus_perturbation;
        s.rank = 2;
        // settle once and share it between runs
        const SettleReport settled = settled_split(s);
        const std::filesystem::path tmp = out_dir.empty() ? std::filesystem::temp_directory_path() / ("higgs_split_" + s.hash() + ".bin")
                                                          : out_dir / "split_settled.bin";
        write_snapshot(tmp, settled.pair, settled.time, {{"grad_norm", settled.grad_norm}});
        s.split_settled = tmp.string();
        for (int k = 0; k < cfg.sweep_split_runs; ++k) {
            s.seed = cfg.seed + 1000 + std::uint64_t(k);
            add(s, "split_plus_perturbation");
        }
    }
    // every limit must be classified and dominate its initial type
    int unsettled = 0, misordered = 0;
    for (const auto& r : res.rows) {
        if (!r.limit_type.settled) ++unsettled;
        // recheck the order independently of the per-run verdict
        const Order o = hn_partial_order(r.limit_type, r.initial_type);
        if (!(o == Order::greater || o == Order::equal)) ++misordered;
    }
    res.checks.push_back(at_most("unsettled limits", unsettled, 0));
    res.checks.push_back(at_most("limits violating the order property", misordered, 0));

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream t(out_dir / "stratification.csv");
        t << "seed,kind,initial_type,limit_type,order,converged,final_time,grad_norm\n";
        for (const auto& r : res.rows)
            t << r.seed << ',' << r.kind << ",\"" << r.initial_type.str() << "\",\"" << r.limit_type.str()
              << "\"," << to_string(r.order) << ',' << (r.converged ? "true" : "false") << ','
              << fmt(r.final_time) << ',' << fmt(r.grad_norm) << '\n';
        nlohmann::json j = base_report(cfg, "sweep");
        j["frequencies"] = res.frequencies;
        j["runs"] = res.rows.size();
        j["checks"] = checks_json(res.checks);
        j["ok"] = res.ok();
        write_json(out_dir / cfg.report_path, j);
        write_metadata(out_dir, cfg);
    }
    return res;
}

CompareResult run_compare(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    CompareResult res;
    const InitialReport init = make_initial(cfg);
    res.report = compare_flows(init.pair, cfg.compare);
    const EquivalenceReport& r = res.report;
    res.checks.push_back({"comparison completed", 0.0, 0.0, !r.partial, r.note});
    res.checks.push_back(at_most("gauge-invariant discrepancy", r.max_discrepancy, 1e-3));
    if (cfg.compare.check_root_choice)
        res.checks.push_back(at_most("root-choice change of the composed pair", r.root_choice_change, 1e-6));
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream t(out_dir / cfg.csv_path);
        t << "time,ymh_direct,ymh_composed\n";
        for (std::size_t k = 0; k < r.times.size(); ++k)
            t << fmt(r.times[k]) << ',' << fmt(r.ymh_direct[k]) << ',' << fmt(r.ymh_composed[k]) << '\n';
        nlohmann::json j = base_report(cfg, "compare");
        j["dt"] = r.dt;
        j["steps"] = r.steps;
        j["ymh_discrepancy"] = r.ymh_discrepancy;
        j["eigen_discrepancy"] = r.eigen_discrepancy;
        j["trace_discrepancy"] = r.trace_discrepancy;
        j["max_discrepancy"] = r.max_discrepancy;
        j["pair_discrepancy"] = r.pair_discrepancy;
        j["unitarity_drift"] = r.unitarity_drift;
        j["root_choice_change"] = r.root_choice_change;
        j["partial"] = r.partial;
        j["note"] = r.note;
        j["checks"] = checks_json(res.checks);
        j["ok"] = res.ok();
        write_json(out_dir / cfg.report_path, j);
        write_metadata(out_dir, cfg);
    }
    return res;
}

nlohmann::json classify_snapshot(const std::filesystem::path& path) {
    const SnapshotData d = read_snapshot(path);
    const HiggsPair& p = d.pair;
    const CriticalReport cr = is_critical(p, 1e-5);
    const HNType t = hn_type(cr, p.grid().area(), p.rank());
    nlohmann::json j = {{"command", "classify"}, {"code_version", kCodeVersion}, {"snapshot", path.string()},
                        {"time", d.time}, {"critical", cr.critical}, {"grad_norm", cr.grad_norm},
                        {"eigen_mean", cr.eigen_mean}, {"spatial_variance", cr.spatial_variance},
                        {"type", type_json(t)}};
    nlohmann::json degrees = nlohmann::json::array();
    if (t.settled) {
        const MatrixField m = moment1(p).field();
        for (int k = 1; k < p.rank(); ++k)
            if (t.num[k] != t.num[k - 1]) degrees.push_back({{"k", k}, {"degree", chern_weil_degree(eigenprojector(m, k, 1e-6), p)}});
    }
    j["degrees"] = degrees;
    return j;
}

LojaFit loja_from_csv(const std::filesystem::path& path, double grad_tol) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("loja: cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
    }
    const auto iy = std::find(cols.begin(), cols.end(), "ymh") - cols.begin();
    const auto ig = std::find(cols.begin(), cols.end(), "grad_norm") - cols.begin();
    if (iy >= long(cols.size()) || ig >= long(cols.size()))
        throw std::runtime_error("loja: CSV lacks ymh or grad_norm columns");
    EnergySeries s;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string c;
        std::vector<std::string> f;
        while (std::getline(ss, c, ',')) f.push_back(c);
        if (long(f.size()) <= std::max(iy, ig)) continue;
        s.energy.push_back(std::stod(f[iy]));
        s.grad.push_back(std::stod(f[ig]));
    }
    return loja_fit(s, grad_tol);
}

SandboxSuite run_sandbox_suite(std::uint64_t seed, int trials) {
    using namespace sandbox;
    const auto t0 = std::chrono::steady_clock::now();
    SandboxSuite out;
    std::mt19937_64 rng(seed);
    const UnitaryRep rep = u2_on_two_copies();
    double id = 0, ip = 0, ic = 0, pp = 0, def = 0, equiv = 0;
    for (int k = 0; k < trials; ++k) {
        const HKPoint x = random_point(rep.n, rng), X = random_point(rep.n, rng);
        const Mat u = random_lie(rep, rng);
        id = std::max(id, identity_adjoint(rep, x, u).max());
        const ProductResiduals pr = product_formulas(rep, x, u, X);
        ip = std::max(ip, pr.i_product);
        ic = std::max(ic, pr.i_commute);
        pp = std::max(pp, pr.plain_product);
        def = std::max(def, moment_defining_residual(rep, x, X));
        equiv = std::max(equiv, equivariance_residual(rep, x, random_group(rep, rng)));
    }
    out.checks.push_back(at_most("rho* S rho(u) + [mu_S, u]", id, 1e-10));
    out.checks.push_back(at_most("product formula with I drho", ip, 1e-10));
    out.checks.push_back(at_most("I drho(u)X - drho(u)(IX)", ic, 1e-10));
    out.checks.push_back(at_most("product formula with drho", pp, 1e-10));
    out.checks.push_back(at_most("moment-map defining property (FD)", def, 1e-8));
    out.checks.push_back(at_most("moment-map equivariance", equiv, 1e-10));

    // Hessian: symmetric and equal to second differences
    double sym = 0, fd = 0;
    for (int k = 0; k < 5; ++k) {
        const HKPoint x = random_point(rep.n, rng);
        const RealMat H = hessian_qh(rep, x);
        sym = std::max(sym, (H - H.transpose()).cwiseAbs().maxCoeff());
        const RealMat F = hessian_qh_fd(rep, x);
        fd = std::max(fd, (H - F).cwiseAbs().maxCoeff() / std::max(1.0, H.cwiseAbs().maxCoeff()));
    }
    out.checks.push_back(at_most("Hessian symmetry", sym, 1e-10));
    out.checks.push_back(at_most("Hessian vs second differences (relative)", fd, 1e-6));

    // splittings at a free point of mu^-1(0): U(1) on C^2 with weights (1, 1)
    const UnitaryRep u1 = u1_weights({1, 1});
    HKPoint z = HKPoint::zero(2);
    z.v(0) = 1.0;
    z.w(1) = 1.0;
    const KernelReport kr = kernel_decompositions(u1, z);
    double worst_angle = 0.0;
    bool dims_ok = true;
    for (const auto& c : kr.checks) {
        worst_angle = std::max(worst_angle, c.angle);
        dims_ok = dims_ok && c.ok;
    }
    out.checks.push_back({"subspace splittings (max principal angle)", worst_angle, 1e-7,
                          dims_ok && worst_angle <= 1e-7, ""});

    // Coulomb slice Newton on 20 trials
    int converged = 0;
    double worst_ratio = 0.0;
    for (int k = 0; k < 20; ++k) {
        const Mat u0 = random_lie(u1, rng, 0.05);
        HKPoint y = group_action(lie_exp(u0), z);
        y += random_point(2, rng, 0.01);
        try {
            const CoulombResult cr = coulomb_newton(u1, z, y);
            if (cr.converged) ++converged;
            for (double r : cr.ratios) worst_ratio = std::max(worst_ratio, r);
        } catch (const NumericalError&) {
        }
    }
    out.checks.push_back({"Coulomb Newton converged (of 20)", double(converged), 20.0, converged == 20, ""});
    out.checks.push_back(at_most("Newton ratio e_{k+1}/e_k^2", worst_ratio, 10.0));
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.checks.push_back(at_most("runtime (s)", out.seconds, 10.0));
    return out;
}

}  // namespace higgs
