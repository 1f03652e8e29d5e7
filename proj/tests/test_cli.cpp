#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "higgs/experiment.hpp"
#include "higgs/io.hpp"
#include "test_util.hpp"

using namespace higgs;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("higgs_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Shell {
    int code;
    std::string err;
};
Shell run_lab(const std::string& args, const fs::path& dir) {
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string(HIGGS_LAB_EXE) + " " + args + " > " + (dir / "stdout.txt").string() +
                            " 2> " + err.string();
    const int st = std::system(cmd.c_str());
    return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, slurp(err)};
}

}  // namespace

TEST_CASE("config text: comments, overrides and canonical round trip") {
    const ExperimentConfig cfg = parse_config(
        "# a comment\n"
        "grid.N = 48   # trailing comment\n"
        "\n"
        "flow.integrator = euler\n"
        "initial = split_plus_perturbation\n"
        "seed = 18446744073709551615\n");
    CHECK(cfg.N == 48);
    CHECK(cfg.flow.integrator == Integrator::euler);
    CHECK(cfg.initial == InitialKind::split_plus_perturbation);
    CHECK(cfg.seed == 18446744073709551615ULL);
    const ExperimentConfig back = parse_config(cfg.canonical());
    CHECK(back.canonical() == cfg.canonical());
    CHECK(back.hash() == cfg.hash());
    CHECK(cfg.hash() != ExperimentConfig{}.hash());
    CHECK(kConfigKeys.size() > 20);
}

TEST_CASE("config errors name the line") {
    try {
        parse_config("grid.N = 32\ngrid.M = 3\n");
        FAIL("unknown key accepted");
    } catch (const ConfigError& e) {
        const std::string w = e.what();
        CHECK(w.find("line 2") != std::string::npos);
        CHECK(w.find("grid.M") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("grid.N = many\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("grid.N = 4\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("flow.integrator = leapfrog\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("just text\n"), ConfigError);
}

TEST_CASE("config hash is 64-bit FNV-1a") {
    // published test vectors
    CHECK(config_hash("") == "cbf29ce484222325");
    CHECK(config_hash("a") == "af63dc4c8601ec8c");
    CHECK(config_hash("foobar") == "85944171f73967e8");
}

TEST_CASE("snapshots round-trip bit for bit") {
    std::mt19937_64 rng(4);
    const TorusGrid g(10, 1.7);
    const HiggsPair p(testutil::random_field(g, 3, FormDegree::dzbar, rng),
                      testutil::random_field(g, 3, FormDegree::dz, rng), true);
    const fs::path dir = scratch_dir("snap");
    write_snapshot(dir / "s.bin", p, 0.125, {{"note", "x"}});
    const SnapshotData d = read_snapshot(dir / "s.bin");
    CHECK(d.time == 0.125);
    CHECK(d.pair.fixed_det);
    CHECK(d.pair.grid() == g);
    CHECK(d.pair.a2.degree() == FormDegree::dzbar);
    CHECK(d.pair.phi.degree() == FormDegree::dz);
    CHECK(d.pair.a2.data() == p.a2.data());
    CHECK(d.pair.phi.data() == p.phi.data());
    CHECK(d.header.at("meta").at("note") == "x");
    CHECK(d.header.at("format_version") == kSnapshotFormat);

    // truncated file
    const std::string bytes = slurp(dir / "s.bin");
    std::ofstream(dir / "t.bin", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
    CHECK_THROWS(read_snapshot(dir / "t.bin"));
}

TEST_CASE("observable CSV layout") {
    CHECK(csv_header(2) == "time,ymh,qh,grad_norm,sup_mu,higgs_residual,re_tr1,im_tr1,re_tr2,im_tr2,H1,H2");
    Observables o;
    o.time = 1.5;
    o.trace_powers = {cplx(1, 2), cplx(3, 4)};
    o.convex = {0.5, 0.0};
    const std::string row = csv_row(o);
    CHECK(std::count(row.begin(), row.end(), ',') == 11);
}

TEST_CASE("run from a zero snapshot: converged at t = 0, files written, deterministic") {
    const fs::path dir = scratch_dir("run");
    write_snapshot(dir / "zero.bin", HiggsPair(TorusGrid(8, 1.0), 2, true), 0.0);
    ExperimentConfig cfg;
    cfg.N = 8;
    cfg.initial = InitialKind::from_snapshot;
    cfg.snapshot_in = (dir / "zero.bin").string();
    const RunResult r = run_experiment(cfg, dir / "out");
    CHECK(r.traj.converged);
    CHECK(r.traj.final_time == 0.0);
    CHECK(r.limit_type == hn_type_from_slopes({0, 0}));
    CHECK(r.ok());
    CHECK(fs::exists(dir / "out" / "observables.csv"));
    CHECK(fs::exists(dir / "out" / "metadata.json"));
    const auto rep = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
    CHECK(rep.at("config_hash") == cfg.hash());
    CHECK(rep.at("code_version") == kCodeVersion);
    const RunResult again = run_experiment(cfg, dir / "out2");
    CHECK(slurp(dir / "out" / "observables.csv") == slurp(dir / "out2" / "observables.csv"));
}

TEST_CASE("random initial data is a deterministic function of the seed") {
    ExperimentConfig cfg;
    cfg.seed = 12;
    const InitialReport a = make_initial(cfg), b = make_initial(cfg);
    CHECK(a.pair.a2.data() == b.pair.a2.data());
    CHECK(a.pair.phi.data() == b.pair.phi.data());
    CHECK(a.residual < 1e-8);
    cfg.seed = 13;
    CHECK(make_initial(cfg).pair.phi.data() != a.pair.phi.data());
}

TEST_CASE("higgs-lab: exit codes and structured errors") {
    const fs::path dir = scratch_dir("exe");
    const Shell bad = run_lab("run --set grid.M=3 --out " + dir.string(), dir);
    CHECK(bad.code == 2);
    const auto j = nlohmann::json::parse(bad.err);
    CHECK(j.at("error") == "config");
    CHECK(j.at("code_version") == kCodeVersion);

    const Shell missing = run_lab("classify " + (dir / "nope.bin").string() + " --out " + dir.string(), dir);
    CHECK(missing.code == 2);

    CHECK(run_lab("sandbox --trials 5 --check --out " + dir.string(), dir).code == 0);
    CHECK(fs::exists(dir / "sandbox.json"));
    CHECK(run_lab("keys", dir).code == 0);
    CHECK(slurp(dir / "stdout.txt").find("grid.N = 32") != std::string::npos);
    CHECK(run_lab("nonsense", dir).code != 0);
}
