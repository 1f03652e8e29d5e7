// Acceptance run: one PASS/FAIL line per criterion, indented detail lines
// below it. Arguments select criteria by number (default: all). Exit status
// is 1 when any selected criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "higgs/critical.hpp"
#include "higgs/experiment.hpp"
#include "higgs/io.hpp"
#include "higgs/mmflow.hpp"
#include "test_util.hpp"

using namespace higgs;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void verdict(int id, bool pass, const std::string& text) {
    std::printf("%s  C%d %s\n", pass ? "PASS" : "FAIL", id, text.c_str());
    if (!pass) ++failures;
}

template <class... A>
void info(const char* fmt, A... a) {
    std::printf("      ");
    std::printf(fmt, a...);
    std::printf("\n");
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// Desk-scale base configuration: rank 2, N = 32, L = 1.
ExperimentConfig base_config() {
    ExperimentConfig cfg;
    cfg.flow.keep_snapshots = false;
    return cfg;
}

// One random-seed lattice run, split into the first 10 time units (the
// conservation window) and the continuation up to T = 200.
struct SeedRun {
    std::uint64_t seed = 0;
    HiggsPair p0, limit;
    Trajectory window;      // t in [0, 10]
    Trajectory full;        // rows of both legs
    double window_seconds = 0.0;
    bool converged = false;
    double final_time = 0.0;
    double final_grad = 0.0;
    CriticalReport critical;
    HNType initial_type, limit_type;
    Order order = Order::incomparable;
    double convex_increase = 0.0;
    std::optional<LojaFit> loja;
};

// Relative H_k increase between consecutive rows; the floor of the scale is
// tied to the initial size of the H_k since H_r vanishes for trace-free M.
double convex_increase(const std::vector<Observables>& rows) {
    double worst = 0.0, floor = 1e-300;
    for (double h : rows.front().convex) floor = std::max(floor, 1e-9 * std::abs(h));
    for (std::size_t i = 1; i < rows.size(); ++i)
        for (std::size_t k = 0; k < rows[i].convex.size(); ++k) {
            const double a = rows[i - 1].convex[k], b = rows[i].convex[k];
            worst = std::max(worst, (b - a) / std::max(std::abs(a), floor));
        }
    return worst;
}

void classify(SeedRun& r, const HNType& initial_type, const FlowConfig& fc) {
    r.final_time = r.full.final_time;
    r.converged = r.full.converged;
    r.final_grad = r.full.rows.back().grad_norm;
    r.critical = is_critical(r.limit, 1e-5);
    r.limit_type = hn_type(r.critical, r.limit.grid().area(), r.limit.rank());
    r.initial_type = initial_type;
    r.order = hn_partial_order(r.limit_type, r.initial_type);
    r.convex_increase = convex_increase(r.full.rows);
    if (r.converged && r.full.rows.size() >= 3) r.loja = loja_fit(r.full, fc.tol_grad);
}

SeedRun flow_from(const ExperimentConfig& cfg, const HiggsPair& p0, const HNType& initial_type) {
    SeedRun r;
    r.seed = cfg.seed;
    r.p0 = p0;
    FlowConfig fc = cfg.flow;
    fc.T_max = std::min(10.0, cfg.flow.T_max);
    const auto t0 = Clock::now();
    r.window = run_gradient_flow(p0, fc);
    r.window_seconds = seconds_since(t0);
    r.full = r.window;
    if (!r.window.converged && cfg.flow.T_max > fc.T_max) {
        fc.T_max = cfg.flow.T_max - r.window.final_time;
        Trajectory rest = run_gradient_flow(r.window.final_pair, fc);
        const double off = r.window.final_time;
        for (std::size_t i = 1; i < rest.rows.size(); ++i) {
            Observables o = rest.rows[i];
            o.time += off;
            r.full.rows.push_back(std::move(o));
        }
        r.full.converged = rest.converged;
        r.full.steps += rest.steps;
        r.full.final_time = off + rest.final_time;
        r.full.final_pair = rest.final_pair;
        r.full.ymh_violations += rest.ymh_violations;
        r.full.worst_sup_increase = std::max(r.full.worst_sup_increase, rest.worst_sup_increase);
    }
    r.limit = r.full.final_pair;
    classify(r, initial_type, cfg.flow);
    return r;
}

SeedRun random_run(std::uint64_t seed) {
    ExperimentConfig cfg = base_config();
    cfg.seed = seed;
    const InitialReport init = make_initial(cfg);
    return flow_from(cfg, init.pair, hn_type_from_slopes({0, 0}));
}

std::map<std::uint64_t, SeedRun> seed_cache;

const SeedRun& cached_random_run(std::uint64_t seed) {
    auto it = seed_cache.find(seed);
    if (it == seed_cache.end()) {
        const auto t0 = Clock::now();
        it = seed_cache.emplace(seed, random_run(seed)).first;
        const SeedRun& r = it->second;
        info("seed %2llu: t %.3g  grad %.2g  limit %s  (%.0f s)", (unsigned long long)seed, r.final_time,
             r.final_grad, r.limit_type.str().c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    return it->second;
}

// ---------------------------------------------------------------- criteria

void criterion1() {
    const SandboxSuite s = run_sandbox_suite(1, 100);
    bool ok = s.ok() && s.seconds < 10.0;
    for (const auto& c : s.checks)
        info("%s %-46s %.3g (limit %.3g)", c.pass ? "ok  " : "FAIL", c.name.c_str(), c.value, c.limit);
    verdict(1, ok, "sandbox exactness suite, 100 random inputs per identity, " + fmt("%.2f s", s.seconds));
}

void criterion2() {
    const auto t0 = Clock::now();
    ExperimentConfig cfg = base_config();
    const HiggsPair p = make_initial(cfg).pair;
    const Tangent g = grad_ymh(p);
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    const double eps = 1e-5;
    for (int k = 0; k < 50; ++k) {
        const Tangent v(testutil::smooth_field(p.grid(), 2, FormDegree::dzbar, rng, 1.0, 3),
                        testutil::smooth_field(p.grid(), 2, FormDegree::dz, rng, 1.0, 3));
        const double fd = (ymh(displaced(p, eps, v)) - ymh(displaced(p, -eps, v))) / (2.0 * eps);
        const double an = kYmhSlope * (l2_inner(g.a2, v.a2) + l2_inner(g.phi, v.phi));
        worst = std::max(worst, std::abs(fd - an) / std::abs(an));
    }
    const double secs = seconds_since(t0);
    verdict(2, worst <= 1e-5 && secs < 30.0,
            "gradient vs central differences, 50 directions, eps 1e-5: max relative error " + fmt("%.2e", worst) +
                " (limit 1e-5), " + fmt("%.1f s", secs));
}

void criterion3() {
    double secs = 0.0, sup = 0.0, res = 0.0, tr = 0.0;
    long viol = 0;
    for (std::uint64_t s = 1; s <= 20; ++s) {
        const SeedRun& r = cached_random_run(s);
        secs += r.window_seconds;
        viol += r.window.ymh_violations;
        sup = std::max(sup, r.window.worst_sup_increase);
        res = std::max(res, r.window.max_residual_increase);
        for (std::size_t k = 0; k < r.window.trace_drift.size(); ++k) tr = std::max(tr, r.window.trace_drift[k]);
    }
    // integrator order: tr phi^2 drift over a short window at frozen dt and dt/2,
    // with dt large enough that truncation dominates roundoff
    ExperimentConfig cfg = base_config();
    cfg.seed = 3;
    const HiggsPair p = make_initial(cfg).pair;
    double drift[2];
    for (int h = 0; h < 2; ++h) {
        FlowConfig fc;
        fc.c_cfl = 2.4 / (1 << h);
        fc.freeze_dt = true;
        fc.T_max = 0.05;
        fc.tol_grad = 0.0;
        fc.keep_snapshots = false;
        drift[h] = run_gradient_flow(p, fc).trace_drift[1];
    }
    const double ratio = drift[0] / drift[1];
    info("ymh relative increases above 1e-12: %ld steps", viol);
    info("sup|M| worst relative increase %.2e (limit 1e-8)", sup);
    info("higgs_residual drift %.2e (limit 1e-8)", res);
    info("tr phi^k pointwise drift %.2e (limit 1e-8)", tr);
    info("tr phi^2 drift at frozen dt, c_cfl 2.4 / 1.2: %.2e / %.2e, ratio %.2f (expect 16, accept 12..20)", drift[0],
         drift[1], ratio);
    info("wall time of the 20 windows %.0f s (limit 600)", secs);
    const bool ok = viol == 0 && sup <= 1e-8 && res <= 1e-8 && tr <= 1e-8 && ratio >= 12.0 && ratio <= 20.0 && secs < 600.0;
    verdict(3, ok, "monotonicity and conservation, 20 seeds, N 32, T 10");
}

void criterion4() {
    int conv = 0, crit = 0;
    std::string missed;
    for (std::uint64_t s = 1; s <= 20; ++s) {
        const SeedRun& r = cached_random_run(s);
        if (r.converged) ++conv;
        else missed += " " + std::to_string(s) + "(grad " + fmt("%.1e", r.final_grad) + ")";
        if (r.converged && r.critical.critical) ++crit;
    }
    if (!missed.empty()) info("not converged by T = 200:%s", missed.c_str());
    verdict(4, conv >= 18 && crit == conv,
            std::to_string(conv) + "/20 seeds reach grad <= 1e-6 by T = 200 (need 18); " + std::to_string(crit) +
                " of them pass is_critical at 1e-5");
}

void criterion5() {
    ExperimentConfig cfg = base_config();
    const HiggsPair p = make_initial(cfg).pair;
    CompareConfig cc;
    cc.T = 1.0;
    cc.check_root_choice = true;
    const EquivalenceReport a = compare_flows(p, cc);
    cc.c_cfl *= 0.5;
    cc.check_root_choice = false;
    const EquivalenceReport b = compare_flows(p, cc);
    const double ratio = a.max_discrepancy / b.max_discrepancy;
    info("discrepancy at dt %.3g: %.3e (ymh %.2e, eigen %.2e, trace %.2e)", a.dt, a.max_discrepancy,
         a.ymh_discrepancy, a.eigen_discrepancy, a.trace_discrepancy);
    info("discrepancy at dt %.3g: %.3e, ratio %.2f (halving expects 2, accept >= 1.8)", b.dt, b.max_discrepancy, ratio);
    info("square-root choice change of the composed pair %.2e (limit 1e-6)", a.root_choice_change);
    const bool ok = !a.partial && !b.partial && a.max_discrepancy <= 1e-3 && ratio >= 1.8 && a.root_choice_change <= 1e-6;
    verdict(5, ok, "gradient flow vs gauge-fixed heat flow at T = 1");
}

struct SplitRuns {
    std::vector<SeedRun> runs;
    SettleReport settled;
};
std::optional<SplitRuns> split_cache;

const SplitRuns& split_runs() {
    if (split_cache) return *split_cache;
    SplitRuns out;
    ExperimentConfig cfg = base_config();
    cfg.initial = InitialKind::split_plus_perturbation;
    const auto t0 = Clock::now();
    out.settled = settled_split(cfg);
    info("split point settled to grad %.3g at t %.3g (%s, %.0f s)", out.settled.grad_norm, out.settled.time,
         out.settled.converged ? "converged" : "not converged", seconds_since(t0));
    const fs::path tmp = fs::temp_directory_path() / "higgs_acceptance_split.bin";
    write_snapshot(tmp, out.settled.pair, out.settled.time);
    cfg.split_settled = tmp.string();
    const HNType mu = hn_type_from_slopes({double(cfg.split.degree), -double(cfg.split.degree)});
    for (int k = 0; k < 10; ++k) {
        cfg.seed = 1001 + k;
        const auto t1 = Clock::now();
        const InitialReport init = make_initial(cfg);
        out.runs.push_back(flow_from(cfg, init.pair, mu));
        const SeedRun& r = out.runs.back();
        info("split run %d: t %.3g  grad %.2g  limit %s  (%.0f s)", k + 1, r.final_time, r.final_grad,
             r.limit_type.str().c_str(), seconds_since(t1));
        std::fflush(stdout);
    }
    split_cache = std::move(out);
    return *split_cache;
}

void criterion6() {
    std::map<std::string, int> freq;
    int bad_order = 0, unsettled = 0, var_bad = 0, convex_bad = 0, total = 0;
    double worst_convex = 0.0;
    auto tally = [&](const SeedRun& r) {
        ++total;
        freq[r.limit_type.str() + (r.limit_type.settled ? "" : "?")]++;
        if (!(r.order == Order::greater || r.order == Order::equal)) ++bad_order;
        if (!r.limit_type.settled) ++unsettled;
        else
            for (double v : r.critical.spatial_variance)
                if (v > 1e-3) {
                    ++var_bad;
                    break;
                }
        worst_convex = std::max(worst_convex, r.convex_increase);
        if (r.convex_increase > 1e-6) ++convex_bad;
    };
    for (std::uint64_t s = 1; s <= 50; ++s) tally(cached_random_run(s));
    for (const auto& r : split_runs().runs) tally(r);
    std::string f;
    for (const auto& [k, n] : freq) f += " " + k + " x" + std::to_string(n);
    info("limit types:%s", f.c_str());
    info("limit type below initial stratum: %d of %d runs", bad_order, total);
    info("unsettled limits %d, settled limits with eigenvalue variance > 1e-3: %d", unsettled, var_bad);
    info("worst H_k relative increase %.2e (limit 1e-6), runs above: %d", worst_convex, convex_bad);
    verdict(6, bad_order == 0 && unsettled == 0 && var_bad == 0 && convex_bad == 0,
            "stratification, 50 random seeds + 10 split-plus-perturbation runs");
}

void criterion7() {
    // degrees at settled nonminimal limits from every run made so far
    int nonminimal = 0, degree_bad = 0;
    auto visit = [&](const SeedRun& r) {
        if (!r.limit_type.settled) return;
        bool minimal = true;
        for (long n : r.limit_type.num) minimal = minimal && n == 0;
        if (minimal) return;
        ++nonminimal;
        const GradedReport g = graded_object_check(r.p0, r.limit);
        double sum = 0.0;
        bool near_int = true;
        for (double d : g.block_degrees) {
            sum += std::lround(d);
            near_int = near_int && std::abs(d - std::lround(d)) <= 0.05;
        }
        if (!near_int || sum != 0.0) ++degree_bad;
    };
    for (std::uint64_t s = 1; s <= 50; ++s) visit(cached_random_run(s));
    const SplitRuns& sr = split_runs();
    for (const auto& r : sr.runs) visit(r);

    // calibration reference: kappa = 1/pi on the settled split point
    const MatrixField pi = eigenprojector(sr.settled.pair, 1);
    const double d_top = chern_weil_degree(pi, sr.settled.pair);
    const double d_bot = chern_weil_degree(MatrixField::identity(pi.grid(), 2) - pi, sr.settled.pair);
    info("kappa = %.6f; degrees on the settled split point: %.4f, %.4f (targets 1, -1)", kKappa, d_top, d_bot);
    info("settled nonminimal limits: %d, with degrees off integers or not summing to 0: %d", nonminimal, degree_bad);

    int returned = 0;
    double worst_off = 0.0, worst_trace = 0.0;
    for (const auto& r : sr.runs) {
        const GradedReport g = graded_object_check(r.p0, r.limit);
        worst_trace = std::max(worst_trace, g.trace_drift);
        if (r.limit_type == r.initial_type && r.limit_type.settled) {
            ++returned;
            worst_off = std::max(worst_off, g.off_block);
        }
    }
    info("split runs returning to the split type: %d/10; worst off-block L2 %.2e (limit 1e-4); tr phi^k drift %.2e "
         "(limit 1e-6)",
         returned, worst_off, worst_trace);
    const bool ok = nonminimal > 0 && degree_bad == 0 && returned == 10 && worst_off <= 1e-4 && worst_trace <= 1e-6;
    verdict(7, ok, "Chern-Weil degrees at nonminimal limits and return of split runs");
}

void criterion8() {
    int conv = 0, fitted = 0, good = 0;
    double tmin = 1e9, tmax = -1e9, r2min = 1.0;
    for (std::uint64_t s = 1; s <= 20; ++s) {
        const SeedRun& r = cached_random_run(s);
        if (!r.converged) continue;
        ++conv;
        if (!r.loja || !r.loja->conclusive) continue;
        ++fitted;
        const LojaFit& f = *r.loja;
        tmin = std::min(tmin, f.theta);
        tmax = std::max(tmax, f.theta);
        r2min = std::min(r2min, f.r2);
        if (f.theta > 0.0 && f.theta < 0.55 && f.r2 >= 0.95) ++good;
    }
    info("lattice: %d converged runs, %d conclusive fits, theta in [%.3f, %.3f], min r2 %.4f; within bounds: %d", conv,
         fitted, tmin, tmax, r2min, good);

    using namespace higgs::sandbox;
    std::mt19937_64 rng(8);
    int sb_good = 0, sb_total = 0;
    double sb_min = 1e9, sb_max = -1e9;
    for (const UnitaryRep& rep : {u1_weights({1, 1}), torus(2), u2_on_two_copies()}) {
        for (int k = 0; k < 3; ++k) {
            SandboxConfig sc;
            sc.T = 40.0;
            sc.dt = 1e-2;
            const SandboxLoja s = sandbox_loja(rep, random_point(rep.n, rng), sc, 0.0);
            ++sb_total;
            sb_min = std::min(sb_min, s.fit.theta);
            sb_max = std::max(sb_max, s.fit.theta);
            if (s.fit.conclusive && std::abs(s.fit.theta - 0.5) <= 0.02) ++sb_good;
        }
    }
    info("sandbox minima: %d/%d fits with theta = 0.5 +- 0.02 (range %.4f..%.4f)", sb_good, sb_total, sb_min, sb_max);
    verdict(8, conv > 0 && good == conv && sb_good == sb_total, "Lojasiewicz exponents");
}

void criterion9() {
    // derivative stencils on an analytic field
    auto stencil_error = [](int n) {
        const TorusGrid g(n, 1.0);
        const double k = 2.0 * testutil::kPi;
        auto f = testutil::sample(g, 1, FormDegree::zero, [&](double x, double y) {
            return Mat::Constant(1, 1, std::exp(cplx(std::sin(k * x), std::cos(k * y))));
        });
        auto exact = testutil::sample(g, 1, FormDegree::dzbar, [&](double x, double y) {
            const cplx v = std::exp(cplx(std::sin(k * x), std::cos(k * y)));
            // dbar = (dx + i dy)/2
            return Mat::Constant(1, 1, 0.5 * (k * std::cos(k * x) + cplx(0, 1) * cplx(0, -k * std::sin(k * y))) * v);
        });
        return testutil::max_site_diff(dbar(f), exact);
    };
    const double e32 = stencil_error(32), e64 = stencil_error(64);
    info("dbar stencil error: N 32 %.3e, N 64 %.3e, ratio %.2f", e32, e64, e32 / e64);

    // flow equivalence on the same continuum data at two resolutions
    double disc[2];
    for (int h = 0; h < 2; ++h) {
        ExperimentConfig cfg = base_config();
        cfg.N = 32 << h;
        const HiggsPair p = make_initial(cfg).pair;
        CompareConfig cc;
        cc.T = 0.1;
        cc.probes = 4;
        disc[h] = compare_flows(p, cc).max_discrepancy;
    }
    info("flow-equivalence discrepancy at T = 0.1: N 32 %.3e, N 64 %.3e, ratio %.2f", disc[0], disc[1], disc[0] / disc[1]);
    verdict(9, e32 / e64 >= 3.5 && disc[0] / disc[1] >= 3.5, "discretization order when N doubles (need >= 3.5)");
}

}  // namespace

int main(int argc, char** argv) {
    std::setvbuf(stdout, nullptr, _IONBF, 0);
    std::set<int> pick;
    for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
    const std::vector<std::function<void()>> all = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                                    criterion6, criterion7, criterion8, criterion9};
    const auto t0 = Clock::now();
    for (int k = 1; k <= 9; ++k) {
        if (!pick.empty() && !pick.count(k)) continue;
        try {
            all[k - 1]();
        } catch (const std::exception& e) {
            verdict(k, false, std::string("threw: ") + e.what());
        }
    }
    std::printf("acceptance: %d failing, %.0f s\n", failures, seconds_since(t0));
    return failures == 0 ? 0 : 1;
}
