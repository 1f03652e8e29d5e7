#include <doctest.h>

#include <cmath>

#include "higgs/flow.hpp"
#include "higgs/initial.hpp"
#include "test_util.hpp"

using namespace higgs;
using namespace testutil;

namespace {

HiggsPair holomorphic_pair(int n, std::uint64_t seed) {
    return make_random_smooth(TorusGrid(n, 1.0), 2, true, RandomSmoothSpec{}, seed).pair;
}

}  // namespace

TEST_CASE("CFL step formula") {
    FlowConfig cfg;
    cfg.c_cfl = 0.3;
    const TorusGrid g(20, 2.0);
    CHECK(cfl_dt(cfg, g, 4.0) == doctest::Approx(0.3 * 0.01 / 5.0));
}

TEST_CASE("one step lowers YMH and conserves pointwise traces of phi powers") {
    const HiggsPair p = holomorphic_pair(32, 4);
    const double dt = cfl_dt(FlowConfig{}, p.grid(), sup_norm(moment1(p).field()));
    const HiggsPair q = step_gradient_flow(p, dt);
    CHECK(ymh(q) < ymh(p));
    // first-order decrease: |kYmhSlope| dt |grad|^2
    const double expect = -kYmhSlope * dt * grad_norm_sq(grad_ymh(p));
    CHECK((ymh(p) - ymh(q)) == doctest::Approx(expect).epsilon(0.05));
    const auto tp = trace_power_fields(p.phi), tq = trace_power_fields(q.phi);
    for (std::size_t k = 0; k < tp.size(); ++k) CHECK(max_site_diff(tp[k], tq[k]) < 1e-12);
}

TEST_CASE("trace powers and eigenvalue fields agree with per-site Eigen") {
    std::mt19937_64 rng(1);
    const TorusGrid g(8, 1.0);
    const MatrixField phi = random_field(g, 3, FormDegree::dz, rng);
    const auto tp = trace_power_fields(phi);
    REQUIRE(tp.size() == 3);
    double e = 0.0;
    for (std::size_t s = 0; s < phi.sites(); ++s) {
        const Mat P = phi.at(s);
        Mat pw = P;
        for (int k = 0; k < 3; ++k) {
            e = std::max(e, std::abs(tp[k](s, 0, 0) - pw.trace()));
            pw = pw * P;
        }
    }
    CHECK(e < 1e-11);

    const MatrixField m = skew_part(random_field(g, 3, FormDegree::zero, rng));
    const auto ev = eigenvalue_fields(m);
    double e2 = 0.0;
    for (std::size_t s = 0; s < m.sites(); ++s) {
        const Mat H = cplx(0.0, 1.0) * m.at(s);
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (H + H.adjoint()));
        for (int k = 0; k < 3; ++k) e2 = std::max(e2, std::abs(ev[s * 3 + k] - es.eigenvalues()(2 - k)));
        CHECK(ev[s * 3] >= ev[s * 3 + 1]);
    }
    CHECK(e2 < 1e-12);
}

TEST_CASE("the zero pair is already converged") {
    const HiggsPair p(TorusGrid(8, 1.0), 2, true);
    const Trajectory tr = run_gradient_flow(p, FlowConfig{});
    CHECK(tr.converged);
    CHECK(tr.steps == 0);
    CHECK(tr.final_time == 0.0);
    REQUIRE(tr.rows.size() >= 1);
    CHECK(tr.rows.front().ymh == 0.0);
}

TEST_CASE("short flow: monotone YMH and sup|M|, energy balance, conserved traces") {
    const HiggsPair p = holomorphic_pair(32, 9);
    FlowConfig cfg;
    cfg.T_max = 0.04;
    cfg.keep_snapshots = true;
    cfg.probe_times = {0.01, 0.02};
    const Trajectory tr = run_gradient_flow(p, cfg);
    CHECK(tr.ymh_violations == 0);
    CHECK(tr.worst_sup_increase <= 1e-8);
    CHECK(tr.final_time == doctest::Approx(0.04));
    for (double d : tr.trace_drift) CHECK(d < 1e-10);
    const double drop = ymh(p) - ymh(tr.final_pair);
    CHECK(tr.dissipated == doctest::Approx(drop).epsilon(1e-5));
    bool saw = false;
    for (const auto& s : tr.snapshots)
        if (std::abs(s.time - 0.02) < 1e-14) saw = true;
    CHECK(saw);
    const Observables o = observe(tr.final_pair, tr.final_time);
    CHECK(o.ymh == doctest::Approx(tr.rows.back().ymh));
    for (std::size_t i = 1; i < tr.rows.size(); ++i) CHECK(tr.rows[i].time > tr.rows[i - 1].time);
}

TEST_CASE("Simpson metric: identity metric reproduces the base moment") {
    const HiggsPair p = holomorphic_pair(32, 2);
    const HermitianMetric m(p);
    CHECK(max_site_diff(metric_moment(m), moment1(p).field()) < 1e-12);
    CHECK(std::abs(heat_lambda(moment1(p).field())) < 1e-12);
    const Reconstruction rc = reconstruct_pair(m);
    CHECK(max_site_diff(rc.pair.a2, p.a2) < 1e-12);
    CHECK(max_site_diff(rc.pair.phi, p.phi) < 1e-12);
}

TEST_CASE("inverse square root of positive Hermitian fields") {
    std::mt19937_64 rng(17);
    const TorusGrid g(8, 1.0);
    MatrixField h(g, 3);
    for (std::size_t s = 0; s < h.sites(); ++s) h.set(s, random_hermitian_positive(3, rng));
    const MatrixField gi = inverse_sqrt(h);
    double e = 0.0;
    for (std::size_t s = 0; s < h.sites(); ++s) {
        const Mat G = gi.at(s);
        e = std::max(e, (G - G.adjoint()).norm());
        e = std::max(e, (G * h.at(s) * G - Mat::Identity(3, 3)).norm());
    }
    CHECK(e < 1e-12);
}

TEST_CASE("gauge-fixing ODE with a constant diagonal generator") {
    const TorusGrid g(8, 1.0);
    const double th1 = 0.7, th2 = -1.3, lam = 0.4;
    Mat a = Mat::Zero(2, 2);
    a(0, 0) = cplx(0.0, th1);
    a(1, 1) = cplx(0.0, th2);
    const int steps = 50;
    const double dt = 0.02;
    std::vector<MatrixField> alpha(steps + 1, MatrixField::constant(g, a));
    std::vector<cplx> lambda(steps + 1, cplx(lam));
    const GaugeFixResult r = gauge_fix_ode(alpha, lambda, dt);
    REQUIRE(r.S.size() == std::size_t(steps + 1));
    // S(t) = diag(exp(i (theta_k - lambda) t))
    const double t = steps * dt;
    const Mat S = r.S.back().at(5);
    // RK4 global error ~ steps (theta dt)^5 / 120
    CHECK(std::abs(S(0, 0) - std::exp(cplx(0.0, (th1 - lam) * t))) < 1e-7);
    CHECK(std::abs(S(1, 1) - std::exp(cplx(0.0, (th2 - lam) * t))) < 1e-7);
    CHECK(std::abs(S(0, 1)) < 1e-14);
}

TEST_CASE("gradient flow and composed heat flow agree over a short horizon") {
    const HiggsPair p = holomorphic_pair(32, 5);
    CompareConfig cfg;
    cfg.T = 0.02;
    cfg.probes = 2;
    const EquivalenceReport rep = compare_flows(p, cfg);
    CHECK_FALSE(rep.partial);
    CHECK(rep.max_discrepancy < 1e-3);
    CHECK(rep.unitarity_drift < 1e-8);
    REQUIRE(rep.times.size() >= 2);
}
