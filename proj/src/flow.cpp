#include "higgs/flow.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

namespace higgs {

namespace {

constexpr cplx I1(0.0, 1.0);

}  // namespace

double cfl_dt(const FlowConfig& cfg, const TorusGrid& grid, double sup_mu) {
    const double h = grid.spacing();
    return cfg.c_cfl * h * h / (1.0 + sup_mu);
}

double grad_norm_sq(const Tangent& v) { return l2_inner(v.a2, v.a2) + l2_inner(v.phi, v.phi); }

namespace {

HiggsPair rk4_step(const HiggsPair& p, double dt, const Tangent& k1) {
    const Tangent k2 = grad_ymh(displaced(p, 0.5 * dt, k1));
    const Tangent k3 = grad_ymh(displaced(p, 0.5 * dt, k2));
    const Tangent k4 = grad_ymh(displaced(p, dt, k3));
    HiggsPair q = p;
    const double w = dt / 6.0;
    q.a2.axpy(w, k1.a2).axpy(2 * w, k2.a2).axpy(2 * w, k3.a2).axpy(w, k4.a2);
    q.phi.axpy(w, k1.phi).axpy(2 * w, k2.phi).axpy(2 * w, k3.phi).axpy(w, k4.phi);
    return q;
}

HiggsPair advance(const HiggsPair& p, double dt, const Tangent& k1, Integrator integ) {
    if (integ == Integrator::euler) return displaced(p, dt, k1);
    return rk4_step(p, dt, k1);
}

}  // namespace

HiggsPair step_gradient_flow(const HiggsPair& p, double dt, Integrator integ) {
    return advance(p, dt, grad_ymh(p), integ);
}

std::vector<MatrixField> trace_power_fields(const MatrixField& phi) {
    const int r = phi.rank();
    std::vector<MatrixField> out;
    for (int k = 0; k < r; ++k) out.emplace_back(phi.grid(), 1, FormDegree::zero);
    for (std::size_t s = 0; s < phi.sites(); ++s) {
        const Mat x = phi.at(s);
        Mat pw = x;
        for (int k = 0; k < r; ++k) {
            if (k > 0) pw = pw * x;
            out[k].site(s)[0] = pw.trace();
        }
    }
    return out;
}

std::vector<double> eigenvalue_fields(const MatrixField& moment) {
    const int r = moment.rank();
    std::vector<double> out(moment.sites() * r);
    Eigen::SelfAdjointEigenSolver<Mat> es;
    for (std::size_t s = 0; s < moment.sites(); ++s) {
        es.compute(I1 * moment.at(s), Eigen::EigenvaluesOnly);
        const auto& ev = es.eigenvalues();  // ascending
        for (int k = 0; k < r; ++k) out[s * r + k] = ev(r - 1 - k);
    }
    return out;
}

Observables observe(const HiggsPair& p, double t) {
    Observables o;
    o.time = t;
    MatrixField m;
    const Tangent v = grad_ymh(p, m);
    o.ymh = l2_inner(m, m);
    const MatrixField c = momentC(p);
    o.qh = o.ymh + l2_inner(c, c);
    o.grad_norm = std::sqrt(grad_norm_sq(v));
    o.sup_mu = sup_norm(m);
    o.higgs_residual = higgs_residual(p);
    const double area = p.grid().cell_area();
    for (const auto& f : trace_power_fields(p.phi)) o.trace_powers.push_back(integrate_trace(f));
    const int r = p.rank();
    const auto ev = eigenvalue_fields(m);
    o.convex.assign(r, 0.0);
    for (std::size_t s = 0; s < p.grid().sites(); ++s) {
        double acc = 0.0;
        for (int k = 0; k < r; ++k) {
            acc += ev[s * r + k];
            o.convex[k] += acc * area;
        }
    }
    return o;
}

Trajectory run_gradient_flow(const HiggsPair& p0, const FlowConfig& cfg) {
    if (!(cfg.T_max >= 0.0) || !(cfg.c_cfl > 0.0)) throw std::invalid_argument("run_gradient_flow: bad config");
    Trajectory tr;
    HiggsPair p = p0;
    double t = 0.0;
    MatrixField m;
    Tangent v = grad_ymh(p, m);
    double E = l2_inner(m, m);
    double g2 = grad_norm_sq(v);
    double sup = sup_norm(m);
    const double dt0 = cfl_dt(cfg, p.grid(), sup);

    const auto trace0 = trace_power_fields(p.phi);
    tr.trace_drift.assign(p.rank(), 0.0);
    const double res0 = higgs_residual(p);

    auto record = [&](bool snapshot) {
        tr.rows.push_back(observe(p, t));
        const auto tk = trace_power_fields(p.phi);
        for (int k = 0; k < p.rank(); ++k)
            for (std::size_t s = 0; s < p.grid().sites(); ++s)
                tr.trace_drift[k] = std::max(tr.trace_drift[k], std::abs(tk[k].site(s)[0] - trace0[k].site(s)[0]));
        tr.max_residual_increase = std::max(tr.max_residual_increase, tr.rows.back().higgs_residual - res0);
        if (snapshot && cfg.keep_snapshots) tr.snapshots.push_back({t, p});
    };

    record(true);
    std::vector<double> probes = cfg.probe_times;
    std::sort(probes.begin(), probes.end());
    std::size_t next_probe = 0;
    while (next_probe < probes.size() && probes[next_probe] <= 0.0) ++next_probe;

    if (std::sqrt(g2) <= cfg.tol_grad) {
        tr.converged = true;
        tr.final_pair = p;
        return tr;
    }

    double next_geo = 1.0;
    tr.dt_min = INFINITY;
    while (t < cfg.T_max) {
        double dt = cfg.freeze_dt ? dt0 : cfl_dt(cfg, p.grid(), sup);
        bool at_probe = false;
        if (next_probe < probes.size() && t + dt >= probes[next_probe] - 1e-14) {
            dt = probes[next_probe] - t;
            at_probe = true;
        }
        if (t + dt > cfg.T_max) dt = cfg.T_max - t;
        if (dt <= 0.0) {
            ++next_probe;
            continue;
        }
        HiggsPair q = advance(p, dt, v, cfg.integrator);
        if (cfg.project_every > 0 && (tr.steps + 1) % cfg.project_every == 0 && q.phi.all_finite()) {
            MatrixField proj = project_holomorphic(q.a2, q.phi, 1e-10);
            if (q.fixed_det) proj = trace_free(proj);
            tr.max_projection_change = std::max(tr.max_projection_change, l2_norm(proj - q.phi));
            q.phi = std::move(proj);
            ++tr.projections;
        }
        if (!q.a2.all_finite() || !q.phi.all_finite() ||
            std::max(q.a2.max_abs(), q.phi.max_abs()) > cfg.blowup) {
            std::ostringstream os;
            os << "gradient flow blew up at t=" << t << " (dt=" << dt << ")";
            throw FlowBlowup(os.str(), p, t);
        }
        MatrixField mq;
        Tangent vq = grad_ymh(q, mq);
        const double Eq = l2_inner(mq, mq);
        const double g2q = grad_norm_sq(vq);
        const double supq = sup_norm(mq);
        if (E > 0.0) {
            const double inc = (Eq - E) / E;
            tr.worst_ymh_increase = std::max(tr.worst_ymh_increase, inc);
            if (inc > 1e-12) ++tr.ymh_violations;
        }
        if (sup > 0.0) tr.worst_sup_increase = std::max(tr.worst_sup_increase, (supq - sup) / sup);
        tr.dissipated += std::abs(kYmhSlope) * 0.5 * dt * (g2 + g2q);
        tr.dt_min = std::min(tr.dt_min, dt);
        tr.dt_max = std::max(tr.dt_max, dt);

        p = std::move(q);
        v = std::move(vq);
        m = std::move(mq);
        E = Eq;
        g2 = g2q;
        sup = supq;
        t += dt;
        ++tr.steps;
        if (at_probe) {
            t = probes[next_probe];
            ++next_probe;
        }

        if (std::sqrt(g2) <= cfg.tol_grad) {
            tr.converged = true;
            record(true);
            break;
        }
        const bool geo = t >= next_geo;
        if (geo) {
            while (next_geo <= t) next_geo *= cfg.geometric_ratio;
        }
        if (at_probe || geo) {
            record(true);
        } else if (t < 1.0 && tr.steps % std::max(1, cfg.snapshot_every) == 0) {
            record(false);
        } else if (t >= cfg.T_max) {
            record(true);
        }
    }
    if (tr.rows.back().time != t) record(true);
    tr.final_time = t;
    tr.final_pair = p;
    return tr;
}

HermitianMetric::HermitianMetric(HiggsPair b)
    : h(MatrixField::identity(b.grid(), b.rank())), base(std::move(b)) {}

HermitianMetric::HermitianMetric(MatrixField hh, HiggsPair b) : h(std::move(hh)), base(std::move(b)) {
    require_degree(h, FormDegree::zero, "HermitianMetric");
    require_same_shape(h, base.a2, "HermitianMetric");
}

namespace {

template <int R>
void metric_moment_kernel(const HermitianMetric& mt, MatrixField& out) {
    using M = SiteMat<R>;
    const HiggsPair& b = mt.base;
    const int r = mt.h.rank();
    const int n = mt.h.grid().n();
    const TorusGrid& grid = mt.h.grid();
    const double inv2h = 1.0 / (2.0 * grid.spacing());
    const cplx cx = 0.5 * inv2h, cy = cplx(0.0, 0.5) * inv2h;
    auto at = [&](const MatrixField& f, int i, int j) { return ConstSiteMap<R>(f.site(grid.site(i, j)), r, r); };
    // B = h^-1 (d'h + [A0', h]) with A0' = -a0^dagger
    MatrixField B(grid, r, FormDegree::zero);
    MatrixField hi(grid, r, FormDegree::zero);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const M h = at(mt.h, i, j);
            const M dh = cx * (at(mt.h, i + 1, j) - at(mt.h, i - 1, j)) -
                         cy * (at(mt.h, i, j + 1) - at(mt.h, i, j - 1));
            const M ap = -at(b.a2, i, j).adjoint();
            const M inv = h.inverse();
            SiteMap<R>(hi.site(grid.site(i, j)), r, r) = inv;
            SiteMap<R>(B.site(grid.site(i, j)), r, r) = inv * (dh + ap * h - h * ap);
        }
    // F0 - (dbar B + [a0, B]) + [phi0, h^-1 phi0^dagger h], F0 = P + P^dagger + [a0, a0^dagger]
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const M a0 = at(b.a2, i, j);
            const M bb = at(B, i, j);
            const M dB = cx * (at(B, i + 1, j) - at(B, i - 1, j)) + cy * (at(B, i, j + 1) - at(B, i, j - 1));
            const M P = cx * (at(b.a2, i + 1, j) - at(b.a2, i - 1, j)) -
                        cy * (at(b.a2, i, j + 1) - at(b.a2, i, j - 1));
            const M ph = at(b.phi, i, j);
            const M hg = at(hi, i, j) * ph.adjoint() * at(mt.h, i, j);
            const M ad = a0.adjoint();
            M S = P + P.adjoint() + a0 * ad - ad * a0 - dB - (a0 * bb - bb * a0) + ph * hg - hg * ph;
            SiteMap<R>(out.site(grid.site(i, j)), r, r) = -2.0 * I1 * S;
        }
}

}  // namespace

MatrixField metric_moment(const HermitianMetric& mt) {
    MatrixField out(mt.h.grid(), mt.h.rank(), FormDegree::zero);
    dispatch_rank(mt.h.rank(), [&](auto rc) { metric_moment_kernel<decltype(rc)::value>(mt, out); });
    return out;
}

cplx heat_lambda(const MatrixField& mh) {
    return integrate_trace(mh) / (double(mh.rank()) * mh.grid().area());
}

namespace {

// dh/dt = -2i h (M_H - lambda)
MatrixField heat_velocity(const HermitianMetric& m) {
    MatrixField mh = metric_moment(m);
    const cplx lam = heat_lambda(mh);
    const int r = mh.rank();
    for (std::size_t s = 0; s < mh.sites(); ++s)
        for (int a = 0; a < r; ++a) mh(s, a, a) -= lam;
    MatrixField v = product(m.h, mh);
    v *= -2.0 * I1;
    return v;
}

void require_positive(const MatrixField& h, const char* where) {
    dispatch_rank(h.rank(), [&](auto rc) {
        constexpr int R = decltype(rc)::value;
        const int r = h.rank();
        for (std::size_t s = 0; s < h.sites(); ++s) {
            Eigen::LLT<SiteMat<R>> llt(ConstSiteMap<R>(h.site(s), r, r));
            if (llt.info() != Eigen::Success) {
                std::ostringstream os;
                os << where << ": metric lost positivity at site " << s << " (dt too large)";
                throw NumericalError(os.str());
            }
        }
    });
}

}  // namespace

HermitianMetric step_simpson_heat(const HermitianMetric& m, double dt, Integrator integ) {
    require_finite(m.h, "step_simpson_heat");
    HermitianMetric out = m;
    const MatrixField k1 = heat_velocity(m);
    if (integ == Integrator::euler) {
        out.h.axpy(dt, k1);
    } else {
        auto at = [&](double c, const MatrixField& k) {
            HermitianMetric x = m;
            x.h.axpy(c, k);
            return x;
        };
        const MatrixField k2 = heat_velocity(at(0.5 * dt, k1));
        const MatrixField k3 = heat_velocity(at(0.5 * dt, k2));
        const MatrixField k4 = heat_velocity(at(dt, k3));
        const double w = dt / 6.0;
        out.h.axpy(w, k1).axpy(2 * w, k2).axpy(2 * w, k3).axpy(w, k4);
    }
    out.h = hermitian_part(out.h);
    require_finite(out.h, "step_simpson_heat");
    require_positive(out.h, "step_simpson_heat");
    return out;
}

MatrixField inverse_sqrt(const MatrixField& h) {
    MatrixField out(h.grid(), h.rank(), FormDegree::zero);
    dispatch_rank(h.rank(), [&](auto rc) {
        constexpr int R = decltype(rc)::value;
        const int r = h.rank();
        Eigen::SelfAdjointEigenSolver<SiteMat<R>> es(r);
        for (std::size_t s = 0; s < h.sites(); ++s) {
            es.compute(ConstSiteMap<R>(h.site(s), r, r));
            if (es.info() != Eigen::Success) throw NumericalError("inverse_sqrt: eigendecomposition failed");
            if (es.eigenvalues().minCoeff() <= 0.0) throw NumericalError("inverse_sqrt: metric not positive");
            const auto d = es.eigenvalues().cwiseSqrt().cwiseInverse().eval();
            SiteMap<R>(out.site(s), r, r) = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
        }
    });
    return out;
}

Reconstruction reconstruct_pair(const HermitianMetric& m) {
    MatrixField g = inverse_sqrt(m.h);
    HiggsPair p = apply_gauge(ComplexGauge(g), m.base);
    return {std::move(p), std::move(g)};
}

LieField alpha_from(const MatrixField& g, const MatrixField& dg) {
    const MatrixField gi = pointwise_inverse(g);
    MatrixField x = product(gi, dg);
    return LieField::project(x);  // (X - X^dagger)/2 with X = g^-1 dg
}

GaugeFixResult gauge_fix_ode(const std::vector<MatrixField>& alpha, const std::vector<cplx>& lambda,
                             double dt) {
    if (alpha.empty()) throw std::invalid_argument("gauge_fix_ode: empty series");
    if (!lambda.empty() && lambda.size() != alpha.size())
        throw std::invalid_argument("gauge_fix_ode: lambda and alpha lengths differ");
    const TorusGrid& grid = alpha[0].grid();
    const int r = alpha[0].rank();
    for (const auto& a : alpha) {
        // skew-Hermiticity of the generator
        LieField check(a, 1e-10);
        (void)check;
    }
    GaugeFixResult res;
    MatrixField S = MatrixField::identity(grid, r);
    res.S.push_back(S);
    auto gen = [&](std::size_t n, double frac) {
        MatrixField a = alpha[n];
        if (frac > 0.0) {
            a *= (1.0 - frac);
            a.axpy(frac, alpha[n + 1]);
        }
        cplx lam = 0.0;
        if (!lambda.empty()) lam = (1.0 - frac) * lambda[n] + (frac > 0.0 ? frac * lambda[n + 1] : 0.0);
        for (std::size_t s = 0; s < a.sites(); ++s)
            for (int d = 0; d < r; ++d) a(s, d, d) -= I1 * lam;
        return a;
    };
    for (std::size_t n = 0; n + 1 < alpha.size(); ++n) {
        const MatrixField g0 = gen(n, 0.0), gh = gen(n, 0.5), g1 = gen(n + 1, 0.0);
        const MatrixField k1 = product(S, g0);
        MatrixField S2 = S;
        S2.axpy(0.5 * dt, k1);
        const MatrixField k2 = product(S2, gh);
        MatrixField S3 = S;
        S3.axpy(0.5 * dt, k2);
        const MatrixField k3 = product(S3, gh);
        MatrixField S4 = S;
        S4.axpy(dt, k3);
        const MatrixField k4 = product(S4, g1);
        const double w = dt / 6.0;
        S.axpy(w, k1).axpy(2 * w, k2).axpy(2 * w, k3).axpy(w, k4);
        const double drift = unitarity_drift(S);
        res.max_drift_before_projection = std::max(res.max_drift_before_projection, drift);
        if (drift > 1e-6) res.warned = true;
        S = polar_unitary(S);
        res.S.push_back(S);
    }
    return res;
}

namespace {

struct GaugeObservables {
    double ymh;
    std::vector<double> eig;
    std::vector<MatrixField> traces;
};

GaugeObservables gauge_observables(const HiggsPair& p) {
    const MatrixField m = moment1(p).field();
    return {l2_inner(m, m), eigenvalue_fields(m), trace_power_fields(p.phi)};
}

double eig_distance(const std::vector<double>& a, const std::vector<double>& b, double area) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(acc * area);
}

double pair_distance(const HiggsPair& a, const HiggsPair& b) {
    return std::sqrt(l2_inner(a.a2 - b.a2, a.a2 - b.a2) + l2_inner(a.phi - b.phi, a.phi - b.phi));
}

}  // namespace

EquivalenceReport compare_flows(const HiggsPair& p0, const CompareConfig& cfg) {
    EquivalenceReport rep;
    const TorusGrid& grid = p0.grid();
    const int r = p0.rank();
    const double area = grid.cell_area();
    const MatrixField m0 = moment1(p0).field();
    const double dt_rule = cfg.c_cfl * grid.spacing() * grid.spacing() / (1.0 + sup_norm(m0));
    const int probes = std::max(1, cfg.probes);
    const long per_probe = std::max(2L, long(std::ceil(cfg.T / probes / dt_rule)));
    const long steps = per_probe * probes;
    const double dt = cfg.T / double(steps);
    rep.dt = dt;
    rep.steps = steps;

    const GaugeObservables ref = gauge_observables(p0);
    double eig0 = 0.0;
    for (double e : ref.eig) eig0 += e * e;
    eig0 = std::max(std::sqrt(eig0 * area), 1e-300);
    double tr0 = 1e-300;
    for (const auto& f : ref.traces) tr0 = std::max(tr0, f.max_abs());
    const double ymh0 = std::max(ref.ymh, 1e-300);
    const double pair_scale = std::max(std::sqrt(l2_inner(p0.a2, p0.a2) + l2_inner(p0.phi, p0.phi)), 1e-300);

    // constant unitary curve u(t) = exp(t X) for the root-choice check
    Mat X = Mat::Zero(r, r);
    if (cfg.check_root_choice) {
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> nd;
        Mat y(r, r);
        for (int a = 0; a < r; ++a)
            for (int b = 0; b < r; ++b) y(a, b) = cplx(nd(rng), nd(rng));
        X = 0.5 * (y - y.adjoint());
    }

    // Each branch keeps the last three roots g, the pair g.base one step
    // behind, and S at that same time.
    struct Branch {
        std::vector<MatrixField> g;  // g_{k-2}, g_{k-1}, g_k
        HiggsPair lag_pair;          // g_{k-1} . base
        MatrixField alpha_prev;      // alpha_{k-2}
        MatrixField S;               // S(t_{k-2})
        HiggsPair composed;          // at t_{k-1}
    };
    auto root = [&](const HermitianMetric& m, double t, bool alt) {
        MatrixField g = inverse_sqrt(m.h);
        if (alt) g = product(g, MatrixField::constant(grid, (X * t).exp()));
        return g;
    };
    auto diff = [&](const MatrixField& a, double ca, const MatrixField& b, double cb,
                    const MatrixField* c, double cc) {
        MatrixField d = a;
        d *= ca;
        d.axpy(cb, b);
        if (c) d.axpy(cc, *c);
        d *= 1.0 / (2.0 * dt);
        return d;
    };
    // composed pair S^-1 . (g . base)
    auto compose = [&](const MatrixField& S, const HiggsPair& gp) {
        return apply_gauge(GaugeTransform(adjoint(S).relabel(FormDegree::zero)), gp);
    };
    auto advance_S = [&](Branch& br, const MatrixField& a0, const MatrixField& a1) {
        auto res = gauge_fix_ode({a0, a1}, {}, dt);
        rep.unitarity_drift = std::max(rep.unitarity_drift, res.max_drift_before_projection);
        br.S = polar_unitary(product(br.S, res.S.back()));
    };

    HiggsPair direct = p0;
    HermitianMetric metric(p0);
    const int nb = cfg.check_root_choice ? 2 : 1;
    std::vector<Branch> br(nb);
    for (int b = 0; b < nb; ++b) {
        br[b].g.push_back(root(metric, 0.0, b == 1));
        br[b].S = MatrixField::identity(grid, r);
    }
    std::vector<HiggsPair> direct_at_probe;

    auto compare_at = [&](double t, const HiggsPair& d, const HiggsPair& c) {
        const GaugeObservables od = gauge_observables(d), oc = gauge_observables(c);
        rep.pair_discrepancy = std::max(rep.pair_discrepancy, pair_distance(d, c) / pair_scale);
        rep.times.push_back(t);
        rep.ymh_direct.push_back(od.ymh);
        rep.ymh_composed.push_back(oc.ymh);
        rep.ymh_discrepancy = std::max(rep.ymh_discrepancy, std::abs(od.ymh - oc.ymh) / ymh0);
        rep.eigen_discrepancy = std::max(rep.eigen_discrepancy, eig_distance(od.eig, oc.eig, area) / eig0);
        for (std::size_t k = 0; k < od.traces.size(); ++k)
            rep.trace_discrepancy =
                std::max(rep.trace_discrepancy, (od.traces[k] - oc.traces[k]).max_abs() / tr0);
    };

    try {
        for (long k = 1; k <= steps; ++k) {
            direct = step_gradient_flow(direct, dt);
            metric = step_simpson_heat(metric, dt);
            if (k % per_probe == 0) direct_at_probe.push_back(direct);
            const double t = k * dt;
            for (int b = 0; b < nb; ++b) {
                Branch& B = br[b];
                B.g.push_back(root(metric, t, b == 1));
                if (B.g.size() > 3) B.g.erase(B.g.begin());
                if (k == 1) continue;
                // alpha_{k-1} by centered difference; alpha_0 one-sided
                const MatrixField a_mid =
                    alpha_from(B.g[1], diff(B.g[2], 1.0, B.g[0], -1.0, nullptr, 0.0)).field();
                if (k == 2)
                    B.alpha_prev =
                        alpha_from(B.g[0], diff(B.g[0], -3.0, B.g[1], 4.0, &B.g[2], -1.0)).field();
                advance_S(B, B.alpha_prev, a_mid);  // S at t_{k-1}
                B.alpha_prev = a_mid;
                const long idx = k - 1;
                if (idx % per_probe == 0) {
                    B.composed = compose(B.S, apply_gauge(ComplexGauge(B.g[1]), metric.base));
                    if (b == 0) compare_at(idx * dt, direct_at_probe[idx / per_probe - 1], B.composed);
                }
            }
        }
        // final node: one-sided alpha
        for (int b = 0; b < nb; ++b) {
            Branch& B = br[b];
            const MatrixField a_end =
                alpha_from(B.g[2], diff(B.g[2], 3.0, B.g[1], -4.0, &B.g[0], 1.0)).field();
            advance_S(B, B.alpha_prev, a_end);
            B.composed = compose(B.S, apply_gauge(ComplexGauge(B.g[2]), metric.base));
        }
        compare_at(steps * dt, direct, br[0].composed);
        if (nb == 2) rep.root_choice_change = pair_distance(br[0].composed, br[1].composed);
    } catch (const NumericalError& e) {
        rep.partial = true;
        rep.note = e.what();
    }
    rep.max_discrepancy = std::max({rep.ymh_discrepancy, rep.eigen_discrepancy, rep.trace_discrepancy});
    rep.direct_final = direct;
    rep.composed_final = br[0].composed;
    return rep;
}

}  // namespace higgs
