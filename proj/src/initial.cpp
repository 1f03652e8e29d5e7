#include "higgs/initial.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "higgs/critical.hpp"
#include "higgs/flow.hpp"

namespace higgs {

namespace {

constexpr cplx I1(0.0, 1.0);
constexpr double kPi = std::numbers::pi;

}  // namespace

MatrixField random_smooth_field(const TorusGrid& grid, int rank, FormDegree degree, double k0,
                                double rms, std::mt19937_64& rng, bool trace_free_field) {
    MatrixField f(grid, rank, degree);
    if (rms == 0.0) return f;
    const int n = grid.n();
    const int K = std::max(1, std::min(int(std::ceil(3.0 * k0)), n / 4 - 1));
    std::normal_distribution<double> nd;
    // separable plane waves e^{2 pi i k x / L}
    std::vector<cplx> wave((2 * K + 1) * n);
    for (int k = -K; k <= K; ++k)
        for (int i = 0; i < n; ++i)
            wave[(k + K) * n + i] = std::exp(I1 * (2.0 * kPi * k * i / n));
    const int rr = rank * rank;
    std::vector<cplx> coef(rr);
    for (int kx = -K; kx <= K; ++kx)
        for (int ky = -K; ky <= K; ++ky) {
            const double damp = std::exp(-double(kx * kx + ky * ky) / (k0 * k0));
            for (auto& c : coef) c = cplx(nd(rng), nd(rng)) * damp;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const cplx w = wave[(kx + K) * n + i] * wave[(ky + K) * n + j];
                    cplx* p = f.site(grid.site(i, j));
                    for (int e = 0; e < rr; ++e) p[e] += w * coef[e];
                }
        }
    if (trace_free_field) f = trace_free(f);
    const double norm = l2_norm(f) / grid.length();
    if (norm > 0.0) f *= rms / norm;
    return f;
}

InitialReport make_random_smooth(const TorusGrid& grid, int rank, bool fixed_det,
                                 const RandomSmoothSpec& spec, std::uint64_t seed) {
    InitialReport rep;
    for (int attempt = 0; attempt < 10; ++attempt) {
        const std::uint64_t s = seed + 0x9E3779B97F4A7C15ULL * attempt;
        std::mt19937_64 rng(s);
        MatrixField a = random_smooth_field(grid, rank, FormDegree::dzbar, spec.k0, spec.amplitude, rng, fixed_det);
        MatrixField raw = random_smooth_field(grid, rank, FormDegree::dz, spec.k0, spec.phi_amplitude, rng, fixed_det);
        long iters = 0;
        MatrixField phi = spec.phi_amplitude == 0.0 ? raw : project_holomorphic(a, raw, 1e-10, &iters);
        if (fixed_det) phi = trace_free(phi);
        // a projection that kills almost all of the raw field means the
        // kernel missed it; draw again
        if (spec.phi_amplitude != 0.0 && l2_norm(phi) < 1e-3 * l2_norm(raw)) {
            ++rep.retries;
            continue;
        }
        // ker D is a linear space, so rescaling keeps phi holomorphic
        if (spec.phi_amplitude != 0.0) phi *= spec.phi_amplitude * grid.length() / l2_norm(phi);
        rep.pair = HiggsPair(std::move(a), std::move(phi), fixed_det);
        rep.residual = higgs_residual(rep.pair);
        rep.cg_iterations = iters;
        rep.seed_used = s;
        // generic degree-zero data: holomorphic endomorphisms are the
        // (trace-free) diagonal constants in a split frame
        rep.kernel_dim = fixed_det ? rank - 1 : rank;
        return rep;
    }
    throw NumericalError("make_random_smooth: kernel projection degenerate for 10 seeds");
}

namespace {

// Smooth step, flat to all orders at both ends.
double smooth_step(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    auto bump = [](double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; };
    return bump(s) / (bump(s) + bump(1.0 - s));
}

// Periodic-frame unitary U(x, y) with U(x + L, y) = T(y) U(x, y),
// T(y) = exp(2 pi i d y sigma3 / L).
Mat frame(double x, double y, int d, double L) {
    const double xr = x / L - std::floor(x / L);
    const int wraps = int(std::floor(x / L));
    const double s = smooth_step(xr);
    Mat s3(2, 2), nsig(2, 2);
    s3 << 1, 0, 0, -1;
    const double nx = std::sin(kPi * s), nz = std::cos(kPi * s);
    nsig << nz, nx, nx, -nz;
    const double th = kPi * d * y / L;
    Mat e1 = (I1 * th * s3).exp();
    Mat U = e1 * (-I1 * th * nsig).exp();
    if (wraps != 0) U = (I1 * (2.0 * th * wraps) * s3).exp() * U;
    return U;
}

}  // namespace

HiggsPair split_point_analytic(const TorusGrid& grid, const SplitSpec& spec) {
    const int d = spec.degree;
    const double L = grid.length();
    const int n = grid.n();
    MatrixField a(grid, 2, FormDegree::dzbar), phi(grid, 2, FormDegree::dz);
    Mat s3(2, 2);
    s3 << 1, 0, 0, -1;
    const Mat phis = spec.eigen * s3;
    const double eps = 1e-5 * L;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double x = grid.x(i), y = grid.y(j);
            // twisted frame: A = -2 pi i d x/L^2 sigma3 dy, whose (0,1) part is
            // a = (A_x + i A_y)/2 = pi d x / L^2 sigma3
            const Mat a_tw = (kPi * d * x / (L * L)) * s3;
            const Mat U = frame(x, y, d, L);
            const Mat Ui = U.adjoint();
            const Mat Ux = (frame(x + eps, y, d, L) - frame(x - eps, y, d, L)) / (2 * eps);
            const Mat Uy = (frame(x, y + eps, d, L) - frame(x, y - eps, d, L)) / (2 * eps);
            const Mat dbarU = 0.5 * (Ux + I1 * Uy);
            const std::size_t s = grid.site(i, j);
            a.set(s, Ui * a_tw * U + Ui * dbarU);
            phi.set(s, Ui * phis * U);
        }
    HiggsPair p(std::move(a), std::move(phi), true);
    p.a2 = trace_free(p.a2);
    p.phi = trace_free(p.phi);
    return p;
}

namespace {

// Linearized holomorphicity constraint (a, psi) -> dbar psi + [A'', psi] + [a, phi]
// and its adjoint.
MatrixField constraint(const HiggsPair& p, const Tangent& v) {
    MatrixField out = holomorphic_operator(p.a2, v.phi);
    out += commutator(v.a2, p.phi).relabel(FormDegree::top);
    return out;
}

Tangent constraint_adjoint(const HiggsPair& p, const MatrixField& w) {
    MatrixField w0 = w;
    w0.relabel(FormDegree::zero);
    MatrixField ph = adjoint(p.phi);
    ph.relabel(FormDegree::zero);
    MatrixField a = commutator(w0, ph);
    a.relabel(FormDegree::dzbar);
    return Tangent(std::move(a), holomorphic_adjoint(p.a2, w));
}

// y with (L L^*) y = b, by CG
MatrixField solve_normal(const HiggsPair& p, const MatrixField& b, double abs_tol) {
    MatrixField y(b.grid(), b.rank(), FormDegree::top);
    MatrixField res = b, dir = b;
    double rr = l2_inner(res, res);
    const double stop = abs_tol * abs_tol;
    for (int it = 0; it < 20000 && rr > stop; ++it) {
        const MatrixField Ad = constraint(p, constraint_adjoint(p, dir));
        const double alpha = rr / l2_inner(dir, Ad);
        y.axpy(alpha, dir);
        res.axpy(-alpha, Ad);
        const double rr_new = l2_inner(res, res);
        dir *= rr_new / rr;
        dir += res;
        rr = rr_new;
    }
    return y;
}

}  // namespace

Tangent project_tangent_B(const HiggsPair& p, const Tangent& v, double rel_tol) {
    const double scale = std::max(std::sqrt(metric(v, v)), 1e-300);
    Tangent out = v;
    out.axpy(-1.0, constraint_adjoint(p, solve_normal(p, constraint(p, v), rel_tol * scale)));
    return out;
}

HiggsPair project_B(const HiggsPair& p, double tol, int max_iter, double* residual) {
    // Gauss-Newton on dbar phi + [A'', phi] = 0 with minimum-norm steps in
    // both A'' and phi
    HiggsPair q = p;
    double r = higgs_residual(q);
    for (int it = 0; it < max_iter && r > tol; ++it) {
        const MatrixField b = holomorphic_operator(q.a2, q.phi);
        Tangent step = constraint_adjoint(q, solve_normal(q, b, 1e-3 * l2_norm(b)));
        q = displaced(q, -1.0, step);
        if (q.fixed_det) {
            q.a2 = trace_free(q.a2);
            q.phi = trace_free(q.phi);
        }
        r = higgs_residual(q);
    }
    if (residual) *residual = r;
    return q;
}

namespace {

}  // namespace

SettleReport settle_split(const HiggsPair& start, const SettleConfig& cfg) {
    SettleReport rep;
    HiggsPair p = project_B(start, 1e-12, 30);
    FlowConfig fc;
    fc.c_cfl = cfg.c_cfl;
    fc.tol_grad = cfg.tol_grad;
    fc.keep_snapshots = false;
    fc.project_every = 0;
    rep.pair = p;
    rep.grad_norm = std::sqrt(grad_norm_sq(grad_ymh(p)));
    // short legs, each followed by the retraction onto B; keep the pair of
    // smallest gradient and stop once the gradient has clearly turned up
    double t = 0.0;
    while (t < cfg.T_max) {
        fc.T_max = std::min(cfg.leg, cfg.T_max - t);
        Trajectory tr = run_gradient_flow(p, fc);
        t += tr.final_time;
        rep.steps += tr.steps;
        p = project_B(tr.final_pair, 1e-12, 10);
        const double g = std::sqrt(grad_norm_sq(grad_ymh(p)));
        if (g < rep.grad_norm) {
            rep.grad_norm = g;
            rep.pair = p;
            rep.time = t;
        }
        if (g <= cfg.tol_grad) {
            rep.converged = true;
            break;
        }
        if (g > cfg.give_up * rep.grad_norm || tr.final_time <= 0.0) break;
    }
    return rep;
}

InitialReport make_split_plus_perturbation(const HiggsPair& settled, int top_rank,
                                           const SplitSpec& spec, std::uint64_t seed) {
    InitialReport rep;
    std::mt19937_64 rng(seed);
    const TorusGrid& grid = settled.grid();
    const int r = settled.rank();
    const MatrixField pi = eigenprojector(moment1(settled).field(), top_rank);
    MatrixField x = random_smooth_field(grid, r, FormDegree::dz, 1.5, 1.0, rng, false);
    // upper block pi X (1 - pi)
    for (std::size_t s = 0; s < x.sites(); ++s) {
        const Mat P = pi.at(s);
        x.set(s, P * x.at(s) * (Mat::Identity(r, r) - P));
    }
    const double xn = l2_norm(x);
    if (xn < 1e-12) throw NumericalError("make_split_plus_perturbation: empty upper block");
    HiggsPair p = settled;
    p.phi.axpy(spec.extension / xn, x);
    if (p.fixed_det) p.phi = trace_free(p.phi);
    double res = 0.0;
    rep.pair = project_B(p, 1e-12, 30, &res);
    rep.residual = res;
    rep.seed_used = seed;
    // trace-free diagonal constants plus sections of L^2 (h^0 = 2d)
    rep.kernel_dim = 1 + 2 * spec.degree;
    return rep;
}

}  // namespace higgs
