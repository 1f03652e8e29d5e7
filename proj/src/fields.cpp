#include "higgs/fields.hpp"

#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

namespace higgs {

namespace {

constexpr cplx I1(0.0, 1.0);

double skew_defect(const MatrixField& u) {
    double m = 0.0;
    const int r = u.rank();
    for (std::size_t s = 0; s < u.sites(); ++s)
        for (int a = 0; a < r; ++a)
            for (int b = 0; b < r; ++b)
                m = std::max(m, std::abs(u(s, a, b) + std::conj(u(s, b, a))));
    return m;
}

}  // namespace

LieField::LieField(MatrixField u, double tol) : u_(std::move(u)) {
    require_degree(u_, FormDegree::zero, "LieField");
    const double d = skew_defect(u_);
    if (d > tol * std::max(1.0, u_.max_abs())) {
        std::ostringstream os;
        os << "LieField: not skew-Hermitian (defect " << d << ")";
        throw NumericalError(os.str());
    }
}

LieField LieField::project(const MatrixField& u) { return LieField(skew_part(u), 1e300); }

MatrixField pointwise_inverse(const MatrixField& g) {
    MatrixField out(g.grid(), g.rank(), g.degree());
    dispatch_rank(g.rank(), [&](auto rc) {
        constexpr int R = decltype(rc)::value;
        const int r = g.rank();
        for (std::size_t s = 0; s < g.sites(); ++s)
            SiteMap<R>(out.site(s), r, r) = ConstSiteMap<R>(g.site(s), r, r).inverse();
    });
    return out;
}

MatrixField pointwise_exp(const MatrixField& u, cplx t) {
    MatrixField out(u.grid(), u.rank(), u.degree());
    for (std::size_t s = 0; s < u.sites(); ++s) {
        Mat m = u.at(s) * t;
        out.set(s, m.exp());
    }
    return out;
}

MatrixField polar_unitary(const MatrixField& g) {
    MatrixField out(g.grid(), g.rank(), g.degree());
    dispatch_rank(g.rank(), [&](auto rc) {
        constexpr int R = decltype(rc)::value;
        const int r = g.rank();
        for (std::size_t s = 0; s < g.sites(); ++s) {
            ConstSiteMap<R> x(g.site(s), r, r);
            SiteMap<R> o(out.site(s), r, r);
            // Newton iteration U <- (U + U^-dagger)/2 converges quadratically
            // to the polar factor; SVD is the fallback for bad starts
            SiteMat<R> u = x;
            bool ok = false;
            for (int it = 0; it < 20 && !ok; ++it) {
                const SiteMat<R> next = 0.5 * (u + u.adjoint().inverse());
                if (!next.allFinite()) break;
                ok = (next - u).cwiseAbs().maxCoeff() < 1e-15;
                u = next;
            }
            if (ok) {
                o = u;
            } else {
                Eigen::JacobiSVD<SiteMat<R>> svd(x, Eigen::ComputeFullU | Eigen::ComputeFullV);
                o = svd.matrixU() * svd.matrixV().adjoint();
            }
        }
    });
    return out;
}

double unitarity_drift(const MatrixField& g) {
    double m = 0.0;
    dispatch_rank(g.rank(), [&](auto rc) {
        constexpr int R = decltype(rc)::value;
        const int r = g.rank();
        for (std::size_t s = 0; s < g.sites(); ++s) {
            ConstSiteMap<R> x(g.site(s), r, r);
            SiteMat<R> e = x * x.adjoint();
            e -= SiteMat<R>::Identity(r, r);
            m = std::max(m, e.cwiseAbs().maxCoeff());
        }
    });
    return m;
}

GaugeTransform::GaugeTransform(MatrixField g) : g_(std::move(g)) {
    require_degree(g_, FormDegree::zero, "GaugeTransform");
    require_finite(g_, "GaugeTransform");
    if (higgs::unitarity_drift(g_) > 1e-10) g_ = polar_unitary(g_);
}

GaugeTransform GaugeTransform::exp_of(const LieField& u, double t) {
    return GaugeTransform(pointwise_exp(u.field(), t));
}

double GaugeTransform::unitarity_drift() const { return higgs::unitarity_drift(g_); }

ComplexGauge::ComplexGauge(MatrixField g, double cond_max) : g_(std::move(g)) {
    require_degree(g_, FormDegree::zero, "ComplexGauge");
    require_finite(g_, "ComplexGauge");
    std::size_t worst = 0;
    dispatch_rank(g_.rank(), [&](auto rc) {
        constexpr int R = decltype(rc)::value;
        const int r = g_.rank();
        for (std::size_t s = 0; s < g_.sites(); ++s) {
            Eigen::JacobiSVD<SiteMat<R>> svd(ConstSiteMap<R>(g_.site(s), r, r));
            const auto& sv = svd.singularValues();
            const double smin = sv(sv.size() - 1);
            const double c = smin > 0.0 ? sv(0) / smin : INFINITY;
            if (c > max_cond_) {
                max_cond_ = c;
                worst = s;
            }
        }
    });
    if (!(max_cond_ <= cond_max)) {
        std::ostringstream os;
        os << "ComplexGauge: condition number " << max_cond_ << " at site " << worst
           << " exceeds " << cond_max;
        throw NumericalError(os.str());
    }
}

HiggsPair::HiggsPair(const TorusGrid& grid, int rank, bool fd)
    : a2(grid, rank, FormDegree::dzbar), phi(grid, rank, FormDegree::dz), fixed_det(fd) {}

HiggsPair::HiggsPair(MatrixField a, MatrixField p, bool fd)
    : a2(std::move(a)), phi(std::move(p)), fixed_det(fd) {
    require_degree(a2, FormDegree::dzbar, "HiggsPair A''");
    require_degree(phi, FormDegree::dz, "HiggsPair phi");
    require_same_shape(a2, phi, "HiggsPair");
}

Tangent::Tangent(const TorusGrid& grid, int rank)
    : a2(grid, rank, FormDegree::dzbar), phi(grid, rank, FormDegree::dz) {}

Tangent::Tangent(MatrixField a, MatrixField p) : a2(std::move(a)), phi(std::move(p)) {
    require_degree(a2, FormDegree::dzbar, "Tangent a''");
    require_degree(phi, FormDegree::dz, "Tangent psi");
}

Tangent& Tangent::operator+=(const Tangent& o) {
    a2 += o.a2;
    phi += o.phi;
    return *this;
}

Tangent& Tangent::operator*=(cplx s) {
    a2 *= s;
    phi *= s;
    return *this;
}

Tangent& Tangent::axpy(cplx s, const Tangent& o) {
    a2.axpy(s, o.a2);
    phi.axpy(s, o.phi);
    return *this;
}

HiggsPair displaced(const HiggsPair& p, cplx s, const Tangent& v) {
    HiggsPair q = p;
    q.a2.axpy(s, v.a2);
    q.phi.axpy(s, v.phi);
    return q;
}

double metric(const Tangent& x, const Tangent& y) {
    return 2.0 * (l2_inner(x.a2, y.a2) + l2_inner(x.phi, y.phi));
}

Tangent apply_I(const Tangent& x) {
    Tangent t = x;
    t *= I1;
    return t;
}

Tangent apply_J(const Tangent& x) {
    MatrixField a = adjoint(x.phi);
    MatrixField p = adjoint(x.a2);
    p *= -1.0;
    return Tangent(std::move(a), std::move(p));
}

namespace {

// S = F_zzbar + [p, p^dagger] where F_zzbar = P + P^dagger + [a, a^dagger],
// P = d' a. Fills m = -2i S (skew) and, if wanted, the curvature part only.
void assemble_moment(const HiggsPair& pr, MatrixField& m, MatrixField* curv) {
    const MatrixField P = dprime_raw(pr.a2);
    const int r = pr.rank();
    m = MatrixField(pr.grid(), r, FormDegree::zero);
    if (curv) *curv = MatrixField(pr.grid(), r, FormDegree::top);
    dispatch_rank(r, [&](auto rc) {
        constexpr int R = decltype(rc)::value;
        std::vector<cplx> F(std::size_t(r) * r);
        for (std::size_t s = 0; s < pr.grid().sites(); ++s) {
            const cplx* p = P.site(s);
            std::fill(F.begin(), F.end(), cplx(0.0));
            kern::comm_dagger_add<R>(F.data(), pr.a2.site(s), 1.0, r);
            if (curv) {
                cplx* c = curv->site(s);
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < r; ++j) {
                        const cplx f = F[i * r + j] + p[i * r + j] + std::conj(p[j * r + i]);
                        const cplx ft = std::conj(F[j * r + i]) + std::conj(p[j * r + i]) + p[i * r + j];
                        c[i * r + j] = -I1 * (f + ft);
                    }
            }
            kern::comm_dagger_add<R>(F.data(), pr.phi.site(s), 1.0, r);
            cplx* out = m.site(s);
            // -2i times the Hermitian part of S, skew by construction
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < r; ++j) {
                    const cplx f = F[i * r + j] + p[i * r + j] + std::conj(p[j * r + i]);
                    const cplx ft = std::conj(F[j * r + i]) + std::conj(p[j * r + i]) + p[i * r + j];
                    out[i * r + j] = -I1 * (f + ft);
                }
        }
    });
}

}  // namespace

MatrixField curvature(const HiggsPair& p) {
    MatrixField m, c;
    assemble_moment(p, m, &c);
    require_finite(c, "curvature");
    return c;
}

LieField moment1(const HiggsPair& p) {
    MatrixField m;
    assemble_moment(p, m, nullptr);
    require_finite(m, "moment1");
    return LieField(std::move(m));
}

namespace {

MatrixField holomorphic_defect(const HiggsPair& p) {
    MatrixField d = dbar_raw(p.phi);
    d += commutator(p.a2, p.phi);
    return d.relabel(FormDegree::top);
}

}  // namespace

MatrixField momentC(const HiggsPair& p) {
    MatrixField d = holomorphic_defect(p);
    d *= 2.0 * I1;
    return d;
}

double higgs_residual(const HiggsPair& p) { return l2_norm(holomorphic_defect(p)); }

bool in_B(const HiggsPair& p, double tol_B) {
    return higgs_residual(p) <= tol_B * std::max(1.0, l2_norm(p.phi));
}

double ymh(const HiggsPair& p) {
    MatrixField m;
    assemble_moment(p, m, nullptr);
    return l2_inner(m, m);
}

double qh(const HiggsPair& p) {
    const MatrixField c = momentC(p);
    return ymh(p) + l2_inner(c, c);
}

namespace {

// Fused velocity kernel: pass 1 builds M with the d' stencil inlined, pass 2
// applies dbar + [a, .] and [phi, .] to M.
template <int R>
void velocity_kernel(const HiggsPair& p, MatrixField& m, Tangent& v, int rr) {
    constexpr int Rmax = R > 0 ? R : 1;
    const int r = kern::dim<R>(rr);
    const int n = p.grid().n();
    const std::size_t st = std::size_t(r) * r;
    const double inv4h = 1.0 / (4.0 * p.grid().spacing());
    const cplx* A = p.a2.data().data();
    const cplx* F = p.phi.data().data();
    cplx* Mo = m.data().data();
    std::vector<cplx> heap(R > 0 ? 0 : 2 * st);
    cplx stack[2 * Rmax * Rmax];
    cplx* P = R > 0 ? stack : heap.data();
    cplx* S = P + st;
    for (int i = 0; i < n; ++i) {
        const int ip = (i + 1) % n, im = (i + n - 1) % n;
        for (int j = 0; j < n; ++j) {
            const int jp = (j + 1) % n, jm = (j + n - 1) % n;
            const std::size_t s = std::size_t(i) * n + j;
            const cplx* xp = A + (std::size_t(ip) * n + j) * st;
            const cplx* xm = A + (std::size_t(im) * n + j) * st;
            const cplx* yp = A + (std::size_t(i) * n + jp) * st;
            const cplx* ym = A + (std::size_t(i) * n + jm) * st;
            // P = (Dx - i Dy) a / 2
            for (std::size_t k = 0; k < st; ++k)
                P[k] = inv4h * ((xp[k] - xm[k]) - I1 * (yp[k] - ym[k]));
            const cplx* a = A + s * st;
            const cplx* f = F + s * st;
            for (std::size_t k = 0; k < st; ++k) S[k] = 0.0;
            kern::comm_dagger_add<R>(S, a, 1.0, r);
            kern::comm_dagger_add<R>(S, f, 1.0, r);
            cplx* out = Mo + s * st;
            for (int x = 0; x < r; ++x)
                for (int y = 0; y < r; ++y) {
                    const cplx h1 = S[x * r + y] + P[x * r + y] + std::conj(P[y * r + x]);
                    const cplx h2 = std::conj(S[y * r + x]) + std::conj(P[y * r + x]) + P[x * r + y];
                    out[x * r + y] = -I1 * (h1 + h2);
                }
        }
    }
    cplx* Va = v.a2.data().data();
    cplx* Vp = v.phi.data().data();
    const cplx c = I1 * inv4h;
    for (int i = 0; i < n; ++i) {
        const int ip = (i + 1) % n, im = (i + n - 1) % n;
        for (int j = 0; j < n; ++j) {
            const int jp = (j + 1) % n, jm = (j + n - 1) % n;
            const std::size_t s = std::size_t(i) * n + j;
            const cplx* xp = Mo + (std::size_t(ip) * n + j) * st;
            const cplx* xm = Mo + (std::size_t(im) * n + j) * st;
            const cplx* yp = Mo + (std::size_t(i) * n + jp) * st;
            const cplx* ym = Mo + (std::size_t(i) * n + jm) * st;
            cplx* va = Va + s * st;
            cplx* vp = Vp + s * st;
            // i (Dx + i Dy) M / 2
            for (std::size_t k = 0; k < st; ++k) {
                va[k] = c * ((xp[k] - xm[k]) + I1 * (yp[k] - ym[k]));
                vp[k] = 0.0;
            }
            const cplx* M = Mo + s * st;
            kern::comm_add<R>(va, A + s * st, M, I1, r);
            kern::comm_add<R>(vp, F + s * st, M, I1, r);
            if (p.fixed_det) {
                cplx ta = 0.0, tp = 0.0;
                for (int x = 0; x < r; ++x) {
                    ta += va[x * r + x];
                    tp += vp[x * r + x];
                }
                ta /= double(r);
                tp /= double(r);
                for (int x = 0; x < r; ++x) {
                    va[x * r + x] -= ta;
                    vp[x * r + x] -= tp;
                }
            }
        }
    }
}

}  // namespace

Tangent grad_ymh(const HiggsPair& p, MatrixField& m) {
    const int r = p.rank();
    if (m.grid() != p.grid() || m.rank() != r || m.degree() != FormDegree::zero)
        m = MatrixField(p.grid(), r, FormDegree::zero);
    Tangent v(p.grid(), r);
    dispatch_rank(r, [&](auto rc) { velocity_kernel<decltype(rc)::value>(p, m, v, r); });
    return v;
}

Tangent grad_ymh(const HiggsPair& p) {
    MatrixField m;
    return grad_ymh(p, m);
}

MatrixField conjugate(const MatrixField& g, const MatrixField& x) {
    const MatrixField gi = pointwise_inverse(g);
    MatrixField out(x.grid(), x.rank(), x.degree());
    dispatch_rank(x.rank(), [&](auto rc) {
        constexpr int R = decltype(rc)::value;
        const int r = x.rank();
        for (std::size_t s = 0; s < x.sites(); ++s)
            SiteMap<R>(out.site(s), r, r).noalias() = ConstSiteMap<R>(gi.site(s), r, r) *
                                                      ConstSiteMap<R>(x.site(s), r, r) *
                                                      ConstSiteMap<R>(g.site(s), r, r);
    });
    return out;
}

HiggsPair apply_gauge(const ComplexGauge& gauge, const HiggsPair& p) {
    const MatrixField& g = gauge.field();
    require_same_shape(g, p.a2, "apply_gauge");
    MatrixField a = conjugate(g, p.a2);
    const MatrixField dg = dbar_raw(g);
    a += product(pointwise_inverse(g), dg).relabel(FormDegree::dzbar);
    HiggsPair q(std::move(a), conjugate(g, p.phi), p.fixed_det);
    if (p.fixed_det) q.a2 = trace_free(q.a2);
    require_finite(q.a2, "apply_gauge");
    require_finite(q.phi, "apply_gauge");
    return q;
}

HiggsPair apply_gauge(const GaugeTransform& g, const HiggsPair& p) {
    return apply_gauge(ComplexGauge(g), p);
}

Tangent transport(const ComplexGauge& g, const Tangent& x) {
    return Tangent(conjugate(g.field(), x.a2), conjugate(g.field(), x.phi));
}

Tangent inf_action(const HiggsPair& p, const MatrixField& u) {
    require_degree(u, FormDegree::zero, "inf_action");
    MatrixField a = dbar_raw(u).relabel(FormDegree::dzbar);
    a += commutator(p.a2, u);
    return Tangent(std::move(a), commutator(p.phi, u));
}

LieField rho_star(const HiggsPair& p, const Tangent& x) {
    // 2 * skew( -d' b + [a^dagger, b] + [p^dagger, psi] )
    MatrixField out = dprime_raw(x.a2);
    out *= -1.0;
    out += commutator(adjoint(p.a2), x.a2);
    out += commutator(adjoint(p.phi), x.phi);
    out.relabel(FormDegree::zero);
    MatrixField sk = skew_part(out);
    sk *= 2.0;
    return LieField(std::move(sk));
}

MatrixField holomorphic_operator(const MatrixField& a2, const MatrixField& phi) {
    MatrixField d = dbar_raw(phi);
    d += commutator(a2, phi);
    return d.relabel(FormDegree::top);
}

MatrixField holomorphic_adjoint(const MatrixField& a2, const MatrixField& v) {
    MatrixField out = dprime_raw(v);
    out *= -1.0;
    out += commutator(adjoint(a2), v);
    return out.relabel(FormDegree::dz);
}

MatrixField project_holomorphic(const MatrixField& a2, const MatrixField& phi, double rel_tol,
                                long* iterations) {
    MatrixField out = phi;
    long iters = 0;
    const double scale = std::max(l2_norm(phi), 1e-300);
    // Two passes: the second removes the roundoff left by the first solve.
    for (int pass = 0; pass < 2; ++pass) {
        const MatrixField b = holomorphic_operator(a2, out);
        if (l2_norm(b) <= rel_tol * scale * 1e-2) break;
        MatrixField y(b.grid(), b.rank(), FormDegree::top);
        MatrixField res = b;
        MatrixField dir = res;
        double rr = l2_inner(res, res);
        const double stop = std::pow(rel_tol * 1e-2 * scale, 2);
        for (int it = 0; it < 20000 && rr > stop; ++it, ++iters) {
            const MatrixField Ad = holomorphic_operator(a2, holomorphic_adjoint(a2, dir));
            const double alpha = rr / l2_inner(dir, Ad);
            y.axpy(alpha, dir);
            res.axpy(-alpha, Ad);
            const double rr_new = l2_inner(res, res);
            dir *= rr_new / rr;
            dir += res;
            rr = rr_new;
        }
        out -= holomorphic_adjoint(a2, y);
    }
    if (iterations) *iterations = iters;
    return out;
}

}  // namespace higgs
