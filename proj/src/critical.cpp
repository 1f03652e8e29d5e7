#include "higgs/critical.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>
#include <sstream>

namespace higgs {

namespace {

constexpr cplx I1(0.0, 1.0);
constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

CriticalReport is_critical(const HiggsPair& p, double tol) {
    CriticalReport rep;
    const MatrixField m = moment1(p).field();
    MatrixField d = dbar_raw(m);
    d += commutator(p.a2.with_degree(FormDegree::zero), m);
    const MatrixField c = commutator(p.phi.with_degree(FormDegree::zero), m);
    rep.residual_dA = l2_norm(d);
    rep.residual_phi = l2_norm(c);
    rep.grad_norm = std::sqrt(grad_norm_sq(grad_ymh(p)));
    rep.residual_constant =
        rep.grad_norm > 0.0 ? std::max(rep.residual_dA, rep.residual_phi) / rep.grad_norm : 0.0;
    rep.critical = rep.grad_norm <= tol;

    const int r = p.rank();
    const std::size_t ns = p.grid().sites();
    rep.eigenvalue_fields = eigenvalue_fields(m);
    rep.eigen_mean.assign(r, 0.0);
    rep.spatial_variance.assign(r, 0.0);
    double scale = 0.0;
    for (std::size_t s = 0; s < ns; ++s)
        for (int k = 0; k < r; ++k) {
            const double e = rep.eigenvalue_fields[s * r + k];
            rep.eigen_mean[k] += e / ns;
            scale += e * e / (ns * r);
        }
    for (std::size_t s = 0; s < ns; ++s)
        for (int k = 0; k < r; ++k) {
            const double e = rep.eigenvalue_fields[s * r + k] - rep.eigen_mean[k];
            rep.spatial_variance[k] += e * e / ns;
        }
    // relative to the mean square eigenvalue, but never to less than one slope
    // quantum 2pi/(area r): a moment that has flowed to zero is constant, whatever
    // the shape of its last decaying mode
    const double quantum = kTwoPi / (p.grid().area() * r);
    scale = std::max(scale, quantum * quantum);
    for (auto& v : rep.spatial_variance) v /= scale;
    return rep;
}

std::vector<double> HNType::values() const {
    std::vector<double> v;
    for (long n : num) v.push_back(double(n) / double(den));
    return v;
}

std::string HNType::str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t k = 0; k < num.size(); ++k) {
        if (k) os << ",";
        const long g = std::gcd(std::abs(num[k]), den);
        if (den / g == 1)
            os << num[k] / g;
        else
            os << num[k] / g << "/" << den / g;
    }
    os << ")";
    return os.str();
}

HNType hn_type(const CriticalReport& rep, double area, int rank, double var_tol) {
    HNType t;
    long den = 1;
    for (int q = 2; q <= rank; ++q) den = std::lcm(den, long(q));
    t.den = den;
    std::vector<double> mu(rank);
    for (int k = 0; k < rank; ++k) mu[k] = area / kTwoPi * rep.eigen_mean[k];
    for (int k = 0; k < rank; ++k) {
        // nearest rational with denominator <= rank, ambiguity if a second
        // candidate is within 0.05
        double best = INFINITY, second = INFINITY;
        long best_num = 0;
        for (int q = 1; q <= rank; ++q) {
            const long pn = std::lround(mu[k] * q);
            for (long c = pn - 1; c <= pn + 1; ++c) {
                const double dist = std::abs(mu[k] - double(c) / q);
                const long scaled = c * (den / q);
                if (dist < best - 1e-12) {
                    if (best_num != scaled) second = best;
                    best = dist;
                    best_num = scaled;
                } else if (scaled != best_num && dist < second) {
                    second = dist;
                }
            }
        }
        if (second < 0.05) {
            t.settled = false;
            t.note += "ambiguous slope; ";
        }
        if (best > 0.05) {
            t.settled = false;
            t.note += "slope far from rational; ";
        }
        t.num.push_back(best_num);
    }
    for (int k = 0; k < rank; ++k)
        if (rep.spatial_variance[k] > var_tol) {
            t.settled = false;
            t.note += "eigenvalue variance above tolerance; ";
            break;
        }
    if (!rep.critical) {
        t.settled = false;
        t.note += "not critical; ";
    }
    const long total = std::accumulate(t.num.begin(), t.num.end(), 0L);
    if (total != 0) {
        t.settled = false;
        t.note += "slopes do not sum to zero; ";
    }
    std::sort(t.num.begin(), t.num.end(), std::greater<long>());
    return t;
}

HNType hn_type(const HiggsPair& p, double tol_grad, double var_tol) {
    return hn_type(is_critical(p, tol_grad), p.grid().area(), p.rank(), var_tol);
}

HNType hn_type_from_slopes(std::vector<double> slopes) {
    HNType t;
    const int rank = int(slopes.size());
    long den = 1;
    for (int q = 2; q <= rank; ++q) den = std::lcm(den, long(q));
    t.den = den;
    std::sort(slopes.begin(), slopes.end(), std::greater<double>());
    for (double s : slopes) {
        const double scaled = s * den;
        if (std::abs(scaled - std::round(scaled)) > 1e-9)
            throw std::invalid_argument("hn_type_from_slopes: slope denominator exceeds rank");
        t.num.push_back(std::lround(scaled));
    }
    return t;
}

MatrixField eigenprojector(const MatrixField& moment, int k, double gap_tol) {
    const int r = moment.rank();
    if (k < 0 || k > r) throw std::invalid_argument("eigenprojector: k out of range");
    MatrixField pi(moment.grid(), r, FormDegree::zero);
    Eigen::SelfAdjointEigenSolver<Mat> es;
    double worst = INFINITY;
    std::size_t worst_site = 0;
    for (std::size_t s = 0; s < moment.sites(); ++s) {
        es.compute(I1 * moment.at(s));
        const auto& ev = es.eigenvalues();  // ascending
        if (k > 0 && k < r) {
            const double gap = ev(r - k) - ev(r - k - 1);
            if (gap < worst) {
                worst = gap;
                worst_site = s;
            }
        }
        const Mat V = es.eigenvectors().rightCols(k);
        pi.set(s, V * V.adjoint());
    }
    if (worst < gap_tol) {
        std::ostringstream os;
        os << "eigenprojector: spectral gap " << worst << " below " << gap_tol << " at site " << worst_site;
        throw NumericalError(os.str());
    }
    return pi;
}

MatrixField eigenprojector(const HiggsPair& p, int k, double gap_tol) {
    return eigenprojector(moment1(p).field(), k, gap_tol);
}

namespace {

void require_projection(const MatrixField& pi) {
    const MatrixField sq = product(pi, pi);
    const double d1 = (sq - pi).max_abs();
    const double d2 = (adjoint(pi) - pi).max_abs();
    if (d1 > 1e-8 || d2 > 1e-8) {
        std::ostringstream os;
        os << "chern_weil_degree: not a projection field (|pi^2-pi| = " << d1 << ", |pi^*-pi| = " << d2 << ")";
        throw NumericalError(os.str());
    }
}

}  // namespace

DegreeParts degree_parts(const MatrixField& pi, const HiggsPair& p) {
    require_projection(pi);
    DegreeParts d;
    const MatrixField m = moment1(p).field();
    const cplx tr = integrate_trace(product(pi, m));
    d.curvature_term = (I1 * tr).real() / kTwoPi;
    MatrixField dp = dbar_raw(pi);
    dp += commutator(p.a2.with_degree(FormDegree::zero), pi);
    const MatrixField cp = commutator(p.phi.with_degree(FormDegree::zero), pi);
    d.defect = l2_inner(dp, dp) + l2_inner(cp, cp);
    return d;
}

double chern_weil_degree(const MatrixField& pi, const HiggsPair& p, double kappa) {
    const DegreeParts d = degree_parts(pi, p);
    return d.curvature_term - kappa * d.defect;
}

double convex_invariant(const HiggsPair& p, int k) {
    const int r = p.rank();
    if (k < 1 || k > r) throw std::invalid_argument("convex_invariant: k out of range");
    const auto ev = eigenvalue_fields(moment1(p).field());
    double acc = 0.0;
    for (std::size_t s = 0; s < p.grid().sites(); ++s)
        for (int j = 0; j < k; ++j) acc += ev[s * r + j];
    return acc * p.grid().cell_area();
}

const char* to_string(Order o) {
    switch (o) {
        case Order::less: return "<=";
        case Order::greater: return ">=";
        case Order::equal: return "=";
        case Order::incomparable: return "incomparable";
    }
    return "?";
}

Order hn_partial_order(const HNType& a, const HNType& b) {
    if (a.num.size() != b.num.size()) return Order::incomparable;
    // compare on the common denominator
    const long den = std::lcm(a.den, b.den);
    long sa = 0, sb = 0;
    bool ge = true, le = true;
    for (std::size_t k = 0; k < a.num.size(); ++k) {
        sa += a.num[k] * (den / a.den);
        sb += b.num[k] * (den / b.den);
        if (sa < sb) ge = false;
        if (sa > sb) le = false;
    }
    if (sa != sb) return Order::incomparable;
    if (ge && le) return Order::equal;
    if (ge) return Order::greater;
    if (le) return Order::less;
    return Order::incomparable;
}

namespace {

struct Line {
    double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

Line fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = double(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    Line l;
    l.slope = sxy / sxx;
    l.intercept = my - l.slope * mx;
    l.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
    return l;
}

LojaFit fit_window(const EnergySeries& s, double grad_tol, double e_inf) {
    LojaFit f;
    const double e0 = s.energy.front();
    const double upper = 1e-2 * (e0 - e_inf);
    const double lower = std::max(100.0 * grad_tol * grad_tol, 1e-11 * std::max(1.0, std::abs(e_inf)));
    std::vector<double> lx, ly;
    bool started = false;
    for (std::size_t i = 0; i < s.energy.size(); ++i) {
        const double de = s.energy[i] - e_inf;
        if (de <= upper && de >= lower && s.grad[i] > 0.0) {
            if (!started) f.first = i;
            started = true;
            f.last = i;
            lx.push_back(std::log(de));
            ly.push_back(std::log(s.grad[i]));
        }
    }
    if (lx.size() < 5) {
        f.note = "too few points in the tail window";
        return f;
    }
    f.decades = (*std::max_element(lx.begin(), lx.end()) - *std::min_element(lx.begin(), lx.end())) / std::log(10.0);
    const Line l = fit_line(lx, ly);
    f.theta = 1.0 - l.slope;
    f.r2 = l.r2;
    double c = INFINITY;
    for (std::size_t i = 0; i < lx.size(); ++i) c = std::min(c, std::exp(ly[i] - l.slope * lx[i]));
    f.c = c;
    f.conclusive = f.decades >= 2.0;
    if (!f.conclusive) f.note = "inconclusive: tail spans fewer than 2 decades";
    return f;
}

}  // namespace

LojaFit loja_fit(const EnergySeries& s, double grad_tol, std::optional<double> e_inf) {
    if (s.energy.size() != s.grad.size() || s.energy.size() < 2)
        throw std::invalid_argument("loja_fit: bad series");
    const double einf = e_inf.value_or(s.energy.back());
    LojaFit f = fit_window(s, grad_tol, einf);
    if (f.conclusive) {
        const double shift = grad_tol * grad_tol;
        const LojaFit up = fit_window(s, grad_tol, einf + shift);
        const LojaFit dn = fit_window(s, grad_tol, einf - shift);
        f.theta_shift_plus = up.theta - f.theta;
        f.theta_shift_minus = dn.theta - f.theta;
    }
    return f;
}

LojaFit loja_fit(const Trajectory& traj, double grad_tol) {
    EnergySeries s;
    for (const auto& r : traj.rows) {
        s.energy.push_back(r.ymh);
        s.grad.push_back(r.grad_norm);
    }
    LojaFit f = loja_fit(s, grad_tol);
    if (!traj.converged) {
        f.conclusive = false;
        f.note = "trajectory did not converge; " + f.note;
    }
    return f;
}

GradedReport graded_object_check(const HiggsPair& p0, const HiggsPair& limit, double var_tol) {
    GradedReport rep;
    const auto t0 = trace_power_fields(p0.phi);
    const auto t1 = trace_power_fields(limit.phi);
    for (std::size_t k = 0; k < t0.size(); ++k) rep.trace_drift = std::max(rep.trace_drift, (t1[k] - t0[k]).max_abs());

    const CriticalReport cr = is_critical(limit, 1e-5);
    rep.type = hn_type(cr, limit.grid().area(), limit.rank(), var_tol);
    rep.settled = rep.type.settled;
    if (!rep.settled) rep.note = "limit not settled: " + rep.type.note;

    // blocks: runs of equal slopes
    const int r = limit.rank();
    std::vector<int> ends;
    for (int k = 1; k <= r; ++k)
        if (k == r || rep.type.num[k] != rep.type.num[k - 1]) ends.push_back(k);
    const MatrixField m = moment1(limit).field();
    MatrixField prev(limit.grid(), r, FormDegree::zero);
    int start = 0;
    double off = 0.0;
    for (int e : ends) {
        MatrixField top = e == r ? MatrixField::identity(limit.grid(), r) : eigenprojector(m, e, 1e-6);
        const MatrixField block = top - prev;
        const double deg = chern_weil_degree(block, limit);
        rep.block_degrees.push_back(deg);
        const double expected = std::accumulate(rep.type.num.begin() + start, rep.type.num.begin() + e, 0.0) / rep.type.den;
        rep.block_slopes.push_back(expected / (e - start));
        rep.degree_mismatch = std::max(rep.degree_mismatch, std::abs(deg - expected));
        if (e < r) {
            // off-block parts relative to the filtration step top / (1 - top).
            // For A'' this is the second fundamental form dbar pi + [A'', pi],
            // which equals the off-diagonal blocks in any frame adapted to pi.
            MatrixField sff = dbar_raw(top).relabel(FormDegree::dzbar);
            sff += commutator(limit.a2, top);
            off += l2_inner(sff, sff);
            const MatrixField comp = MatrixField::identity(limit.grid(), r) - top;
            const MatrixField xz = limit.phi.with_degree(FormDegree::zero);
            const MatrixField lo = product(product(comp, xz), top);
            const MatrixField up = product(product(top, xz), comp);
            off += l2_inner(lo, lo) + l2_inner(up, up);
        }
        prev = top;
        start = e;
    }
    rep.off_block = std::sqrt(off);
    return rep;
}

}  // namespace higgs
