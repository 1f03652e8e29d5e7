#include "higgs/mmflow.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

namespace higgs::sandbox {

namespace {

constexpr cplx I1(0.0, 1.0);

Mat commutator(const Mat& a, const Mat& b) { return a * b - b * a; }

double frob(const Mat& a) { return a.norm(); }

}  // namespace

double pairing(const Mat& a, const Mat& b) { return (a.adjoint() * b).trace().real(); }

UnitaryRep::UnitaryRep(int n_, std::vector<Mat> gens) : n(n_), generators(std::move(gens)) {
    if (n <= 0) throw ShapeError("UnitaryRep: dimension must be positive");
    if (generators.empty()) throw ShapeError("UnitaryRep: no generators");
    const int m = dim();
    gram_.resize(m, m);
    for (int a = 0; a < m; ++a) {
        const Mat& t = generators[a];
        if (t.rows() != n || t.cols() != n) throw ShapeError("UnitaryRep: generator shape");
        const double defect = (t + t.adjoint()).cwiseAbs().maxCoeff();
        if (defect > 1e-14 * std::max(1.0, t.cwiseAbs().maxCoeff()))
            throw NumericalError("UnitaryRep: generator not skew-Hermitian");
        for (int b = 0; b < m; ++b) gram_(a, b) = pairing(t, generators[b]);
    }
    Eigen::SelfAdjointEigenSolver<RealMat> es(gram_);
    if (es.eigenvalues().minCoeff() <= 1e-12 * es.eigenvalues().maxCoeff())
        throw NumericalError("UnitaryRep: generators linearly dependent");
    gram_ldlt_.compute(gram_);
}

RealVec UnitaryRep::coords(const Mat& u) const {
    RealVec b(dim());
    for (int a = 0; a < dim(); ++a) b(a) = pairing(generators[a], u);
    return gram_ldlt_.solve(b);
}

Mat UnitaryRep::element(const RealVec& c) const {
    Mat u = Mat::Zero(n, n);
    for (int a = 0; a < dim(); ++a) u += c(a) * generators[a];
    return u;
}

Mat UnitaryRep::project(const Mat& u) const { return element(coords(u)); }

UnitaryRep u2_on_two_copies() {
    Mat s[4] = {Mat::Identity(2, 2), Mat(2, 2), Mat(2, 2), Mat(2, 2)};
    s[1] << 0, 1, 1, 0;
    s[2] << 0, -I1, I1, 0;
    s[3] << 1, 0, 0, -1;
    std::vector<Mat> gens;
    for (const Mat& p : s) {
        Mat t = Mat::Zero(4, 4);
        t.topLeftCorner(2, 2) = I1 * p;
        t.bottomRightCorner(2, 2) = I1 * p;
        gens.push_back(t);
    }
    return UnitaryRep(4, gens);
}

UnitaryRep u1_weights(const std::vector<int>& weights) {
    const int n = int(weights.size());
    Mat t = Mat::Zero(n, n);
    for (int k = 0; k < n; ++k) t(k, k) = I1 * double(weights[k]);
    return UnitaryRep(n, {t});
}

UnitaryRep torus(int n) {
    std::vector<Mat> gens;
    for (int k = 0; k < n; ++k) {
        Mat t = Mat::Zero(n, n);
        t(k, k) = I1;
        gens.push_back(t);
    }
    return UnitaryRep(n, gens);
}

HKPoint& HKPoint::operator+=(const HKPoint& o) {
    v += o.v;
    w += o.w;
    return *this;
}
HKPoint& HKPoint::operator-=(const HKPoint& o) {
    v -= o.v;
    w -= o.w;
    return *this;
}
HKPoint& HKPoint::operator*=(double s) {
    v *= s;
    w *= s;
    return *this;
}
HKPoint& HKPoint::axpy(double s, const HKPoint& o) {
    v += s * o.v;
    w += s * o.w;
    return *this;
}
HKPoint operator+(HKPoint a, const HKPoint& b) { return a += b; }
HKPoint operator-(HKPoint a, const HKPoint& b) { return a -= b; }
HKPoint operator*(double s, HKPoint a) { return a *= s; }

double metric(const HKPoint& a, const HKPoint& b) {
    return (a.v.adjoint() * b.v).real()(0, 0) + (a.w.adjoint() * b.w).real()(0, 0);
}
double norm(const HKPoint& a) { return std::sqrt(metric(a, a)); }

RealVec pack(const HKPoint& x) {
    const int n = x.n();
    RealVec r(4 * n);
    r.segment(0, n) = x.v.real();
    r.segment(n, n) = x.v.imag();
    r.segment(2 * n, n) = x.w.real();
    r.segment(3 * n, n) = x.w.imag();
    return r;
}

HKPoint unpack(const RealVec& r, int n) {
    HKPoint x = HKPoint::zero(n);
    x.v.real() = r.segment(0, n);
    x.v.imag() = r.segment(n, n);
    x.w.real() = r.segment(2 * n, n);
    x.w.imag() = r.segment(3 * n, n);
    return x;
}

const char* to_string(Structure s) {
    switch (s) {
        case Structure::I: return "I";
        case Structure::J: return "J";
        case Structure::K: return "K";
    }
    return "?";
}

HKPoint apply(Structure s, const HKPoint& x) {
    switch (s) {
        case Structure::I: return {I1 * x.v, I1 * x.w};
        case Structure::J: return {-x.w.conjugate(), x.v.conjugate()};
        case Structure::K: {
            const HKPoint j = apply(Structure::J, x);
            return {I1 * j.v, I1 * j.w};
        }
    }
    return x;
}

HKPoint group_action(const Mat& g, const HKPoint& x) {
    return {g.inverse() * x.v, g.transpose() * x.w};
}

HKPoint rho(const HKPoint& x, const Mat& u) { return {-(u * x.v), u.transpose() * x.w}; }

HKPoint delta_rho(const Mat& u, const HKPoint& X) { return rho(X, u); }

Mat rho_star(const UnitaryRep& rep, const HKPoint& x, const HKPoint& X) {
    RealVec b(rep.dim());
    for (int a = 0; a < rep.dim(); ++a) b(a) = metric(rho(x, rep.generators[a]), X);
    return rep.element(rep.gram().ldlt().solve(b));
}

Mat delta_rho_star(const UnitaryRep& rep, const HKPoint& X, const HKPoint& Y) {
    return rho_star(rep, X, Y);
}

MomentMaps moment_maps(const UnitaryRep& rep, const HKPoint& x) {
    MomentMaps mm;
    RealVec b(rep.dim());
    for (Structure s : kStructures) {
        for (int a = 0; a < rep.dim(); ++a) b(a) = 0.5 * metric(apply(s, rho(x, rep.generators[a])), x);
        mm.m[int(s)] = rep.element(rep.gram().ldlt().solve(b));
    }
    return mm;
}

double moment_defining_residual(const UnitaryRep& rep, const HKPoint& x, const HKPoint& X,
                                double eps) {
    const MomentMaps p = moment_maps(rep, x + eps * X);
    const MomentMaps m = moment_maps(rep, x - eps * X);
    double worst = 0.0;
    for (Structure s : kStructures) {
        const Mat dmu = (p[s] - m[s]) / (2.0 * eps);
        for (const Mat& u : rep.generators) {
            const double lhs = pairing(dmu, u);
            const double rhs = metric(apply(s, rho(x, u)), X);
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    }
    return worst;
}

double equivariance_residual(const UnitaryRep& rep, const HKPoint& x, const Mat& g) {
    const MomentMaps a = moment_maps(rep, group_action(g, x));
    const MomentMaps b = moment_maps(rep, x);
    const Mat gi = g.inverse();
    double worst = 0.0;
    for (Structure s : kStructures) worst = std::max(worst, frob(a[s] - gi * b[s] * g));
    return worst;
}

double IdentityResidual::max() const { return std::max({r[0], r[1], r[2]}); }

IdentityResidual identity_adjoint(const UnitaryRep& rep, const HKPoint& x, const Mat& u) {
    IdentityResidual res;
    const MomentMaps mm = moment_maps(rep, x);
    const HKPoint ru = rho(x, u);
    for (Structure s : kStructures)
        res.r[int(s)] = frob(rho_star(rep, x, apply(s, ru)) + commutator(mm[s], u));
    return res;
}

double ProductResiduals::max() const { return std::max({i_product, i_commute, plain_product}); }

ProductResiduals product_formulas(const UnitaryRep& rep, const HKPoint& x, const Mat& u,
                                  const HKPoint& X) {
    ProductResiduals res;
    const HKPoint du = delta_rho(u, X);
    const HKPoint IX = apply(Structure::I, X);
    const HKPoint ru = rho(x, u);
    res.i_product = frob(rho_star(rep, x, apply(Structure::I, du)) - commutator(rho_star(rep, x, IX), u) +
                    delta_rho_star(rep, X, apply(Structure::I, ru)));
    res.i_commute = norm(apply(Structure::I, du) - delta_rho(u, IX));
    res.plain_product = frob(rho_star(rep, x, du) - commutator(rho_star(rep, x, X), u) -
                     delta_rho_star(rep, X, ru));
    return res;
}

double mu1_sq(const UnitaryRep& rep, const HKPoint& x) {
    const Mat m = moment_maps(rep, x)[Structure::I];
    return pairing(m, m);
}

double qh(const UnitaryRep& rep, const HKPoint& x) {
    const MomentMaps mm = moment_maps(rep, x);
    double q = 0.0;
    for (Structure s : kStructures) q += pairing(mm[s], mm[s]);
    return q;
}

HKPoint grad_half_mu1_sq(const UnitaryRep& rep, const HKPoint& x) {
    return apply(Structure::I, rho(x, moment_maps(rep, x)[Structure::I]));
}

HKPoint grad_half_qh(const UnitaryRep& rep, const HKPoint& x) {
    const MomentMaps mm = moment_maps(rep, x);
    HKPoint g = HKPoint::zero(x.n());
    for (Structure s : kStructures) g += apply(s, rho(x, mm[s]));
    return g;
}

RealMat rho_matrix(const UnitaryRep& rep, const HKPoint& x) {
    RealMat m(4 * rep.n, rep.dim());
    for (int a = 0; a < rep.dim(); ++a) m.col(a) = pack(rho(x, rep.generators[a]));
    return m;
}

RealMat hessian_qh(const UnitaryRep& rep, const HKPoint& x) {
    const int n = rep.n;
    const MomentMaps mm = moment_maps(rep, x);
    RealMat H(4 * n, 4 * n);
    for (int c = 0; c < 4 * n; ++c) {
        RealVec e = RealVec::Zero(4 * n);
        e(c) = 1.0;
        const HKPoint X = unpack(e, n);
        HKPoint out = HKPoint::zero(n);
        for (Structure s : kStructures) {
            const HKPoint SX = apply(s, X);
            out -= apply(s, rho(x, rho_star(rep, x, SX)));
            out += apply(s, delta_rho(mm[s], X));
        }
        H.col(c) = 2.0 * pack(out);
    }
    return H;
}

RealMat hessian_qh_fd(const UnitaryRep& rep, const HKPoint& x, double eps) {
    const int n = rep.n, d = 4 * n;
    const RealVec x0 = pack(x);
    auto f = [&](const RealVec& y) { return qh(rep, unpack(y, n)); };
    RealMat H(d, d);
    const double f0 = f(x0);
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
            RealVec pp = x0, pm = x0, mp = x0, mm = x0;
            if (a == b) {
                pp(a) += eps;
                mm(a) -= eps;
                H(a, a) = (f(pp) - 2.0 * f0 + f(mm)) / (eps * eps);
                continue;
            }
            pp(a) += eps, pp(b) += eps;
            pm(a) += eps, pm(b) -= eps;
            mp(a) -= eps, mp(b) += eps;
            mm(a) -= eps, mm(b) -= eps;
            H(a, b) = H(b, a) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * eps * eps);
        }
    return H;
}

namespace {

struct FlowState {
    HKPoint x;
    Mat omega;
};

HKPoint reduced_velocity(const UnitaryRep& rep, const HKPoint& x) {
    return -1.0 * grad_half_mu1_sq(rep, x);
}

FlowState coupled_velocity(const UnitaryRep& rep, const FlowState& s) {
    const HKPoint r = rho(s.x, s.omega);
    return {-1.0 * apply(Structure::I, r), -rho_star(rep, s.x, r)};
}

HKPoint rk4_reduced(const UnitaryRep& rep, const HKPoint& x, double dt) {
    const HKPoint k1 = reduced_velocity(rep, x);
    const HKPoint k2 = reduced_velocity(rep, x + (0.5 * dt) * k1);
    const HKPoint k3 = reduced_velocity(rep, x + (0.5 * dt) * k2);
    const HKPoint k4 = reduced_velocity(rep, x + dt * k3);
    HKPoint out = x;
    out.axpy(dt / 6.0, k1).axpy(dt / 3.0, k2).axpy(dt / 3.0, k3).axpy(dt / 6.0, k4);
    return out;
}

FlowState rk4_coupled(const UnitaryRep& rep, const FlowState& s, double dt) {
    auto shift = [](const FlowState& a, double c, const FlowState& k) {
        return FlowState{a.x + c * k.x, a.omega + c * k.omega};
    };
    const FlowState k1 = coupled_velocity(rep, s);
    const FlowState k2 = coupled_velocity(rep, shift(s, 0.5 * dt, k1));
    const FlowState k3 = coupled_velocity(rep, shift(s, 0.5 * dt, k2));
    const FlowState k4 = coupled_velocity(rep, shift(s, dt, k3));
    FlowState out = s;
    out.x.axpy(dt / 6.0, k1.x).axpy(dt / 3.0, k2.x).axpy(dt / 3.0, k3.x).axpy(dt / 6.0, k4.x);
    out.omega += (dt / 6.0) * (k1.omega + 2.0 * k2.omega + 2.0 * k3.omega + k4.omega);
    return out;
}

}  // namespace

SandboxTrajectory run_sandbox_flow(const UnitaryRep& rep, const HKPoint& x0,
                                   const SandboxConfig& cfg) {
    if (!(cfg.dt > 0.0) || !(cfg.T >= 0.0)) throw std::invalid_argument("run_sandbox_flow: bad dt or T");
    SandboxTrajectory traj;
    HKPoint x = x0;
    FlowState c{x0, moment_maps(rep, x0)[Structure::I]};
    double t = 0.0;
    double e_prev = 0.5 * mu1_sq(rep, x);
    auto record = [&] {
        const Mat m = moment_maps(rep, x)[Structure::I];
        SandboxRow row;
        row.t = t;
        row.energy = 0.5 * pairing(m, m);
        row.grad = norm(apply(Structure::I, rho(x, m)));
        row.omega_drift = frob(c.omega - moment_maps(rep, c.x)[Structure::I]);
        row.path_gap = norm(c.x - x);
        traj.rows.push_back(row);
        if (t > 0.0) traj.max_omega_drift_rate = std::max(traj.max_omega_drift_rate, row.omega_drift / t);
        traj.max_path_gap = std::max(traj.max_path_gap, row.path_gap);
    };
    record();
    long step = 0;
    while (t < cfg.T * (1.0 - 1e-14)) {
        double dt = cfg.dt;
        if (cfg.adaptive) {
            const double nx = metric(x, x);
            dt = std::min(cfg.dt_max, std::max(cfg.dt, cfg.dt_scale / std::max(nx, 1e-300)));
        }
        dt = std::min(dt, cfg.T - t);
        x = rk4_reduced(rep, x, dt);
        c = rk4_coupled(rep, c, dt);
        if (!x.all_finite() || !c.x.all_finite()) throw NumericalError("run_sandbox_flow: non-finite state");
        t += dt;
        ++step;
        const double e = 0.5 * mu1_sq(rep, x);
        if (e > e_prev) traj.worst_energy_increase = std::max(traj.worst_energy_increase, (e - e_prev) / std::max(e_prev, 1e-300));
        e_prev = e;
        if (step % std::max(1, cfg.record_every) == 0 || t >= cfg.T * (1.0 - 1e-14)) record();
    }
    traj.x_final = x;
    traj.x_coupled_final = c.x;
    return traj;
}

RealMat range_basis(const RealMat& m, double tol) {
    if (m.cols() == 0) return RealMat(m.rows(), 0);
    Eigen::JacobiSVD<RealMat> svd(m, Eigen::ComputeFullU);
    const auto& s = svd.singularValues();
    const double cut = tol * std::max(1.0, s.size() ? s(0) : 0.0);
    int k = 0;
    while (k < s.size() && s(k) > cut) ++k;
    return svd.matrixU().leftCols(k);
}

RealMat null_basis(const RealMat& m, double tol) {
    Eigen::JacobiSVD<RealMat> svd(m, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const double cut = tol * std::max(1.0, s.size() ? s(0) : 0.0);
    int k = 0;
    while (k < s.size() && s(k) > cut) ++k;
    return svd.matrixV().rightCols(m.cols() - k);
}

double principal_angle(const RealMat& a, const RealMat& b) {
    if (a.cols() != b.cols()) return M_PI / 2;
    if (a.cols() == 0) return 0.0;
    Eigen::JacobiSVD<RealMat> svd(a.transpose() * b);
    const double smin = std::min(1.0, svd.singularValues().minCoeff());
    // acos loses precision near 1; use the sine from the residual instead
    const RealMat resid = b - a * (a.transpose() * b);
    Eigen::JacobiSVD<RealMat> rs(resid);
    const double smax = std::min(1.0, rs.singularValues().maxCoeff());
    return smin > 0.7 ? std::asin(smax) : std::acos(smin);
}

namespace {

// [a b] with orthonormalized columns
RealMat join(const RealMat& a, const RealMat& b, double tol) {
    RealMat m(a.rows(), a.cols() + b.cols());
    m << a, b;
    return range_basis(m, tol);
}

SubspaceCheck compare(const std::string& name, const RealMat& a, const RealMat& b, double tol) {
    SubspaceCheck c;
    c.name = name;
    c.dim_lhs = int(a.cols());
    c.dim_rhs = int(b.cols());
    c.angle = principal_angle(a, b);
    c.ok = c.dim_lhs == c.dim_rhs && c.angle <= tol;
    return c;
}

}  // namespace

bool KernelReport::ok() const {
    for (const auto& c : checks)
        if (!c.ok) return false;
    return true;
}

KernelReport kernel_decompositions(const UnitaryRep& rep, const HKPoint& x, double rank_tol,
                                   double angle_tol) {
    KernelReport out;
    out.grad_norm = 2.0 * norm(grad_half_qh(rep, x));
    if (out.grad_norm > 1e-10) {
        std::ostringstream os;
        os << "kernel_decompositions: point not critical (|grad Q_H| = " << out.grad_norm << ")";
        throw std::invalid_argument(os.str());
    }
    // Euclidean structure on Lie(G) from the Gram matrix: rho^* = G^-1 R^T
    const RealMat R = rho_matrix(rep, x);
    const RealMat Ginv = rep.gram().inverse();
    const RealMat Rs = Ginv * R.transpose();
    const RealMat H = hessian_qh(rep, x);
    const RealMat L = H + R * Rs;

    const RealMat ker_rs = null_basis(Rs, rank_tol);
    const RealMat im_r = range_basis(R, rank_tol);
    const RealMat ker_H = null_basis(H, rank_tol);
    const RealMat im_H = range_basis(H, rank_tol);
    const RealMat ker_L = null_basis(L, rank_tol);
    const RealMat im_L = range_basis(L, rank_tol);
    out.dim_ker_rho_star = int(ker_rs.cols());
    out.dim_im_rho = int(im_r.cols());
    out.dim_ker_H = int(ker_H.cols());
    out.dim_im_H = int(im_H.cols());
    out.dim_ker_L = int(ker_L.cols());
    out.dim_im_L = int(im_L.cols());

    const int d = int(R.rows());
    const RealMat full = RealMat::Identity(d, d);
    // ker L = ker H n ker rho^*: intersection as the null space of the stacked maps
    RealMat stacked(H.rows() + Rs.rows(), d);
    stacked << H, Rs;
    out.checks.push_back(compare("ker L = ker H cap ker rho*", ker_L, null_basis(stacked, rank_tol), angle_tol));
    out.checks.push_back(compare("T = ker rho* + im rho", join(ker_rs, im_r, rank_tol), full, angle_tol));
    // the sum is direct: the two pieces are orthogonal
    {
        SubspaceCheck c;
        c.name = "ker rho* perp im rho";
        c.dim_lhs = int(ker_rs.cols());
        c.dim_rhs = int(im_r.cols());
        const double overlap = (ker_rs.cols() && im_r.cols()) ? (ker_rs.transpose() * im_r).norm() : 0.0;
        c.angle = std::asin(std::min(1.0, overlap));
        c.ok = c.angle <= angle_tol && c.dim_lhs + c.dim_rhs == d;
        out.checks.push_back(c);
    }
    out.checks.push_back(compare("im L = im H + im rho", im_L, join(im_H, im_r, rank_tol), angle_tol));
    {
        SubspaceCheck c;
        c.name = "im H perp im rho";
        c.dim_lhs = int(im_H.cols());
        c.dim_rhs = int(im_r.cols());
        const double overlap = (im_H.cols() && im_r.cols()) ? (im_H.transpose() * im_r).norm() : 0.0;
        c.angle = std::asin(std::min(1.0, overlap));
        c.ok = c.angle <= angle_tol;
        out.checks.push_back(c);
    }
    return out;
}

namespace {

// d/ds exp(u + s du) at s = 0 from the block triangular exponential
Mat dexp(const Mat& u, const Mat& du) {
    const int n = int(u.rows());
    Mat big = Mat::Zero(2 * n, 2 * n);
    big.topLeftCorner(n, n) = u;
    big.bottomRightCorner(n, n) = u;
    big.topRightCorner(n, n) = du;
    const Mat e = big.exp();
    return e.topRightCorner(n, n);
}

}  // namespace

CoulombResult coulomb_newton(const UnitaryRep& rep, const HKPoint& x, const HKPoint& y, double tol) {
    // orthonormal basis (in the Lie pairing) of (ker rho_x)^perp
    const RealMat R = rho_matrix(rep, x);
    Eigen::SelfAdjointEigenSolver<RealMat> gs(rep.gram());
    const RealMat Ghalf_inv = gs.eigenvectors() * gs.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                              gs.eigenvectors().transpose();
    // in orthonormal Lie coordinates rho is R G^{-1/2}
    const RealMat Ro = R * Ghalf_inv;
    Eigen::JacobiSVD<RealMat> svd(Ro, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    int k = 0;
    while (k < sv.size() && sv(k) > 1e-10 * std::max(1.0, sv.size() ? sv(0) : 0.0)) ++k;
    const RealMat B = Ghalf_inv * svd.matrixV().leftCols(k);  // generator coords of the basis
    std::vector<Mat> basis;
    for (int j = 0; j < k; ++j) basis.push_back(rep.element(B.col(j)));

    CoulombResult res;
    res.u = Mat::Zero(rep.n, rep.n);
    if (k == 0) {
        res.converged = true;
        return res;
    }
    // G(u) in the same orthonormal coordinates
    auto Gvec = [&](const Mat& u) {
        const HKPoint gy = group_action((-u).exp(), y);
        const Mat r = rho_star(rep, x, gy - x);
        RealVec out(k);
        for (int j = 0; j < k; ++j) out(j) = pairing(basis[j], r);
        return out;
    };
    RealVec c = RealVec::Zero(k);
    for (int it = 0; it <= 50; ++it) {
        const Mat u = res.u;
        const RealVec g = Gvec(u);
        res.residual = g.norm();
        res.residual_history.push_back(res.residual);
        if (res.residual <= tol) {
            res.converged = true;
            res.iterations = it;
            break;
        }
        if (it == 50) break;
        // exact Jacobian: e^{-u}.y = (e^{u} y_v, e^{-u^T} y_w)
        RealMat Jm(k, k);
        for (int j = 0; j < k; ++j) {
            const Mat de = dexp(u, basis[j]);
            const Mat demT = dexp(-u.transpose(), -basis[j].transpose());
            const HKPoint d{de * y.v, demT * y.w};
            const Mat r = rho_star(rep, x, d);
            for (int i = 0; i < k; ++i) Jm(i, j) = pairing(basis[i], r);
        }
        const RealVec step = Jm.fullPivLu().solve(-g);
        if (!step.allFinite()) break;
        c += step;
        res.u = Mat::Zero(rep.n, rep.n);
        for (int j = 0; j < k; ++j) res.u += c(j) * basis[j];
    }
    if (!res.converged) throw NumericalError("coulomb_newton: outside slice neighborhood");
    const auto& h = res.residual_history;
    for (std::size_t i = 0; i + 1 < h.size(); ++i)
        // ratios are only meaningful above the roundoff floor
        if (h[i + 1] > 1e-13) res.ratios.push_back(h[i + 1] / (h[i] * h[i]));
    return res;
}

SandboxLoja sandbox_loja(const UnitaryRep& rep, const HKPoint& x0, const SandboxConfig& cfg,
                         std::optional<double> e_inf) {
    SandboxLoja out;
    out.traj = run_sandbox_flow(rep, x0, cfg);
    EnergySeries s;
    for (const auto& r : out.traj.rows) {
        s.energy.push_back(r.energy);
        s.grad.push_back(r.grad);
    }
    const double grad_tol = std::max(out.traj.rows.back().grad, 1e-14);
    out.fit = loja_fit(s, grad_tol, e_inf);
    if (out.fit.conclusive) {
        const double einf = e_inf.value_or(s.energy.back());
        for (std::size_t i = out.fit.first; i <= out.fit.last; ++i) {
            const double bound = out.fit.c * std::pow(s.energy[i] - einf, 1.0 - out.fit.theta);
            out.tail_violation = std::max(out.tail_violation, (bound - s.grad[i]) / std::max(bound, 1e-300));
        }
    }
    return out;
}

HKPoint random_point(int n, std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> nd;
    HKPoint x = HKPoint::zero(n);
    for (int k = 0; k < n; ++k) {
        x.v(k) = scale * cplx(nd(rng), nd(rng));
        x.w(k) = scale * cplx(nd(rng), nd(rng));
    }
    return x;
}

Mat random_lie(const UnitaryRep& rep, std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> nd;
    RealVec c(rep.dim());
    for (int a = 0; a < rep.dim(); ++a) c(a) = scale * nd(rng);
    return rep.element(c);
}

Mat lie_exp(const Mat& u) { return u.exp(); }

Mat random_group(const UnitaryRep& rep, std::mt19937_64& rng, double scale) {
    return random_lie(rep, rng, scale).exp();
}

}  // namespace higgs::sandbox
