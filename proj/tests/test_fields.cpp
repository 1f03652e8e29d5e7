#include <doctest.h>

#include <cmath>

#include "higgs/fields.hpp"
#include "test_util.hpp"

using namespace higgs;
using namespace testutil;

namespace {

// M = -2i (d'a + dbar a^dagger + [a, a^dagger] + [p, p^dagger]) built from the
// raw x/y stencils, site by site
MatrixField moment_oracle(const HiggsPair& p) {
    const MatrixField& a = p.a2;
    const MatrixField ad = adjoint(a);
    const MatrixField ax = dx_raw(a), ay = dy_raw(a), bx = dx_raw(ad), by = dy_raw(ad);
    MatrixField m(p.grid(), p.rank());
    const cplx i1(0.0, 1.0);
    for (std::size_t s = 0; s < m.sites(); ++s) {
        const Mat A = a.at(s), P = p.phi.at(s);
        const Mat dpa = 0.5 * (ax.at(s) - i1 * ay.at(s));
        const Mat dbad = 0.5 * (bx.at(s) + i1 * by.at(s));
        const Mat inner = dpa + dbad + A * A.adjoint() - A.adjoint() * A + P * P.adjoint() - P.adjoint() * P;
        m.set(s, -2.0 * i1 * inner);
    }
    return m;
}

HiggsPair random_pair(const TorusGrid& g, int r, std::mt19937_64& rng, double sa = 0.5, double sp = 0.7) {
    return HiggsPair(smooth_field(g, r, FormDegree::dzbar, rng, sa), smooth_field(g, r, FormDegree::dz, rng, sp));
}

Tangent random_tangent(const TorusGrid& g, int r, std::mt19937_64& rng) {
    return Tangent(smooth_field(g, r, FormDegree::dzbar, rng), smooth_field(g, r, FormDegree::dz, rng));
}

}  // namespace

TEST_CASE("moment map matches the component formula and is skew with zero total trace") {
    std::mt19937_64 rng(3);
    const TorusGrid g(16, 1.0);
    for (int r : {1, 2, 3}) {
        const HiggsPair p = random_pair(g, r, rng);
        const MatrixField m = moment1(p).field();
        CHECK(max_site_diff(m, moment_oracle(p)) < 1e-11);
        double skew = 0.0;
        for (std::size_t s = 0; s < m.sites(); ++s) skew = std::max(skew, (m.at(s) + m.at(s).adjoint()).norm());
        CHECK(skew < 1e-12);
        CHECK(std::abs(integrate_trace(m)) < 1e-12);
        CHECK(ymh(p) == doctest::Approx(l2_inner(m, m)).epsilon(1e-12));
    }
}

TEST_CASE("curvature vanishes for constant commuting A''; Higgs residual vanishes for constant phi with A'' = 0") {
    const TorusGrid g(8, 1.0);
    Mat d = Mat::Zero(2, 2);
    d(0, 0) = cplx(0.3, 0.1);
    d(1, 1) = cplx(-0.2, 0.4);
    const HiggsPair p(MatrixField::constant(g, d, FormDegree::dzbar), MatrixField(g, 2, FormDegree::dz));
    CHECK(sup_norm(curvature(p)) < 1e-14);
    Mat c(2, 2);
    c << 1.0, 2.0, 3.0, -1.0;
    const HiggsPair q(MatrixField(g, 2, FormDegree::dzbar), MatrixField::constant(g, c, FormDegree::dz));
    CHECK(higgs_residual(q) < 1e-14);
    CHECK(in_B(q));
    // the momentC residual is 2i times the holomorphicity defect
    std::mt19937_64 rng(9);
    const HiggsPair s = random_pair(g, 2, rng);
    CHECK(l2_norm(momentC(s)) == doctest::Approx(2.0 * higgs_residual(s)).epsilon(1e-12));
    CHECK(qh(s) == doctest::Approx(ymh(s) + 4.0 * higgs_residual(s) * higgs_residual(s)).epsilon(1e-10));
}

TEST_CASE("gradient matches central differences of YMH") {
    std::mt19937_64 rng(21);
    const TorusGrid g(12, 1.0);
    const HiggsPair p = random_pair(g, 2, rng);
    const Tangent gr = grad_ymh(p);
    for (int k = 0; k < 5; ++k) {
        const Tangent v = random_tangent(g, 2, rng);
        const double eps = 1e-5;
        const double fd = (ymh(displaced(p, eps, v)) - ymh(displaced(p, -eps, v))) / (2 * eps);
        const double an = kYmhSlope * (l2_inner(gr.a2, v.a2) + l2_inner(gr.phi, v.phi));
        CHECK(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
    MatrixField m;
    const Tangent g2 = grad_ymh(p, m);
    CHECK(max_site_diff(m, moment1(p).field()) < 1e-12);
    CHECK(max_site_diff(g2.phi, gr.phi) < 1e-14);
}

TEST_CASE("Kahler metric, I and J") {
    std::mt19937_64 rng(4);
    const TorusGrid g(8, 1.0);
    const Tangent x = random_tangent(g, 2, rng), y = random_tangent(g, 2, rng);
    CHECK(metric(x, y) == doctest::Approx(metric(y, x)).epsilon(1e-13));
    CHECK(metric(x, y) == doctest::Approx(2.0 * (l2_inner(x.a2, y.a2) + l2_inner(x.phi, y.phi))).epsilon(1e-13));
    CHECK(metric(apply_I(x), apply_I(y)) == doctest::Approx(metric(x, y)).epsilon(1e-12));
    CHECK(metric(apply_J(x), apply_J(y)) == doctest::Approx(metric(x, y)).epsilon(1e-12));
    const Tangent jj = apply_J(apply_J(x));
    CHECK(max_site_diff(jj.a2, -1.0 * x.a2) < 1e-14);
    CHECK(max_site_diff(jj.phi, -1.0 * x.phi) < 1e-14);
    const Tangent ij = apply_I(apply_J(x)), ji = apply_J(apply_I(x));
    CHECK(max_site_diff(ij.a2, -1.0 * ji.a2) < 1e-14);
    CHECK(max_site_diff(ij.phi, -1.0 * ji.phi) < 1e-14);
}

TEST_CASE("rho_star is the adjoint of the infinitesimal action") {
    std::mt19937_64 rng(8);
    const TorusGrid g(10, 1.2);
    const HiggsPair p = random_pair(g, 2, rng);
    for (int k = 0; k < 5; ++k) {
        const MatrixField u = skew_part(random_field(g, 2, FormDegree::zero, rng));
        const Tangent X(random_field(g, 2, FormDegree::dzbar, rng), random_field(g, 2, FormDegree::dz, rng));
        const double lhs = metric(inf_action(p, u), X);
        const double rhs = l2_inner(u, rho_star(p, X).field());
        CHECK(std::abs(lhs - rhs) < 1e-11 * (1 + std::abs(lhs)));
    }
}

TEST_CASE("infinitesimal action is the derivative of the gauge action") {
    std::mt19937_64 rng(12);
    const TorusGrid g(12, 1.0);
    const HiggsPair p = random_pair(g, 2, rng);
    const MatrixField u = skew_part(smooth_field(g, 2, FormDegree::zero, rng));
    const double t = 1e-5;
    const HiggsPair plus = apply_gauge(GaugeTransform::exp_of(LieField(u), t), p);
    const HiggsPair minus = apply_gauge(GaugeTransform::exp_of(LieField(u), -t), p);
    const Tangent v = inf_action(p, u);
    MatrixField da = plus.a2 - minus.a2, dp = plus.phi - minus.phi;
    da *= 1.0 / (2 * t);
    dp *= 1.0 / (2 * t);
    CHECK(max_site_diff(da, v.a2) < 1e-7);
    CHECK(max_site_diff(dp, v.phi) < 1e-7);
}

TEST_CASE("constant unitary gauge leaves YMH and the residual unchanged") {
    std::mt19937_64 rng(14);
    const TorusGrid g(12, 1.0);
    const HiggsPair p = random_pair(g, 3, rng);
    const Mat U = Eigen::HouseholderQR<Mat>(random_matrix(3, rng)).householderQ();
    const GaugeTransform gt(MatrixField::constant(g, U));
    const HiggsPair q = apply_gauge(gt, p);
    CHECK(ymh(q) == doctest::Approx(ymh(p)).epsilon(1e-12));
    CHECK(higgs_residual(q) == doctest::Approx(higgs_residual(p)).epsilon(1e-12));
    // M transforms by conjugation
    const MatrixField mq = moment1(q).field(), mp = moment1(p).field();
    double e = 0.0;
    for (std::size_t s = 0; s < mq.sites(); ++s) e = std::max(e, (mq.at(s) - U.adjoint() * mp.at(s) * U).norm());
    CHECK(e < 1e-12);
}

TEST_CASE("smooth unitary gauge invariance holds to second order in h") {
    auto defect = [](int n) {
        std::mt19937_64 rng(31);
        const TorusGrid g(n, 1.0);
        const HiggsPair p = random_pair(g, 2, rng, 0.3, 0.5);
        const MatrixField u = skew_part(smooth_field(g, 2, FormDegree::zero, rng, 1.0, 1));
        const HiggsPair q = apply_gauge(GaugeTransform::exp_of(LieField(u)), p);
        return std::abs(ymh(q) - ymh(p)) / ymh(p);
    };
    const double d16 = defect(16), d32 = defect(32);
    CHECK(d32 < d16);
    CHECK(d16 / d32 > 3.0);
}

TEST_CASE("group elements: exp of skew fields is unitary, polar projection, inverse") {
    std::mt19937_64 rng(2);
    const TorusGrid g(8, 1.0);
    const MatrixField u = skew_part(random_field(g, 3, FormDegree::zero, rng));
    const GaugeTransform gt = GaugeTransform::exp_of(LieField(u), 0.7);
    CHECK(gt.unitarity_drift() < 1e-12);
    const MatrixField m = random_field(g, 3, FormDegree::zero, rng);
    CHECK(unitarity_drift(polar_unitary(m)) < 1e-12);
    const MatrixField mi = pointwise_inverse(m);
    double e = 0.0;
    for (std::size_t s = 0; s < m.sites(); ++s) e = std::max(e, (m.at(s) * mi.at(s) - Mat::Identity(3, 3)).norm());
    CHECK(e < 1e-9);
    CHECK_THROWS_AS(LieField(MatrixField::identity(g, 2)), NumericalError);
}

TEST_CASE("projection onto ker D is an orthogonal projection") {
    std::mt19937_64 rng(6);
    const TorusGrid g(12, 1.0);
    const MatrixField a = smooth_field(g, 2, FormDegree::dzbar, rng, 0.4);
    const MatrixField x = smooth_field(g, 2, FormDegree::dz, rng);
    const MatrixField px = project_holomorphic(a, x, 1e-12);
    CHECK(l2_norm(holomorphic_operator(a, px)) < 1e-9 * l2_norm(x));
    const MatrixField ppx = project_holomorphic(a, px, 1e-12);
    CHECK(l2_norm(ppx - px) < 1e-9 * l2_norm(x));
    // x - Px lies in the range of D^dagger, orthogonal to ker D
    CHECK(std::abs(l2_inner(x - px, px)) < 1e-9 * l2_inner(x, x));

    const MatrixField w = random_field(g, 2, FormDegree::top, rng);
    const double lhs = l2_inner(holomorphic_operator(a, x), w);
    const double rhs = l2_inner(x, holomorphic_adjoint(a, w));
    CHECK(std::abs(lhs - rhs) < 1e-11 * (1 + std::abs(lhs)));
}
