// Higgs pairs on the torus lattice, gauge actions, moment maps and the
// Yang-Mills-Higgs functional with its gradient.
//
// Conventions: A'' = a dzbar with a stored as a dzbar field, A' = -a^dagger,
// phi = p dz. Since dz^dzbar = -2i dx^dy, every dz^dzbar coefficient c
// becomes the dx^dy coefficient -2i c.
#pragma once

#include "higgs/geometry.hpp"

namespace higgs {

class LieField {
public:
    LieField() = default;
    explicit LieField(MatrixField u, double tol = 1e-12);
    // Skew-Hermitian part of an arbitrary zero-form.
    static LieField project(const MatrixField& u);

    const MatrixField& field() const { return u_; }
    operator const MatrixField&() const { return u_; }

private:
    MatrixField u_;
};

class GaugeTransform {
public:
    GaugeTransform() = default;
    // Re-unitarizes by polar projection when drift exceeds 1e-10.
    explicit GaugeTransform(MatrixField g);
    static GaugeTransform exp_of(const LieField& u, double t = 1.0);

    const MatrixField& field() const { return g_; }
    double unitarity_drift() const;

private:
    MatrixField g_;
};

class ComplexGauge {
public:
    ComplexGauge() = default;
    explicit ComplexGauge(MatrixField g, double cond_max = 1e8);
    ComplexGauge(const GaugeTransform& g) : g_(g.field()) {}

    const MatrixField& field() const { return g_; }
    double max_condition() const { return max_cond_; }

private:
    MatrixField g_;
    double max_cond_ = 1.0;
};

struct HiggsPair {
    MatrixField a2;   // dzbar
    MatrixField phi;  // dz
    bool fixed_det = false;

    HiggsPair() = default;
    HiggsPair(const TorusGrid& grid, int rank, bool fixed_det = false);
    HiggsPair(MatrixField a2, MatrixField phi, bool fixed_det = false);

    const TorusGrid& grid() const { return a2.grid(); }
    int rank() const { return a2.rank(); }
};

// Tangent vector (a'', psi) at a pair.
struct Tangent {
    MatrixField a2;   // dzbar
    MatrixField phi;  // dz

    Tangent() = default;
    Tangent(const TorusGrid& grid, int rank);
    Tangent(MatrixField a2, MatrixField phi);

    Tangent& operator+=(const Tangent& o);
    Tangent& operator*=(cplx s);
    Tangent& axpy(cplx s, const Tangent& o);
};

HiggsPair displaced(const HiggsPair& p, cplx s, const Tangent& v);

// Kahler metric on tangent vectors: 2 Re sum tr(a b^dagger + psi chi^dagger) h^2.
double metric(const Tangent& x, const Tangent& y);
// Complex structure I: multiplication by i on both components.
Tangent apply_I(const Tangent& x);
// J(a'', psi) = (psi^dagger, -(a'')^dagger).
Tangent apply_J(const Tangent& x);

// dx^dy coefficient of F_A, skew-Hermitian.
MatrixField curvature(const HiggsPair& p);
// *(F_A + [phi, phi*]) as a skew-Hermitian zero-form.
LieField moment1(const HiggsPair& p);
// 2i (dbar phi + [A'', phi]).
MatrixField momentC(const HiggsPair& p);
// L2 norm of dbar phi + [A'', phi]; the B-membership residual.
double higgs_residual(const HiggsPair& p);
bool in_B(const HiggsPair& p, double tol_B = 1e-8);

double ymh(const HiggsPair& p);
double qh(const HiggsPair& p);

// Downward flow velocity (i d_A'' M, i [phi, M]) with M = moment1(p).
Tangent grad_ymh(const HiggsPair& p);
// Same, also returning M; avoids recomputing it inside flows.
Tangent grad_ymh(const HiggsPair& p, MatrixField& moment);
// d/de YMH(p + e v) = kYmhSlope * l2(grad_ymh(p), v), summed over components.
// In terms of the Kahler metric this is -4 g(grad, v).
inline constexpr double kYmhSlope = -8.0;

HiggsPair apply_gauge(const ComplexGauge& g, const HiggsPair& p);
HiggsPair apply_gauge(const GaugeTransform& g, const HiggsPair& p);
// Pointwise conjugation g^-1 X g of a tangent (no inhomogeneous term).
Tangent transport(const ComplexGauge& g, const Tangent& x);
MatrixField conjugate(const MatrixField& g, const MatrixField& x);

Tangent inf_action(const HiggsPair& p, const MatrixField& u);
// Adjoint of inf_action: metric(inf_action(p,u), X) = l2_inner(u, rho_star(p,X)).
LieField rho_star(const HiggsPair& p, const Tangent& x);

// Pointwise helpers used by several modules.
MatrixField pointwise_inverse(const MatrixField& g);
MatrixField pointwise_exp(const MatrixField& u, cplx t = 1.0);
// Nearest unitary in each site via SVD.
MatrixField polar_unitary(const MatrixField& g);
double unitarity_drift(const MatrixField& g);

// D phi = dbar phi + [A'', phi] and its exact lattice adjoint.
MatrixField holomorphic_operator(const MatrixField& a2, const MatrixField& phi);
MatrixField holomorphic_adjoint(const MatrixField& a2, const MatrixField& v);

// Orthogonal projection of phi onto ker D by conjugate gradients on D D^dagger.
MatrixField project_holomorphic(const MatrixField& a2, const MatrixField& phi, double rel_tol,
                                long* iterations = nullptr);

}  // namespace higgs
