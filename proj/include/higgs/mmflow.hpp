// Finite-dimensional hyperkahler sandbox: a unitary group acting on
// T*C^n = C^n x (C^n)^*, where the moment-map identities, the flow system and
// the slice machinery can be checked to machine precision.
#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "higgs/critical.hpp"

namespace higgs::sandbox {

using Vec = Eigen::VectorXcd;
using RealMat = Eigen::MatrixXd;
using RealVec = Eigen::VectorXd;

// Lie algebra elements are stored as n x n skew-Hermitian matrices in the
// span of the generators; the pairing is <u, u'> = Re tr(u^dagger u').
struct UnitaryRep {
    int n = 0;
    std::vector<Mat> generators;

    UnitaryRep(int n, std::vector<Mat> generators);

    int dim() const { return int(generators.size()); }
    // coordinates in the generator basis, by a Gram solve
    RealVec coords(const Mat& u) const;
    Mat element(const RealVec& c) const;
    // orthogonal projection onto the span of the generators
    Mat project(const Mat& u) const;

    const RealMat& gram() const { return gram_; }

private:
    RealMat gram_;
    Eigen::LDLT<RealMat> gram_ldlt_;
};

double pairing(const Mat& a, const Mat& b);

// U(2) acting diagonally on C^2 + C^2.
UnitaryRep u2_on_two_copies();
// U(1) acting on C^n with the given integer weights.
UnitaryRep u1_weights(const std::vector<int>& weights);
// The torus U(1)^n acting on C^n coordinatewise.
UnitaryRep torus(int n);

struct HKPoint {
    Vec v, w;

    HKPoint() = default;
    HKPoint(Vec v_, Vec w_) : v(std::move(v_)), w(std::move(w_)) {}
    static HKPoint zero(int n) { return {Vec::Zero(n), Vec::Zero(n)}; }

    int n() const { return int(v.size()); }
    HKPoint& operator+=(const HKPoint& o);
    HKPoint& operator-=(const HKPoint& o);
    HKPoint& operator*=(double s);
    HKPoint& axpy(double s, const HKPoint& o);
    bool all_finite() const { return v.allFinite() && w.allFinite(); }
};
HKPoint operator+(HKPoint a, const HKPoint& b);
HKPoint operator-(HKPoint a, const HKPoint& b);
HKPoint operator*(double s, HKPoint a);

// g(X, Y) = Re(X_v^dagger Y_v + X_w^dagger Y_w)
double metric(const HKPoint& a, const HKPoint& b);
double norm(const HKPoint& a);

// real coordinates [Re v, Im v, Re w, Im w]
RealVec pack(const HKPoint& x);
HKPoint unpack(const RealVec& r, int n);

enum class Structure { I, J, K };
const char* to_string(Structure s);
inline constexpr Structure kStructures[3] = {Structure::I, Structure::J, Structure::K};

// I(v, w) = (iv, iw), J(v, w) = (-conj w, conj v), K = IJ
HKPoint apply(Structure s, const HKPoint& x);

// Right action x.g = (g^-1 v, g^T w); the infinitesimal action of u is
// rho_x(u) = (-u v, u^T w), which equals delta rho(u)(x) for a linear model.
HKPoint group_action(const Mat& g, const HKPoint& x);
HKPoint rho(const HKPoint& x, const Mat& u);
HKPoint delta_rho(const Mat& u, const HKPoint& X);
// <u, rho_x^* X> = g(rho_x(u), X)
Mat rho_star(const UnitaryRep& rep, const HKPoint& x, const HKPoint& X);
// <u, (delta rho)^*(X, Y)> = g(delta rho(u)(X), Y)
Mat delta_rho_star(const UnitaryRep& rep, const HKPoint& X, const HKPoint& Y);

struct MomentMaps {
    Mat m[3];
    const Mat& operator[](Structure s) const { return m[int(s)]; }
};
// <mu_S(x), u> = g(S rho_x(u), x) / 2; quadratic, vanishing at the origin
MomentMaps moment_maps(const UnitaryRep& rep, const HKPoint& x);
// Max over generators and structures of |d mu_S(X) u - g(S rho_x(u), X)|
// with d mu by central differences (exact for quadratic maps up to roundoff).
double moment_defining_residual(const UnitaryRep& rep, const HKPoint& x, const HKPoint& X,
                                double eps = 1e-4);
// Max over structures of |mu(x.g) - g^-1 mu(x) g| for a group element g.
double equivariance_residual(const UnitaryRep& rep, const HKPoint& x, const Mat& g);

// |rho^* S rho(u) + [mu_S, u]| per structure
struct IdentityResidual {
    double r[3] = {0, 0, 0};
    double max() const;
};
IdentityResidual identity_adjoint(const UnitaryRep& rep, const HKPoint& x, const Mat& u);

struct ProductResiduals {
    double i_product = 0.0;  // rho^* I drho(u)X - [rho^*(IX), u] + drho^*(X, I rho(u))
    double i_commute = 0.0; // I drho(u)X - drho(u)(IX)
    double plain_product = 0.0; // rho^* drho(u)X - [rho^* X, u] - drho^*(X, rho(u))
    double max() const;
};
ProductResiduals product_formulas(const UnitaryRep& rep, const HKPoint& x, const Mat& u,
                                  const HKPoint& X);

// Q_H = |mu_1|^2 + |mu_2|^2 + |mu_3|^2 and the norm |mu_1|^2
double qh(const UnitaryRep& rep, const HKPoint& x);
double mu1_sq(const UnitaryRep& rep, const HKPoint& x);
// gradient of |mu_1|^2 / 2: I rho_x(mu_1)
HKPoint grad_half_mu1_sq(const UnitaryRep& rep, const HKPoint& x);
HKPoint grad_half_qh(const UnitaryRep& rep, const HKPoint& x);

// Hessian of Q_H as a real 4n x 4n matrix, twice the operator
// -S rho rho^* S X + S drho(mu_S)(X) summed over S = I, J, K.
RealMat hessian_qh(const UnitaryRep& rep, const HKPoint& x);
// Central second differences of Q_H in the packed coordinates.
RealMat hessian_qh_fd(const UnitaryRep& rep, const HKPoint& x, double eps = 1e-4);
// rho_x and rho_x^* as real matrices (Lie coordinates in the generator basis)
RealMat rho_matrix(const UnitaryRep& rep, const HKPoint& x);

struct SandboxConfig {
    double dt = 1e-3;
    double T = 10.0;
    int record_every = 10;
    // dt shrinks as dt_scale / |x|^2 when that is smaller (stiff quartic cases)
    bool adaptive = false;
    double dt_scale = 0.02;
    double dt_max = 0.5;
};

struct SandboxRow {
    double t;
    double energy;   // |mu_1|^2 / 2
    double grad;     // |I rho(mu_1)|
    double omega_drift;  // |Omega - mu_1(x)| of the coupled system
    double path_gap;     // |x_coupled - x_reduced|
};

struct SandboxTrajectory {
    std::vector<SandboxRow> rows;
    HKPoint x_final, x_coupled_final;
    double max_omega_drift_rate = 0.0;  // max over rows of drift / t
    double max_path_gap = 0.0;
    double worst_energy_increase = 0.0;
};

// Reduced flow dx/dt = -I rho_x(mu_1) alongside the coupled system
// dx/dt = -I rho_x(Omega), dOmega/dt = -rho_x^* rho_x(Omega), Omega(0) = mu_1(x0).
SandboxTrajectory run_sandbox_flow(const UnitaryRep& rep, const HKPoint& x0,
                                   const SandboxConfig& cfg);

struct SubspaceCheck {
    std::string name;
    double angle = 0.0;  // largest principal angle in radians (0 for equal spaces)
    int dim_lhs = 0, dim_rhs = 0;
    bool ok = false;
};
struct KernelReport {
    double grad_norm = 0.0;
    int dim_ker_rho_star = 0, dim_im_rho = 0, dim_ker_H = 0, dim_im_H = 0;
    int dim_ker_L = 0, dim_im_L = 0;
    std::vector<SubspaceCheck> checks;
    bool ok() const;
};
// Splittings at a critical point of Q_H, with H the Hessian and L = H + rho rho^*.
KernelReport kernel_decompositions(const UnitaryRep& rep, const HKPoint& x, double rank_tol = 1e-9,
                                   double angle_tol = 1e-7);

// Largest principal angle between the column spans of a and b.
double principal_angle(const RealMat& a, const RealMat& b);
// Orthonormal bases from an SVD with relative rank cutoff.
RealMat range_basis(const RealMat& m, double tol);
RealMat null_basis(const RealMat& m, double tol);

struct CoulombResult {
    Mat u;
    int iterations = 0;
    double residual = 0.0;
    std::vector<double> residual_history;
    std::vector<double> ratios;  // e_{k+1} / e_k^2
    bool converged = false;
};
// Newton on G(u) = rho_x^*(e^{-u}.y - x) over u in (ker rho_x)^perp.
// Throws NumericalError("outside slice neighborhood") after 50 iterations.
CoulombResult coulomb_newton(const UnitaryRep& rep, const HKPoint& x, const HKPoint& y,
                             double tol = 1e-12);

struct SandboxLoja {
    LojaFit fit;
    SandboxTrajectory traj;
    // max over the fitted tail of c (E - E_inf)^(1 - theta) - |grad|, relative
    double tail_violation = 0.0;
};
SandboxLoja sandbox_loja(const UnitaryRep& rep, const HKPoint& x0, const SandboxConfig& cfg,
                         std::optional<double> e_inf = std::nullopt);

// Random data for the identity suites.
HKPoint random_point(int n, std::mt19937_64& rng, double scale = 1.0);
Mat random_lie(const UnitaryRep& rep, std::mt19937_64& rng, double scale = 1.0);
Mat lie_exp(const Mat& u);
// exp of a random Lie element
Mat random_group(const UnitaryRep& rep, std::mt19937_64& rng, double scale = 1.0);

}  // namespace higgs::sandbox
