// Critical points, Harder-Narasimhan types, Chern-Weil degrees and the
// empirical Lojasiewicz exponent.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "higgs/flow.hpp"

namespace higgs {

struct CriticalReport {
    double grad_norm = 0.0;
    double residual_dA = 0.0;   // |d_A'' M|
    double residual_phi = 0.0;  // |[phi, M]|
    double residual_constant = 0.0;  // max residual / grad_norm
    bool critical = false;
    std::vector<double> eigenvalue_fields;  // sites x r, descending, of i M
    std::vector<double> eigen_mean;
    std::vector<double> spatial_variance;   // relative, per eigenvalue; see is_critical
};

CriticalReport is_critical(const HiggsPair& p, double tol);

struct HNType {
    std::vector<long> num;  // slope numerators, common denominator den
    long den = 1;
    bool settled = true;
    std::string note;

    std::vector<double> values() const;
    std::string str() const;
    bool operator==(const HNType& o) const { return num == o.num && den == o.den; }
};

inline constexpr double kVarTol = 1e-3;

// Slopes from the settled eigenvalue fields of i M at a critical pair.
HNType hn_type(const CriticalReport& rep, double area, int rank, double var_tol = kVarTol);
HNType hn_type(const HiggsPair& p, double tol_grad = 1e-5, double var_tol = kVarTol);
// Exact type from known slopes, e.g. (d, -d) for L + L^-1 on a unit torus.
HNType hn_type_from_slopes(std::vector<double> slopes);

// Pointwise projection onto the span of the top-k eigenvectors of i M.
MatrixField eigenprojector(const MatrixField& moment, int k, double gap_tol = 1e-8);
MatrixField eigenprojector(const HiggsPair& p, int k, double gap_tol = 1e-8);

// deg(pi) = (i/2pi) int tr(pi M) - kappa (|dbar pi + [A'', pi]|^2 + |[phi, pi]|^2)
inline constexpr double kKappa = 0.3183098861837907;  // 1/pi
double chern_weil_degree(const MatrixField& pi, const HiggsPair& p, double kappa = kKappa);
// The curvature term and the second-fundamental-form defect separately.
struct DegreeParts {
    double curvature_term = 0.0;
    double defect = 0.0;  // |D'' pi|^2
};
DegreeParts degree_parts(const MatrixField& pi, const HiggsPair& p);

// H_k = integral of the sum of the top-k eigenvalues of i M.
double convex_invariant(const HiggsPair& p, int k);

enum class Order { less, greater, equal, incomparable };
const char* to_string(Order o);
Order hn_partial_order(const HNType& a, const HNType& b);

struct LojaFit {
    double theta = 0.0;
    double r2 = 0.0;
    double c = 0.0;  // fitted constant in |grad| >= c (E - E_inf)^(1 - theta)
    double decades = 0.0;
    std::size_t first = 0, last = 0;  // row window
    bool conclusive = false;
    double theta_shift_plus = 0.0, theta_shift_minus = 0.0;
    std::string note;
};

struct EnergySeries {
    std::vector<double> energy;
    std::vector<double> grad;
};
// E_inf is the final energy unless given; window as described in the README.
LojaFit loja_fit(const EnergySeries& s, double grad_tol, std::optional<double> e_inf = std::nullopt);
LojaFit loja_fit(const Trajectory& traj, double grad_tol);

struct GradedReport {
    double trace_drift = 0.0;     // max pointwise |tr phi^k(limit) - tr phi^k(p0)|
    double off_block = 0.0;       // L2 norm of off-block A'' and phi in the eigenframe
    std::vector<double> block_degrees;
    std::vector<double> block_slopes;
    double degree_mismatch = 0.0;
    HNType type;
    bool settled = true;
    std::string note;
};
GradedReport graded_object_check(const HiggsPair& p0, const HiggsPair& limit,
                                 double var_tol = kVarTol);

}  // namespace higgs
