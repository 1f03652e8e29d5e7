// Yang-Mills-Higgs gradient flow, Simpson's metric heat flow and the
// gauge-fixed composition that ties the two together.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "higgs/fields.hpp"

namespace higgs {

enum class Integrator { rk4, euler };

struct FlowConfig {
    double c_cfl = 0.2;
    double T_max = 10.0;
    Integrator integrator = Integrator::rk4;
    double tol_grad = 1e-6;
    int snapshot_every = 200;   // steps between observable rows before t = 1
    double geometric_ratio = 1.05;  // spacing of rows and snapshots after t = 1
    // dt is frozen at its initial CFL value (used by order and equivalence studies)
    bool freeze_dt = false;
    double blowup = 1e12;
    bool keep_snapshots = true;
    // exact landing times that always get a row and a snapshot
    std::vector<double> probe_times;
    // every n steps phi is projected back onto ker D (0: never). The lattice
    // flow keeps D phi = 0 only up to O(h^2), and near nonminimal critical
    // points the violation grows exponentially.
    int project_every = 0;
};

// dt = c_cfl h^2 / (1 + sup|M|)
double cfl_dt(const FlowConfig& cfg, const TorusGrid& grid, double sup_mu);

struct Observables {
    double time = 0.0;
    double ymh = 0.0;
    double qh = 0.0;
    double grad_norm = 0.0;
    double sup_mu = 0.0;
    double higgs_residual = 0.0;
    std::vector<cplx> trace_powers;  // integral of tr phi^k, k = 1..r
    std::vector<double> convex;      // H_1..H_r
};

struct Snapshot {
    double time;
    HiggsPair pair;
};

struct Trajectory {
    std::vector<Observables> rows;
    std::vector<Snapshot> snapshots;
    bool converged = false;
    long steps = 0;
    double final_time = 0.0;
    double dt_min = 0.0, dt_max = 0.0;
    // per-step monotonicity bookkeeping (relative increases, 0 if none)
    double worst_ymh_increase = 0.0;
    double worst_sup_increase = 0.0;
    long ymh_violations = 0;  // steps with relative increase above 1e-12
    // max over rows of pointwise |tr phi^k(t) - tr phi^k(0)|
    std::vector<double> trace_drift;
    double max_residual_increase = 0.0;  // max_t residual(t) - residual(0)
    // integral of |kYmhSlope| * |grad|^2 dt; equals YMH(0) - YMH(T)
    double dissipated = 0.0;
    long projections = 0;
    double max_projection_change = 0.0;  // L2 size of the largest projection correction
    HiggsPair final_pair;
};

struct FlowBlowup : NumericalError {
    FlowBlowup(const std::string& what, HiggsPair last, double t)
        : NumericalError(what), last_stable(std::move(last)), time(t) {}
    HiggsPair last_stable;
    double time;
};

// |grad|^2 in the L2 pairing of both components.
double grad_norm_sq(const Tangent& v);

HiggsPair step_gradient_flow(const HiggsPair& p, double dt, Integrator integ = Integrator::rk4);
Observables observe(const HiggsPair& p, double t);
Trajectory run_gradient_flow(const HiggsPair& p0, const FlowConfig& cfg);

// Pointwise tr(phi^k) for k = 1..r, as zero-forms.
std::vector<MatrixField> trace_power_fields(const MatrixField& phi);
// Sorted (descending) eigenvalues of i*M per site: sites x r, row-major.
std::vector<double> eigenvalue_fields(const MatrixField& moment);

struct HermitianMetric {
    MatrixField h;
    HiggsPair base;

    explicit HermitianMetric(HiggsPair base);
    HermitianMetric(MatrixField h, HiggsPair base);
};

// Full moment *(F_H + [phi0, phi0^*H]) of the base pair in the metric h,
// expressed in the fixed frame; skew with respect to h.
MatrixField metric_moment(const HermitianMetric& m);
// Spatial mean of tr(metric_moment)/r; zero for degree-zero bundles.
cplx heat_lambda(const MatrixField& moment_h);
HermitianMetric step_simpson_heat(const HermitianMetric& m, double dt,
                                  Integrator integ = Integrator::rk4);

struct Reconstruction {
    HiggsPair pair;
    MatrixField g;  // h^{-1/2}
};
Reconstruction reconstruct_pair(const HermitianMetric& m);
// Hermitian positive inverse square root per site.
MatrixField inverse_sqrt(const MatrixField& h);
// alpha = (g^-1 dg - dg^* g^*^-1)/2 from a time derivative estimate dg.
LieField alpha_from(const MatrixField& g, const MatrixField& dg);

struct GaugeFixResult {
    std::vector<MatrixField> S;  // S at t_0 .. t_n
    double max_drift_before_projection = 0.0;
    bool warned = false;
};
// RK4 for dS/dt = S (alpha - i lambda) on a uniform grid of step dt, with
// alpha sampled at the same nodes and linearly interpolated at midpoints.
GaugeFixResult gauge_fix_ode(const std::vector<MatrixField>& alpha_series,
                             const std::vector<cplx>& lambda_series, double dt);

struct EquivalenceReport {
    std::vector<double> times;
    std::vector<double> ymh_direct, ymh_composed;
    double ymh_discrepancy = 0.0;    // max relative |dYMH| / YMH(0)
    double eigen_discrepancy = 0.0;  // max L2 distance of eigenvalue fields / L2 norm at t=0
    double trace_discrepancy = 0.0;  // max pointwise |d tr phi^k| / max |tr phi^k(0)|
    double max_discrepancy = 0.0;
    // max L2 distance between the direct and composed pairs / |p0|
    double pair_discrepancy = 0.0;
    double unitarity_drift = 0.0;
    double dt = 0.0;
    long steps = 0;
    bool partial = false;
    std::string note;
    // square-root choice check: max L2 distance between composed pairs built from g
    // and from g u(t); nan when not requested.
    double root_choice_change = 0.0;
    HiggsPair direct_final, composed_final;
};

struct CompareConfig {
    double T = 1.0;
    double c_cfl = 0.2;
    int probes = 10;
    bool check_root_choice = false;
    unsigned long long seed = 1;  // drives the random constant unitary for the choice check
};
EquivalenceReport compare_flows(const HiggsPair& p0, const CompareConfig& cfg);

}  // namespace higgs
