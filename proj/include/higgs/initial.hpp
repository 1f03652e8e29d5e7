// Initial data: random smooth Higgs pairs and split critical points with
// upper-triangular extensions.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "higgs/fields.hpp"

namespace higgs {

struct RandomSmoothSpec {
    double k0 = 1.0;          // spectral cutoff of the Gaussian damping exp(-|k|^2/k0^2)
    double amplitude = 0.5;   // RMS of A''
    double phi_amplitude = 1.0;  // RMS of phi after projection onto ker D
};

struct SplitSpec {
    int degree = 1;            // block degrees (d, -d)
    double eigen = 1.0;        // phi = diag(c, -c) in the split frame
    double extension = 1e-2;   // L2 size of the upper-triangular phi perturbation
};

struct InitialReport {
    HiggsPair pair;
    double residual = 0.0;    // higgs_residual of the result
    int kernel_dim = 0;       // model dimension of ker D on End(E)
    int retries = 0;
    long cg_iterations = 0;
    std::uint64_t seed_used = 0;
};

// Random smooth field with Gaussian Fourier modes, rescaled to the given RMS.
MatrixField random_smooth_field(const TorusGrid& grid, int rank, FormDegree degree, double k0,
                                double rms, std::mt19937_64& rng, bool trace_free_field);

InitialReport make_random_smooth(const TorusGrid& grid, int rank, bool fixed_det,
                                 const RandomSmoothSpec& spec, std::uint64_t seed);

// Continuum split point L + L^-1 (deg L = d) with phi = diag(c, -c),
// sampled in a periodic unitary frame. Rank 2, trace-free.
HiggsPair split_point_analytic(const TorusGrid& grid, const SplitSpec& spec);

struct SettleReport {
    HiggsPair pair;           // the visited pair of smallest gradient
    double grad_norm = 0.0;
    double time = 0.0;        // flow time at which it was reached
    long steps = 0;
    bool converged = false;
};
// Orthogonal projection onto the tangent space of B at p, the kernel of
// (a, psi) -> dbar psi + [A'', psi] + [a, phi].
Tangent project_tangent_B(const HiggsPair& p, const Tangent& v, double rel_tol = 1e-10);

// Nearest-point retraction onto B: Gauss-Newton on the holomorphicity
// constraint, moving A'' and phi together. Projecting phi alone onto ker D
// fails near split points, where lattice ker D is empty and phi is lost.
HiggsPair project_B(const HiggsPair& p, double tol = 1e-12, int max_iter = 20, double* residual = nullptr);

struct SettleConfig {
    double tol_grad = 1e-7;
    double T_max = 10.0;
    double c_cfl = 0.2;
    double leg = 0.01;     // flow time between retractions
    double give_up = 2.0;  // stop once grad exceeds this multiple of its minimum
};
// Flow from a continuum split point, retracting onto B after every leg.
// On the centered-difference lattice the gradient levels off at O(h^2) and
// then grows again (the lattice split point is not a stable critical point
// inside B), so the result is the best pair seen, with converged = false
// unless the tolerance was actually met.
SettleReport settle_split(const HiggsPair& start, const SettleConfig& cfg);

// Adds an upper-triangular phi perturbation pi X (1 - pi) to a settled
// split point and retracts onto B.
InitialReport make_split_plus_perturbation(const HiggsPair& settled, int top_rank,
                                           const SplitSpec& spec, std::uint64_t seed);

}  // namespace higgs
