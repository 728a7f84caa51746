#pragma once

#include "bec/halfline.hpp"
#include "bec/model.hpp"

#include <vector>

namespace bec {

// Band lambda_ell(kappa, k) at fixed k with its maximum kappa_plus and minimum kappa_minus.
// Period-1 models only.
struct BandChart {
  ModelSpec model;
  int ell = 0;
  double k = 0.0;
  double kappa_plus = 0.0, kappa_minus = 0.0;
  double lam_plus = 0.0, lam_minus = 0.0;
  double curv_plus = 0.0, curv_minus = 0.0;  // lambda'' at the extrema

  double lambda(double kappa) const;
  double dlambda(double kappa) const;  // Hellmann-Feynman
  cvec vec(double kappa) const;        // eigenvector, arbitrary phase
};

// Throws AssumptionError unless the band is separated and has exactly two non-degenerate
// critical points in kappa.
BandChart band_chart(const ModelSpec& m, int ell, double k, int n_scan = 720);

// r(kappa) on the opposite monotone arc with lambda(r) = lambda(kappa); fixes kappa_plus and
// kappa_minus. The result is lifted to [kappa_plus, kappa_plus + 2 pi).
double reflection_map(const BandChart& c, double kappa);

// Band eigenvectors along a path, phases fixed by parallel transport from the first point
// (whose phase makes its largest component real positive).
std::vector<cvec> bloch_section(const BandChart& c, const std::vector<double>& path);

struct ScatterSolution {
  double kappa = 0.0, r = 0.0;
  cplx f_in, f_out, S;       // psi# ~ f_in psi(kappa) + f_out psi(r) + decaying
  double kernel_margin = 0;  // smallest / largest singular value of the boundary map
  double flux_defect = 0;    // |f_in|^2 lambda'(kappa) + |f_out|^2 lambda'(r), relative
};

// Bounded Dirichlet solution at z = lambda(kappa) built from the N - 1 decaying solutions and
// the two Bloch waves (sections transported from kappa_plus). Throws NumericalError when the
// kernel is not one-dimensional.
ScatterSolution edge_scattering_solution(const EdgeModelSpec& e, const BandChart& c, double kappa);

// Matching at the band top: psi# = alpha psi + beta psi' + decaying with psi' the generalized
// Bloch solution. q = Re(beta c / alpha) / |c|, c = C(psi^*, psi'), changes sign at
// semi-bound states.
struct SemiBoundProbe {
  cplx alpha, beta;
  double q = 0.0;
  double rel_beta = 0.0;  // |beta| / (|alpha| + |beta|)
};
SemiBoundProbe semi_bound_probe(const EdgeModelSpec& e, const BandChart& c);

// k where beta(kappa_plus) vanishes, bisected to 1e-10.
std::vector<double> semi_bound_scan(const EdgeModelSpec& e, int ell, const std::vector<double>& k_grid);

struct ScatterTrace {
  double delta = 0.0;
  std::vector<double> k;
  std::vector<cplx> S;
  std::vector<double> arg;  // continuous, starting at arg S(k1)
};
// S+(kappa_plus(k) + delta, k) on [k1, k2]; points are inserted until every phase step is
// below pi/4.
ScatterTrace scatter_trace(const EdgeModelSpec& e, int ell, double k1, double k2, double delta, int n_k = 201);

// Signed count of edge branches emerging (-1) or disappearing (+1) at the top of band ell on
// [k1, k2], read off ribbon branch endpoints.
int band_edge_events(const EdgeModelSpec& e, int ell, double k1, double k2, int n_k = 201,
                     const EdgeOptions& opt = {});

struct LevinsonReport {
  double k1 = 0.0, k2 = 0.0;
  std::vector<double> deltas, phase_changes;
  double phase_change = 0.0;  // Richardson extrapolation to delta -> 0
  int N_plus = 0;
  bool consistent = false;    // |phase_change - 2 pi N_plus| < 0.1
};
LevinsonReport levinson_delta(const EdgeModelSpec& e, int ell, double k1, double k2,
                              const std::vector<double>& deltas = {1e-2, 5e-3, 2.5e-3}, int n_k = 201,
                              const EdgeOptions& opt = {});

// arg det T(k) accumulated across a crossing (mu, k_c) of an edge branch with the Fermi line,
// T = L(mu - i eta) L(mu + i eta)^{-1} on the half circles eta = rho_z sqrt(1 - ((k - k_c) / rho_k)^2).
double transition_phase_change(const EdgeModelSpec& e, double mu, double k_c, double rho_k, double rho_z,
                               int n = 400);

}  // namespace bec
