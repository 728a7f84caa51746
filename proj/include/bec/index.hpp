#pragma once

#include "bec/core.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace bec {

// Continuous lifts theta_i(x_j) of the eigenvalue phases of a matrix family.
struct PhaseFamily {
  std::vector<double> x;
  std::vector<std::vector<double>> theta;  // theta[i][j]: curve i at grid point j

  int curves() const { return static_cast<int>(theta.size()); }
  int points() const { return static_cast<int>(x.size()); }
};

// Phases matched between neighbours by optimal assignment (circular distance, small
// eigenvector-overlap tie-break). Throws NumericalError("refine grid ...") when a matched
// step reaches pi/2. x defaults to 0..1.
PhaseFamily phase_family(const std::vector<cmat>& mats, const std::vector<double>& x = {});

// Same, for unit-modulus values already given per point (no eigenvectors).
PhaseFamily phase_family_from_phases(const std::vector<std::vector<double>>& phases, const std::vector<double>& x);

// (2 pi)^{-1} sum_i (theta_i(b) - theta_i(a)).
double winding(const PhaseFamily& fam);

// Max distance between paired phases at an endpoint (0 when evenly degenerate).
double endpoint_pairing_defect(const std::vector<double>& phases);

struct EdiOptions {
  std::uint64_t seed = 0x5eed;
  int references = 3;
  int max_draws = 10;
  double degeneracy_tol = 1e-6;
};

// (-1)^n with n the number of crossings of a generic reference phase by the curves.
int endpoint_degenerate_index(const PhaseFamily& fam, const EdiOptions& opt = {});

// Crossings of the reference phase alpha by all curves.
int count_phase_crossings(const PhaseFamily& fam, double alpha);

// Winding of det T over a closed family (first == last).
int det_winding(const std::vector<cmat>& mats);
// Accumulated arg of a sequence of nonzero complex numbers, step contract pi/2.
double accumulated_arg(const std::vector<cplx>& values);

struct KramersReport {
  bool pass = false;
  double violation = 0.0;
};
// eps conj(T) eps^{-1} = T^{-1}.
KramersReport kramers_check(const cmat& T, double tol = 1e-8);

// sigma(S) = eps^{-1} conj(S)^{-1} eps; T = S sigma(S) has the Kramers property.
cmat kramers_sigma(const cmat& S);
cmat random_kramers(int dim, std::uint64_t seed);

// Smooth family phi -> T(phi) on [0, pi] with Kramers endpoints and known index.
struct KramersFamily {
  std::function<cmat(double)> at;
  int expected_index = 1;
};
// Block windings w_b conjugated by a smooth quaternionic matrix; unitary = true keeps T(phi)
// unitary at the endpoints (needed for the Pfaffian route).
KramersFamily kramers_family(int dim, std::uint64_t seed, bool unitary_endpoints = false);

// Samples a family on n points of [0, pi] and returns its index, doubling n up to 4 times
// when the phase step contract fails.
int family_index(const std::function<cmat(double)>& T, int n_points = 200, const EdiOptions& opt = {});

// Parlett-Reid skew elimination with pivoting.
cplx pfaffian(const cmat& W);

// Sign connecting the continuous branch of sqrt(det W) started at pf W(0) to pf W(pi).
int fu_kane_index(const std::vector<cmat>& W_family);

// Optimal assignment (Hungarian): returns perm with row i assigned to column perm[i].
std::vector<int> assign_min_cost(const Eigen::MatrixXd& cost);

}  // namespace bec
