#pragma once

#include "bec/index.hpp"
#include "bec/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bec {

// Discretized bundle over (phi1, phi2): phi1 is a periodic loop (contour or kappa), phi2 = k
// on a closed grid k_i = 2 pi i / (n2 - 1) whose last fiber repeats the first.
struct BundleGrid {
  int n1 = 0, n2 = 0;
  std::vector<double> phi1, phi2;
  std::vector<cmat> fibers;          // fibers[i1 + n1 * i2], ambient x rank, orthonormal
  std::optional<cmat> theta;         // Theta on the ambient space (antilinear)
  std::vector<int> pair1;            // tau on phi1 indices, empty when no pairing
  std::vector<cplx> gamma;           // contour points (solution bundle)
  std::string kind;                  // "solution" or "bloch"
  int refinement_level = 0;

  const cmat& fiber(int i1, int i2) const { return fibers[i1 + n1 * i2]; }
  cmat& fiber(int i1, int i2) { return fibers[i1 + n1 * i2]; }
  int pair2(int i2) const { return n2 - 1 - i2; }
  int rank() const { return static_cast<int>(fibers.front().cols()); }
};

// Rectangle mu -> mu - ih -> e0 - ih -> e0 + ih -> mu + ih, clockwise, n arclength-uniform
// points with z_{n-j} = conj(z_j).
std::vector<cplx> rectangle_contour(double mu, double e0, double h, int n);

struct ContourChoice {
  double e0 = 0.0, h = 0.0;
  int filled = 0;
};
// Throws AssumptionError when mu is not in a gap.
ContourChoice choose_contour(const ModelSpec& m, double mu);

BundleGrid solution_bundle(const ModelSpec& m, double mu, int n_contour = 256, int n_k = 101);
BundleGrid bloch_bundle(const ModelSpec& m, const std::vector<int>& bands, int n_kappa = 128, int n_k = 101);

// Smallest singular value over all overlaps of neighbouring fibers.
double min_overlap_sv(const BundleGrid& b);

// Transport around the phi1 loop with polar-unitary links, one matrix per phi2 point. When
// theta is set, the base fiber at TRS momenta is put in a Kramers basis first.
std::vector<cmat> holonomy(const BundleGrid& b);

// Largest Kramers violation of the holonomy at k = 0 and k = pi.
double holonomy_kramers_defect(const std::vector<cmat>& T);

int z2_index(const BundleGrid& b, const EdiOptions& opt = {});
// Winding of det T over the closed k grid.
int holonomy_chern(const BundleGrid& b);
// Plaquette sum of arg det of overlap loops, oriented to match holonomy_chern.
int plaquette_chern(const BundleGrid& b);
// Both methods; throws NumericalError if they disagree.
int chern_index(const BundleGrid& b);

// Fibers multiplied by random unitaries per point.
BundleGrid gauge_rotate(const BundleGrid& b, std::uint64_t seed);

// Pfaffian route on a Bloch bundle with TRS (kappa grid must contain 0 and pi).
int fu_kane_bundle(const BundleGrid& b);

struct BulkOptions {
  int n_contour = 256;
  int n_k = 101;
  int n_kappa = 128;
  double min_sv = 0.1;
  int max_refine = 3;
};

struct BulkResult {
  int value = 0;
  std::string method;
  int n1 = 0, n2 = 0;
  double min_sv = 0.0;
  int refinement_level = 0;
};

BulkResult bulk_index_ti(const ModelSpec& m, double mu, const BulkOptions& opt = {});
BulkResult bulk_index_qh(const ModelSpec& m, double mu, const BulkOptions& opt = {});
// Chern number of one band (0-based) or a band range of the Bloch bundle.
BulkResult band_chern(const ModelSpec& m, const std::vector<int>& bands, const BulkOptions& opt = {});
BulkResult band_z2(const ModelSpec& m, const std::vector<int>& bands, const BulkOptions& opt = {});
BulkResult band_fu_kane(const ModelSpec& m, const std::vector<int>& bands, const BulkOptions& opt = {});

}  // namespace bec
