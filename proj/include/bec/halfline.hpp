#pragma once

#include "bec/model.hpp"

#include <string>
#include <vector>

namespace bec {

// Dense ribbon H#(k) on sites 1..L*M: Dirichlet at n = 0, hard cutoff after n = L*M.
cmat truncate(const EdgeModelSpec& e, int L, double k);

struct EdgeOptions {
  int L = 60;
  int W = 10;                 // localization window (cells)
  double threshold = 0.5;     // weight needed to count as an edge state of the n = 1 edge
  double gate = 0.1;          // max energy jump between neighbouring k for one branch
  double cluster_tol = 1e-8;  // near-degenerate eigenvalues get edge-weight eigenbasis
  bool periodic = true;       // append k_0 + 2 pi so branches can cross the seam
  bool allow_gapless = false; // skip the bulk-gap check of the window
};

// Eigenpairs of the ribbon in [lo, hi] with localization weights.
struct RibbonLevels {
  rvec energy;
  rvec weight;
  cmat vecs;
};
RibbonLevels ribbon_levels(const EdgeModelSpec& e, double k, double lo, double hi, const EdgeOptions& opt);

struct Branch {
  int id = 0;
  std::vector<int> idx;  // grid indices
  std::vector<double> energy, weight;
  double max_weight = 0.0;
  bool localized = false;  // max weight reaches the threshold
};

struct EdgeSpectrum {
  EdgeModelSpec edge;
  EdgeOptions opt;
  std::vector<double> k;  // includes the appended 2 pi point when periodic
  double lo = 0.0, hi = 0.0;
  std::vector<Branch> branches;
  bool window_gapped = true;
};

// Bulk spectrum of H(k) meets [lo, hi] for some k of the grid (kappa scan).
bool window_hits_bulk(const ModelSpec& m, double lo, double hi, const std::vector<double>& k_grid, int n_kappa = 256);

// Computed spectra are stored as JSON under dir, keyed by a hash of (edge model, grid, window,
// options), and reused by later calls. Empty dir disables the cache.
void set_spectrum_cache_dir(const std::string& dir);
const std::string& spectrum_cache_dir();

EdgeSpectrum edge_spectrum(const EdgeModelSpec& e, const std::vector<double>& k_grid, double lo, double hi,
                           const EdgeOptions& opt = {});

// Default grid k_j = 2 pi j / n, j < n.
std::vector<double> periodic_grid(int n);

struct Crossing {
  double k = 0.0;
  int branch = -1;
  double slope = 0.0;   // d eps / dk at the crossing
  double weight = 0.0;  // edge weight at the crossing
};

// Sign changes of eps - mu along each branch, bisected to 1e-8 in k. Throws AssumptionError
// ("adjust mu") when |slope| < slope_tol.
std::vector<Crossing> find_crossings(const EdgeSpectrum& s, double mu, double slope_tol = 1e-4);

struct TiCount {
  int twice_n = 0;  // 2 n, endpoint crossings contribute 1 each
  int n = 0;
  int index = 1;    // (-1)^n
};
TiCount ti_count_from_crossings(const std::vector<Crossing>& c, double threshold = 0.5);
TiCount count_crossings_ti(const EdgeSpectrum& s, double mu, double slope_tol = 1e-4);

int qh_count_from_crossings(const std::vector<Crossing>& c, double threshold = 0.5);
int count_crossings_qh(const EdgeSpectrum& s, double mu, double slope_tol = 1e-4);

}  // namespace bec
