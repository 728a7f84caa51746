#pragma once

#include "bec/core.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bec {

// Finite Fourier series in k: X(k) = sum_m X_m e^{ikm}.
using Harmonics = std::map<int, cmat>;

cmat eval_harmonics(const Harmonics& h, double k, int dim);

// Bulk family (H(k) psi)_n = A(k) psi_{n-1} + A(k)^* psi_{n+1} + V_n(k) psi_n, with V_{n+M} = V_n.
struct ModelSpec {
  std::string name = "custom";
  int N = 1;
  int M = 1;
  Harmonics A;
  std::vector<Harmonics> V;     // V[j] is the potential of site n with (n-1) mod M == j
  std::optional<cmat> theta;    // Theta psi = theta * conj(psi)
  double mu = 0.0;
  bool singular_hopping = false;  // det A(k) vanishes identically

  cmat A_at(double k) const { return eval_harmonics(A, k, N); }
  // Site n >= 1 (any integer is reduced periodically).
  cmat V_at(int n, double k) const;
};

struct EdgeModelSpec {
  ModelSpec bulk;
  int n0 = 0;
  std::vector<Harmonics> Vsharp;  // Vsharp[n-1] replaces V_n for n = 1..n0

  cmat Vsharp_at(int n, double k) const;
};

using ParamMap = std::map<std::string, double>;

// Built-ins: graphene_zigzag, graphene_armchair, haldane, kane_mele, scalar_chain, atomic_trivial.
// Parameters: t, tp (next-nearest hopping), lv (staggered potential), mu, e0 (atomic level).
ModelSpec build_model(const std::string& name, const ParamMap& params = {});
std::vector<std::string> builtin_names();

// Hermiticity of V and unitarity / Theta^2 = -1; throws ConfigError on violation.
void validate_model(const ModelSpec& m, int n_test = 17);

struct TrsReport {
  bool pass = false;
  double max_violation = 0.0;
};
TrsReport check_time_reversal(const ModelSpec& m, const std::vector<double>& k_grid, double tol = 1e-10);

// Period-1 reduction with internal dimension M_new * N (corner block hopping).
ModelSpec supercell(const ModelSpec& m, int M_new);

// Bloch matrix (A xi^{-1} + A^* xi + V) of the period-1 reduction, size M N.
cmat bloch_matrix(const ModelSpec& m, cplx xi, double k);
// Sorted eigenvalues of bloch_matrix at xi = e^{i kappa}.
rvec bloch_bands(const ModelSpec& m, double kappa, double k);

EdgeModelSpec edge_model(const ModelSpec& m, int n0 = 0, const std::vector<Harmonics>& replacements = {},
                         const std::optional<cmat>& boundary_matrix = std::nullopt);

// Edge with V#_1 = V_1 + s P, P the projector onto the first orbital and its time-reversal partner.
// A generic perturbation of the plain Dirichlet edge: it keeps TRS but breaks accidental
// coincidences such as det Psi#_1 vanishing together with det Psi#_0.
EdgeModelSpec shifted_edge(const ModelSpec& m, double s);

// Orthonormal basis v of span(q) with v = Theta v eps (pairs v_{2j} = -Theta v_{2j-1}).
cmat kramers_basis(const cmat& q, const cmat& theta);

// Unitarily conjugated copy with theta = -eps (the form -Theta_0); returns the unitary used.
ModelSpec normalize_theta(const ModelSpec& m, cmat* u_out = nullptr);

// Theta acting on stacked vectors of `blocks` copies of C^N.
cmat theta_blocks(const cmat& theta, int blocks);

// Bulk band extrema: min/max over k and kappa of each band, on a grid.
struct BandSummary {
  rvec band_min, band_max;
  double gap_below = 0.0, gap_above = 0.0;  // nearest band edges around mu
  int filled = 0;                            // number of bands entirely below mu
  bool gapped = false;
};
BandSummary band_summary(const ModelSpec& m, double mu, int n_k = 201, int n_kappa = 128);

}  // namespace bec
