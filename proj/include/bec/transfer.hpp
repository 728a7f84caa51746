#pragma once

#include "bec/model.hpp"

#include <vector>

namespace bec {

enum class RootClass { inside, outside, unimodular, zero, infinite };

struct Root {
  cplx xi;
  cvec vec;  // pencil eigenvector (psi_{n-1}, psi_n) of the period-1 reduction
  int mult = 1;
  RootClass cls = RootClass::inside;
};

// Roots of det(A xi^{-1} + A^* xi + V - z) from the pencil L v = xi R v on states
// v_n = (psi_{n-1}, psi_n). Roots closer than 1e-7 are merged into one entry with its
// multiplicity; |xi| < 1e-10 and > 1e10 are tagged zero / infinite (spurious for singular A).
std::vector<Root> transfer_roots(const ModelSpec& m, cplx z, double k, double eta = 1e-8);

// Number of finite nonzero roots in each class, multiplicities included.
struct RootCount {
  int inside = 0, outside = 0, unimodular = 0, zero = 0, infinite = 0;
};
RootCount count_roots(const std::vector<Root>& roots);

// Deflating subspace of the pencil for |xi| < rho: L X = R X Lam, X orthonormal.
struct InvariantSubspace {
  cmat X, Lam;
  double residual = 0.0;
};
InvariantSubspace pencil_subspace(const ModelSpec& reduced, cplx z, double k, double rho = 1.0);

struct Frame {
  cplx z;
  double k = 0.0;
  int N = 0, M = 1;
  std::vector<cplx> xis;  // inside roots per period (zero roots included as 0)
  std::vector<int> mults;
  cmat boundary;          // (Psi_0; Psi_1), 2N x N, orthonormal columns
  bool nudged = false;    // Im z was shifted to leave the spectrum

  // Reduced representation: the period-p state is X Lam^{p-1} C.
  cmat X, Lam, C;

  // psi_n for one site n >= 0, N x N (one column per solution).
  cmat site(int n) const;
  // psi_n for n = n_from..n_to inclusive.
  std::vector<cmat> window(int n_from, int n_to) const;
};

struct FrameOptions {
  double eta = 1e-8;
  bool allow_nudge = true;
};

// Basis of decaying solutions. Throws NumericalError("near-spectrum") when a root lies
// within eta of the unit circle and the nudge does not help.
Frame decaying_frame(const ModelSpec& m, cplx z, double k, const FrameOptions& opt = {});

// Residual max_n |(H - z) psi|_n over sites 1..n_sites of the frame columns.
double frame_residual(const ModelSpec& m, const Frame& f, int n_sites = 30);

// Solution window psi_n (n = 0..n_to) from initial data by forward recursion (A invertible).
std::vector<cmat> propagate(const ModelSpec& m, cplx z, double k, const cmat& psi0, const cmat& psi1, int n_to);

// C_n(phi, psi) = phi_n A^* psi_{n+1} - phi_{n+1} A psi_n. phi holds row solutions (r x N per
// site), psi column solutions (N x c per site); both windows start at site `first`.
cmat casoratian(const ModelSpec& m, double k, const std::vector<cmat>& phi, const std::vector<cmat>& psi, int first,
                int n);

// Edge solutions psi#_n: equal to the bulk frame for n >= n0, continued to n = 0 with V#.
struct EdgeFrame {
  Frame bulk;
  cmat P0, P1;  // Psi#_0, Psi#_1
  // Stacked (P0; P1) orthonormalized: gauge-free magnitudes.
  cmat normalized() const;
};
EdgeFrame edge_frame(const EdgeModelSpec& e, cplx z, double k, const FrameOptions& opt = {});

// det Psi#_0 for the orthonormalized edge frame (modulus gauge-invariant).
cplx edge_vanishing(const EdgeModelSpec& e, cplx z, double k);
// Smallest singular value of the normalized Psi#_0; vanishes exactly at edge eigenvalues.
double edge_smin(const EdgeModelSpec& e, cplx z, double k);

// Zeros in k of det Psi#_0(z, .) on [0, 2pi): grid minima refined by golden section.
std::vector<double> edge_zeros(const EdgeModelSpec& e, double z, int n_k = 401, double accept = 1e-6);

// L(z,k) = -A Psi#_0 Psi#_1^{-1}; throws when Psi#_1 is numerically singular.
cmat l_matrix(const EdgeModelSpec& e, cplx z, double k);

// Laurent polynomial P(xi, z) = sum_d c_d(z) xi^d with polynomial coefficients in z.
struct LaurentPoly {
  int dmax = 0;                        // c[d + dmax] for d = -dmax..dmax
  std::vector<std::vector<cplx>> c;    // c[d + dmax][j] coefficient of xi^d z^j
  double scale = 1.0;                  // magnitude reference for degree tolerances

  cplx eval(cplx xi, cplx z) const;
  int xi_degree_high(double tol = 1e-9) const;
  int xi_degree_low(double tol = 1e-9) const;
  int z_degree(double tol = 1e-9) const;
  cplx coeff(int d, int j) const;
};

// Interpolates det(H(xi) - z) of the period-1 reduction on circles in xi and z.
LaurentPoly bloch_poly(const ModelSpec& m, double k);

}  // namespace bec
