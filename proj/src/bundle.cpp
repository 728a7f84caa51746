#include "bec/bundle.hpp"

#include "bec/transfer.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace bec {

std::vector<cplx> rectangle_contour(double mu, double e0, double h, int n) {
  if (!(e0 < mu) || !(h > 0) || n < 8) throw ConfigError("rectangle_contour: bad geometry");
  const double w = mu - e0;
  const double per = 2 * w + 4 * h;
  // Clockwise from mu: down, left, up, right, back down to mu.
  auto at = [&](double s) -> cplx {
    if (s < h) return {mu, -s};
    s -= h;
    if (s < w) return {mu - s, -h};
    s -= w;
    if (s < 2 * h) return {e0, -h + s};
    s -= 2 * h;
    if (s < w) return {e0 + s, h};
    s -= w;
    return {mu, h - s};
  };
  std::vector<cplx> z(n);
  for (int j = 0; j <= n / 2; ++j) z[j] = at(per * j / n);
  z[0] = mu;
  for (int j = n / 2 + 1; j < n; ++j) z[j] = std::conj(z[n - j]);
  if (n % 2 == 0) z[n / 2] = e0;
  return z;
}

ContourChoice choose_contour(const ModelSpec& m, double mu) {
  const BandSummary s = band_summary(m, mu);
  if (!s.gapped) throw AssumptionError("mu = " + std::to_string(mu) + " is not in a bulk gap");
  double g = std::min(s.gap_below, s.gap_above);
  if (g > 1e299) g = 1.0;
  ContourChoice c;
  c.filled = s.filled;
  c.h = 0.5 * g;
  c.e0 = std::min(s.band_min(0), mu) - 0.5 * g;
  return c;
}

namespace {

bool is_trs_index(const BundleGrid& b, int i2) {
  return i2 == 0 || i2 == b.n2 - 1 || (b.n2 % 2 == 1 && i2 == (b.n2 - 1) / 2);
}

// Principal log of a unitary: U = Q S Q^*, S diagonal for normal U.
cmat unitary_log(const cmat& u) {
  Eigen::ComplexSchur<cmat> cs(u);
  const cmat& t = cs.matrixT();
  cmat d = cmat::Zero(u.rows(), u.cols());
  for (int i = 0; i < u.rows(); ++i) d(i, i) = kI * std::arg(t(i, i));
  return cs.matrixU() * d * cs.matrixU().adjoint();
}

cmat unitary_exp(const cmat& x) {
  // x is anti-Hermitian: diagonalize i x.
  Eigen::SelfAdjointEigenSolver<cmat> es(cmat(kI * x));
  cvec ph(x.rows());
  for (int i = 0; i < x.rows(); ++i) ph(i) = std::exp(-kI * es.eigenvalues()(i));
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

void check_grid(const BundleGrid& b) {
  if (b.n1 < 4 || b.n2 < 3 || static_cast<int>(b.fibers.size()) != b.n1 * b.n2)
    throw ConfigError("bundle: malformed grid");
}

}  // namespace

BundleGrid solution_bundle(const ModelSpec& m, double mu, int n_contour, int n_k) {
  if (n_k % 2 == 0) ++n_k;  // k = pi must be on the grid
  const ContourChoice c = choose_contour(m, mu);
  BundleGrid b;
  b.kind = "solution";
  b.n1 = n_contour;
  b.n2 = n_k;
  b.gamma = rectangle_contour(mu, c.e0, c.h, n_contour);
  b.phi1.resize(b.n1);
  for (int j = 0; j < b.n1; ++j) b.phi1[j] = -kPi + kTwoPi * j / b.n1;
  b.phi2 = closed_grid(n_k);
  b.pair1.resize(b.n1);
  for (int j = 0; j < b.n1; ++j) b.pair1[j] = (b.n1 - j) % b.n1;
  if (m.theta) b.theta = theta_blocks(*m.theta, 2);
  b.fibers.resize(static_cast<std::size_t>(b.n1) * b.n2);
  const int inner = b.n1 * (b.n2 - 1);
  parallel_for(inner, [&](int idx) {
    const int j = idx % b.n1, i = idx / b.n1;
    FrameOptions fo;
    fo.allow_nudge = false;
    b.fibers[idx] = decaying_frame(m, b.gamma[j], b.phi2[i], fo).boundary;
  });
  for (int j = 0; j < b.n1; ++j) b.fiber(j, b.n2 - 1) = b.fiber(j, 0);
  return b;
}

BundleGrid bloch_bundle(const ModelSpec& m, const std::vector<int>& bands, int n_kappa, int n_k) {
  const int D = m.M * m.N;
  if (bands.empty()) throw ConfigError("bloch_bundle: no bands selected");
  for (int x : bands)
    if (x < 0 || x >= D) throw ConfigError("bloch_bundle: band index out of range");
  if (n_k % 2 == 0) ++n_k;
  if (n_kappa % 2 != 0) ++n_kappa;  // kappa = 0 on the grid
  std::vector<bool> sel(D, false);
  for (int x : bands) sel[x] = true;

  BundleGrid b;
  b.kind = "bloch";
  b.n1 = n_kappa;
  b.n2 = n_k;
  b.phi1.resize(b.n1);
  for (int j = 0; j < b.n1; ++j) b.phi1[j] = -kPi + kTwoPi * j / b.n1;
  b.phi2 = closed_grid(n_k);
  b.pair1.resize(b.n1);
  for (int j = 0; j < b.n1; ++j) b.pair1[j] = (b.n1 - j) % b.n1;
  if (m.theta) b.theta = theta_blocks(*m.theta, m.M);
  b.fibers.resize(static_cast<std::size_t>(b.n1) * b.n2);
  std::vector<double> sep(b.n1 * (b.n2 - 1), 1e300);
  parallel_for(b.n1 * (b.n2 - 1), [&](int idx) {
    const int j = idx % b.n1, i = idx / b.n1;
    Eigen::SelfAdjointEigenSolver<cmat> es(bloch_matrix(m, std::exp(kI * b.phi1[j]), b.phi2[i]));
    const rvec& ev = es.eigenvalues();
    cmat f(D, static_cast<int>(bands.size()));
    int c = 0;
    for (int x = 0; x < D; ++x)
      if (sel[x]) f.col(c++) = es.eigenvectors().col(x);
    for (int x = 0; x < D; ++x)
      for (int y = 0; y < D; ++y)
        if (sel[x] && !sel[y]) sep[idx] = std::min(sep[idx], std::abs(ev(x) - ev(y)));
    b.fibers[idx] = f;
  });
  const auto worst = std::min_element(sep.begin(), sep.end());
  if (*worst < 1e-6) {
    const int idx = static_cast<int>(worst - sep.begin());
    throw AssumptionError("bloch_bundle: selected bands touch the others at kappa = " +
                          std::to_string(b.phi1[idx % b.n1]) + ", k = " + std::to_string(b.phi2[idx / b.n1]));
  }
  for (int j = 0; j < b.n1; ++j) b.fiber(j, b.n2 - 1) = b.fiber(j, 0);
  return b;
}

double min_overlap_sv(const BundleGrid& b) {
  check_grid(b);
  double s = 1.0;
  for (int i = 0; i < b.n2; ++i)
    for (int j = 0; j < b.n1; ++j) {
      const cmat& f = b.fiber(j, i);
      Eigen::JacobiSVD<cmat> a(b.fiber((j + 1) % b.n1, i).adjoint() * f);
      s = std::min(s, a.singularValues().minCoeff());
      if (i + 1 < b.n2) {
        Eigen::JacobiSVD<cmat> c(b.fiber(j, i + 1).adjoint() * f);
        s = std::min(s, c.singularValues().minCoeff());
      }
    }
  return s;
}

std::vector<cmat> holonomy(const BundleGrid& b) {
  check_grid(b);
  std::vector<cmat> T(b.n2);
  for (int i = 0; i < b.n2; ++i) {
    cmat base = b.fiber(0, i);
    if (b.theta && is_trs_index(b, i) && b.rank() % 2 == 0) base = kramers_basis(base, *b.theta);
    cmat c = cmat::Identity(b.rank(), b.rank());
    const cmat* cur = &base;
    for (int j = 1; j <= b.n1; ++j) {
      const cmat* next = j == b.n1 ? &base : &b.fiber(j, i);
      c = polar_unitary(next->adjoint() * *cur) * c;
      cur = next;
    }
    T[i] = c;
  }
  return T;
}

double holonomy_kramers_defect(const std::vector<cmat>& T) {
  const int n = static_cast<int>(T.size());
  double d = kramers_check(T.front()).violation;
  d = std::max(d, kramers_check(T.back()).violation);
  if (n % 2 == 1) d = std::max(d, kramers_check(T[(n - 1) / 2]).violation);
  return d;
}

int z2_index(const BundleGrid& b, const EdiOptions& opt) {
  if (!b.theta) throw ConfigError("z2_index: bundle has no time reversal");
  if (b.rank() % 2 != 0) throw AssumptionError("z2_index: odd fiber rank");
  if (b.n2 % 2 == 0) throw ConfigError("z2_index: k grid must contain pi");
  const std::vector<cmat> T = holonomy(b);
  const int mid = (b.n2 - 1) / 2;
  const std::vector<cmat> half(T.begin(), T.begin() + mid + 1);
  for (const cmat* e : {&half.front(), &half.back()}) {
    const KramersReport r = kramers_check(*e, 1e-6);
    if (!r.pass) throw NumericalError("z2_index: holonomy at a TRS momentum is not Kramers (" +
                                      std::to_string(r.violation) + ")");
  }
  const std::vector<double> x(b.phi2.begin(), b.phi2.begin() + mid + 1);
  return endpoint_degenerate_index(phase_family(half, x), opt);
}

int holonomy_chern(const BundleGrid& b) {
  const std::vector<cmat> T = holonomy(b);
  std::vector<cplx> d;
  for (const auto& t : T) d.push_back(t.determinant());
  if (std::abs(d.front() - d.back()) > 1e-6) throw NumericalError("holonomy_chern: det T is not periodic in k");
  return static_cast<int>(std::lround(accumulated_arg(d) / kTwoPi));
}

int plaquette_chern(const BundleGrid& b) {
  check_grid(b);
  auto link = [&](int j0, int i0, int j1, int i1) {
    return (b.fiber(j1 % b.n1, i1).adjoint() * b.fiber(j0 % b.n1, i0)).determinant();
  };
  double total = 0.0;
  for (int i = 0; i + 1 < b.n2; ++i)
    for (int j = 0; j < b.n1; ++j) {
      // (j,i) -> (j,i+1) -> (j+1,i+1) -> (j+1,i) -> (j,i): same orientation as transport
      // along phi1 at fixed k, compared between neighbouring k.
      const cplx w = link(j, i, j, i + 1) * link(j, i + 1, j + 1, i + 1) * link(j + 1, i + 1, j + 1, i) *
                     link(j + 1, i, j, i);
      total += std::arg(w);
    }
  const double c = total / kTwoPi;
  if (std::abs(c - std::round(c)) > 0.1) throw NumericalError("plaquette_chern: plaquette sum is not near an integer");
  return static_cast<int>(std::lround(c));
}

int chern_index(const BundleGrid& b) {
  const int h = holonomy_chern(b);
  const int p = plaquette_chern(b);
  if (h != p)
    throw NumericalError("chern_index: holonomy winding " + std::to_string(h) + " disagrees with plaquette sum " +
                         std::to_string(p));
  return h;
}

BundleGrid gauge_rotate(const BundleGrid& b, std::uint64_t seed) {
  BundleGrid out = b;
  const int r = b.rank();
  for (int i = 0; i < b.n2; ++i)
    for (int j = 0; j < b.n1; ++j) {
      const int ii = i == b.n2 - 1 ? 0 : i;  // keep the repeated k = 2 pi row identical
      out.fiber(j, i) = b.fiber(j, i) * random_unitary(r, seed + 7919ULL * (j + b.n1 * ii));
    }
  return out;
}

int fu_kane_bundle(const BundleGrid& b) {
  check_grid(b);
  if (!b.theta) throw ConfigError("fu_kane_bundle: bundle has no time reversal");
  if (b.kind != "bloch") throw ConfigError("fu_kane_bundle: needs a Bloch bundle");
  if (b.n1 % 2 != 0 || b.n2 % 2 == 0) throw ConfigError("fu_kane_bundle: grid must contain kappa = 0, pi and k = pi");
  const int r = b.rank();
  const int j0 = b.n1 / 2;  // kappa = 0
  const int n2 = b.n2;

  // Periodic frame along kappa = 0: parallel transport in k, then unwind the loop holonomy.
  std::vector<cmat> c(n2);
  c[0] = cmat::Identity(r, r);
  for (int i = 1; i < n2; ++i) c[i] = polar_unitary(b.fiber(j0, i).adjoint() * b.fiber(j0, i - 1)) * c[i - 1];
  const cmat lg = unitary_log(c[n2 - 1]);
  std::vector<cmat> v0(n2), vpi(n2);
  for (int i = 0; i < n2; ++i)
    v0[i] = b.fiber(j0, i) * c[i] * unitary_exp(-(static_cast<double>(i) / (n2 - 1)) * lg);

  // Carry that frame across kappa in [0, pi] at each k.
  for (int i = 0; i < n2; ++i) {
    cmat d = b.fiber(j0, i).adjoint() * v0[i];
    for (int j = j0 + 1; j <= b.n1; ++j)
      d = polar_unitary(b.fiber(j % b.n1, i).adjoint() * b.fiber(j - 1, i)) * d;
    vpi[i] = b.fiber(0, i) * d;
  }

  const int mid = (n2 - 1) / 2;
  const cmat& th = *b.theta;
  auto w_family = [&](const std::vector<cmat>& v) {
    std::vector<cmat> w;
    for (int i = 0; i <= mid; ++i) w.push_back(v[i].adjoint() * th * v[n2 - 1 - i].conjugate());
    return w;
  };
  return fu_kane_index(w_family(v0)) * fu_kane_index(w_family(vpi));
}

namespace {

template <class Build, class Eval>
BulkResult refine_loop(const BulkOptions& opt, const std::string& method, Build build, Eval eval) {
  int n2 = opt.n_k;
  BulkResult r;
  r.method = method;
  for (int level = 0;; ++level) {
    BundleGrid b = build(level, n2);
    const double s = min_overlap_sv(b);
    if (s >= opt.min_sv || level >= opt.max_refine) {
      if (s < opt.min_sv)
        throw NumericalError(method + ": neighbouring fibers nearly orthogonal after refinement (min sv " +
                             std::to_string(s) + ")");
      b.refinement_level = level;
      r.value = eval(b);
      r.n1 = b.n1;
      r.n2 = b.n2;
      r.min_sv = s;
      r.refinement_level = level;
      return r;
    }
    n2 = 2 * (b.n2 - 1) + 1;
  }
}

}  // namespace

BulkResult bulk_index_ti(const ModelSpec& m, double mu, const BulkOptions& opt) {
  if (!m.theta) throw ConfigError("bulk_index_ti: model has no time reversal");
  const ModelSpec mn = normalize_theta(m);
  return refine_loop(
      opt, "eigenphase",
      [&](int level, int n2) { return solution_bundle(mn, mu, opt.n_contour << level, n2); },
      [](const BundleGrid& b) { return z2_index(b); });
}

BulkResult bulk_index_qh(const ModelSpec& m, double mu, const BulkOptions& opt) {
  return refine_loop(
      opt, "eigenphase+plaquette",
      [&](int level, int n2) { return solution_bundle(m, mu, opt.n_contour << level, n2); },
      [](const BundleGrid& b) { return chern_index(b); });
}

BulkResult band_chern(const ModelSpec& m, const std::vector<int>& bands, const BulkOptions& opt) {
  return refine_loop(
      opt, "eigenphase+plaquette",
      [&](int level, int n2) { return bloch_bundle(m, bands, opt.n_kappa << level, n2); },
      [](const BundleGrid& b) { return chern_index(b); });
}

BulkResult band_z2(const ModelSpec& m, const std::vector<int>& bands, const BulkOptions& opt) {
  if (!m.theta) throw ConfigError("band_z2: model has no time reversal");
  const ModelSpec mn = normalize_theta(m);
  return refine_loop(
      opt, "eigenphase",
      [&](int level, int n2) { return bloch_bundle(mn, bands, opt.n_kappa << level, n2); },
      [](const BundleGrid& b) { return z2_index(b); });
}

BulkResult band_fu_kane(const ModelSpec& m, const std::vector<int>& bands, const BulkOptions& opt) {
  if (!m.theta) throw ConfigError("band_fu_kane: model has no time reversal");
  return refine_loop(
      opt, "pfaffian",
      [&](int level, int n2) { return bloch_bundle(m, bands, opt.n_kappa << level, n2); },
      [](const BundleGrid& b) { return fu_kane_bundle(b); });
}

}  // namespace bec
