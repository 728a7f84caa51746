#include "bec/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bec {

namespace {

ModelSpec reduce(const ModelSpec& m) { return m.M == 1 ? m : supercell(m, m.M); }

struct Pencil {
  cmat L, R, G;
  cplx a;  // Cayley point a*rho on the circle |xi| = rho
};

// G = (L + aR)^{-1} (L - aR) maps |xi| < rho to Re w < 0.
Pencil make_pencil(const ModelSpec& r, cplx z, double k, double rho) {
  const int D = r.N;
  const cmat A = r.A_at(k);
  const cmat V = r.V_at(1, k);
  const cmat I = cmat::Identity(D, D);
  Pencil p;
  p.L = cmat::Zero(2 * D, 2 * D);
  p.L.topRightCorner(D, D) = I;
  p.L.bottomLeftCorner(D, D) = -A;
  p.L.bottomRightCorner(D, D) = z * I - V;
  p.R = cmat::Zero(2 * D, 2 * D);
  p.R.topLeftCorner(D, D) = I;
  p.R.bottomRightCorner(D, D) = A.adjoint();
  // A few fixed Cayley points; keep the best conditioned one.
  static const double angles[] = {0.9, 2.3, -1.7, 0.2, -2.9};
  double best = -1.0;
  for (double th : angles) {
    const cplx a = rho * std::exp(kI * th);
    Eigen::PartialPivLU<cmat> lu(p.L + a * p.R);
    const double rc = lu.rcond();
    if (rc > best) {
      best = rc;
      p.a = a;
    }
    if (rc > 1e-3) break;
  }
  if (best < 1e-14) throw NumericalError("transfer: pencil singular at every Cayley point (z on the spectrum?)");
  p.G = (p.L + p.a * p.R).partialPivLu().solve(p.L - p.a * p.R);
  return p;
}

std::vector<Root> roots_from(const Pencil& p, double eta) {
  Eigen::ComplexEigenSolver<cmat> es(p.G);
  const int n = static_cast<int>(p.G.rows());
  std::vector<Root> raw;
  for (int i = 0; i < n; ++i) {
    const cplx w = es.eigenvalues()(i);
    Root r;
    r.vec = es.eigenvectors().col(i);
    const cplx den = 1.0 - w;
    if (std::abs(den) < 1e-13) {
      r.xi = cplx(std::numeric_limits<double>::infinity(), 0.0);
      r.cls = RootClass::infinite;
    } else {
      r.xi = p.a * (1.0 + w) / den;
      const double ax = std::abs(r.xi);
      if (ax < 1e-10)
        r.cls = RootClass::zero;
      else if (ax > 1e10)
        r.cls = RootClass::infinite;
      else if (ax < 1.0 - eta)
        r.cls = RootClass::inside;
      else if (ax > 1.0 + eta)
        r.cls = RootClass::outside;
      else
        r.cls = RootClass::unimodular;
    }
    raw.push_back(r);
  }
  // Merge clusters of (numerically) repeated roots.
  std::vector<Root> out;
  std::vector<bool> used(raw.size(), false);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    Root r = raw[i];
    if (r.cls == RootClass::infinite) {
      out.push_back(r);
      continue;
    }
    cplx sum = r.xi;
    for (std::size_t j = i + 1; j < raw.size(); ++j) {
      if (used[j] || raw[j].cls != r.cls || raw[j].cls == RootClass::infinite) continue;
      if (std::abs(raw[j].xi - raw[i].xi) < 1e-7 * std::max(1.0, std::abs(raw[i].xi))) {
        used[j] = true;
        ++r.mult;
        sum += raw[j].xi;
      }
    }
    r.xi = sum / static_cast<double>(r.mult);
    out.push_back(r);
  }
  return out;
}

InvariantSubspace subspace_from(const Pencil& p, double rho) {
  const int n = static_cast<int>(p.G.rows());
  const cmat S = matrix_sign(p.G);
  const cmat P = 0.5 * (cmat::Identity(n, n) - S);
  const int r = static_cast<int>(std::lround(P.trace().real()));
  InvariantSubspace out;
  if (r == 0) {
    out.X = cmat::Zero(n, 0);
    out.Lam = cmat::Zero(0, 0);
    return out;
  }
  out.X = orthonormal_basis(P, r);
  // The true pencil is (L, R); the rho scaling only moved the Cayley point.
  (void)rho;
  const cmat RX = p.R * out.X;
  const cmat LX = p.L * out.X;
  out.Lam = RX.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(LX);
  out.residual = (LX - RX * out.Lam).norm() / std::max(1.0, LX.norm());
  if (out.residual > 1e-8) throw NumericalError("transfer: stable subspace not deflating (residual " +
                                                std::to_string(out.residual) + ")");
  return out;
}

bool has_unimodular(const std::vector<Root>& roots) {
  for (const auto& r : roots)
    if (r.cls == RootClass::unimodular) return true;
  return false;
}

}  // namespace

std::vector<Root> transfer_roots(const ModelSpec& m, cplx z, double k, double eta) {
  const ModelSpec r = reduce(m);
  return roots_from(make_pencil(r, z, k, 1.0), eta);
}

RootCount count_roots(const std::vector<Root>& roots) {
  RootCount c;
  for (const auto& r : roots) {
    switch (r.cls) {
      case RootClass::inside: c.inside += r.mult; break;
      case RootClass::outside: c.outside += r.mult; break;
      case RootClass::unimodular: c.unimodular += r.mult; break;
      case RootClass::zero: c.zero += r.mult; break;
      case RootClass::infinite: c.infinite += r.mult; break;
    }
  }
  return c;
}

InvariantSubspace pencil_subspace(const ModelSpec& reduced, cplx z, double k, double rho) {
  if (reduced.M != 1) throw ConfigError("pencil_subspace: expects a period-1 model");
  return subspace_from(make_pencil(reduced, z, k, rho), rho);
}

Frame decaying_frame(const ModelSpec& m, cplx z, double k, const FrameOptions& opt) {
  const ModelSpec r = reduce(m);
  Pencil p = make_pencil(r, z, k, 1.0);
  std::vector<Root> roots = roots_from(p, opt.eta);
  bool nudged = false;
  if (has_unimodular(roots)) {
    if (!opt.allow_nudge) throw NumericalError("near-spectrum: root within eta of the unit circle");
    z += kI * (z.imag() < 0 ? -1e-6 : 1e-6);
    p = make_pencil(r, z, k, 1.0);
    roots = roots_from(p, opt.eta);
    if (has_unimodular(roots)) throw NumericalError("near-spectrum: root within eta of the unit circle");
    nudged = true;
  }
  const int D = r.N, N = m.N, M = m.M;
  Frame f;
  f.z = z;
  f.k = k;
  f.N = N;
  f.M = M;
  f.nudged = nudged;
  for (const auto& rt : roots)
    if (rt.cls == RootClass::inside || rt.cls == RootClass::zero) {
      f.xis.push_back(rt.cls == RootClass::zero ? cplx(0.0) : rt.xi);
      f.mults.push_back(rt.mult);
    }
  const InvariantSubspace sub = subspace_from(p, 1.0);
  if (sub.X.cols() != D) throw NumericalError("transfer: stable subspace has wrong dimension");
  f.X = sub.X;
  f.Lam = sub.Lam;
  cmat B(2 * N, D);
  B.topRows(N) = sub.X.middleRows((M - 1) * N, N);
  B.bottomRows(N) = sub.X.middleRows(D, N);
  Eigen::JacobiSVD<cmat> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const rvec s = svd.singularValues();
  if (s(N - 1) < 1e-10 * s(0)) throw NumericalError("transfer: frame boundary data is rank deficient");
  f.boundary = svd.matrixU().leftCols(N);
  f.C = svd.matrixV().leftCols(N) * s.head(N).cwiseInverse().asDiagonal();
  return f;
}

cmat Frame::site(int n) const { return window(n, n).front(); }

std::vector<cmat> Frame::window(int n_from, int n_to) const {
  if (n_from < 0 || n_to < n_from) throw ConfigError("Frame::window: bad site range");
  const int D = M * N;
  std::vector<cmat> out;
  out.reserve(n_to - n_from + 1);
  cmat state = X * C;  // period 1
  int p = 1;
  for (int n = n_from; n <= n_to; ++n) {
    if (n == 0) {
      out.push_back(state.middleRows((M - 1) * N, N));
      continue;
    }
    const int pn = (n - 1) / M + 1;
    while (p < pn) {
      state = X * (Lam * (X.adjoint() * state));
      ++p;
    }
    out.push_back(state.middleRows(D + ((n - 1) % M) * N, N));
  }
  return out;
}

double frame_residual(const ModelSpec& m, const Frame& f, int n_sites) {
  const auto w = f.window(0, n_sites + 1);
  const cmat A = m.A_at(f.k);
  double worst = 0.0;
  double scale = 0.0;
  for (const auto& x : w) scale = std::max(scale, x.norm());
  for (int n = 1; n <= n_sites; ++n) {
    const cmat r = A * w[n - 1] + A.adjoint() * w[n + 1] + (m.V_at(n, f.k) - f.z * cmat::Identity(m.N, m.N)) * w[n];
    worst = std::max(worst, r.norm());
  }
  return worst / std::max(1.0, scale);
}

std::vector<cmat> propagate(const ModelSpec& m, cplx z, double k, const cmat& psi0, const cmat& psi1, int n_to) {
  const cmat A = m.A_at(k);
  Eigen::PartialPivLU<cmat> lu(A.adjoint());
  if (lu.rcond() < 1e-12) throw AssumptionError("propagate: hopping matrix is singular");
  std::vector<cmat> out{psi0, psi1};
  const cmat I = cmat::Identity(m.N, m.N);
  for (int n = 1; n < n_to; ++n)
    out.push_back(lu.solve((z * I - m.V_at(n, k)) * out[n] - A * out[n - 1]));
  return out;
}

cmat casoratian(const ModelSpec& m, double k, const std::vector<cmat>& phi, const std::vector<cmat>& psi, int first,
                int n) {
  const int i = n - first;
  if (i < 0 || i + 1 >= static_cast<int>(phi.size()) || i + 1 >= static_cast<int>(psi.size()))
    throw ConfigError("casoratian: windows do not cover sites n and n+1");
  const cmat A = m.A_at(k);
  return phi[i] * A.adjoint() * psi[i + 1] - phi[i + 1] * A * psi[i];
}

cmat EdgeFrame::normalized() const {
  cmat s(P0.rows() + P1.rows(), P0.cols());
  s << P0, P1;
  return orthonormal_basis(s, static_cast<int>(P0.cols()));
}

EdgeFrame edge_frame(const EdgeModelSpec& e, cplx z, double k, const FrameOptions& opt) {
  const ModelSpec& m = e.bulk;
  EdgeFrame out;
  out.bulk = decaying_frame(m, z, k, opt);
  const cplx zz = out.bulk.z;
  if (e.n0 == 0) {
    out.P0 = out.bulk.site(0);
    out.P1 = out.bulk.site(1);
    return out;
  }
  const cmat A = m.A_at(k);
  Eigen::PartialPivLU<cmat> lu(A);
  if (lu.rcond() < 1e-12) throw AssumptionError("edge_frame: boundary zone needs an invertible hopping matrix");
  const auto w = out.bulk.window(e.n0, e.n0 + 1);
  cmat next = w[1], cur = w[0];
  const cmat I = cmat::Identity(m.N, m.N);
  for (int n = e.n0; n >= 1; --n) {
    const cmat prev = lu.solve((zz * I - e.Vsharp_at(n, k)) * cur - A.adjoint() * next);
    next = cur;
    cur = prev;
  }
  out.P0 = cur;
  out.P1 = next;
  return out;
}

cplx edge_vanishing(const EdgeModelSpec& e, cplx z, double k) {
  const cmat q = edge_frame(e, z, k).normalized();
  return q.topRows(e.bulk.N).determinant();
}

double edge_smin(const EdgeModelSpec& e, cplx z, double k) {
  const cmat q = edge_frame(e, z, k).normalized();
  Eigen::JacobiSVD<cmat> svd(q.topRows(e.bulk.N));
  return svd.singularValues()(e.bulk.N - 1);
}

std::vector<double> edge_zeros(const EdgeModelSpec& e, double z, int n_k, double accept) {
  // Momenta where the boundary zone cannot be crossed (singular A) are skipped.
  auto smin = [&](double k) {
    try {
      return edge_smin(e, z, k);
    } catch (const AssumptionError&) {
      return 1e300;
    }
  };
  std::vector<double> s(n_k);
  parallel_for(n_k, [&](int j) { s[j] = smin(kTwoPi * j / n_k); });
  std::vector<double> zeros;
  const double h = kTwoPi / n_k;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int j = 0; j < n_k; ++j) {
    const double l = s[(j + n_k - 1) % n_k], r = s[(j + 1) % n_k];
    if (!(s[j] <= l && s[j] < r)) continue;
    double a = kTwoPi * j / n_k - h, b = kTwoPi * j / n_k + h;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = smin(c), fd = smin(d);
    while (b - a > 1e-11) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - gr * (b - a);
        fc = smin(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + gr * (b - a);
        fd = smin(d);
      }
    }
    const double km = 0.5 * (a + b);
    if (smin(km) < accept) {
      double kk = std::fmod(km, kTwoPi);
      if (kk < 0) kk += kTwoPi;
      zeros.push_back(kk);
    }
  }
  std::sort(zeros.begin(), zeros.end());
  return zeros;
}

cmat l_matrix(const EdgeModelSpec& e, cplx z, double k) {
  const EdgeFrame f = edge_frame(e, z, k);
  Eigen::JacobiSVD<cmat> svd(f.P1);
  const rvec s = svd.singularValues();
  if (s(s.size() - 1) < 1e-12 * s(0)) throw NumericalError("l_matrix: Psi#_1 is singular at this point");
  return -e.bulk.A_at(k) * f.P0 * f.P1.inverse();
}

cplx LaurentPoly::coeff(int d, int j) const {
  if (d < -dmax || d > dmax) return 0.0;
  const auto& row = c[d + dmax];
  if (j < 0 || j >= static_cast<int>(row.size())) return 0.0;
  return row[j];
}

cplx LaurentPoly::eval(cplx xi, cplx z) const {
  cplx sum = 0.0;
  for (int d = -dmax; d <= dmax; ++d) {
    cplx poly = 0.0;
    const auto& row = c[d + dmax];
    for (int j = static_cast<int>(row.size()) - 1; j >= 0; --j) poly = poly * z + row[j];
    sum += poly * std::pow(xi, d);
  }
  return sum;
}

int LaurentPoly::xi_degree_high(double tol) const {
  for (int d = dmax; d >= -dmax; --d)
    for (const auto& x : c[d + dmax])
      if (std::abs(x) > tol * scale) return d;
  return -dmax - 1;
}

int LaurentPoly::xi_degree_low(double tol) const {
  for (int d = -dmax; d <= dmax; ++d)
    for (const auto& x : c[d + dmax])
      if (std::abs(x) > tol * scale) return d;
  return dmax + 1;
}

int LaurentPoly::z_degree(double tol) const {
  int deg = -1;
  for (const auto& row : c)
    for (int j = 0; j < static_cast<int>(row.size()); ++j)
      if (std::abs(row[j]) > tol * scale) deg = std::max(deg, j);
  return deg;
}

LaurentPoly bloch_poly(const ModelSpec& m, double k) {
  const ModelSpec r = reduce(m);
  const int D = r.N;
  if (D > 24) throw NumericalError("bloch_poly: interpolation too ill-conditioned for M N > 24");
  const cmat A = r.A_at(k), V = r.V_at(1, k);
  const int nx = 2 * D + 3, nz = D + 2;
  // Radius near the spectral scale keeps all z^j coefficients at comparable size.
  const double R = std::max(1.0, 2.0 * A.norm() + V.norm() / std::sqrt(static_cast<double>(D)));
  std::vector<std::vector<cplx>> vals(nx, std::vector<cplx>(nz));
  const cmat I = cmat::Identity(D, D);
  for (int a = 0; a < nx; ++a) {
    const cplx xi = std::exp(kI * (kTwoPi * a / nx));
    const cmat h = A / xi + A.adjoint() * xi + V;
    for (int b = 0; b < nz; ++b) vals[a][b] = (h - R * std::exp(kI * (kTwoPi * b / nz)) * I).determinant();
  }
  LaurentPoly p;
  p.dmax = D + 1;
  p.c.assign(2 * p.dmax + 1, std::vector<cplx>(nz, 0.0));
  for (int d = -p.dmax; d <= p.dmax; ++d)
    for (int j = 0; j < nz; ++j) {
      cplx s = 0.0;
      for (int a = 0; a < nx; ++a)
        for (int b = 0; b < nz; ++b)
          s += vals[a][b] * std::exp(-kI * (kTwoPi * a * d / nx + kTwoPi * b * j / nz));
      p.c[d + p.dmax][j] = s / static_cast<double>(nx * nz) / std::pow(R, j);
    }
  double mx = 0.0;
  for (const auto& row : p.c)
    for (const auto& x : row) mx = std::max(mx, std::abs(x));
  p.scale = mx;
  return p;
}

}  // namespace bec
