#include "bec/scatter.hpp"

#include "bec/index.hpp"
#include "bec/transfer.hpp"

#include <algorithm>
#include <cmath>

namespace bec {

namespace {

cmat bloch_at(const ModelSpec& m, double kappa, double k) { return bloch_matrix(m, std::exp(kI * kappa), k); }

struct BandPoint {
  double lam = 0.0, below = 1e300, above = 1e300;
  cvec v;
};

BandPoint band_point(const ModelSpec& m, int ell, double kappa, double k) {
  Eigen::SelfAdjointEigenSolver<cmat> es(bloch_at(m, kappa, k));
  const rvec& ev = es.eigenvalues();
  BandPoint p;
  p.lam = ev(ell);
  if (ell > 0) p.below = ev(ell) - ev(ell - 1);
  if (ell + 1 < ev.size()) p.above = ev(ell + 1) - ev(ell);
  p.v = es.eigenvectors().col(ell);
  return p;
}

// Fixed phase: largest component real positive.
cvec fix_phase(const cvec& v) {
  Eigen::Index i = 0;
  v.cwiseAbs().maxCoeff(&i);
  return v * (std::abs(v(i)) / v(i));
}

double lift(double x, double base) {
  double y = std::fmod(x - base, kTwoPi);
  if (y < 0) y += kTwoPi;
  return base + y;
}

// Decaying solutions at sites (n, n + 1) for n = n0, as 2N x (N - 1).
cmat decaying_pair(const ModelSpec& m, cplx z, double k, int n0) {
  // At a band edge the two unimodular roots merge and split by ~sqrt(eps), so they are
  // identified by modulus rather than by the root classification.
  std::vector<double> mods;
  for (const auto& r : transfer_roots(m, z, k)) {
    const double a = r.cls == RootClass::zero ? 0.0 : r.cls == RootClass::infinite ? 1e300 : std::abs(r.xi);
    for (int j = 0; j < r.mult; ++j) mods.push_back(a);
  }
  std::sort(mods.begin(), mods.end());
  const int N = m.N;
  if (static_cast<int>(mods.size()) != 2 * N || std::abs(mods[N - 1] - 1.0) > 1e-4 || std::abs(mods[N] - 1.0) > 1e-4 ||
      (N > 1 && mods[N - 2] > 1.0 - 1e-3))
    throw AssumptionError("scatter: expected exactly two unimodular roots at z = " + std::to_string(z.real()));
  const double ri = N > 1 ? mods[N - 2] : 0.0;
  const InvariantSubspace s = pencil_subspace(m, z, k, 0.5 * (ri + 1.0));
  if (s.X.cols() != m.N - 1) throw NumericalError("scatter: decaying subspace has the wrong dimension");
  cmat v = s.X;
  for (int p = 0; p < n0; ++p) v = v * s.Lam;
  return v;
}

// psi#_0 for bulk solutions given at sites (n0, n0 + 1).
cmat boundary_values(const EdgeModelSpec& e, cplx z, double k, const cmat& pair) {
  const ModelSpec& m = e.bulk;
  const int N = m.N;
  if (e.n0 == 0) return pair.topRows(N);
  const cmat A = m.A_at(k);
  Eigen::PartialPivLU<cmat> lu(A);
  if (lu.rcond() < 1e-12) throw AssumptionError("scatter: boundary zone needs an invertible hopping matrix");
  cmat cur = pair.topRows(N), next = pair.bottomRows(N);
  const cmat I = cmat::Identity(N, N);
  for (int n = e.n0; n >= 1; --n) {
    const cmat prev = lu.solve((z * I - e.Vsharp_at(n, k)) * cur - A.adjoint() * next);
    next = cur;
    cur = prev;
  }
  return cur;
}

// Kernel vector of the N x (N + 1) boundary map.
cvec kernel_vector(const cmat& B, double* margin) {
  Eigen::JacobiSVD<cmat> svd(B, Eigen::ComputeFullV);
  const rvec& s = svd.singularValues();
  *margin = s(s.size() - 1) / s(0);
  if (*margin < 1e-10) throw NumericalError("scatter: boundary kernel is not one-dimensional (embedded eigenvalue?)");
  return svd.matrixV().col(B.cols() - 1);
}

// Section values at kappa_plus +- h and the endpoints, transported from kappa_plus.
cvec section_at(const BandChart& c, double kappa) {
  const double d = kappa - c.kappa_plus;
  const int steps = std::max(4, static_cast<int>(std::ceil(std::abs(d) / 2e-3)));
  std::vector<double> path(steps + 1);
  for (int i = 0; i <= steps; ++i) path[i] = c.kappa_plus + d * i / steps;
  return bloch_section(c, path).back();
}

}  // namespace

double BandChart::lambda(double kappa) const { return band_point(model, ell, kappa, k).lam; }

double BandChart::dlambda(double kappa) const {
  const cvec v = vec(kappa);
  const cmat A = model.A_at(k);
  const cmat dh = -kI * A * std::exp(-kI * kappa) + kI * A.adjoint() * std::exp(kI * kappa);
  return (v.adjoint() * dh * v)(0, 0).real();
}

cvec BandChart::vec(double kappa) const { return band_point(model, ell, kappa, k).v; }

BandChart band_chart(const ModelSpec& m, int ell, double k, int n_scan) {
  if (m.M != 1) throw ConfigError("band_chart: scattering route supports period-1 models only");
  if (ell < 0 || ell >= m.N) throw ConfigError("band_chart: band index out of range");
  BandChart c;
  c.model = m;
  c.ell = ell;
  c.k = k;
  // Offset grid so that symmetric extrema (kappa = 0, pi) fall between samples.
  std::vector<double> kap(n_scan), d(n_scan);
  for (int j = 0; j < n_scan; ++j) {
    kap[j] = kTwoPi * (j + 0.37) / n_scan;
    const BandPoint p = band_point(m, ell, kap[j], k);
    if (std::min(p.below, p.above) < 1e-8)
      throw AssumptionError("band_chart: band " + std::to_string(ell) + " is not separated at k = " + std::to_string(k) +
                            "; two-critical-point assumption fails");
    d[j] = c.dlambda(kap[j]);
  }
  std::vector<double> crit;
  for (int j = 0; j < n_scan; ++j) {
    const int jn = (j + 1) % n_scan;
    if (d[j] * d[jn] > 0) continue;
    double a = kap[j], b = jn == 0 ? kap[0] + kTwoPi : kap[jn];
    double fa = d[j];
    for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
      const double mid = 0.5 * (a + b);
      const double fm = c.dlambda(mid);
      if (fm * fa > 0) {
        a = mid;
        fa = fm;
      } else {
        b = mid;
      }
    }
    crit.push_back(std::fmod(0.5 * (a + b), kTwoPi));
  }
  if (crit.size() != 2)
    throw AssumptionError("band_chart: band " + std::to_string(ell) + " has " + std::to_string(crit.size()) +
                          " critical points at k = " + std::to_string(k) + "; two-critical-point assumption fails");
  const double h = 1e-4;
  double curv[2];
  for (int i = 0; i < 2; ++i) {
    curv[i] = (c.dlambda(crit[i] + h) - c.dlambda(crit[i] - h)) / (2 * h);
    if (std::abs(curv[i]) < 1e-6) throw AssumptionError("band_chart: degenerate critical point");
    if (std::abs(c.dlambda(crit[i])) > 1e-8) throw NumericalError("band_chart: critical point not converged");
  }
  const int ip = curv[0] < 0 ? 0 : 1;
  if (curv[1 - ip] < 0) throw AssumptionError("band_chart: two maxima; two-critical-point assumption fails");
  c.kappa_plus = crit[ip];
  c.kappa_minus = crit[1 - ip];
  c.curv_plus = curv[ip];
  c.curv_minus = curv[1 - ip];
  c.lam_plus = c.lambda(c.kappa_plus);
  c.lam_minus = c.lambda(c.kappa_minus);
  return c;
}

double reflection_map(const BandChart& c, double kappa) {
  const double a = c.kappa_plus;
  const double b = lift(c.kappa_minus, a);
  const double x = lift(kappa, a);
  if (std::abs(wrap_angle(x - a)) < 1e-12) return a;
  if (std::abs(x - b) < 1e-12) return b;
  const double target = c.lambda(x);
  // lambda decreases on (a, b) and increases on (b, a + 2 pi).
  double lo, hi;
  bool increasing;
  if (x < b) {
    lo = b;
    hi = a + kTwoPi;
    increasing = true;
  } else {
    lo = a;
    hi = b;
    increasing = false;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    const bool below = c.lambda(mid) < target;
    if (below == increasing)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<cvec> bloch_section(const BandChart& c, const std::vector<double>& path) {
  std::vector<cvec> out;
  out.reserve(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    const BandPoint p = band_point(c.model, c.ell, path[i], c.k);
    if (std::min(p.below, p.above) < 1e-8) throw NumericalError("bloch_section: band separation lost on the path");
    if (i == 0) {
      out.push_back(fix_phase(p.v));
      continue;
    }
    const cplx ov = out.back().dot(p.v);
    if (std::abs(ov) < 0.5) throw NumericalError("bloch_section: projector jumps between path points; refine path");
    out.push_back(p.v * (std::abs(ov) / ov));
  }
  return out;
}

ScatterSolution edge_scattering_solution(const EdgeModelSpec& e, const BandChart& c, double kappa) {
  const ModelSpec& m = e.bulk;
  const int N = m.N;
  ScatterSolution s;
  s.kappa = kappa;
  s.r = reflection_map(c, kappa);
  const double z = c.lambda(kappa);
  const cvec pk = section_at(c, kappa);
  const cvec pr = section_at(c, c.kappa_plus + wrap_angle(s.r - c.kappa_plus));
  cmat pair(2 * N, N + 1);
  pair.leftCols(N - 1) = decaying_pair(m, z, c.k, e.n0);
  const int n0 = e.n0;
  for (int j = 0; j < 2; ++j) {
    const double q = j == 0 ? kappa : s.r;
    const cvec& v = j == 0 ? pk : pr;
    pair.col(N - 1 + j) << std::exp(kI * (q * n0)) * v, std::exp(kI * (q * (n0 + 1))) * v;
  }
  const cvec x = kernel_vector(boundary_values(e, z, c.k, pair), &s.kernel_margin);
  s.f_in = x(N - 1);
  s.f_out = x(N);
  if (std::abs(s.f_in) < 1e-14) throw NumericalError("scatter: incoming amplitude vanishes");
  s.S = s.f_out / s.f_in;
  const double li = c.dlambda(kappa), lo = c.dlambda(s.r);
  s.flux_defect = std::abs(std::norm(s.f_in) * li + std::norm(s.f_out) * lo) / (std::norm(s.f_in) * std::abs(li));
  return s;
}

SemiBoundProbe semi_bound_probe(const EdgeModelSpec& e, const BandChart& c) {
  const ModelSpec& m = e.bulk;
  const int N = m.N, n0 = e.n0;
  const double kp = c.kappa_plus, z = c.lam_plus, h = 1e-4;
  const cvec v = section_at(c, kp);
  const cvec dv = (section_at(c, kp + h) - section_at(c, kp - h)) / (2 * h);
  // psi_n = e^{i kp n} v, psi'_n = e^{i kp n} (i n v + v').
  auto gen = [&](int n) -> cvec { return std::exp(kI * (kp * n)) * (kI * double(n) * v + dv); };
  auto blo = [&](int n) -> cvec { return std::exp(kI * (kp * n)) * v; };
  cmat pair(2 * N, N + 1);
  pair.leftCols(N - 1) = decaying_pair(m, z, c.k, n0);
  pair.col(N - 1) << blo(n0), blo(n0 + 1);
  pair.col(N) << gen(n0), gen(n0 + 1);
  double margin = 0.0;
  const cvec x = kernel_vector(boundary_values(e, z, c.k, pair), &margin);
  SemiBoundProbe p;
  p.alpha = x(N - 1);
  p.beta = x(N);
  const cmat A = m.A_at(c.k);
  const cplx cas = (blo(0).adjoint() * A.adjoint() * gen(1) - blo(1).adjoint() * A * gen(0))(0, 0);
  p.rel_beta = std::abs(p.beta) / (std::abs(p.alpha) + std::abs(p.beta));
  p.q = std::abs(p.alpha) < 1e-300 ? 0.0 : (p.beta * cas / p.alpha).real() / std::abs(cas);
  return p;
}

std::vector<double> semi_bound_scan(const EdgeModelSpec& e, int ell, const std::vector<double>& k_grid) {
  const int n = static_cast<int>(k_grid.size());
  std::vector<SemiBoundProbe> pr(n);
  parallel_for(n, [&](int i) { pr[i] = semi_bound_probe(e, band_chart(e.bulk, ell, k_grid[i])); });
  std::vector<double> out;
  for (int i = 0; i + 1 < n; ++i) {
    if (pr[i].rel_beta < 1e-6) {
      out.push_back(k_grid[i]);
      continue;
    }
    if (pr[i].q * pr[i + 1].q >= 0 || pr[i + 1].rel_beta < 1e-6) continue;
    double a = k_grid[i], b = k_grid[i + 1], qa = pr[i].q;
    SemiBoundProbe pm;
    while (b - a > 1e-10) {
      const double mid = 0.5 * (a + b);
      pm = semi_bound_probe(e, band_chart(e.bulk, ell, mid));
      if (pm.q * qa > 0) {
        a = mid;
        qa = pm.q;
      } else {
        b = mid;
      }
    }
    // A sign change through alpha = 0 is a pole of beta / alpha, not a semi-bound state.
    if (pm.rel_beta < 1e-3) out.push_back(0.5 * (a + b));
  }
  if (n > 0 && pr[n - 1].rel_beta < 1e-6) out.push_back(k_grid[n - 1]);
  return out;
}

ScatterTrace scatter_trace(const EdgeModelSpec& e, int ell, double k1, double k2, double delta, int n_k) {
  if (n_k < 2) throw ConfigError("scatter_trace: need at least two k points");
  auto S_at = [&](double k) {
    const BandChart c = band_chart(e.bulk, ell, k);
    return edge_scattering_solution(e, c, c.kappa_plus + delta).S;
  };
  std::vector<double> ks(n_k);
  std::vector<cplx> S(n_k);
  for (int i = 0; i < n_k; ++i) ks[i] = k1 + (k2 - k1) * i / (n_k - 1);
  // Gate the whole range before any matching, so a band with extra critical points reports
  // the assumption rather than a numerical failure further down.
  std::vector<BandChart> charts(n_k);
  parallel_for(n_k, [&](int i) { charts[i] = band_chart(e.bulk, ell, ks[i]); });
  parallel_for(n_k, [&](int i) { S[i] = edge_scattering_solution(e, charts[i], charts[i].kappa_plus + delta).S; });
  for (int round = 0; round < 40; ++round) {
    std::vector<double> nk;
    std::vector<cplx> nS;
    bool inserted = false;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      nk.push_back(ks[i]);
      nS.push_back(S[i]);
      if (i + 1 == ks.size()) break;
      if (std::abs(std::arg(S[i + 1] / S[i])) > kPi / 4 && ks[i + 1] - ks[i] > 1e-10) {
        const double km = 0.5 * (ks[i] + ks[i + 1]);
        nk.push_back(km);
        nS.push_back(S_at(km));
        inserted = true;
      }
    }
    ks.swap(nk);
    S.swap(nS);
    if (!inserted) break;
  }
  ScatterTrace t;
  t.delta = delta;
  t.k = ks;
  t.S = S;
  t.arg.resize(S.size());
  t.arg[0] = std::arg(S[0]);
  for (std::size_t i = 1; i < S.size(); ++i) {
    const double step = std::arg(S[i] / S[i - 1]);
    if (std::abs(step) >= kPi / 2) throw NumericalError("scatter_trace: phase step contract violated; refine k grid");
    t.arg[i] = t.arg[i - 1] + step;
  }
  return t;
}

int band_edge_events(const EdgeModelSpec& e, int ell, double k1, double k2, int n_k, const EdgeOptions& opt_in) {
  const ModelSpec& m = e.bulk;
  const int D = m.M * m.N;
  std::vector<double> ks(n_k), top(n_k), next(n_k);
  for (int i = 0; i < n_k; ++i) ks[i] = k1 + (k2 - k1) * i / (n_k - 1);
  parallel_for(n_k, [&](int i) {
    double t = -1e300, b = 1e300;
    for (int j = 0; j < 256; ++j) {
      const rvec ev = bloch_bands(m, kTwoPi * j / 256, ks[i]);
      t = std::max(t, ev(ell));
      if (ell + 1 < D) b = std::min(b, ev(ell + 1));
    }
    top[i] = t;
    next[i] = ell + 1 < D ? b : t + 1.0;
  });
  const double lo = *std::min_element(top.begin(), top.end());
  const double hi = *std::max_element(next.begin(), next.end());
  EdgeOptions opt = opt_in;
  opt.periodic = false;
  opt.allow_gapless = true;
  const EdgeSpectrum s = edge_spectrum(e, ks, lo, hi, opt);
  int total = 0;
  for (const auto& br : s.branches) {
    const int n = static_cast<int>(br.idx.size());
    std::vector<bool> in(n);
    for (int a = 0; a < n; ++a) {
      const int i = br.idx[a];
      in[a] = br.weight[a] >= opt.threshold && br.energy[a] > top[i] && br.energy[a] < next[i];
    }
    auto near_top = [&](int a) {
      const int i = br.idx[a];
      return (br.energy[a] - top[i]) < 0.5 * (next[i] - top[i]);
    };
    for (int a = 0; a < n; ++a) {
      if (!in[a]) continue;
      const bool starts = a == 0 || !in[a - 1] || br.idx[a - 1] != br.idx[a] - 1;
      const bool ends = a == n - 1 || !in[a + 1] || br.idx[a + 1] != br.idx[a] + 1;
      if (starts && br.idx[a] > 0 && near_top(a)) total -= 1;
      if (ends && br.idx[a] < n_k - 1 && near_top(a)) total += 1;
    }
  }
  return total;
}

LevinsonReport levinson_delta(const EdgeModelSpec& e, int ell, double k1, double k2, const std::vector<double>& deltas,
                              int n_k, const EdgeOptions& opt) {
  if (deltas.size() != 3) throw ConfigError("levinson_delta: expects three offsets delta, delta/2, delta/4");
  for (double k : {k1, k2}) {
    const SemiBoundProbe p = semi_bound_probe(e, band_chart(e.bulk, ell, k));
    if (p.rel_beta < 1e-3) throw AssumptionError("levinson_delta: endpoint k = " + std::to_string(k) + " is semi-bound");
  }
  LevinsonReport r;
  r.k1 = k1;
  r.k2 = k2;
  r.deltas = deltas;
  for (double d : deltas) {
    const ScatterTrace t = scatter_trace(e, ell, k1, k2, d, n_k);
    r.phase_changes.push_back(t.arg.back() - t.arg.front());
  }
  const auto& a = r.phase_changes;
  // Error c1 delta + c2 delta^2 removed for the halving sequence.
  r.phase_change = (8 * a[2] - 6 * a[1] + a[0]) / 3;
  const int nk_ribbon = std::max(41, static_cast<int>(std::ceil(std::abs(k2 - k1) / kTwoPi * 401)));
  r.N_plus = band_edge_events(e, ell, k1, k2, nk_ribbon, opt);
  r.consistent = std::abs(r.phase_change - kTwoPi * r.N_plus) < 0.1;
  return r;
}

double transition_phase_change(const EdgeModelSpec& e, double mu, double k_c, double rho_k, double rho_z, int n) {
  std::vector<cplx> d(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double t = kPi * i / n;
    const double k = k_c - rho_k * std::cos(t);
    const double eta = rho_z * std::sin(t);
    if (i == 0 || i == n) {
      d[i] = 1.0;
      continue;
    }
    const cmat Lm = l_matrix(e, cplx(mu, -eta), k);
    const cmat Lp = l_matrix(e, cplx(mu, eta), k);
    d[i] = Lm.determinant() / Lp.determinant();
  }
  return accumulated_arg(d);
}

}  // namespace bec
