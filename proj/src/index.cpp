#include "bec/index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace bec {

namespace {

double circ_dist(double a, double b) { return std::abs(wrap_angle(a - b)); }

}  // namespace

std::vector<int> assign_min_cost(const Eigen::MatrixXd& cost) {
  // Shortest augmenting path version of the Hungarian method, 1-based internally.
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> perm(n);
  for (int j = 1; j <= n; ++j) perm[p[j] - 1] = j - 1;
  return perm;
}

PhaseFamily phase_family(const std::vector<cmat>& mats, const std::vector<double>& x_in) {
  const int np = static_cast<int>(mats.size());
  if (np < 2) throw ConfigError("phase_family: need at least two matrices");
  std::vector<double> x = x_in;
  if (x.empty())
    for (int j = 0; j < np; ++j) x.push_back(static_cast<double>(j) / (np - 1));
  if (static_cast<int>(x.size()) != np) throw ConfigError("phase_family: grid and family sizes differ");
  const int n = static_cast<int>(mats[0].rows());
  PhaseFamily fam;
  fam.x = x;
  fam.theta.assign(n, std::vector<double>(np));
  std::vector<cvec> prev_vec(n);
  for (int j = 0; j < np; ++j) {
    Eigen::ComplexEigenSolver<cmat> es(mats[j]);
    const cvec lam = es.eigenvalues();
    for (int i = 0; i < n; ++i)
      if (std::abs(lam(i)) == 0.0) throw ConfigError("phase_family: singular matrix in family");
    std::vector<cvec> vec(n);
    for (int i = 0; i < n; ++i) vec[i] = es.eigenvectors().col(i).normalized();
    if (j == 0) {
      for (int i = 0; i < n; ++i) {
        fam.theta[i][0] = std::arg(lam(i));
        prev_vec[i] = vec[i];
      }
      continue;
    }
    Eigen::MatrixXd cost(n, n);
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l)
        cost(i, l) = circ_dist(std::arg(lam(l)), fam.theta[i][j - 1]) +
                     1e-3 * (1.0 - std::abs(prev_vec[i].dot(vec[l])));
    const std::vector<int> perm = assign_min_cost(cost);
    for (int i = 0; i < n; ++i) {
      const double step = wrap_angle(std::arg(lam(perm[i])) - fam.theta[i][j - 1]);
      if (std::abs(step) >= kPi / 2)
        throw NumericalError("phase_family: refine grid, phase step too large on [" + std::to_string(x[j - 1]) +
                             ", " + std::to_string(x[j]) + "]");
      fam.theta[i][j] = fam.theta[i][j - 1] + step;
      prev_vec[i] = vec[perm[i]];
    }
  }
  return fam;
}

PhaseFamily phase_family_from_phases(const std::vector<std::vector<double>>& phases, const std::vector<double>& x) {
  const int np = static_cast<int>(phases.size());
  if (np < 2 || static_cast<int>(x.size()) != np) throw ConfigError("phase_family_from_phases: bad sizes");
  const int n = static_cast<int>(phases[0].size());
  PhaseFamily fam;
  fam.x = x;
  fam.theta.assign(n, std::vector<double>(np));
  for (int i = 0; i < n; ++i) fam.theta[i][0] = phases[0][i];
  for (int j = 1; j < np; ++j) {
    Eigen::MatrixXd cost(n, n);
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l) cost(i, l) = circ_dist(phases[j][l], fam.theta[i][j - 1]);
    const std::vector<int> perm = assign_min_cost(cost);
    for (int i = 0; i < n; ++i) {
      const double step = wrap_angle(phases[j][perm[i]] - fam.theta[i][j - 1]);
      if (std::abs(step) >= kPi / 2) throw NumericalError("phase_family: refine grid, phase step too large");
      fam.theta[i][j] = fam.theta[i][j - 1] + step;
    }
  }
  return fam;
}

double winding(const PhaseFamily& fam) {
  double s = 0.0;
  for (const auto& c : fam.theta) s += c.back() - c.front();
  return s / kTwoPi;
}

double endpoint_pairing_defect(const std::vector<double>& phases) {
  const int n = static_cast<int>(phases.size());
  if (n % 2 != 0) return kPi;
  std::vector<double> p;
  for (double t : phases) p.push_back(wrap_angle(t));
  std::sort(p.begin(), p.end());
  double d0 = 0.0, d1 = 0.0;
  for (int i = 0; i < n; i += 2) d0 = std::max(d0, circ_dist(p[i], p[i + 1]));
  for (int i = 1; i < n; i += 2) d1 = std::max(d1, circ_dist(p[i], p[(i + 1) % n]));
  return std::min(d0, d1);
}

int count_phase_crossings(const PhaseFamily& fam, double alpha) {
  long total = 0;
  for (const auto& c : fam.theta)
    for (std::size_t j = 0; j + 1 < c.size(); ++j) {
      const double a = std::floor((c[j] - alpha) / kTwoPi);
      const double b = std::floor((c[j + 1] - alpha) / kTwoPi);
      total += std::lround(std::abs(b - a));
    }
  return static_cast<int>(total);
}

int endpoint_degenerate_index(const PhaseFamily& fam, const EdiOptions& opt) {
  std::vector<double> first, last;
  for (const auto& c : fam.theta) {
    first.push_back(c.front());
    last.push_back(c.back());
  }
  const double d = std::max(endpoint_pairing_defect(first), endpoint_pairing_defect(last));
  if (d > opt.degeneracy_tol)
    throw NumericalError("endpoint_degenerate_index: endpoint degeneracy violated (defect " + std::to_string(d) + ")");
  std::mt19937_64 gen(opt.seed);
  std::uniform_real_distribution<double> ud(-kPi, kPi);
  std::vector<int> results;
  for (int draw = 0; draw < opt.max_draws && static_cast<int>(results.size()) < opt.references; ++draw) {
    const double alpha = ud(gen);
    bool ok = true;
    for (double t : first) ok = ok && circ_dist(t, alpha) > 1e-3;
    for (double t : last) ok = ok && circ_dist(t, alpha) > 1e-3;
    for (const auto& c : fam.theta)
      for (double t : c) ok = ok && circ_dist(t, alpha) > 1e-9;
    if (!ok) continue;
    results.push_back(count_phase_crossings(fam, alpha) % 2 == 0 ? 1 : -1);
  }
  if (static_cast<int>(results.size()) < opt.references)
    throw NumericalError("endpoint_degenerate_index: no admissible reference phase found");
  for (int r : results)
    if (r != results.front()) throw NumericalError("endpoint_degenerate_index: references disagree");
  return results.front();
}

double accumulated_arg(const std::vector<cplx>& values) {
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < values.size(); ++j) {
    if (std::abs(values[j]) == 0.0 || std::abs(values[j + 1]) == 0.0)
      throw NumericalError("accumulated_arg: vanishing value");
    const double step = std::arg(values[j + 1] / values[j]);
    if (std::abs(step) >= kPi / 2) throw NumericalError("accumulated_arg: refine grid, argument step too large");
    total += step;
  }
  return total;
}

int det_winding(const std::vector<cmat>& mats) {
  if (mats.size() < 2) throw ConfigError("det_winding: need a closed family");
  const double ref = std::max(1.0, mats.front().norm());
  if ((mats.front() - mats.back()).norm() > 1e-8 * ref) throw ConfigError("det_winding: family is not closed");
  std::vector<cplx> d;
  for (const auto& m : mats) d.push_back(m.determinant());
  return static_cast<int>(std::lround(accumulated_arg(d) / kTwoPi));
}

KramersReport kramers_check(const cmat& T, double tol) {
  if (T.rows() % 2 != 0) throw ConfigError("kramers_check: odd dimension");
  const int n = static_cast<int>(T.rows());
  const cmat eps = epsilon_matrix(n);
  KramersReport r;
  r.violation = (eps * T.conjugate() * eps.transpose() * T - cmat::Identity(n, n)).norm();
  r.pass = r.violation < tol;
  return r;
}

cmat kramers_sigma(const cmat& S) {
  const cmat eps = epsilon_matrix(static_cast<int>(S.rows()));
  return eps.transpose() * S.conjugate().inverse() * eps;
}

cmat random_kramers(int dim, std::uint64_t seed) {
  if (dim % 2 != 0) throw ConfigError("random_kramers: odd dimension");
  const cmat S = random_complex(dim, dim, seed);
  return S * kramers_sigma(S);
}

KramersFamily kramers_family(int dim, std::uint64_t seed, bool unitary_endpoints) {
  if (dim % 2 != 0) throw ConfigError("kramers_family: odd dimension");
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  std::uniform_int_distribution<int> wd(-2, 2);
  const int nb = dim / 2;
  std::vector<int> w(nb);
  std::vector<double> th0(nb), rho(nb), bend(nb);
  int expected = 1;
  for (int b = 0; b < nb; ++b) {
    w[b] = wd(gen);
    th0[b] = kTwoPi * ud(gen);
    rho[b] = unitary_endpoints ? 1.0 : 0.5 + 1.5 * ud(gen);
    bend[b] = 0.8 * (ud(gen) - 0.5);
    if (w[b] % 2 != 0) expected = -expected;
  }
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  const cmat X = s * random_complex(dim, dim, seed * 7 + 1);
  const cmat Y = s * random_complex(dim, dim, seed * 7 + 2);
  const cmat E = 0.2 * s * random_complex(dim, dim, seed * 7 + 3);
  const cmat eps = epsilon_matrix(dim);
  KramersFamily fam;
  fam.expected_index = expected;
  fam.at = [=](double phi) {
    cmat D = cmat::Zero(dim, dim);
    for (int b = 0; b < nb; ++b) {
      const double r = rho[b] * (1.0 + bend[b] * std::sin(phi));
      D(2 * b, 2 * b) = r * std::exp(kI * (th0[b] + w[b] * phi));
      D(2 * b + 1, 2 * b + 1) = std::exp(kI * (th0[b] - w[b] * phi)) / r;
    }
    const cmat S = cmat::Identity(dim, dim) + 0.3 * (std::cos(phi) * X + std::sin(phi) * Y);
    cmat C = S + eps * S.conjugate() * eps.transpose();
    if (unitary_endpoints) C = polar_unitary(C);
    return cmat(C * D * C.inverse() + std::sin(phi) * E);
  };
  return fam;
}

int family_index(const std::function<cmat(double)>& T, int n_points, const EdiOptions& opt) {
  int n = n_points;
  for (int attempt = 0;; ++attempt) {
    std::vector<cmat> mats;
    std::vector<double> x;
    for (int j = 0; j < n; ++j) {
      x.push_back(kPi * j / (n - 1));
      mats.push_back(T(x.back()));
    }
    try {
      return endpoint_degenerate_index(phase_family(mats, x), opt);
    } catch (const NumericalError& e) {
      if (attempt >= 4 || std::string(e.what()).find("refine") == std::string::npos) throw;
      n = 2 * n - 1;
    }
  }
}

cplx pfaffian(const cmat& W_in) {
  const int n = static_cast<int>(W_in.rows());
  if (W_in.cols() != n) throw ConfigError("pfaffian: matrix not square");
  if ((W_in + W_in.transpose()).norm() > 1e-10 * std::max(1.0, W_in.norm()))
    throw ConfigError("pfaffian: matrix is not skew-symmetric");
  if (n % 2 != 0) return 0.0;
  cmat A = W_in;
  cplx pf = 1.0;
  for (int k = 0; k < n - 1; k += 2) {
    int kp = k + 1;
    double best = std::abs(A(k + 1, k));
    for (int i = k + 2; i < n; ++i)
      if (std::abs(A(i, k)) > best) {
        best = std::abs(A(i, k));
        kp = i;
      }
    if (kp != k + 1) {
      A.row(k + 1).swap(A.row(kp));
      A.col(k + 1).swap(A.col(kp));
      pf = -pf;
    }
    if (A(k + 1, k) == 0.0) return 0.0;
    pf *= A(k, k + 1);
    if (k + 2 < n) {
      const int m = n - k - 2;
      const cvec tau = A.row(k).segment(k + 2, m).transpose() / A(k, k + 1);
      const cvec col = A.col(k + 1).segment(k + 2, m);
      A.block(k + 2, k + 2, m, m) += tau * col.transpose() - col * tau.transpose();
    }
  }
  return pf;
}

int fu_kane_index(const std::vector<cmat>& W) {
  if (W.size() < 2) throw ConfigError("fu_kane_index: need a family");
  for (const cmat* e : {&W.front(), &W.back()})
    if ((*e + e->transpose()).norm() > 1e-8 * std::max(1.0, e->norm()))
      throw ConfigError("fu_kane_index: endpoint matrix is not skew-symmetric");
  std::vector<cplx> d;
  for (const auto& m : W) {
    d.push_back(m.determinant());
    if (std::abs(d.back()) < 1e-14) throw NumericalError("fu_kane_index: vanishing determinant");
  }
  const double a = accumulated_arg(d);
  const cplx pf0 = pfaffian(W.front()), pf1 = pfaffian(W.back());
  const cplx branch = pf0 * std::sqrt(std::abs(d.back()) / std::abs(d.front())) * std::exp(kI * (0.5 * a));
  return (branch * std::conj(pf1)).real() > 0 ? 1 : -1;
}

}  // namespace bec
