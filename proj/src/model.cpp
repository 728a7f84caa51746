#include "bec/model.hpp"

#include <cmath>

namespace bec {

namespace {

cmat mat2(cplx a, cplx b, cplx c, cplx d) {
  cmat m(2, 2);
  m << a, b, c, d;
  return m;
}

cmat kron(const cmat& x, const cmat& y) {
  cmat out(x.rows() * y.rows(), x.cols() * y.cols());
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) out.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
  return out;
}

double param(const ParamMap& p, const std::string& key, double def) {
  auto it = p.find(key);
  return it == p.end() ? def : it->second;
}

// Haldane harmonics split into the t'-independent part and the part linear in t'.
struct HaldaneParts {
  Harmonics A0, A1, V0, V1;
};

HaldaneParts haldane_parts(double t, double tp) {
  const cplx it = kI * tp;
  HaldaneParts h;
  h.A0[0] = mat2(0, -t, 0, 0);
  h.A1[0] = mat2(it, 0, 0, -it);
  h.A1[1] = mat2(-it, 0, 0, it);
  h.V0[0] = mat2(0, -t, -t, 0);
  h.V0[1] = mat2(0, 0, -t, 0);
  h.V0[-1] = mat2(0, -t, 0, 0);
  h.V1[1] = mat2(it, 0, 0, -it);
  h.V1[-1] = mat2(-it, 0, 0, it);
  return h;
}

void add_into(Harmonics& dst, const Harmonics& src, const cmat& spin, double sign) {
  for (const auto& [m, x] : src) {
    const cmat term = sign * kron(x, spin);
    auto it = dst.find(m);
    if (it == dst.end())
      dst[m] = term;
    else
      it->second += term;
  }
}

Harmonics sum_harmonics(const Harmonics& a, const Harmonics& b) {
  Harmonics out = a;
  for (const auto& [m, x] : b) {
    auto it = out.find(m);
    if (it == out.end())
      out[m] = x;
    else
      it->second += x;
  }
  return out;
}

Harmonics adjoint_harmonics(const Harmonics& h) {
  // (sum_m X_m e^{ikm})^* = sum_m X_m^* e^{-ikm}
  Harmonics out;
  for (const auto& [m, x] : h) out[-m] = x.adjoint();
  return out;
}

Harmonics product_harmonics(const Harmonics& a, const cmat& right) {
  Harmonics out;
  for (const auto& [m, x] : a) out[m] = x * right;
  return out;
}

}  // namespace

cmat eval_harmonics(const Harmonics& h, double k, int dim) {
  cmat out = cmat::Zero(dim, dim);
  for (const auto& [m, x] : h) out += x * std::exp(kI * (k * m));
  return out;
}

cmat ModelSpec::V_at(int n, double k) const {
  int j = (n - 1) % M;
  if (j < 0) j += M;
  return eval_harmonics(V[j], k, N);
}

cmat EdgeModelSpec::Vsharp_at(int n, double k) const {
  if (n >= 1 && n <= n0) return eval_harmonics(Vsharp[n - 1], k, bulk.N);
  return bulk.V_at(n, k);
}

std::vector<std::string> builtin_names() {
  return {"graphene_zigzag", "graphene_armchair", "haldane", "kane_mele", "scalar_chain", "atomic_trivial"};
}

ModelSpec build_model(const std::string& name, const ParamMap& params) {
  const double t = param(params, "t", 1.0);
  const double tp = param(params, "tp", 0.1);
  const double lv = param(params, "lv", 0.0);
  ModelSpec m;
  m.name = name;
  m.mu = param(params, "mu", 0.0);
  m.M = 1;
  const bool needs_t = name != "atomic_trivial";
  if (needs_t && t == 0.0) throw ConfigError("build_model: hopping t must be nonzero");

  if (name == "graphene_zigzag") {
    m.N = 2;
    m.A[0] = mat2(0, -t, 0, 0);
    m.V = {Harmonics{{0, mat2(0, -t, -t, 0)}, {1, mat2(0, 0, -t, 0)}, {-1, mat2(0, -t, 0, 0)}}};
    m.singular_hopping = true;
  } else if (name == "graphene_armchair") {
    m.N = 2;
    m.A[0] = mat2(0, -t, 0, 0);
    m.A[1] = mat2(0, 0, -t, 0);
    m.V = {Harmonics{{0, mat2(0, -t, -t, 0)}}};
  } else if (name == "haldane") {
    m.N = 2;
    const HaldaneParts h = haldane_parts(t, tp);
    m.A = sum_harmonics(h.A0, h.A1);
    m.V = {sum_harmonics(h.V0, h.V1)};
    if (lv != 0.0) m.V[0][0] += mat2(lv, 0, 0, -lv);
  } else if (name == "kane_mele") {
    m.N = 4;
    const HaldaneParts h = haldane_parts(t, tp);
    const cmat id2 = cmat::Identity(2, 2);
    const cmat s3 = mat2(1, 0, 0, -1);
    add_into(m.A, h.A0, id2, 1.0);
    add_into(m.A, h.A1, s3, 1.0);
    Harmonics v;
    add_into(v, h.V0, id2, 1.0);
    add_into(v, h.V1, s3, 1.0);
    if (lv != 0.0) v[0] += kron(mat2(lv, 0, 0, -lv), id2);
    m.V = {v};
    // -i (1 x sigma_2) in the ordering pseudospin x spin.
    const cmat s2 = mat2(0, -kI, kI, 0);
    m.theta = -kI * kron(id2, s2);
  } else if (name == "scalar_chain") {
    m.N = 1;
    m.A[0] = cmat::Constant(1, 1, t);
    m.V = {Harmonics{{0, cmat::Zero(1, 1)}}};
  } else if (name == "atomic_trivial") {
    const double e0 = param(params, "e0", -1.0);
    m.N = 2;
    m.A[0] = cmat::Zero(2, 2);
    m.V = {Harmonics{{0, e0 * cmat::Identity(2, 2)}}};
    m.theta = epsilon_matrix(2);
    m.singular_hopping = true;
  } else {
    throw ConfigError("build_model: unknown model '" + name + "'");
  }
  validate_model(m);
  return m;
}

void validate_model(const ModelSpec& m, int n_test) {
  if (m.N <= 0 || m.M <= 0) throw ConfigError("model: N and M must be positive");
  if (static_cast<int>(m.V.size()) != m.M) throw ConfigError("model: need one potential per site of the period");
  auto check_dims = [&](const Harmonics& h, const char* what) {
    for (const auto& [k, x] : h)
      if (x.rows() != m.N || x.cols() != m.N) throw ConfigError(std::string("model: wrong matrix size in ") + what);
  };
  check_dims(m.A, "A");
  for (const auto& v : m.V) check_dims(v, "V");
  for (int j = 0; j < n_test; ++j) {
    const double k = kTwoPi * j / n_test + 0.1234;
    for (int n = 1; n <= m.M; ++n) {
      const cmat v = m.V_at(n, k);
      if ((v - v.adjoint()).norm() > 1e-12 * std::max(1.0, v.norm()))
        throw ConfigError("model: V_n(k) is not Hermitian");
    }
  }
  if (m.theta) {
    const cmat& th = *m.theta;
    if (th.rows() != m.N || th.cols() != m.N) throw ConfigError("model: theta has wrong size");
    const cmat id = cmat::Identity(m.N, m.N);
    if ((th.adjoint() * th - id).norm() > 1e-10) throw ConfigError("model: theta is not unitary");
    if ((th * th.conjugate() + id).norm() > 1e-10) throw ConfigError("model: theta does not square to -1");
  }
}

TrsReport check_time_reversal(const ModelSpec& m, const std::vector<double>& k_grid, double tol) {
  if (!m.theta) throw ConfigError("check_time_reversal: model has no time reversal");
  const cmat& th = *m.theta;
  const cmat thinv = th.inverse();
  TrsReport r;
  for (double k : k_grid) {
    const cmat a = th * m.A_at(k).conjugate() * thinv - m.A_at(-k);
    r.max_violation = std::max(r.max_violation, a.norm());
    for (int n = 1; n <= m.M; ++n) {
      const cmat v = th * m.V_at(n, k).conjugate() * thinv - m.V_at(n, -k);
      r.max_violation = std::max(r.max_violation, v.norm());
    }
  }
  r.pass = r.max_violation < tol;
  return r;
}

ModelSpec supercell(const ModelSpec& m, int M_new) {
  if (M_new <= 0 || M_new % m.M != 0) throw ConfigError("supercell: new period must be a multiple of M");
  if (M_new == m.M && m.M == 1) return m;
  const int N = m.N;
  const int D = M_new * N;
  ModelSpec s;
  s.name = m.name + "_x" + std::to_string(M_new);
  s.N = D;
  s.M = 1;
  s.mu = m.mu;
  s.singular_hopping = true;
  for (const auto& [h, a] : m.A) {
    cmat big = cmat::Zero(D, D);
    big.block(0, (M_new - 1) * N, N, N) = a;
    s.A[h] = big;
  }
  Harmonics v;
  auto add = [&](int h, int r, int c, const cmat& x) {
    auto it = v.find(h);
    if (it == v.end()) it = v.emplace(h, cmat::Zero(D, D)).first;
    it->second.block(r * N, c * N, N, N) += x;
  };
  for (int j = 0; j < M_new; ++j) {
    for (const auto& [h, x] : m.V[j % m.M]) add(h, j, j, x);
    if (j + 1 < M_new) {
      for (const auto& [h, a] : m.A) {
        add(h, j + 1, j, a);
        add(-h, j, j + 1, a.adjoint());
      }
    }
  }
  s.V = {v};
  if (m.theta) s.theta = theta_blocks(*m.theta, M_new);
  if (M_new == m.M) s.singular_hopping = m.singular_hopping && M_new == 1;
  return s;
}

cmat theta_blocks(const cmat& theta, int blocks) {
  const int n = static_cast<int>(theta.rows());
  cmat out = cmat::Zero(n * blocks, n * blocks);
  for (int b = 0; b < blocks; ++b) out.block(b * n, b * n, n, n) = theta;
  return out;
}

cmat bloch_matrix(const ModelSpec& m, cplx xi, double k) {
  if (m.M == 1) {
    const cmat a = m.A_at(k);
    return a / xi + a.adjoint() * xi + m.V_at(1, k);
  }
  return bloch_matrix(supercell(m, m.M), xi, k);
}

rvec bloch_bands(const ModelSpec& m, double kappa, double k) {
  const cmat h = bloch_matrix(m, std::exp(kI * kappa), k);
  Eigen::SelfAdjointEigenSolver<cmat> es(0.5 * (h + h.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

EdgeModelSpec edge_model(const ModelSpec& m, int n0, const std::vector<Harmonics>& replacements,
                         const std::optional<cmat>& boundary_matrix) {
  if (n0 < 0) throw ConfigError("edge_model: n0 must be nonnegative");
  if (static_cast<int>(replacements.size()) != n0 && !(replacements.empty()))
    throw ConfigError("edge_model: need one replacement potential per boundary site");
  EdgeModelSpec e;
  e.bulk = m;
  e.n0 = n0;
  if (replacements.empty()) {
    for (int n = 1; n <= n0; ++n) e.Vsharp.push_back(m.V[(n - 1) % m.M]);
  } else {
    e.Vsharp = replacements;
  }
  if (boundary_matrix) {
    const cmat& lam = *boundary_matrix;
    if (lam.rows() != m.N || lam.cols() != m.N) throw ConfigError("edge_model: boundary matrix has wrong size");
    const Harmonics al = product_harmonics(m.A, lam);
    for (int j = 0; j < 17; ++j) {
      const cmat x = eval_harmonics(al, kTwoPi * j / 17 + 0.31, m.N);
      if ((x - x.adjoint()).norm() > 1e-10 * std::max(1.0, x.norm()))
        throw ConfigError("edge_model: A Lambda is not Hermitian");
    }
    if (e.n0 == 0) {
      e.n0 = 1;
      e.Vsharp.push_back(m.V[0]);
    }
    e.Vsharp[0] = sum_harmonics(e.Vsharp[0], al);
  }
  for (const auto& h : e.Vsharp)
    for (int j = 0; j < 17; ++j) {
      const cmat x = eval_harmonics(h, kTwoPi * j / 17 + 0.17, m.N);
      if ((x - x.adjoint()).norm() > 1e-10 * std::max(1.0, x.norm()))
        throw ConfigError("edge_model: boundary potential is not Hermitian");
    }
  (void)adjoint_harmonics;
  return e;
}

EdgeModelSpec shifted_edge(const ModelSpec& m, double s) {
  cmat q = cmat::Zero(m.N, 1);
  q(0, 0) = 1.0;
  if (m.theta) {
    q.conservativeResize(m.N, 2);
    q.col(1) = *m.theta * q.col(0).conjugate();
  }
  const cmat b = orthonormal_basis(q, static_cast<int>(q.cols()));
  Harmonics v = m.V[0];
  if (v.count(0) == 0) v[0] = cmat::Zero(m.N, m.N);
  v[0] += s * b * b.adjoint();
  return edge_model(m, 1, {v});
}

cmat kramers_basis(const cmat& q, const cmat& theta) {
  const int dim = static_cast<int>(q.rows());
  const int r = static_cast<int>(q.cols());
  if (r % 2 != 0) throw ConfigError("kramers_basis: odd dimension");
  cmat rest = orthonormal_basis(q, r);
  cmat v(dim, r);
  for (int j = 0; j < r; j += 2) {
    const cvec u = rest.col(0);
    const cvec w = -(theta * u.conjugate());
    v.col(j) = u;
    v.col(j + 1) = w;
    if (j + 2 < r) {
      const cmat pair = v.middleCols(j, 2);
      cmat proj = rest - pair * (pair.adjoint() * rest);
      // Earlier pairs are already orthogonal to rest, so only the new pair is removed.
      rest = orthonormal_basis(proj, r - j - 2);
    }
  }
  return v;
}

ModelSpec normalize_theta(const ModelSpec& m, cmat* u_out) {
  if (!m.theta) throw ConfigError("normalize_theta: model has no time reversal");
  const cmat v = kramers_basis(cmat::Identity(m.N, m.N), *m.theta);
  const cmat u = v.adjoint();
  ModelSpec out = m;
  for (auto& [h, a] : out.A) a = u * a * u.adjoint();
  for (auto& site : out.V)
    for (auto& [h, x] : site) x = u * x * u.adjoint();
  out.theta = -epsilon_matrix(m.N);
  if (u_out) *u_out = u;
  return out;
}

BandSummary band_summary(const ModelSpec& m, double mu, int n_k, int n_kappa) {
  const int D = m.M * m.N;
  BandSummary s;
  s.band_min = rvec::Constant(D, 1e300);
  s.band_max = rvec::Constant(D, -1e300);
  for (int i = 0; i < n_k; ++i) {
    const double k = kTwoPi * i / n_k;
    for (int j = 0; j < n_kappa; ++j) {
      const rvec e = bloch_bands(m, kTwoPi * j / n_kappa, k);
      s.band_min = s.band_min.cwiseMin(e);
      s.band_max = s.band_max.cwiseMax(e);
    }
  }
  s.filled = 0;
  while (s.filled < D && s.band_max(s.filled) < mu) ++s.filled;
  s.gap_below = s.filled > 0 ? mu - s.band_max(s.filled - 1) : 1e300;
  s.gap_above = s.filled < D ? s.band_min(s.filled) - mu : 1e300;
  s.gapped = s.gap_below > 0 && s.gap_above > 0;
  return s;
}

}  // namespace bec
