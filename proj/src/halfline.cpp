#include "bec/halfline.hpp"

#include "bec/index.hpp"
#include "bec/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace bec {

cmat truncate(const EdgeModelSpec& e, int L, double k) {
  const ModelSpec& m = e.bulk;
  if (L <= e.n0) throw ConfigError("truncate: L must exceed the boundary-zone depth");
  const int N = m.N, sites = L * m.M;
  cmat h = cmat::Zero(sites * N, sites * N);
  const cmat A = m.A_at(k);
  for (int n = 1; n <= sites; ++n) {
    const int o = (n - 1) * N;
    const cmat v = e.Vsharp_at(n, k);
    h.block(o, o, N, N) = 0.5 * (v + v.adjoint());
    if (n > 1) {
      h.block(o, o - N, N, N) = A;
      h.block(o - N, o, N, N) = A.adjoint();
    }
  }
  return h;
}

std::vector<double> periodic_grid(int n) {
  std::vector<double> g(n);
  for (int j = 0; j < n; ++j) g[j] = kTwoPi * j / n;
  return g;
}

RibbonLevels ribbon_levels(const EdgeModelSpec& e, double k, double lo, double hi, const EdgeOptions& opt) {
  const cmat h = truncate(e, opt.L, k);
  Eigen::SelfAdjointEigenSolver<cmat> es(h);
  const rvec& ev = es.eigenvalues();
  std::vector<int> sel;
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) >= lo && ev(i) <= hi) sel.push_back(i);
  const int nw = std::min<int>(opt.W * e.bulk.M * e.bulk.N, static_cast<int>(h.rows()));
  RibbonLevels out;
  const int ns = static_cast<int>(sel.size());
  out.energy.resize(ns);
  out.weight.resize(ns);
  out.vecs.resize(h.rows(), ns);
  for (int a = 0; a < ns; ++a) {
    out.energy(a) = ev(sel[a]);
    out.vecs.col(a) = es.eigenvectors().col(sel[a]);
  }
  // Inside a near-degenerate cluster the eigenbasis is arbitrary; use the basis that
  // diagonalizes the edge weight instead.
  int a = 0;
  while (a < ns) {
    int b = a + 1;
    while (b < ns && out.energy(b) - out.energy(b - 1) < opt.cluster_tol) ++b;
    if (b - a > 1) {
      const cmat vc = out.vecs.middleCols(a, b - a);
      const cmat top = vc.topRows(nw);
      Eigen::SelfAdjointEigenSolver<cmat> ws(top.adjoint() * top);
      out.vecs.middleCols(a, b - a) = vc * ws.eigenvectors();
    }
    a = b;
  }
  for (int i = 0; i < ns; ++i) out.weight(i) = out.vecs.col(i).head(nw).squaredNorm();
  return out;
}

bool window_hits_bulk(const ModelSpec& m, double lo, double hi, const std::vector<double>& k_grid, int n_kappa) {
  const int stride = std::max<int>(1, static_cast<int>(k_grid.size()) / 101);
  for (std::size_t i = 0; i < k_grid.size(); i += stride)
    for (int j = 0; j < n_kappa; ++j) {
      const rvec e = bloch_bands(m, kTwoPi * j / n_kappa, k_grid[i]);
      for (int b = 0; b < e.size(); ++b)
        if (e(b) >= lo && e(b) <= hi) return true;
    }
  return false;
}

namespace {

std::string& cache_dir_ref() {
  static std::string dir;
  return dir;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string exact(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string cache_path(const EdgeModelSpec& e, const std::vector<double>& k_grid, double lo, double hi,
                       const EdgeOptions& opt) {
  nlohmann::json key;
  key["model"] = model_to_json(e.bulk, &e);
  std::string ks;
  for (double k : k_grid) ks += exact(k) + ",";
  key["k"] = ks;
  key["window"] = exact(lo) + "," + exact(hi);
  key["opt"] = {opt.L, opt.W, exact(opt.threshold), exact(opt.gate), exact(opt.cluster_tol), opt.periodic,
                opt.allow_gapless};
  char name[40];
  std::snprintf(name, sizeof name, "spectrum-%016llx.json", static_cast<unsigned long long>(fnv1a(key.dump())));
  return (std::filesystem::path(cache_dir_ref()) / name).string();
}

nlohmann::json spectrum_to_json(const EdgeSpectrum& s) {
  nlohmann::json br = nlohmann::json::array();
  for (const auto& b : s.branches)
    br.push_back({{"id", b.id}, {"idx", b.idx}, {"energy", b.energy}, {"weight", b.weight},
                  {"max_weight", b.max_weight}, {"localized", b.localized}});
  return {{"k", s.k}, {"window_gapped", s.window_gapped}, {"branches", br}};
}

bool spectrum_from_json(const nlohmann::json& j, EdgeSpectrum& s) {
  try {
    s.k = j.at("k").get<std::vector<double>>();
    s.window_gapped = j.at("window_gapped").get<bool>();
    for (const auto& b : j.at("branches")) {
      Branch br;
      br.id = b.at("id").get<int>();
      br.idx = b.at("idx").get<std::vector<int>>();
      br.energy = b.at("energy").get<std::vector<double>>();
      br.weight = b.at("weight").get<std::vector<double>>();
      br.max_weight = b.at("max_weight").get<double>();
      br.localized = b.at("localized").get<bool>();
      s.branches.push_back(br);
    }
    return true;
  } catch (const nlohmann::json::exception&) {
    return false;
  }
}

EdgeSpectrum compute_spectrum(const EdgeModelSpec& e, const std::vector<double>& k_grid, double lo, double hi,
                              const EdgeOptions& opt);

}  // namespace

void set_spectrum_cache_dir(const std::string& dir) { cache_dir_ref() = dir; }
const std::string& spectrum_cache_dir() { return cache_dir_ref(); }

EdgeSpectrum edge_spectrum(const EdgeModelSpec& e, const std::vector<double>& k_grid, double lo, double hi,
                           const EdgeOptions& opt) {
  if (cache_dir_ref().empty()) return compute_spectrum(e, k_grid, lo, hi, opt);
  const std::string path = cache_path(e, k_grid, lo, hi, opt);
  {
    std::ifstream in(path);
    if (in) {
      EdgeSpectrum s;
      s.edge = e;
      s.opt = opt;
      s.lo = lo;
      s.hi = hi;
      nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
      if (!j.is_discarded() && spectrum_from_json(j, s)) {
        if (!s.window_gapped && !opt.allow_gapless)
          throw AssumptionError("edge_spectrum: window intersects the bulk bands");
        return s;
      }
    }
  }
  EdgeSpectrum s = compute_spectrum(e, k_grid, lo, hi, opt);
  std::filesystem::create_directories(cache_dir_ref());
  write_file_atomic(path, spectrum_to_json(s).dump());
  return s;
}

namespace {

EdgeSpectrum compute_spectrum(const EdgeModelSpec& e, const std::vector<double>& k_grid, double lo, double hi,
                              const EdgeOptions& opt) {
  if (k_grid.size() < 2) throw ConfigError("edge_spectrum: need at least two k points");
  if (!(lo < hi)) throw ConfigError("edge_spectrum: empty window");
  EdgeSpectrum s;
  s.edge = e;
  s.opt = opt;
  s.lo = lo;
  s.hi = hi;
  s.k = k_grid;
  if (opt.periodic) s.k.push_back(k_grid.front() + kTwoPi);
  s.window_gapped = !window_hits_bulk(e.bulk, lo, hi, k_grid);
  if (!s.window_gapped && !opt.allow_gapless)
    throw AssumptionError("edge_spectrum: window intersects the bulk bands");

  const int nk = static_cast<int>(s.k.size());
  std::vector<RibbonLevels> lv(nk);
  parallel_for(nk, [&](int j) { lv[j] = ribbon_levels(e, s.k[j], lo, hi, opt); });

  // Overlap-driven assignment: exactly degenerate Kramers partners crossing each other are
  // told apart by their eigenvectors, not by |d eps|.
  std::vector<int> active;  // branch id per level at the previous k
  for (int j = 0; j < nk; ++j) {
    const int nc = static_cast<int>(lv[j].energy.size());
    std::vector<int> now(nc, -1);
    if (j > 0 && !active.empty() && nc > 0) {
      const int np = static_cast<int>(active.size());
      const int n = np + nc;
      Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(n, n);
      const double unmatched = 1.2;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          if (a < np && b < nc) {
            const double de = std::abs(lv[j].energy(b) - lv[j - 1].energy(a));
            const double ov = std::abs(lv[j - 1].vecs.col(a).dot(lv[j].vecs.col(b)));
            cost(a, b) = de > opt.gate ? 1e6 : (1.0 - ov) + 0.5 * de / opt.gate;
          } else if (a < np || b < nc) {
            cost(a, b) = unmatched;
          }
        }
      const std::vector<int> perm = assign_min_cost(cost);
      for (int a = 0; a < np; ++a)
        if (perm[a] < nc && cost(a, perm[a]) < unmatched) now[perm[a]] = active[a];
    }
    for (int b = 0; b < nc; ++b) {
      if (now[b] < 0) {
        Branch br;
        br.id = static_cast<int>(s.branches.size());
        s.branches.push_back(br);
        now[b] = br.id;
      }
      Branch& br = s.branches[now[b]];
      br.idx.push_back(j);
      br.energy.push_back(lv[j].energy(b));
      br.weight.push_back(lv[j].weight(b));
      br.max_weight = std::max(br.max_weight, lv[j].weight(b));
    }
    active = now;
  }
  for (auto& br : s.branches) br.localized = br.max_weight >= opt.threshold;
  return s;
}

struct Level {
  double energy = 0.0, weight = 0.0;
  cvec vec;
};

// Ribbon level at k continuing a given eigenvector (largest overlap).
Level follow_level(const EdgeSpectrum& s, double k, const cvec& v) {
  const RibbonLevels lv = ribbon_levels(s.edge, k, s.lo - s.opt.gate, s.hi + s.opt.gate, s.opt);
  if (lv.energy.size() == 0) throw NumericalError("find_crossings: branch lost during refinement");
  int best = 0;
  double ov = -1.0;
  for (int i = 0; i < lv.energy.size(); ++i) {
    const double o = std::abs(v.dot(lv.vecs.col(i)));
    if (o > ov) {
      ov = o;
      best = i;
    }
  }
  return {lv.energy(best), lv.weight(best), lv.vecs.col(best)};
}

Level level_near(const EdgeSpectrum& s, double k, double target) {
  const RibbonLevels lv = ribbon_levels(s.edge, k, s.lo - s.opt.gate, s.hi + s.opt.gate, s.opt);
  if (lv.energy.size() == 0) throw NumericalError("find_crossings: no level near the branch");
  int best = 0;
  for (int i = 1; i < lv.energy.size(); ++i)
    if (std::abs(lv.energy(i) - target) < std::abs(lv.energy(best) - target)) best = i;
  return {lv.energy(best), lv.weight(best), lv.vecs.col(best)};
}

}  // namespace

std::vector<Crossing> find_crossings(const EdgeSpectrum& s, double mu, double slope_tol) {
  std::vector<Crossing> out;
  for (const auto& br : s.branches) {
    for (std::size_t i = 0; i + 1 < br.idx.size(); ++i) {
      if (br.idx[i + 1] != br.idx[i] + 1) continue;
      const double fa = br.energy[i] - mu, fb = br.energy[i + 1] - mu;
      if (!(fa * fb < 0)) continue;
      double ka = s.k[br.idx[i]], kb = s.k[br.idx[i + 1]];
      Level cur = level_near(s, ka, br.energy[i]);
      const double ea = cur.energy;
      // Bisection on the sign of eps - mu, following the branch by eigenvector overlap so
      // that degenerate partners (Kramers or opposite edge) are not confused.
      while (kb - ka > 1e-8) {
        const double km = 0.5 * (ka + kb);
        const Level lm = follow_level(s, km, cur.vec);
        if ((lm.energy - mu) * (ea - mu) > 0)
          ka = km;
        else
          kb = km;
        cur = lm;
      }
      Crossing c;
      c.k = 0.5 * (ka + kb);
      c.branch = br.id;
      const double h = 1e-5;
      const Level lp = follow_level(s, c.k + h, cur.vec);
      const Level lm = follow_level(s, c.k - h, cur.vec);
      c.slope = (lp.energy - lm.energy) / (2 * h);
      c.weight = 0.5 * (lp.weight + lm.weight);
      if (std::abs(c.slope) < slope_tol)
        throw AssumptionError("crossing is tangential at k = " + std::to_string(c.k) + "; adjust mu");
      if (c.k >= kTwoPi - 1e-6) c.k -= kTwoPi;
      if (std::abs(c.k) < 1e-6) c.k = 0.0;
      out.push_back(c);
    }
  }
  std::sort(out.begin(), out.end(), [](const Crossing& a, const Crossing& b) { return a.k < b.k; });
  return out;
}

TiCount ti_count_from_crossings(const std::vector<Crossing>& c, double threshold) {
  TiCount r;
  for (const auto& x : c) {
    if (x.weight < threshold) continue;
    const double k = x.k;
    const bool endpoint = std::abs(k) < 1e-6 || std::abs(k - kPi) < 1e-6 || std::abs(k - kTwoPi) < 1e-6;
    if (endpoint)
      r.twice_n += 1;
    else if (k > 0 && k < kPi)
      r.twice_n += 2;
  }
  if (r.twice_n % 2 != 0) throw NumericalError("count_crossings_ti: odd number of crossings at k = 0, pi");
  r.n = r.twice_n / 2;
  r.index = r.n % 2 == 0 ? 1 : -1;
  return r;
}

TiCount count_crossings_ti(const EdgeSpectrum& s, double mu, double slope_tol) {
  return ti_count_from_crossings(find_crossings(s, mu, slope_tol), s.opt.threshold);
}

int qh_count_from_crossings(const std::vector<Crossing>& c, double threshold) {
  int n = 0;
  for (const auto& x : c)
    if (x.weight >= threshold) n += x.slope < 0 ? 1 : -1;
  return n;
}

int count_crossings_qh(const EdgeSpectrum& s, double mu, double slope_tol) {
  return qh_count_from_crossings(find_crossings(s, mu, slope_tol), s.opt.threshold);
}

}  // namespace bec
