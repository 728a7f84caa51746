// Acceptance run: one PASS/FAIL line per criterion, INFO lines carry the measurements.

#include "bec/bundle.hpp"
#include "bec/halfline.hpp"
#include "bec/index.hpp"
#include "bec/scatter.hpp"
#include "bec/transfer.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace bec;

namespace {

int failures = 0;
std::set<int> only;  // criteria named on the command line; empty runs all

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void info(const std::string& s) { std::printf("INFO  %s\n", s.c_str()); std::fflush(stdout); }

void verdict(int id, bool pass, const std::string& what) {
  std::printf("%s  criterion %d: %s\n", pass ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  failures += !pass;
}

// Runs one criterion; an exception is a failure with its message.
void criterion(int id, const std::function<std::pair<bool, std::string>()>& body) {
  if (!only.empty() && !only.count(id)) return;
  const auto t0 = Clock::now();
  try {
    auto [pass, what] = body();
    verdict(id, pass, what + " [" + std::to_string(static_cast<int>(since(t0) + 0.5)) + " s]");
  } catch (const std::exception& e) {
    verdict(id, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%.6g", x);
  return b;
}

int localized_qh(const EdgeModelSpec& e, double mu, double lo, double hi, int n_k = 401,
                 std::vector<Crossing>* out = nullptr) {
  const EdgeSpectrum s = edge_spectrum(e, periodic_grid(n_k), lo, hi);
  const auto c = find_crossings(s, mu);
  if (out) *out = c;
  return qh_count_from_crossings(c);
}

TiCount localized_ti(const EdgeModelSpec& e, double mu, double lo, double hi, int n_k = 401,
                     std::vector<Crossing>* out = nullptr) {
  const EdgeSpectrum s = edge_spectrum(e, periodic_grid(n_k), lo, hi);
  const auto c = find_crossings(s, mu);
  if (out) *out = c;
  return ti_count_from_crossings(c);
}

// ---------------------------------------------------------------------------------------

std::pair<bool, std::string> zigzag_zero_modes() {
  EdgeOptions o;
  o.L = 60;
  o.allow_gapless = true;
  const int nk = 401;
  const double step = kTwoPi / nk;
  const auto grid = periodic_grid(nk);
  const EdgeSpectrum z = edge_spectrum(edge_model(build_model("graphene_zigzag")), grid, -0.01, 0.01, o);
  auto zero_modes = [&](const EdgeSpectrum& sp) {
    std::vector<bool> hit(nk, false);
    for (const auto& b : sp.branches)
      for (std::size_t i = 0; i < b.idx.size(); ++i)
        if (std::abs(b.energy[i]) < 1e-3 && b.weight[i] >= o.threshold && b.idx[i] < nk) hit[b.idx[i]] = true;
    return hit;
  };
  const std::vector<bool> hit = zero_modes(z);
  int first = -1, last = -1, runs = 0;
  for (int i = 0; i < nk; ++i)
    if (hit[i]) {
      if (first < 0) first = i;
      if (i == 0 || !hit[i - 1]) ++runs;
      last = i;
    }
  const double a = kTwoPi / 3, b = 2 * kTwoPi / 3;
  bool ok = runs == 1;
  std::string msg;
  if (first >= 0) {
    const double ka = grid[first], kb = grid[last];
    info("zigzag localized zero modes on k in [" + fmt(ka) + ", " + fmt(kb) + "], expected (" + fmt(a) + ", " +
         fmt(b) + "), grid step " + fmt(step) + ", " + std::to_string(runs) + " run(s)");
    ok = ok && ka > a && ka - a <= step && kb < b && b - kb <= step;
    msg = "zigzag zero-mode interval [" + fmt(ka) + ", " + fmt(kb) + "] vs (2pi/3, 4pi/3) +- one step";
    // Where the interval falls short: energy splitting or weight.
    for (int i : {first - 1, last + 1}) {
      if (i < 0 || i >= nk) continue;
      const RibbonLevels lv = ribbon_levels(z.edge, grid[i], -0.05, 0.05, o);
      double best_e = 1e300, best_w = 0.0;
      for (int j = 0; j < lv.energy.size(); ++j)
        if (lv.weight(j) > best_w) {
          best_w = lv.weight(j);
          best_e = lv.energy(j);
        }
      info("  neighbour k = " + fmt(grid[i]) + ": most localized level eps = " + fmt(best_e) + ", weight " +
           fmt(best_w));
    }
    // Pairs of opposite-edge zero modes split by less than 1e-3 are unmixed by edge weight.
    EdgeOptions wide = o;
    wide.cluster_tol = 1e-3;
    const std::vector<bool> h2 = zero_modes(edge_spectrum(z.edge, grid, -0.01, 0.01, wide));
    int f2 = -1, l2 = -1;
    for (int i = 0; i < nk; ++i)
      if (h2[i]) {
        if (f2 < 0) f2 = i;
        l2 = i;
      }
    if (f2 >= 0)
      info("  with cluster_tol 1e-3: [" + fmt(grid[f2]) + ", " + fmt(grid[l2]) + "], " +
           fmt((grid[f2] - a) / step) + " / " + fmt((b - grid[l2]) / step) + " steps short");
  } else {
    ok = false;
    msg = "no localized zero mode found";
  }
  const EdgeSpectrum ac = edge_spectrum(edge_model(build_model("graphene_armchair")), grid, -0.1, 0.1, o);
  int loc = 0;
  for (const auto& br : ac.branches) loc += br.localized;
  info("armchair localized in-window branches: " + std::to_string(loc));
  ok = ok && loc == 0;
  return {ok, msg + "; armchair localized branches " + std::to_string(loc)};
}

// ---------------------------------------------------------------------------------------

std::pair<bool, std::string> haldane_duality() {
  const ModelSpec m = build_model("haldane", {{"t", 1}, {"tp", 0.1}});
  const BundleGrid b = bloch_bundle(m, {0}, 128, 101);
  const int hol = holonomy_chern(b), plaq = plaquette_chern(b);
  const int bulk = bulk_index_qh(m, 0.0).value;
  const int edge = localized_qh(edge_model(m), 0.0, -0.25, 0.25);
  info("haldane chern(lower band): eigenphase " + std::to_string(hol) + ", plaquette " + std::to_string(plaq) +
       "; bulk_index_qh " + std::to_string(bulk) + "; count_crossings_qh " + std::to_string(edge));
  const bool equal = hol == plaq && plaq == bulk && bulk == edge;
  info(std::string("haldane: all four values equal: ") + (equal ? "yes" : "no"));
  return {equal && hol == 1, "values " + std::to_string(hol) + "/" + std::to_string(plaq) + "/" + std::to_string(bulk) +
                                 "/" + std::to_string(edge) + " (expected 1 each)"};
}

// ---------------------------------------------------------------------------------------

struct TiValues {
  int bulk, edge, z2, fk;
};

TiValues ti_values(const ModelSpec& m, const BulkOptions& o, int n_k_ribbon) {
  TiValues v;
  v.bulk = bulk_index_ti(m, 0.0, o).value;
  v.edge = localized_ti(edge_model(m), 0.0, -0.2, 0.2, n_k_ribbon).index;
  v.z2 = band_z2(m, {0, 1}, o).value;
  v.fk = band_fu_kane(m, {0, 1}, o).value;
  return v;
}

std::string ti_str(const TiValues& v) {
  return "bulk " + std::to_string(v.bulk) + ", edge " + std::to_string(v.edge) + ", z2(E_1) " + std::to_string(v.z2) +
         ", fu-kane " + std::to_string(v.fk);
}

std::pair<bool, std::string> kane_mele_duality() {
  const ModelSpec m = build_model("kane_mele", {{"t", 1}, {"tp", 0.1}});
  const TiValues a = ti_values(m, {}, 401);
  info("kane_mele lv = 0: " + ti_str(a));
  // Single occupied pair: the product over pairs is the one factor I(E_1).
  const bool product = a.bulk == a.z2;
  const ModelSpec big = build_model("kane_mele", {{"t", 1}, {"tp", 0.1}, {"lv", 1.0}});
  const BandSummary s = band_summary(big, 0.0);
  info("kane_mele lv = 1: gap " + fmt(s.gap_below) + " / " + fmt(s.gap_above));
  const TiValues b = ti_values(big, {}, 401);
  info("kane_mele lv = 1: " + ti_str(b));
  const bool ok = a.bulk == -1 && a.edge == -1 && a.z2 == -1 && a.fk == -1 && product && b.bulk == 1 && b.edge == 1 &&
                  b.z2 == 1 && b.fk == 1;
  return {ok, "lv=0 {" + ti_str(a) + "}, lv=1 {" + ti_str(b) + "}"};
}

// ---------------------------------------------------------------------------------------

// Smooth GL path with prescribed endpoints: linear plus a sin bump.
std::function<cmat(double)> gl_path(const cmat& a, const cmat& b, const cmat& bump) {
  return [=](double phi) { return cmat(a + (phi / kPi) * (b - a) + std::sin(phi) * bump); };
}

cmat theta_conj(const cmat& x) {
  const cmat e = epsilon_matrix(static_cast<int>(x.rows()));
  return e * x.conjugate() * e.inverse();
}

std::pair<bool, std::string> property_suite() {
  const int dim = 4, trials = 100;
  int bad_pair = 0, bad_mult = 0, bad_conj = 0, bad_polar = 0, bad_ref = 0, bad_pf = 0;
  int m_minus = 0;
  for (int s = 0; s < trials; ++s) {
    const std::uint64_t seed = 1000 + 17 * s;
    // Kramers eigenvalue pairing.
    const cmat t = random_kramers(dim, seed);
    const Eigen::VectorXcd ev = Eigen::ComplexEigenSolver<cmat>(t).eigenvalues();
    for (int i = 0; i < dim; ++i) {
      double best = 1e300;
      for (int j = 0; j < dim; ++j) best = std::min(best, std::abs(ev(j) - 1.0 / std::conj(ev(i))));
      if (best > 1e-9 * std::max(1.0, std::abs(ev(i)))) {
        ++bad_pair;
        break;
      }
    }

    const KramersFamily f = kramers_family(dim, seed);
    const int i1 = family_index(f.at);

    // Multiplicativity: T2 = M_- T1 M_+^{-1} with M_-(phi) = Theta0 N(phi) Theta0^{-1}, where N
    // shares its endpoints with M_+ but not its interior.
    const cmat x0 = random_complex(dim, dim, seed + 1), x1 = random_complex(dim, dim, seed + 2);
    const auto mplus = gl_path(x0, x1, random_complex(dim, dim, seed + 3));
    const auto nplus = gl_path(x0, x1, 2.0 * random_complex(dim, dim, seed + 4));
    auto M = [&](double p) { return cmat(theta_conj(nplus(p)) * mplus(p).inverse()); };
    auto T2 = [&](double p) { return cmat(theta_conj(nplus(p)) * f.at(p) * mplus(p).inverse()); };
    const int im = family_index(M);
    m_minus += im == -1;
    if (family_index(T2) != i1 * im) ++bad_mult;

    // Conjugation invariance with M quaternionic at the endpoints.
    const cmat q0 = 0.5 * (x0 + theta_conj(x0)), q1 = 0.5 * (x1 + theta_conj(x1));
    const auto mq = gl_path(q0, q1, random_complex(dim, dim, seed + 5));
    auto T3 = [&](double p) { return cmat(mq(p) * f.at(p) * mq(p).inverse()); };
    if (family_index(T3) != i1) ++bad_conj;

    // Polar part.
    auto U = [&](double p) { return polar_unitary(f.at(p)); };
    if (family_index(U) != i1) ++bad_polar;

    // Reference-phase independence.
    std::vector<cmat> mats;
    for (int j = 0; j <= 300; ++j) mats.push_back(f.at(kPi * j / 300));
    const PhaseFamily fam = phase_family(mats);
    std::set<int> seen;
    for (std::uint64_t r = 0; r < 5; ++r) {
      EdiOptions eo;
      eo.seed = seed * 31 + r;
      seen.insert(endpoint_degenerate_index(fam, eo));
    }
    if (seen.size() != 1 || *seen.begin() != i1) ++bad_ref;

    // Pfaffian route on unitary endpoints.
    const KramersFamily g = kramers_family(dim, seed, true);
    std::vector<cmat> w;
    for (int j = 0; j <= 400; ++j) w.push_back(g.at(kPi * j / 400) * epsilon_matrix(dim));
    if (fu_kane_index(w) != family_index(g.at)) ++bad_pf;
    if (i1 != f.expected_index) ++bad_ref;
  }
  info("property suite (" + std::to_string(trials) + " trials): pairing " + std::to_string(bad_pair) +
       ", multiplicativity " + std::to_string(bad_mult) + " (I(M) = -1 in " + std::to_string(m_minus) +
       "), conjugation " + std::to_string(bad_conj) + ", polar " + std::to_string(bad_polar) + ", reference " +
       std::to_string(bad_ref) + ", pfaffian " + std::to_string(bad_pf) + " failures");
  const int total = bad_pair + bad_mult + bad_conj + bad_polar + bad_ref + bad_pf;
  return {total == 0, std::to_string(total) + " failures over 6 x " + std::to_string(trials) + " trials"};
}

// ---------------------------------------------------------------------------------------

std::pair<bool, std::string> casoratian_suite() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double c1 = 0, c4 = 0, pair = 0;
  int bad_deg = 0, bad_inside = 0, singular_models = 0;
  std::string deg_notes;
  for (const auto& name : builtin_names()) {
    const ModelSpec m = build_model(name);
    const int N = m.N;
    bool invertible = true;
    for (double k : {0.3, 1.1, 2.2}) invertible = invertible && std::abs(m.A_at(k).determinant()) > 1e-12;

    // C1: constancy for general (growing) solutions at z and conj z.
    if (invertible) {
      for (int trial = 0; trial < 5; ++trial) {
        const cplx z(4 * u(rng) - 2, 0.5 * u(rng) + 0.1);
        const double k = 0.3 + 2.5 * u(rng);
        const auto psi = propagate(m, z, k, random_complex(N, N, trial + 1), random_complex(N, N, trial + 2), 8);
        auto phi = propagate(m, std::conj(z), k, random_complex(N, N, trial + 3), random_complex(N, N, trial + 4), 8);
        for (auto& p : phi) p = p.adjoint().eval();
        const cmat ref = casoratian(m, k, phi, psi, 0, 0);
        double scale = 0;
        for (int n = 0; n <= 8; ++n) scale = std::max(scale, phi[n].norm() * psi[n].norm());
        for (int n = 1; n < 8; ++n) c1 = std::max(c1, (casoratian(m, k, phi, psi, 0, n) - ref).norm() / scale);
      }
    }

    // C4: Bloch waves carry C(psi^*, psi) = -i lambda' |v|^2.
    for (int trial = 0; trial < 5; ++trial) {
      const double k = 0.3 + 2.5 * u(rng), kap = kTwoPi * u(rng), h = 1e-3;
      const cmat hm = bloch_matrix(m, std::exp(kI * kap), k);
      Eigen::SelfAdjointEigenSolver<cmat> es(hm);
      for (int b = 0; b < N; ++b) {
        const rvec ev = es.eigenvalues();
        const bool isolated = (b == 0 || ev(b) - ev(b - 1) > 1e-6) && (b == N - 1 || ev(b + 1) - ev(b) > 1e-6);
        if (!isolated) continue;
        const cvec v = es.eigenvectors().col(b);
        std::vector<cmat> psi, phi;
        for (int n = 0; n < 2; ++n) {
          psi.push_back(std::exp(kI * (kap * n)) * v);
          phi.push_back(psi.back().adjoint());
        }
        auto lam = [&](double x) { return bloch_bands(m, x, k)(b); };
        const double dl = (8 * (lam(kap + h) - lam(kap - h)) - (lam(kap + 2 * h) - lam(kap - 2 * h))) / (12 * h);
        const cplx c = casoratian(m, k, phi, psi, 0, 0)(0, 0);
        c4 = std::max(c4, std::abs(c - cplx(0.0, -dl)));
      }
    }

    // Degrees of P(xi, z).
    const LaurentPoly p = bloch_poly(m, 1.0);
    const int zd = p.z_degree(), hi = p.xi_degree_high(), lo = p.xi_degree_low();
    deg_notes += " " + name + "(z^" + std::to_string(zd) + ", xi^" + std::to_string(lo) + ".." + std::to_string(hi) + ")";
    if (invertible) {
      if (zd != N * m.M || hi != N || lo != -N) ++bad_deg;
    } else {
      ++singular_models;
      if (zd != N * m.M) ++bad_deg;
    }

    // Root pairing under z -> conj z, xi -> 1 / conj xi.
    for (int trial = 0; trial < 5; ++trial) {
      const cplx z(4 * u(rng) - 2, 0.5 * u(rng) + 0.05);
      const double k = 0.3 + 2.5 * u(rng);
      auto a = transfer_roots(m, z, k), b = transfer_roots(m, std::conj(z), k);
      for (const auto& r : a) {
        if (r.cls == RootClass::zero || r.cls == RootClass::infinite) continue;
        double best = 1e300;
        for (const auto& s : b)
          if (s.cls != RootClass::zero && s.cls != RootClass::infinite)
            best = std::min(best, std::abs(r.xi - 1.0 / std::conj(s.xi)) / std::max(1.0, std::abs(r.xi)));
        pair = std::max(pair, best);
      }
    }

    // N decaying roots for 50 random points in gaps of sigma(H(k)).
    int done = 0;
    while (done < 50) {
      const double k = 0.05 + (kTwoPi - 0.1) * u(rng);
      rvec lo_b = rvec::Constant(N, 1e300), hi_b = rvec::Constant(N, -1e300);
      for (int j = 0; j < 720; ++j) {
        const rvec e = bloch_bands(m, kTwoPi * j / 720, k);
        lo_b = lo_b.cwiseMin(e);
        hi_b = hi_b.cwiseMax(e);
      }
      std::vector<std::pair<double, double>> gaps = {{lo_b(0) - 2.0, lo_b(0) - 0.02}, {hi_b(N - 1) + 0.02, hi_b(N - 1) + 2.0}};
      for (int b = 0; b + 1 < N; ++b)
        if (lo_b(b + 1) - hi_b(b) > 0.05) gaps.push_back({hi_b(b) + 0.02, lo_b(b + 1) - 0.02});
      const auto& g = gaps[static_cast<std::size_t>(u(rng) * gaps.size()) % gaps.size()];
      const double z = g.first + (g.second - g.first) * u(rng);
      const RootCount c = count_roots(transfer_roots(m, z, k));
      // Roots at xi = 0 (singular hopping) are decaying solutions supported near the boundary.
      if (c.inside + c.zero != N * m.M || c.unimodular != 0) ++bad_inside;
      ++done;
    }
  }
  info("C1 constancy max rel dev " + fmt(c1) + " (tol 1e-10); C4 identity max dev " + fmt(c4) + " (tol 1e-8)");
  info("root pairing max dev " + fmt(pair) + " (tol 1e-8); inside-root count failures " + std::to_string(bad_inside));
  info("P(xi, z) degrees:" + deg_notes + "; xi degrees asserted for invertible A only (" +
       std::to_string(singular_models) + " built-ins have singular A)");
  const bool ok = c1 < 1e-10 && c4 < 1e-8 && pair < 1e-8 && bad_deg == 0 && bad_inside == 0;
  return {ok, "C1 " + fmt(c1) + ", C4 " + fmt(c4) + ", pairing " + fmt(pair) + ", degree failures " +
                  std::to_string(bad_deg) + " (xi degree +-N checked on GL(N) hopping only, " +
                  std::to_string(singular_models) + " singular-A built-ins drop it), inside-count failures " +
                  std::to_string(bad_inside)};
}

// ---------------------------------------------------------------------------------------

struct LCheck {
  int crossings = 0, matched = 0, unmatched_zeros = 0;
  double herm = 0.0;
  double dl_max = -1e300;
};

LCheck zeros_vs_crossings(const EdgeModelSpec& e, double mu, bool ti, bool l_checks) {
  LCheck r;
  const int nk = 401;
  const double step = kTwoPi / nk;
  std::vector<Crossing> c;
  if (ti)
    localized_ti(e, mu, -0.2, 0.2, nk, &c);
  else
    localized_qh(e, mu, -0.2, 0.2, nk, &c);
  const auto zeros = edge_zeros(e, mu);
  auto circ = [](double a, double b) { return std::abs(wrap_angle(a - b)); };
  std::vector<bool> used(zeros.size(), false);
  for (const auto& x : c) {
    if (x.weight < 0.5) continue;
    ++r.crossings;
    for (std::size_t i = 0; i < zeros.size(); ++i)
      if (circ(zeros[i], x.k) <= step) {
        ++r.matched;
        used[i] = true;
        break;
      }
    if (!l_checks) continue;
    // L(mu, k_c) is Hermitian and its vanishing eigenvalue decreases in z.
    const cmat l0 = l_matrix(e, mu, x.k);
    r.herm = std::max(r.herm, (l0 - l0.adjoint()).norm() / std::max(1.0, l0.norm()));
    const double h = 1e-6;
    const rvec a = Eigen::SelfAdjointEigenSolver<cmat>(0.5 * (l0 + l0.adjoint().eval())).eigenvalues();
    Eigen::Index j = 0;
    a.cwiseAbs().minCoeff(&j);
    auto eig_near = [&](double z) {
      const cmat l = l_matrix(e, z, x.k);
      const rvec ev = Eigen::SelfAdjointEigenSolver<cmat>(0.5 * (l + l.adjoint().eval())).eigenvalues();
      Eigen::Index i = 0;
      (ev.array() - a(j)).abs().minCoeff(&i);
      return ev(i);
    };
    const double dl = (eig_near(mu + h) - eig_near(mu - h)) / (2 * h);
    r.dl_max = std::max(r.dl_max, dl);
  }
  for (std::size_t i = 0; i < zeros.size(); ++i)
    if (!used[i]) {
      // A zero not seen by the ribbon must belong to a non-localized (weight < 0.5) branch.
      bool weak = false;
      for (const auto& x : c) weak = weak || (x.weight < 0.5 && circ(zeros[i], x.k) <= step);
      if (!weak) ++r.unmatched_zeros;
    }
  return r;
}

std::pair<bool, std::string> construction_equivalence() {
  bool ok = true;
  std::string msg;
  const ModelSpec hal = build_model("haldane"), km = build_model("kane_mele");
  struct Case {
    std::string name;
    EdgeModelSpec e;
    bool ti, l;
  };
  const std::vector<Case> cases = {{"haldane", edge_model(hal), false, false},
                                   {"kane_mele", edge_model(km), true, false},
                                   {"haldane shifted", shifted_edge(hal, 0.1), false, true},
                                   {"kane_mele shifted", shifted_edge(km, 0.1), true, true}};
  for (const auto& cs : cases) {
    const LCheck r = zeros_vs_crossings(cs.e, 0.0, cs.ti, cs.l);
    std::string line = cs.name + ": " + std::to_string(r.matched) + "/" + std::to_string(r.crossings) +
                       " crossings matched by zeros, " + std::to_string(r.unmatched_zeros) + " stray zeros";
    bool pass = r.crossings > 0 && r.matched == r.crossings && r.unmatched_zeros == 0;
    if (cs.l) {
      line += ", L Hermitian dev " + fmt(r.herm) + ", max dl/dz " + fmt(r.dl_max);
      pass = pass && r.herm < 1e-9 && r.dl_max < 0;
    }
    info(line);
    ok = ok && pass;
    msg += (msg.empty() ? "" : "; ") + cs.name + (pass ? " ok" : " failed");
  }
  // The plain edges have det Psi#_1 = 0 wherever det Psi#_0 = 0 (period-1 shift invariance),
  // so L carries a pole at the crossing; the L checks run on the shifted edges.
  try {
    l_matrix(edge_model(hal), 0.0, edge_zeros(edge_model(hal), 0.0).at(0));
    info("haldane plain edge: L defined at the crossing");
  } catch (const std::exception& e) {
    info(std::string("haldane plain edge: L undefined at the crossing (") + e.what() + ")");
  }
  return {ok, msg};
}

// ---------------------------------------------------------------------------------------

std::pair<bool, std::string> levinson() {
  const ModelSpec hal = build_model("haldane", {{"t", 1}, {"tp", 0.1}});
  const EdgeModelSpec e = shifted_edge(hal, 0.1);
  std::vector<double> grid;
  for (int i = 0; i <= 60; ++i) grid.push_back(0.8 + 2.0 * i / 60);
  const auto ks = semi_bound_scan(e, 0, grid);
  std::string ksl;
  for (double k : ks) ksl += " " + fmt(k);
  info("semi-bound points of the lower band top on [0.8, 2.8]:" + ksl);
  if (ks.size() != 1) return {false, "expected one semi-bound point, found " + std::to_string(ks.size())};
  const double kstar = ks[0];
  const LevinsonReport lr = levinson_delta(e, 0, kstar - 0.3, kstar + 0.3);
  info("arg S+ change on [" + fmt(lr.k1) + ", " + fmt(lr.k2) + "]: " + fmt(lr.phase_changes[0]) + ", " +
       fmt(lr.phase_changes[1]) + ", " + fmt(lr.phase_changes[2]) + " -> " + fmt(lr.phase_change) +
       "; ribbon events N+ = " + std::to_string(lr.N_plus));

  const double mu = band_chart(hal, 0, kstar).lam_plus + 0.05;
  double dett = std::nan("");
  for (double kc : edge_zeros(e, mu))
    if (kc > lr.k1 && kc < lr.k2) {
      dett = transition_phase_change(e, mu, kc, 0.02, 0.005);
      info("det T change across the crossing (mu = " + fmt(mu) + ", k = " + fmt(kc) + "): " + fmt(dett));
    }
  const bool comp1 = std::abs(dett - lr.phase_change) < 0.1;
  const bool two_pi = std::abs(lr.phase_change - kTwoPi) < 0.1;

  // Full circle: N(S+) needs S+ on every k; report where the band leaves the chart domain.
  std::string full;
  bool full_ok = false;
  double n_s = std::nan("");
  try {
    const ScatterTrace t = scatter_trace(e, 0, 0.0, kTwoPi, 2.5e-3);
    n_s = (t.arg.back() - t.arg.front()) / kTwoPi;
    full = "N(S+) = " + fmt(n_s);
  } catch (const AssumptionError& ex) {
    full = std::string("N(S+) unavailable: ") + ex.what();
  }
  const int events = band_edge_events(e, 0, 0.0, kTwoPi, 401);
  const int nsharp = localized_qh(e, 0.0, -0.25, 0.25);
  info("full circle: " + full + "; N+ = " + std::to_string(events) + "; N# = " + std::to_string(nsharp));
  full_ok = std::abs(n_s - events) < 0.05 && events == nsharp;

  // Unshifted edge for reference.
  try {
    const EdgeModelSpec p = edge_model(hal);
    const auto kp = semi_bound_scan(p, 0, grid);
    if (kp.size() == 1) {
      const LevinsonReport q = levinson_delta(p, 0, kp[0] - 0.3, kp[0] + 0.3);
      info("plain edge: semi-bound k = " + fmt(kp[0]) + ", arg S+ change " + fmt(q.phase_change) + ", N+ = " +
           std::to_string(q.N_plus));
    }
  } catch (const std::exception& ex) {
    info(std::string("plain edge: ") + ex.what());
  }

  return {two_pi && comp1 && full_ok,
          "arg S+ change " + fmt(lr.phase_change) + " (expected 2pi), det T " + fmt(dett) +
              (comp1 ? " equal" : " differs") + "; full circle " + (full_ok ? "ok" : "not established")};
}

// ---------------------------------------------------------------------------------------

std::pair<bool, std::string> stability() {
  bool ok = true;
  std::string msg;
  BulkOptions dbl;
  dbl.n_contour = 512;
  dbl.n_k = 201;
  dbl.n_kappa = 256;

  const ModelSpec hal = build_model("haldane", {{"t", 1}, {"tp", 0.1}});
  const int c0 = band_chern(hal, {0}).value, q0 = bulk_index_qh(hal, 0.0).value;
  const int e0 = localized_qh(edge_model(hal), 0.0, -0.25, 0.25);
  const int c1 = band_chern(hal, {0}, dbl).value, q1 = bulk_index_qh(hal, 0.0, dbl).value;
  const int e1 = localized_qh(edge_model(hal), 0.0, -0.25, 0.25, 802);
  info("haldane doubled grids: chern " + std::to_string(c0) + "->" + std::to_string(c1) + ", bulk " +
       std::to_string(q0) + "->" + std::to_string(q1) + ", edge " + std::to_string(e0) + "->" + std::to_string(e1));
  ok = ok && c0 == c1 && q0 == q1 && e0 == e1;

  const ModelSpec km = build_model("kane_mele", {{"t", 1}, {"tp", 0.1}});
  const TiValues a = ti_values(km, {}, 401), b = ti_values(km, dbl, 802);
  info("kane_mele doubled grids: {" + ti_str(a) + "} -> {" + ti_str(b) + "}");
  ok = ok && a.bulk == b.bulk && a.edge == b.edge && a.z2 == b.z2 && a.fk == b.fk;
  msg = std::string("doubling ") + (ok ? "invariant" : "changed values");

  // Gauge rotations of the fibers.
  int changed = 0;
  const BundleGrid hs = solution_bundle(hal, 0.0, 256, 101), hb = bloch_bundle(hal, {0}, 128, 101);
  const ModelSpec kmn = normalize_theta(km);
  const BundleGrid ks = solution_bundle(kmn, 0.0, 256, 101), kb = bloch_bundle(kmn, {0, 1}, 128, 101);
  const BundleGrid kf = bloch_bundle(km, {0, 1}, 128, 101);
  const int r_hs = chern_index(hs), r_hb = chern_index(hb), r_ks = z2_index(ks), r_kb = z2_index(kb),
            r_kf = fu_kane_bundle(kf);
  for (std::uint64_t s = 1; s <= 20; ++s) {
    changed += chern_index(gauge_rotate(hs, s)) != r_hs;
    changed += chern_index(gauge_rotate(hb, s)) != r_hb;
    changed += z2_index(gauge_rotate(ks, s)) != r_ks;
    changed += z2_index(gauge_rotate(kb, s)) != r_kb;
    changed += fu_kane_bundle(gauge_rotate(kf, s)) != r_kf;
  }
  info("20 gauge rotations x 5 bundles: " + std::to_string(changed) + " changed values");
  ok = ok && changed == 0;
  return {ok, msg + ", gauge rotations " + std::to_string(changed) + "/100 changed"};
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const auto t0 = Clock::now();
  criterion(1, [] {
    const auto t = Clock::now();
    auto r = zigzag_zero_modes();
    if (since(t) > 60) r = {false, r.second + "; runtime over 1 min"};
    return r;
  });
  criterion(2, [] {
    const auto t = Clock::now();
    auto r = haldane_duality();
    if (since(t) > 120) r = {false, r.second + "; runtime over 2 min"};
    return r;
  });
  criterion(3, [] {
    const auto t = Clock::now();
    auto r = kane_mele_duality();
    if (since(t) > 300) r = {false, r.second + "; runtime over 5 min"};
    return r;
  });
  criterion(4, property_suite);
  criterion(5, casoratian_suite);
  criterion(6, construction_equivalence);
  criterion(7, [] {
    const auto t = Clock::now();
    auto r = levinson();
    if (since(t) > 300) r = {false, r.second + "; runtime over 5 min"};
    return r;
  });
  criterion(8, stability);
  std::printf("%d of %zu criteria failed (%.0f s)\n", failures, only.empty() ? std::size_t{8} : only.size(), since(t0));
  return failures == 0 ? 0 : 1;
}
