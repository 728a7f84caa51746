#include "bec/transfer.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace bec;

namespace {

std::vector<cplx> sorted_xis(const std::vector<Root>& roots) {
  std::vector<cplx> out;
  for (const auto& r : roots)
    for (int i = 0; i < r.mult; ++i) out.push_back(r.xi);
  std::sort(out.begin(), out.end(), [](cplx a, cplx b) {
    return std::abs(a) != std::abs(b) ? std::abs(a) < std::abs(b) : std::arg(a) < std::arg(b);
  });
  return out;
}

}  // namespace

TEST(Transfer, ScalarChainRootsClosedForm) {
  const double t = 0.8;
  const ModelSpec m = build_model("scalar_chain", {{"t", t}});
  const cplx z(2.3, 0.4);
  const cplx s = std::sqrt(z * z - 4 * t * t);
  cplx a = (z + s) / (2 * t), b = (z - s) / (2 * t);
  if (std::abs(a) > std::abs(b)) std::swap(a, b);
  const auto xs = sorted_xis(transfer_roots(m, z, 0.0));
  ASSERT_EQ(xs.size(), 2u);
  EXPECT_LT(std::abs(xs[0] - a), 1e-12);
  EXPECT_LT(std::abs(xs[1] - b), 1e-12);
  const RootCount c = count_roots(transfer_roots(m, z, 0.0));
  EXPECT_EQ(c.inside, 1);
  EXPECT_EQ(c.outside, 1);
}

TEST(Transfer, UnimodularRootsInsideBand) {
  const ModelSpec m = build_model("scalar_chain");
  const RootCount c = count_roots(transfer_roots(m, cplx(0.5, 0.0), 0.0));
  EXPECT_EQ(c.unimodular, 2);
}

TEST(Transfer, RootPairingUnderConjugation) {
  for (const char* name : {"haldane", "kane_mele", "graphene_armchair"}) {
    const ModelSpec m = build_model(name);
    const cplx z(0.13, 0.21);
    const auto a = sorted_xis(transfer_roots(m, z, 1.1));
    auto b = sorted_xis(transfer_roots(m, std::conj(z), 1.1));
    for (auto& x : b) x = 1.0 / std::conj(x);
    std::sort(b.begin(), b.end(), [](cplx p, cplx q) {
      return std::abs(p) != std::abs(q) ? std::abs(p) < std::abs(q) : std::arg(p) < std::arg(q);
    });
    ASSERT_EQ(a.size(), b.size()) << name;
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LT(std::abs(a[i] - b[i]), 1e-8 * std::max(1.0, std::abs(a[i])));
  }
}

TEST(Transfer, InsideRootsInGap) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ku(0.0, kTwoPi), zu(-0.45, 0.45);
  for (const char* name : {"haldane", "kane_mele"}) {
    const ModelSpec m = build_model(name);
    for (int i = 0; i < 20; ++i) {
      double k = ku(rng);
      if (std::abs(k) < 1e-3) k = 0.5;  // Haldane A is singular at k = 0
      const RootCount c = count_roots(transfer_roots(m, zu(rng), k));
      EXPECT_EQ(c.inside, m.N) << name << " k=" << k;
      EXPECT_EQ(c.unimodular, 0);
    }
  }
}

TEST(Transfer, DecayingFrameSolvesAndDecays) {
  for (const char* name : {"haldane", "kane_mele", "graphene_zigzag", "scalar_chain"}) {
    const ModelSpec m = build_model(name);
    const Frame f = decaying_frame(m, cplx(0.1, 0.3), 0.9);
    EXPECT_EQ(f.boundary.cols(), m.N) << name;
    EXPECT_LT(frame_residual(m, f, 30), 1e-9) << name;
    double rmax = 0.0;
    for (cplx x : f.xis) rmax = std::max(rmax, std::abs(x));
    ASSERT_LT(rmax, 1.0);
    EXPECT_LT(f.site(40).norm(), 10 * std::pow(rmax, 38) * (f.site(0).norm() + f.site(1).norm())) << name;
  }
}

TEST(Transfer, CasoratianConstant) {
  // phi = psi(conj z)^*, psi = psi(z): C_n independent of n.
  const ModelSpec m = build_model("haldane");
  const cplx z(0.2, 0.35);
  const double k = 1.3;
  const Frame f = decaying_frame(m, z, k), g = decaying_frame(m, std::conj(z), k);
  std::vector<cmat> psi = f.window(0, 12), phi = g.window(0, 12);
  for (auto& p : phi) p = p.adjoint().eval();
  const cmat c0 = casoratian(m, k, phi, psi, 0, 0);
  for (int n = 1; n < 11; ++n) EXPECT_LT((casoratian(m, k, phi, psi, 0, n) - c0).norm(), 1e-10);
  // Both solutions decay, so the constant is zero.
  EXPECT_LT(c0.norm(), 1e-9);
}

TEST(Transfer, CasoratianOfBlochWaveIsVelocity) {
  // C(psi^*, psi) = -i lambda'(kappa) |v|^2 for psi_n = e^{i kappa n} v.
  const ModelSpec m = build_model("haldane");
  const double k = 1.7, kap = 0.6, h = 1e-5;
  Eigen::SelfAdjointEigenSolver<cmat> es(bloch_matrix(m, std::exp(kI * kap), k));
  const cvec v = es.eigenvectors().col(0);
  std::vector<cmat> psi, phi;
  for (int n = 0; n < 3; ++n) {
    psi.push_back(std::exp(kI * (kap * n)) * v);
    phi.push_back(psi.back().adjoint());
  }
  const double dl = (bloch_bands(m, kap + h, k)(0) - bloch_bands(m, kap - h, k)(0)) / (2 * h);
  const cplx c = casoratian(m, k, phi, psi, 0, 0)(0, 0);
  EXPECT_NEAR(c.real(), 0.0, 1e-9);
  EXPECT_NEAR(c.imag(), -dl, 1e-8);
}

TEST(Transfer, LaurentDegrees) {
  for (const char* name : {"haldane", "kane_mele", "graphene_armchair", "scalar_chain"}) {
    const ModelSpec m = build_model(name);
    const LaurentPoly p = bloch_poly(m, 1.0);
    EXPECT_EQ(p.z_degree(), m.N * m.M) << name;
    EXPECT_EQ(p.xi_degree_high(), m.N) << name;
    EXPECT_EQ(p.xi_degree_low(), -m.N) << name;
    const cplx xi(0.7, 0.4), z(0.3, -0.2);
    const cmat h = bloch_matrix(m, xi, 1.0) - z * cmat::Identity(m.N, m.N);
    EXPECT_LT(std::abs(p.eval(xi, z) - h.determinant()), 1e-9 * std::max(1.0, std::abs(h.determinant()))) << name;
  }
}

TEST(Transfer, ZigzagDegreeDrops) {
  // A has rank one, so only one power of xi survives on each side.
  const LaurentPoly p = bloch_poly(build_model("graphene_zigzag"), 1.0);
  EXPECT_EQ(p.xi_degree_high(), 1);
  EXPECT_EQ(p.xi_degree_low(), -1);
  EXPECT_EQ(p.z_degree(), 2);
}

TEST(Transfer, EdgeZerosAreEdgeEigenvalues) {
  const ModelSpec m = build_model("haldane");
  const EdgeModelSpec e = edge_model(m);
  const auto ks = edge_zeros(e, 0.0);
  ASSERT_EQ(ks.size(), 1u);
  EXPECT_LT(edge_smin(e, 0.0, ks[0]), 1e-6);
  EXPECT_GT(edge_smin(e, 0.0, ks[0] + 0.3), 1e-3);
}

TEST(Transfer, LMatrixHermitianForRealEnergy) {
  const EdgeModelSpec e = shifted_edge(build_model("kane_mele"), 0.1);
  for (double k : {0.4, 1.9, 2.8}) {
    const cmat l = l_matrix(e, cplx(0.05, 0.0), k);
    EXPECT_LT((l - l.adjoint()).norm(), 1e-9 * std::max(1.0, l.norm()));
  }
}
