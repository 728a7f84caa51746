#include "bec/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

namespace bec {

cmat epsilon_matrix(int dim) {
  if (dim % 2 != 0) throw ConfigError("epsilon_matrix: odd dimension");
  cmat e = cmat::Zero(dim, dim);
  for (int b = 0; b < dim; b += 2) {
    e(b, b + 1) = -1.0;
    e(b + 1, b) = 1.0;
  }
  return e;
}

cmat polar_unitary(const cmat& x) {
  Eigen::JacobiSVD<cmat> svd(x, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

cmat orthonormal_basis(const cmat& x, int rank) {
  Eigen::JacobiSVD<cmat> svd(x, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(rank);
}

rvec principal_cosines(const cmat& a, const cmat& b) {
  Eigen::JacobiSVD<cmat> svd(a.adjoint() * b);
  return svd.singularValues();
}

double subspace_angle(const cmat& a, const cmat& b) {
  const cmat qa = orthonormal_basis(a, static_cast<int>(a.cols()));
  const cmat qb = orthonormal_basis(b, static_cast<int>(b.cols()));
  // acos of the cosines loses accuracy near 1; use the sine of the residual instead.
  const cmat resid = qb - qa * (qa.adjoint() * qb);
  Eigen::JacobiSVD<cmat> svd(resid);
  const double s = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  return std::asin(std::min(1.0, s));
}

cmat random_complex(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  cmat m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = cplx(nd(gen), nd(gen)) / std::sqrt(2.0);
  return m;
}

cmat random_unitary(int dim, std::uint64_t seed) {
  const cmat g = random_complex(dim, dim, seed);
  Eigen::HouseholderQR<cmat> qr(g);
  cmat q = qr.householderQ() * cmat::Identity(dim, dim);
  const cmat r = qr.matrixQR();
  for (int j = 0; j < dim; ++j) {
    const double a = std::abs(r(j, j));
    if (a > 0) q.col(j) *= r(j, j) / a;
  }
  return q;
}

cmat matrix_sign(const cmat& x) {
  const int n = static_cast<int>(x.rows());
  cmat s = x;
  for (int it = 0; it < 100; ++it) {
    Eigen::PartialPivLU<cmat> lu(s);
    const cmat inv = lu.inverse();
    if (!inv.allFinite()) throw NumericalError("matrix_sign: singular iterate");
    // Determinant scaling speeds up the early iterations.
    double mu = 1.0;
    if (it < 8) {
      const double ld = std::log(std::abs(lu.determinant()));
      if (std::isfinite(ld)) mu = std::exp(-ld / n);
      if (!std::isfinite(mu) || mu <= 0) mu = 1.0;
    }
    const cmat next = 0.5 * (mu * s + inv / mu);
    const double diff = (next - s).norm();
    s = next;
    if (diff <= 1e-14 * std::max(1.0, s.norm())) return s;
  }
  const double err = (s * s - cmat::Identity(n, n)).norm();
  if (err > 1e-8) throw NumericalError("matrix_sign: no convergence (eigenvalue near imaginary axis)");
  return s;
}

double wrap_angle(double a) {
  a = std::fmod(a + kPi, kTwoPi);
  if (a < 0) a += kTwoPi;
  return a - kPi;
}

int worker_count() {
  if (const char* env = std::getenv("BEC_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

void parallel_for(int n, const std::function<void(int)>& f) {
  const int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

std::vector<double> closed_grid(int n) {
  if (n < 2) throw ConfigError("closed_grid: need at least 2 points");
  std::vector<double> g(n);
  for (int j = 0; j < n; ++j) g[j] = kTwoPi * j / (n - 1);
  return g;
}

}  // namespace bec
