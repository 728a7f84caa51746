#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bec {

using cplx = std::complex<double>;
using cmat = Eigen::MatrixXcd;
using cvec = Eigen::VectorXcd;
using rvec = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr cplx kI{0.0, 1.0};

// Exit-code classes used by the CLI: config 4, assumption gate 2, numerics 3.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AssumptionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Standard symplectic form: block diagonal with blocks [[0,-1],[1,0]].
cmat epsilon_matrix(int dim);

// Unitary factor U of the polar decomposition X = U P (X square).
cmat polar_unitary(const cmat& x);

// Orthonormal basis of the column span of x, using the leading `rank` singular vectors.
cmat orthonormal_basis(const cmat& x, int rank);

// Cosines of principal angles between two subspaces given by orthonormal bases.
rvec principal_cosines(const cmat& a, const cmat& b);

// Largest principal angle (radians) between spans of a and b (bases need not be orthonormal).
double subspace_angle(const cmat& a, const cmat& b);

// Haar-distributed unitary from a seeded generator.
cmat random_unitary(int dim, std::uint64_t seed);
cmat random_complex(int rows, int cols, std::uint64_t seed);

// Matrix sign function by scaled Newton iteration; throws NumericalError when an
// eigenvalue sits on the imaginary axis.
cmat matrix_sign(const cmat& x);

// Wrap an angle into (-pi, pi].
double wrap_angle(double a);

// Number of worker threads (env BEC_THREADS, default hardware concurrency).
int worker_count();

// Runs f(i) for i in [0, n) on the worker pool. Exceptions are rethrown on the caller.
void parallel_for(int n, const std::function<void(int)>& f);

// k_j = 2*pi*j/(n-1), j = 0..n-1 (closed grid, last point equals the first mod 2*pi).
std::vector<double> closed_grid(int n);

}  // namespace bec
