#pragma once

#include <cstdint>
#include <random>

#include "nearopt/types.h"

namespace nearopt {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream); both words pass through SplitMix64.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

Matrix gaussian_matrix(int rows, int cols, Rng& rng);
Vector gaussian_vector(int n, Rng& rng);
/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, sign-fixed).
Matrix haar_orthogonal(int n, Rng& rng);

Matrix symmetrize(const Matrix& m);
double min_eigenvalue(const Matrix& sym);
double max_eigenvalue(const Matrix& sym);
/// Symmetric PSD square root, negative eigenvalues clamped to zero.
Matrix psd_sqrt(const Matrix& sym);
/// Orthonormal basis of the kernel of m (columns), relative tolerance on singular values.
Matrix null_space(const Matrix& m, double rel_tol = 1e-10);
int numerical_rank(const Matrix& m, double rel_tol = 1e-10);

}  // namespace nearopt
