#pragma once

#include <utility>

#include "sgsadmm/errors.hpp"

namespace sgsadmm {

// Isometric vectorization of symmetric matrices: the lower triangle is read
// column by column and off-diagonal entries are scaled by sqrt(2), so that
// <svec(X), svec(Y)> = trace(X Y).

inline Index svec_dim(Index n) { return n * (n + 1) / 2; }

/// Order n with svec_dim(n) == dim; throws StructuralError otherwise.
Index svec_order(Index dim);

/// Position of entry (i, j), i >= j, of an order-n matrix in svec(X).
inline Index svec_index(Index i, Index j, Index n) {
  if (i < j) std::swap(i, j);
  return j * n - j * (j - 1) / 2 + (i - j);
}

/// Row/column pair (i >= j) stored at svec position k.
std::pair<Index, Index> svec_entry(Index k, Index n);

/// Throws StructuralError when X is not square or is asymmetric beyond tol.
void require_symmetric(const Matrix& X, double tol, const char* where);

Vector svec(const Matrix& X);
Matrix smat(const Vector& x, Index n);
Matrix smat(const Vector& x);

}  // namespace sgsadmm
