#include "sgsadmm/svec.hpp"

#include <cmath>
#include <string>

namespace sgsadmm {

namespace {
const double kSqrt2 = std::sqrt(2.0);
}

Index svec_order(Index dim) {
  const auto n = static_cast<Index>(std::llround((std::sqrt(8.0 * double(dim) + 1.0) - 1.0) / 2.0));
  if (svec_dim(n) != dim) {
    throw StructuralError("svec length " + std::to_string(dim) +
                          " is not a triangular number");
  }
  return n;
}

std::pair<Index, Index> svec_entry(Index k, Index n) {
  Index j = 0;
  Index start = 0;
  while (start + (n - j) <= k) {
    start += n - j;
    ++j;
  }
  return {j + (k - start), j};
}

void require_symmetric(const Matrix& X, double tol, const char* where) {
  if (X.rows() != X.cols()) throw StructuralError(std::string(where) + ": matrix is not square");
  const double asym = (X - X.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, X.cwiseAbs().maxCoeff());
  if (asym > tol * scale) {
    throw StructuralError(std::string(where) + ": matrix is not symmetric (asymmetry " +
                          std::to_string(asym) + ")");
  }
}

Vector svec(const Matrix& X) {
  if (X.rows() != X.cols()) throw StructuralError("svec: matrix is not square");
  const Index n = X.rows();
  Vector out(svec_dim(n));
  Index k = 0;
  for (Index j = 0; j < n; ++j) {
    out[k++] = X(j, j);
    for (Index i = j + 1; i < n; ++i) out[k++] = kSqrt2 * 0.5 * (X(i, j) + X(j, i));
  }
  return out;
}

Matrix smat(const Vector& x, Index n) {
  if (x.size() != svec_dim(n)) throw StructuralError("smat: length does not match order");
  Matrix X(n, n);
  Index k = 0;
  for (Index j = 0; j < n; ++j) {
    X(j, j) = x[k++];
    for (Index i = j + 1; i < n; ++i) {
      X(i, j) = X(j, i) = x[k++] / kSqrt2;
    }
  }
  return X;
}

Matrix smat(const Vector& x) { return smat(x, svec_order(x.size())); }

}  // namespace sgsadmm
