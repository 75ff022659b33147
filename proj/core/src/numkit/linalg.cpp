#include "caac/numkit/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace caac::numkit {

namespace {

double InfNorm(const ComplexMat& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

// Returns false when a pivot drops below `pivot_floor`.
bool Factor(const ComplexMat& m, double pivot_floor, Eigen::LLT<ComplexMat>* llt) {
  llt->compute(m);
  if (llt->info() != Eigen::Success) return false;
  const auto diag = llt->matrixLLT().diagonal().real();
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (!(diag(i) * diag(i) > pivot_floor)) return false;
  }
  return true;
}

}  // namespace

double HermitianDefect(const ComplexMat& a) {
  const double scale = InfNorm(a);
  if (scale == 0.0) return 0.0;
  return InfNorm(a - a.adjoint()) / scale;
}

ComplexMat HermitianSolve(const ComplexMat& a, double mu, const ComplexMat& b) {
  if (a.rows() != a.cols() || a.rows() != b.rows()) {
    throw std::invalid_argument("HermitianSolve: dimension mismatch");
  }
  if (!AllFinite(a) || !AllFinite(b) || !std::isfinite(mu)) {
    throw NumericalError("HermitianSolve: non-finite input");
  }
  if (mu < 0.0) throw std::invalid_argument("HermitianSolve: mu must be >= 0");
  const Eigen::Index m = a.rows();
  if (m == 0) return ComplexMat(0, b.cols());

  ComplexMat shifted = a;
  shifted.diagonal().array() += mu;
  const double trace = std::max(shifted.diagonal().real().sum(), 0.0);
  const double mean_diag = trace / static_cast<double>(m);
  const double pivot_floor = 1e-14 * mean_diag;

  Eigen::LLT<ComplexMat> llt;
  if (!Factor(shifted, pivot_floor, &llt)) {
    shifted.diagonal().array() += 1e-12 * mean_diag;
    if (mean_diag == 0.0 || !Factor(shifted, pivot_floor, &llt)) {
      throw NumericalError("HermitianSolve: numerically singular system");
    }
  }
  ComplexMat x = llt.solve(b);
  if (!AllFinite(x)) throw NumericalError("HermitianSolve: non-finite solution");
  return x;
}

}  // namespace caac::numkit
