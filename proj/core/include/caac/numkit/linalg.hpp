#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace caac::numkit {

using Complex = std::complex<double>;

using RealVec = Eigen::VectorXd;
using RealMat = Eigen::MatrixXd;
using RealRow = Eigen::RowVectorXd;
using ComplexVec = Eigen::VectorXcd;
using ComplexMat = Eigen::MatrixXcd;

// Raised by numerical routines when inputs or intermediate results leave the
// finite domain, or a factorization breaks down.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

template <typename Derived>
bool AllFinite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

// Solves (A + mu*I) X = B for Hermitian positive semidefinite A.
//
// Cholesky factorization; if a pivot falls below 1e-14 * trace/M the diagonal
// is jittered once by 1e-12 * trace/M and the factorization retried. Throws
// NumericalError on non-finite input or when the jittered system is still
// singular.
ComplexMat HermitianSolve(const ComplexMat& a, double mu, const ComplexMat& b);

// Infinity norm of A - A^H relative to the infinity norm of A.
double HermitianDefect(const ComplexMat& a);

}  // namespace caac::numkit
