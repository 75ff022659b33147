#pragma once

#include <cstdint>
#include <vector>

#include "caac/numkit/linalg.hpp"

namespace caac::numkit {

// Define-by-run reverse-mode autodiff over dense real matrices.
//
// Every operation appends a node to the tape; nodes only reference earlier
// nodes, so the tape order is a topological order. Parameter leaves are views
// into a flat parameter vector (column-major reshape of a segment), and
// Backward() scatters their adjoints back into a vector of the same layout.
// A tape is rebuilt for every forward pass.
class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  Tape() = default;

  Var Constant(RealMat value);
  // Leaf whose value is flat.segment(offset, rows*cols) reshaped column-major.
  Var Parameter(const RealVec& flat, Eigen::Index offset, Eigen::Index rows, Eigen::Index cols);

  Var MatMul(Var a, Var b);
  Var Add(Var a, Var b);
  Var Sub(Var a, Var b);
  Var Mul(Var a, Var b);           // elementwise
  Var AddRow(Var a, Var row);      // a (n x m) + row (1 x m) broadcast down rows
  Var Scale(Var a, double c);
  Var AddScalar(Var a, double c);
  Var ScaleRows(Var col, Var a);   // col (n x 1) times every column of a (n x m)
  Var Tanh(Var a);
  Var Sigmoid(Var a);
  Var Softplus(Var a);
  Var Exp(Var a);
  Var Log(Var a);
  Var Square(Var a);
  Var Clamp(Var a, double lo, double hi);
  Var SoftmaxRows(Var a);
  Var ConcatCols(const std::vector<Var>& parts);
  Var SliceCols(Var a, Eigen::Index start, Eigen::Index count);
  Var RowSum(Var a);               // n x 1
  Var Sum(Var a);                  // 1 x 1

  // Affine layer x W + b with W (in x out) and b (1 x out).
  Var Affine(Var x, Var w, Var b) { return AddRow(MatMul(x, w), b); }

  const RealMat& Value(Var v) const;
  double Scalar(Var v) const;
  // Adjoint from the most recent Backward() call.
  const RealMat& Adjoint(Var v) const;

  // Reverse sweep from a 1x1 output, seeded with `seed`. Returns the gradient
  // with respect to all parameter leaves, laid out like the flat parameter
  // vector of size `grad_dim`. May be called repeatedly on the same tape.
  RealVec Backward(Var output, Eigen::Index grad_dim, double seed = 1.0);

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kMatMul,
    kAdd,
    kSub,
    kMul,
    kAddRow,
    kScale,
    kAddScalar,
    kScaleRows,
    kTanh,
    kSigmoid,
    kSoftplus,
    kExp,
    kLog,
    kSquare,
    kClamp,
    kSoftmaxRows,
    kConcatCols,
    kSliceCols,
    kRowSum,
    kSum,
  };

  struct Node {
    Op op = Op::kLeaf;
    int a = -1;
    int b = -1;
    std::vector<int> parts;    // concat operands
    double c0 = 0.0;           // scalar operand / clamp lo
    double c1 = 0.0;           // clamp hi
    Eigen::Index offset = -1;  // parameter offset, or slice start
    RealMat value;
    RealMat adj;
  };

  Var Push(Node node);
  const Node& At(Var v) const;
  void Accumulate(int id, const RealMat& delta);

  std::vector<Node> nodes_;
};

}  // namespace caac::numkit
