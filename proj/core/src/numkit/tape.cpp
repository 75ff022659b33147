#include "caac/numkit/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace caac::numkit {

namespace {

void RequireSameShape(const RealMat& a, const RealMat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string("Tape::") + op + ": shape mismatch");
  }
}

double StableSoftplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double StableSigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tape::Var Tape::Push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::At(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw std::out_of_range("Tape: invalid variable");
  }
  return nodes_[v.id];
}

Tape::Var Tape::Constant(RealMat value) {
  Node n;
  n.value = std::move(value);
  return Push(std::move(n));
}

Tape::Var Tape::Parameter(const RealVec& flat, Eigen::Index offset, Eigen::Index rows,
                          Eigen::Index cols) {
  if (offset < 0 || offset + rows * cols > flat.size()) {
    throw std::out_of_range("Tape::Parameter: segment outside parameter vector");
  }
  Node n;
  n.offset = offset;
  n.value = Eigen::Map<const RealMat>(flat.data() + offset, rows, cols);
  return Push(std::move(n));
}

Tape::Var Tape::MatMul(Var a, Var b) {
  const RealMat& va = At(a).value;
  const RealMat& vb = At(b).value;
  if (va.cols() != vb.rows()) throw std::invalid_argument("Tape::MatMul: inner dimension mismatch");
  Node n;
  n.op = Op::kMatMul;
  n.a = a.id;
  n.b = b.id;
  n.value.noalias() = va * vb;
  return Push(std::move(n));
}

Tape::Var Tape::Add(Var a, Var b) {
  RequireSameShape(At(a).value, At(b).value, "Add");
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.value = At(a).value + At(b).value;
  return Push(std::move(n));
}

Tape::Var Tape::Sub(Var a, Var b) {
  RequireSameShape(At(a).value, At(b).value, "Sub");
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.value = At(a).value - At(b).value;
  return Push(std::move(n));
}

Tape::Var Tape::Mul(Var a, Var b) {
  RequireSameShape(At(a).value, At(b).value, "Mul");
  Node n;
  n.op = Op::kMul;
  n.a = a.id;
  n.b = b.id;
  n.value = At(a).value.cwiseProduct(At(b).value);
  return Push(std::move(n));
}

Tape::Var Tape::AddRow(Var a, Var row) {
  const RealMat& va = At(a).value;
  const RealMat& vr = At(row).value;
  if (vr.rows() != 1 || vr.cols() != va.cols()) {
    throw std::invalid_argument("Tape::AddRow: row must be 1 x cols(a)");
  }
  Node n;
  n.op = Op::kAddRow;
  n.a = a.id;
  n.b = row.id;
  n.value = va.rowwise() + vr.row(0);
  return Push(std::move(n));
}

Tape::Var Tape::Scale(Var a, double c) {
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.c0 = c;
  n.value = At(a).value * c;
  return Push(std::move(n));
}

Tape::Var Tape::AddScalar(Var a, double c) {
  Node n;
  n.op = Op::kAddScalar;
  n.a = a.id;
  n.c0 = c;
  n.value = At(a).value.array() + c;
  return Push(std::move(n));
}

Tape::Var Tape::ScaleRows(Var col, Var a) {
  const RealMat& vc = At(col).value;
  const RealMat& va = At(a).value;
  if (vc.cols() != 1 || vc.rows() != va.rows()) {
    throw std::invalid_argument("Tape::ScaleRows: column must be rows(a) x 1");
  }
  Node n;
  n.op = Op::kScaleRows;
  n.a = col.id;
  n.b = a.id;
  n.value = va.array().colwise() * vc.col(0).array();
  return Push(std::move(n));
}

Tape::Var Tape::Tanh(Var a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a.id;
  n.value = At(a).value.array().tanh();
  return Push(std::move(n));
}

Tape::Var Tape::Sigmoid(Var a) {
  Node n;
  n.op = Op::kSigmoid;
  n.a = a.id;
  n.value = At(a).value.unaryExpr([](double x) { return StableSigmoid(x); });
  return Push(std::move(n));
}

Tape::Var Tape::Softplus(Var a) {
  Node n;
  n.op = Op::kSoftplus;
  n.a = a.id;
  n.value = At(a).value.unaryExpr([](double x) { return StableSoftplus(x); });
  return Push(std::move(n));
}

Tape::Var Tape::Exp(Var a) {
  Node n;
  n.op = Op::kExp;
  n.a = a.id;
  n.value = At(a).value.array().exp();
  return Push(std::move(n));
}

Tape::Var Tape::Log(Var a) {
  Node n;
  n.op = Op::kLog;
  n.a = a.id;
  n.value = At(a).value.array().log();
  return Push(std::move(n));
}

Tape::Var Tape::Square(Var a) {
  Node n;
  n.op = Op::kSquare;
  n.a = a.id;
  n.value = At(a).value.array().square();
  return Push(std::move(n));
}

Tape::Var Tape::Clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("Tape::Clamp: lo > hi");
  Node n;
  n.op = Op::kClamp;
  n.a = a.id;
  n.c0 = lo;
  n.c1 = hi;
  n.value = At(a).value.cwiseMax(lo).cwiseMin(hi);
  return Push(std::move(n));
}

Tape::Var Tape::SoftmaxRows(Var a) {
  const RealMat& va = At(a).value;
  Node n;
  n.op = Op::kSoftmaxRows;
  n.a = a.id;
  n.value.resize(va.rows(), va.cols());
  for (Eigen::Index r = 0; r < va.rows(); ++r) {
    const double mx = va.row(r).maxCoeff();
    n.value.row(r) = (va.row(r).array() - mx).exp();
    n.value.row(r) /= n.value.row(r).sum();
  }
  return Push(std::move(n));
}

Tape::Var Tape::ConcatCols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("Tape::ConcatCols: no operands");
  const Eigen::Index rows = At(parts.front()).value.rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (At(p).value.rows() != rows) throw std::invalid_argument("Tape::ConcatCols: row mismatch");
    cols += At(p).value.cols();
  }
  Node n;
  n.op = Op::kConcatCols;
  n.value.resize(rows, cols);
  Eigen::Index c = 0;
  for (Var p : parts) {
    const RealMat& vp = At(p).value;
    n.value.middleCols(c, vp.cols()) = vp;
    c += vp.cols();
    n.parts.push_back(p.id);
  }
  return Push(std::move(n));
}

Tape::Var Tape::SliceCols(Var a, Eigen::Index start, Eigen::Index count) {
  const RealMat& va = At(a).value;
  if (start < 0 || count < 0 || start + count > va.cols()) {
    throw std::out_of_range("Tape::SliceCols: slice outside matrix");
  }
  Node n;
  n.op = Op::kSliceCols;
  n.a = a.id;
  n.offset = start;
  n.value = va.middleCols(start, count);
  return Push(std::move(n));
}

Tape::Var Tape::RowSum(Var a) {
  Node n;
  n.op = Op::kRowSum;
  n.a = a.id;
  n.value = At(a).value.rowwise().sum();
  return Push(std::move(n));
}

Tape::Var Tape::Sum(Var a) {
  Node n;
  n.op = Op::kSum;
  n.a = a.id;
  n.value = RealMat::Constant(1, 1, At(a).value.sum());
  return Push(std::move(n));
}

const RealMat& Tape::Value(Var v) const { return At(v).value; }

double Tape::Scalar(Var v) const {
  const RealMat& m = At(v).value;
  if (m.size() != 1) throw std::invalid_argument("Tape::Scalar: not a scalar");
  return m(0, 0);
}

const RealMat& Tape::Adjoint(Var v) const { return At(v).adj; }

void Tape::Accumulate(int id, const RealMat& delta) { nodes_[id].adj += delta; }

RealVec Tape::Backward(Var output, Eigen::Index grad_dim, double seed) {
  const Node& out = At(output);
  if (out.value.size() != 1) throw std::invalid_argument("Tape::Backward: output is not scalar");

  for (Node& n : nodes_) n.adj.setZero(n.value.rows(), n.value.cols());
  nodes_[output.id].adj(0, 0) = seed;

  RealVec grad = RealVec::Zero(grad_dim);
  for (int id = output.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.a >= id || n.b >= id) throw std::logic_error("Tape::Backward: cycle detected");
    for (int p : n.parts) {
      if (p >= id) throw std::logic_error("Tape::Backward: cycle detected");
    }
    const RealMat& g = n.adj;
    switch (n.op) {
      case Op::kLeaf:
        if (n.offset >= 0) {
          if (n.offset + g.size() > grad_dim) {
            throw std::out_of_range("Tape::Backward: gradient vector too small");
          }
          grad.segment(n.offset, g.size()) += Eigen::Map<const RealVec>(g.data(), g.size());
        }
        break;
      case Op::kMatMul:
        nodes_[n.a].adj.noalias() += g * nodes_[n.b].value.transpose();
        nodes_[n.b].adj.noalias() += nodes_[n.a].value.transpose() * g;
        break;
      case Op::kAdd:
        Accumulate(n.a, g);
        Accumulate(n.b, g);
        break;
      case Op::kSub:
        Accumulate(n.a, g);
        nodes_[n.b].adj -= g;
        break;
      case Op::kMul:
        nodes_[n.a].adj += g.cwiseProduct(nodes_[n.b].value);
        nodes_[n.b].adj += g.cwiseProduct(nodes_[n.a].value);
        break;
      case Op::kAddRow:
        Accumulate(n.a, g);
        nodes_[n.b].adj += g.colwise().sum();
        break;
      case Op::kScale:
        nodes_[n.a].adj += g * n.c0;
        break;
      case Op::kAddScalar:
        Accumulate(n.a, g);
        break;
      case Op::kScaleRows: {
        const RealMat& col = nodes_[n.a].value;
        const RealMat& mat = nodes_[n.b].value;
        nodes_[n.a].adj += g.cwiseProduct(mat).rowwise().sum();
        nodes_[n.b].adj += (g.array().colwise() * col.col(0).array()).matrix();
        break;
      }
      case Op::kTanh:
        nodes_[n.a].adj += (g.array() * (1.0 - n.value.array().square())).matrix();
        break;
      case Op::kSigmoid:
        nodes_[n.a].adj += (g.array() * n.value.array() * (1.0 - n.value.array())).matrix();
        break;
      case Op::kSoftplus:
        nodes_[n.a].adj += g.cwiseProduct(
            nodes_[n.a].value.unaryExpr([](double x) { return StableSigmoid(x); }));
        break;
      case Op::kExp:
        nodes_[n.a].adj += g.cwiseProduct(n.value);
        break;
      case Op::kLog:
        nodes_[n.a].adj += g.cwiseQuotient(nodes_[n.a].value);
        break;
      case Op::kSquare:
        nodes_[n.a].adj += 2.0 * g.cwiseProduct(nodes_[n.a].value);
        break;
      case Op::kClamp: {
        const RealMat& x = nodes_[n.a].value;
        const double lo = n.c0;
        const double hi = n.c1;
        nodes_[n.a].adj += g.binaryExpr(x, [lo, hi](double gi, double xi) {
          return (xi > lo && xi < hi) ? gi : 0.0;
        });
        break;
      }
      case Op::kSoftmaxRows: {
        const RealMat& y = n.value;
        const RealVec inner = g.cwiseProduct(y).rowwise().sum();
        nodes_[n.a].adj += (y.array() * (g.colwise() - inner).array()).matrix();
        break;
      }
      case Op::kConcatCols: {
        Eigen::Index c = 0;
        for (int p : n.parts) {
          const Eigen::Index w = nodes_[p].value.cols();
          nodes_[p].adj += g.middleCols(c, w);
          c += w;
        }
        break;
      }
      case Op::kSliceCols:
        nodes_[n.a].adj.middleCols(n.offset, g.cols()) += g;
        break;
      case Op::kRowSum:
        nodes_[n.a].adj.colwise() += g.col(0);
        break;
      case Op::kSum:
        nodes_[n.a].adj.array() += g(0, 0);
        break;
    }
  }
  return grad;
}

}  // namespace caac::numkit
