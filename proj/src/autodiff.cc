#include "jointnerf/autodiff.h"

#include <cmath>
#include <sstream>
#include <utility>

namespace jointnerf {

std::string Shape::ToString() const {
  std::ostringstream os;
  os << "[" << rows << "x" << cols << "]";
  return os.str();
}

const char* OpName(OpKind op) {
  switch (op) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConstant: return "constant";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kSin: return "sin";
    case OpKind::kCos: return "cos";
    case OpKind::kExp: return "exp";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kSum: return "sum";
    case OpKind::kBroadcast: return "broadcast";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kPower: return "power";
  }
  return "unknown";
}

namespace {

[[noreturn]] void ThrowShape(const char* op, Shape a, Shape b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.ToString() +
                   " and " + b.ToString());
}

Shape ShapeOf(const Matrix& m) { return {m.rows(), m.cols()}; }

}  // namespace

const Matrix& Tensor::value() const { return graph_->node(*this).val(); }

Shape Tensor::shape() const { return ShapeOf(value()); }

bool Tensor::requires_grad() const {
  return graph_->node(*this).requires_grad;
}

Tensor Graph::Push(Node node) {
  nodes_.push_back(std::move(node));
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

const Graph::Node& Graph::node(Tensor t) const {
  return nodes_[static_cast<size_t>(t.id())];
}

void Graph::CheckOwned(Tensor t, const char* op) const {
  if (t.graph_ != this || t.id_ < 0 ||
      static_cast<size_t>(t.id_) >= nodes_.size()) {
    throw std::invalid_argument(std::string(op) +
                                ": tensor does not belong to this graph");
  }
}

Tensor Graph::Leaf(const Parameter& param, bool requires_grad) {
  Node n;
  n.op = OpKind::kLeaf;
  n.external = &param.value;
  n.requires_grad = requires_grad;
  return Push(std::move(n));
}

Tensor Graph::Variable(Matrix value) {
  Node n;
  n.op = OpKind::kLeaf;
  n.value = std::move(value);
  n.requires_grad = true;
  return Push(std::move(n));
}

Tensor Graph::Constant(Matrix value) {
  Node n;
  n.op = OpKind::kConstant;
  n.value = std::move(value);
  return Push(std::move(n));
}

Tensor Graph::Scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return Constant(std::move(m));
}

void Graph::Clear() {
  nodes_.clear();
  grads_.clear();
  has_grad_.clear();
}

void Graph::Accumulate(int id, Matrix&& g) {
  const auto i = static_cast<size_t>(id);
  if (!nodes_[i].requires_grad) return;
  if (!has_grad_[i]) {
    grads_[i] = std::move(g);
    has_grad_[i] = true;
  } else {
    grads_[i] += g;
  }
}

void Graph::AccumulateSlice(int id, Axis axis, Eigen::Index offset,
                            const Matrix& g) {
  const auto i = static_cast<size_t>(id);
  if (!nodes_[i].requires_grad) return;
  if (!has_grad_[i]) {
    const Matrix& v = nodes_[i].val();
    grads_[i] = Matrix::Zero(v.rows(), v.cols());
    has_grad_[i] = true;
  }
  if (axis == Axis::kRows) {
    grads_[i].middleRows(offset, g.rows()) += g;
  } else {
    grads_[i].middleCols(offset, g.cols()) += g;
  }
}

Matrix Graph::Grad(Tensor t) const {
  CheckOwned(t, "grad");
  const auto i = static_cast<size_t>(t.id());
  if (i < has_grad_.size() && has_grad_[i]) return grads_[i];
  const Matrix& v = nodes_[i].val();
  return Matrix::Zero(v.rows(), v.cols());
}

void Graph::Backward(Tensor loss) {
  CheckOwned(loss, "backward");
  const Shape s = loss.shape();
  if (s.rows != 1 || s.cols != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                s.ToString());
  }
  grads_.assign(nodes_.size(), Matrix());
  has_grad_.assign(nodes_.size(), false);
  Accumulate(loss.id(), Matrix::Ones(1, 1));

  for (int id = loss.id(); id >= 0; --id) {
    const auto i = static_cast<size_t>(id);
    if (!has_grad_[i]) continue;
    const Node& n = nodes_[i];
    const Matrix& g = grads_[i];
    auto in = [&](size_t k) -> const Matrix& {
      return nodes_[static_cast<size_t>(n.inputs[k])].val();
    };
    auto wants = [&](size_t k) {
      return nodes_[static_cast<size_t>(n.inputs[k])].requires_grad;
    };
    switch (n.op) {
      case OpKind::kLeaf:
      case OpKind::kConstant:
        break;
      case OpKind::kAdd:
        if (wants(0)) Accumulate(n.inputs[0], Matrix(g));
        if (n.inputs.size() > 1 && wants(1)) Accumulate(n.inputs[1], Matrix(g));
        break;
      case OpKind::kMul:
        if (n.inputs.size() == 1) {
          Accumulate(n.inputs[0], n.scalar * g);
        } else {
          if (wants(0)) Accumulate(n.inputs[0], g.cwiseProduct(in(1)));
          if (wants(1)) Accumulate(n.inputs[1], g.cwiseProduct(in(0)));
        }
        break;
      case OpKind::kMatMul:
        if (wants(0)) Accumulate(n.inputs[0], g * in(1).transpose());
        if (wants(1)) Accumulate(n.inputs[1], in(0).transpose() * g);
        break;
      case OpKind::kSin:
        Accumulate(n.inputs[0],
                   g.array() * in(0).array().cos());
        break;
      case OpKind::kCos:
        Accumulate(n.inputs[0],
                   -(g.array() * in(0).array().sin()).matrix());
        break;
      case OpKind::kExp:
        Accumulate(n.inputs[0], g.cwiseProduct(n.value));
        break;
      case OpKind::kRelu:
        Accumulate(n.inputs[0],
                   (in(0).array() > 0.0).select(g, 0.0).matrix());
        break;
      case OpKind::kSigmoid:
        Accumulate(n.inputs[0],
                   (g.array() * n.value.array() * (1.0 - n.value.array()))
                       .matrix());
        break;
      case OpKind::kSum: {
        const Matrix& a = in(0);
        Matrix ga;
        if (n.axis == Axis::kAll) {
          ga = Matrix::Constant(a.rows(), a.cols(), g(0, 0));
        } else if (n.axis == Axis::kRows) {
          ga = g.replicate(a.rows(), 1);
        } else {
          ga = g.replicate(1, a.cols());
        }
        Accumulate(n.inputs[0], std::move(ga));
        break;
      }
      case OpKind::kBroadcast: {
        const Matrix& a = in(0);
        Matrix ga;
        if (a.rows() == 1 && a.cols() == 1) {
          ga = Matrix::Constant(1, 1, g.sum());
        } else if (a.rows() == 1) {
          ga = g.colwise().sum();
        } else if (a.cols() == 1) {
          ga = g.rowwise().sum();
        } else {
          ga = g;
        }
        Accumulate(n.inputs[0], std::move(ga));
        break;
      }
      case OpKind::kConcat: {
        Eigen::Index off = 0;
        for (size_t k = 0; k < n.inputs.size(); ++k) {
          const Matrix& a = in(k);
          if (n.axis == Axis::kRows) {
            if (wants(k)) {
              Accumulate(n.inputs[k], Matrix(g.middleRows(off, a.rows())));
            }
            off += a.rows();
          } else {
            if (wants(k)) {
              Accumulate(n.inputs[k], Matrix(g.middleCols(off, a.cols())));
            }
            off += a.cols();
          }
        }
        break;
      }
      case OpKind::kSlice:
        AccumulateSlice(n.inputs[0], n.axis, n.offset, g);
        break;
      case OpKind::kPower:
        Accumulate(n.inputs[0],
                   (g.array() * n.scalar *
                    in(0).array().pow(n.scalar - 1.0))
                       .matrix());
        break;
    }
  }
}

namespace {

Graph& CommonGraph(Tensor a, Tensor b, const char* op) {
  if (!a.valid() || a.graph() != b.graph()) {
    throw std::invalid_argument(std::string(op) +
                                ": operands belong to different graphs");
  }
  return *a.graph();
}

}  // namespace

Tensor Add(Tensor a, Tensor b) {
  Graph& g = CommonGraph(a, b, "add");
  const auto& na = g.node(a);
  const auto& nb = g.node(b);
  if (ShapeOf(na.val()) != ShapeOf(nb.val())) {
    ThrowShape("add", ShapeOf(na.val()), ShapeOf(nb.val()));
  }
  Graph::Node n;
  n.op = OpKind::kAdd;
  n.value = na.val() + nb.val();
  n.inputs = {a.id(), b.id()};
  n.requires_grad = na.requires_grad || nb.requires_grad;
  return g.Push(std::move(n));
}

Tensor Add(Tensor a, double b) {
  Graph& g = *a.graph();
  const auto& na = g.node(a);
  Graph::Node n;
  n.op = OpKind::kAdd;
  n.value = (na.val().array() + b).matrix();
  n.inputs = {a.id()};
  n.scalar = b;
  n.requires_grad = na.requires_grad;
  return g.Push(std::move(n));
}

Tensor Mul(Tensor a, Tensor b) {
  Graph& g = CommonGraph(a, b, "mul");
  const auto& na = g.node(a);
  const auto& nb = g.node(b);
  if (ShapeOf(na.val()) != ShapeOf(nb.val())) {
    ThrowShape("mul", ShapeOf(na.val()), ShapeOf(nb.val()));
  }
  Graph::Node n;
  n.op = OpKind::kMul;
  n.value = na.val().cwiseProduct(nb.val());
  n.inputs = {a.id(), b.id()};
  n.requires_grad = na.requires_grad || nb.requires_grad;
  return g.Push(std::move(n));
}

Tensor Mul(Tensor a, double b) {
  Graph& g = *a.graph();
  const auto& na = g.node(a);
  Graph::Node n;
  n.op = OpKind::kMul;
  n.value = na.val() * b;
  n.inputs = {a.id()};
  n.scalar = b;
  n.requires_grad = na.requires_grad;
  return g.Push(std::move(n));
}

Tensor MatMul(Tensor a, Tensor b) {
  Graph& g = CommonGraph(a, b, "matmul");
  const auto& na = g.node(a);
  const auto& nb = g.node(b);
  if (na.val().cols() != nb.val().rows()) {
    ThrowShape("matmul", ShapeOf(na.val()), ShapeOf(nb.val()));
  }
  Graph::Node n;
  n.op = OpKind::kMatMul;
  n.value.noalias() = na.val() * nb.val();
  n.inputs = {a.id(), b.id()};
  n.requires_grad = na.requires_grad || nb.requires_grad;
  return g.Push(std::move(n));
}

namespace internal {

template <typename F>
Tensor UnaryOp(Tensor a, OpKind op, F&& f) {
  Graph& g = *a.graph();
  Graph::Node n;
  n.op = op;
  n.value = f(g.node(a).val());
  n.inputs = {a.id()};
  n.requires_grad = g.node(a).requires_grad;
  return g.Push(std::move(n));
}

}  // namespace internal

using internal::UnaryOp;

Tensor Sin(Tensor a) {
  return UnaryOp(a, OpKind::kSin,
               [](const Matrix& x) -> Matrix { return x.array().sin(); });
}

Tensor Cos(Tensor a) {
  return UnaryOp(a, OpKind::kCos,
               [](const Matrix& x) -> Matrix { return x.array().cos(); });
}

Tensor Exp(Tensor a) {
  return UnaryOp(a, OpKind::kExp,
               [](const Matrix& x) -> Matrix { return x.array().exp(); });
}

Tensor Relu(Tensor a) {
  return UnaryOp(a, OpKind::kRelu,
               [](const Matrix& x) -> Matrix { return x.cwiseMax(0.0); });
}

Tensor Sigmoid(Tensor a) {
  return UnaryOp(a, OpKind::kSigmoid, [](const Matrix& x) -> Matrix {
    return (1.0 / (1.0 + (-x.array()).exp())).matrix();
  });
}

Tensor Sum(Tensor a, Axis axis) {
  Graph& g = *a.graph();
  const Matrix& x = g.node(a).val();
  Graph::Node n;
  n.op = OpKind::kSum;
  n.axis = axis;
  switch (axis) {
    case Axis::kAll: n.value = Matrix::Constant(1, 1, x.sum()); break;
    case Axis::kRows: n.value = x.colwise().sum(); break;
    case Axis::kCols: n.value = x.rowwise().sum(); break;
  }
  n.inputs = {a.id()};
  n.requires_grad = g.node(a).requires_grad;
  return g.Push(std::move(n));
}

Tensor Broadcast(Tensor a, Shape shape) {
  Graph& g = *a.graph();
  const Matrix& x = g.node(a).val();
  const bool rows_ok = x.rows() == shape.rows || x.rows() == 1;
  const bool cols_ok = x.cols() == shape.cols || x.cols() == 1;
  if (!rows_ok || !cols_ok) ThrowShape("broadcast", ShapeOf(x), shape);
  Graph::Node n;
  n.op = OpKind::kBroadcast;
  n.value = x.replicate(shape.rows / x.rows(), shape.cols / x.cols());
  n.inputs = {a.id()};
  n.requires_grad = g.node(a).requires_grad;
  return g.Push(std::move(n));
}

Tensor Concat(const std::vector<Tensor>& parts, Axis axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  if (axis == Axis::kAll) {
    throw std::invalid_argument("concat: axis must be rows or cols");
  }
  Graph& g = *parts.front().graph();
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  const Shape first = parts.front().shape();
  bool requires_grad = false;
  for (const Tensor& p : parts) {
    if (p.graph() != &g) {
      throw std::invalid_argument("concat: operands belong to different graphs");
    }
    const Shape s = p.shape();
    if (axis == Axis::kRows) {
      if (s.cols != first.cols) ThrowShape("concat", first, s);
      rows += s.rows;
      cols = s.cols;
    } else {
      if (s.rows != first.rows) ThrowShape("concat", first, s);
      cols += s.cols;
      rows = s.rows;
    }
    requires_grad = requires_grad || g.node(p).requires_grad;
  }
  Graph::Node n;
  n.op = OpKind::kConcat;
  n.axis = axis;
  n.value.resize(rows, cols);
  Eigen::Index off = 0;
  for (const Tensor& p : parts) {
    const Matrix& x = g.node(p).val();
    if (axis == Axis::kRows) {
      n.value.middleRows(off, x.rows()) = x;
      off += x.rows();
    } else {
      n.value.middleCols(off, x.cols()) = x;
      off += x.cols();
    }
    n.inputs.push_back(p.id());
  }
  n.requires_grad = requires_grad;
  return g.Push(std::move(n));
}

Tensor Slice(Tensor a, Axis axis, Eigen::Index begin, Eigen::Index count) {
  Graph& g = *a.graph();
  const Matrix& x = g.node(a).val();
  const Eigen::Index extent = axis == Axis::kRows ? x.rows() : x.cols();
  if (axis == Axis::kAll || begin < 0 || count <= 0 ||
      begin + count > extent) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of bounds for " +
                     ShapeOf(x).ToString());
  }
  Graph::Node n;
  n.op = OpKind::kSlice;
  n.axis = axis;
  n.offset = begin;
  n.value = axis == Axis::kRows ? Matrix(x.middleRows(begin, count))
                                : Matrix(x.middleCols(begin, count));
  n.inputs = {a.id()};
  n.requires_grad = g.node(a).requires_grad;
  return g.Push(std::move(n));
}

Tensor Power(Tensor a, double exponent) {
  Graph& g = *a.graph();
  Graph::Node n;
  n.op = OpKind::kPower;
  n.scalar = exponent;
  n.value = g.node(a).val().array().pow(exponent).matrix();
  n.inputs = {a.id()};
  n.requires_grad = g.node(a).requires_grad;
  return g.Push(std::move(n));
}

Tensor Sub(Tensor a, Tensor b) { return Add(a, Neg(b)); }

Tensor Neg(Tensor a) { return Mul(a, -1.0); }

Tensor Column(Tensor a, Eigen::Index c) { return Slice(a, Axis::kCols, c, 1); }

Tensor Row(Tensor a, Eigen::Index r) { return Slice(a, Axis::kRows, r, 1); }

}  // namespace jointnerf
