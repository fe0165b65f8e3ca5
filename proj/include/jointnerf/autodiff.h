#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace jointnerf {

// Row-major so that slicing rows (one block per ray sample) stays contiguous.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Shape {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string ToString() const;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A named trainable array living outside any graph. The graph references
// `value` by pointer while it is alive and the caller collects gradients
// explicitly after backward.
struct Parameter {
  std::string name;
  Matrix value;

  Shape shape() const { return {value.rows(), value.cols()}; }
};

enum class OpKind {
  kLeaf,
  kConstant,
  kAdd,
  kMul,
  kMatMul,
  kSin,
  kCos,
  kExp,
  kRelu,
  kSigmoid,
  kSum,
  kBroadcast,
  kConcat,
  kSlice,
  kPower,
};

const char* OpName(OpKind op);

enum class Axis { kAll, kRows, kCols };

class Graph;
class Tensor;

namespace internal {
template <typename F>
Tensor UnaryOp(Tensor a, OpKind op, F&& f);
}  // namespace internal

// Lightweight handle to a node of a Graph. Copyable; it does not own data.
class Tensor {
 public:
  Tensor() = default;

  Graph* graph() const { return graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Matrix& value() const;
  Shape shape() const;
  bool requires_grad() const;

 private:
  friend class Graph;
  Tensor(Graph* graph, int id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  int id_ = -1;
};

// Define-by-run tape. Nodes are appended in evaluation order, which is a
// topological order by construction. A Graph is single-threaded; independent
// graphs may live on different threads.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf referencing external storage. `param` must outlive the graph and
  // must not be modified until backward has run. A frozen leaf receives no
  // gradient and stops gradient computation for anything only it feeds.
  Tensor Leaf(const Parameter& param, bool requires_grad = true);
  // Trainable leaf owning its value.
  Tensor Variable(Matrix value);
  Tensor Constant(Matrix value);
  Tensor Scalar(double v);

  // Reverse sweep from a 1x1 tensor. Gradients of every node that requires
  // grad are available through Grad() afterwards.
  void Backward(Tensor loss);
  // Gradient of `t` after Backward; zero matrix when nothing flowed into it.
  Matrix Grad(Tensor t) const;

  size_t size() const { return nodes_.size(); }
  void Clear();

 private:
  friend class Tensor;
  friend Tensor Add(Tensor, Tensor);
  friend Tensor Add(Tensor, double);
  friend Tensor Mul(Tensor, Tensor);
  friend Tensor Mul(Tensor, double);
  friend Tensor MatMul(Tensor, Tensor);
  friend Tensor Sin(Tensor);
  friend Tensor Cos(Tensor);
  friend Tensor Exp(Tensor);
  friend Tensor Relu(Tensor);
  friend Tensor Sigmoid(Tensor);
  friend Tensor Sum(Tensor, Axis);
  friend Tensor Broadcast(Tensor, Shape);
  friend Tensor Concat(const std::vector<Tensor>&, Axis);
  friend Tensor Slice(Tensor, Axis, Eigen::Index, Eigen::Index);
  friend Tensor Power(Tensor, double);
  template <typename F>
  friend Tensor internal::UnaryOp(Tensor, OpKind, F&&);

  struct Node {
    OpKind op = OpKind::kConstant;
    Matrix value;
    const Matrix* external = nullptr;
    std::vector<int> inputs;
    bool requires_grad = false;
    // Op attributes: scalar operand for Add/Mul-by-constant and exponent for
    // Power; axis/offset for Sum, Concat and Slice.
    double scalar = 0.0;
    Axis axis = Axis::kAll;
    Eigen::Index offset = 0;

    const Matrix& val() const { return external ? *external : value; }
  };

  Tensor Push(Node node);
  const Node& node(Tensor t) const;
  void CheckOwned(Tensor t, const char* op) const;
  void Accumulate(int id, Matrix&& g);
  void AccumulateSlice(int id, Axis axis, Eigen::Index offset, const Matrix& g);

  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
  std::vector<bool> has_grad_;
};

// Elementwise; shapes must match exactly. Broadcast explicitly first.
Tensor Add(Tensor a, Tensor b);
Tensor Add(Tensor a, double b);
Tensor Mul(Tensor a, Tensor b);
Tensor Mul(Tensor a, double b);
Tensor MatMul(Tensor a, Tensor b);
Tensor Sin(Tensor a);
Tensor Cos(Tensor a);
Tensor Exp(Tensor a);
Tensor Relu(Tensor a);
Tensor Sigmoid(Tensor a);
// kAll -> 1x1, kRows -> 1 x cols (sum down rows), kCols -> rows x 1.
Tensor Sum(Tensor a, Axis axis = Axis::kAll);
// Expands extents equal to 1 (either axis) to the target shape.
Tensor Broadcast(Tensor a, Shape shape);
// kRows stacks vertically, kCols side by side.
Tensor Concat(const std::vector<Tensor>& parts, Axis axis);
Tensor Slice(Tensor a, Axis axis, Eigen::Index begin, Eigen::Index count);
Tensor Power(Tensor a, double exponent);

// Composites of the primitives above.
Tensor Sub(Tensor a, Tensor b);
Tensor Neg(Tensor a);
Tensor Column(Tensor a, Eigen::Index c);
Tensor Row(Tensor a, Eigen::Index r);

}  // namespace jointnerf
