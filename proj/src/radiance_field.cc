#include "jointnerf/radiance_field.h"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace jointnerf {

FieldConfig FieldConfig::FullScale() { return FieldConfig{}; }

FieldConfig FieldConfig::Tiny() {
  FieldConfig c;
  c.encoding.pos_frequencies = 6;
  c.encoding.dir_frequencies = 2;
  c.depth = 4;
  c.width = 32;
  c.skip_after = 1;
  c.dir_width = 16;
  return c;
}

Matrix PositionalEncode(const Matrix& v, int frequencies, bool include_input) {
  const Eigen::Index k = v.cols();
  const Eigen::Index blocks = (include_input ? 1 : 0) + 2 * frequencies;
  Matrix out(v.rows(), k * blocks);
  Eigen::Index col = 0;
  if (include_input) {
    out.middleCols(col, k) = v;
    col += k;
  }
  for (int f = 0; f < frequencies; ++f) {
    const double scale = std::ldexp(std::numbers::pi, f);
    out.middleCols(col, k) = (scale * v.array()).sin().matrix();
    col += k;
    out.middleCols(col, k) = (scale * v.array()).cos().matrix();
    col += k;
  }
  return out;
}

Tensor PositionalEncode(Tensor v, int frequencies, bool include_input) {
  std::vector<Tensor> parts;
  if (include_input) parts.push_back(v);
  for (int f = 0; f < frequencies; ++f) {
    const Tensor scaled = Mul(v, std::ldexp(std::numbers::pi, f));
    parts.push_back(Sin(scaled));
    parts.push_back(Cos(scaled));
  }
  return Concat(parts, Axis::kCols);
}

double KaimingUniformBound(int fan_in) {
  return std::sqrt(2.0) * std::sqrt(3.0 / fan_in);
}

RadianceField::RadianceField(const FieldConfig& config, uint64_t seed)
    : config_(config) {
  if (config.depth < 1 || config.width < 1 || config.dir_width < 1 ||
      config.encoding.pos_frequencies < 1 ||
      config.encoding.dir_frequencies < 0 || config.skip_after < 0) {
    throw std::invalid_argument("radiance field: invalid layer configuration");
  }
  const int pos_dim = config.encoding.EncodedSize(3, config.encoding.pos_frequencies);
  const int dir_dim = config.encoding.EncodedSize(3, config.encoding.dir_frequencies);
  std::mt19937_64 rng(seed);

  auto add_linear = [&](const std::string& name, int in, int out) {
    const double bound = KaimingUniformBound(in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    Parameter w{name + ".weight", Matrix(in, out)};
    for (Eigen::Index i = 0; i < w.value.size(); ++i) {
      w.value.data()[i] = dist(rng);
    }
    params_.push_back(std::move(w));
    params_.push_back(Parameter{name + ".bias", Matrix::Zero(1, out)});
  };

  int in = pos_dim;
  for (int layer = 0; layer < config.depth; ++layer) {
    add_linear("trunk" + std::to_string(layer), in, config.width);
    in = config.width + (layer == config.skip_after ? pos_dim : 0);
  }
  add_linear("sigma", in, 1);
  add_linear("feature", in, config.width);
  add_linear("direction", config.width + dir_dim, config.dir_width);
  add_linear("rgb", config.dir_width, 3);
}

std::vector<Parameter*> RadianceField::parameter_ptrs() {
  std::vector<Parameter*> out;
  for (Parameter& p : params_) out.push_back(&p);
  return out;
}

int64_t RadianceField::ParameterCount() const {
  int64_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

std::vector<Tensor> RadianceField::Bind(Graph& graph, bool trainable) const {
  std::vector<Tensor> leaves;
  leaves.reserve(params_.size());
  for (const Parameter& p : params_) leaves.push_back(graph.Leaf(p, trainable));
  return leaves;
}

namespace {

Tensor Linear(Tensor x, Tensor w, Tensor b) {
  const Tensor y = MatMul(x, w);
  return Add(y, Broadcast(b, y.shape()));
}

}  // namespace

Tensor RadianceField::EncodeDirections(Tensor directions) const {
  return PositionalEncode(directions, config_.encoding.dir_frequencies,
                          config_.encoding.include_input);
}

RadianceField::Output RadianceField::Forward(std::span<const Tensor> leaves,
                                             Tensor positions,
                                             Tensor directions) const {
  return ForwardEncoded(leaves, positions, EncodeDirections(directions));
}

RadianceField::Output RadianceField::ForwardEncoded(
    std::span<const Tensor> leaves, Tensor positions,
    Tensor encoded_directions) const {
  if (leaves.size() != params_.size()) {
    throw std::invalid_argument("radiance field: expected " +
                                std::to_string(params_.size()) +
                                " bound parameters");
  }
  const Tensor pos_enc = PositionalEncode(
      positions, config_.encoding.pos_frequencies, config_.encoding.include_input);
  Tensor h = pos_enc;
  for (int layer = 0; layer < config_.depth; ++layer) {
    h = Relu(Linear(h, leaves[trunk(layer)], leaves[trunk(layer) + 1]));
    if (layer == config_.skip_after) h = Concat({pos_enc, h}, Axis::kCols);
  }
  Output out;
  out.sigma = Relu(Linear(h, leaves[sigma_head()], leaves[sigma_head() + 1]));
  const Tensor feat = Linear(h, leaves[feature()], leaves[feature() + 1]);
  const Tensor hd = Relu(Linear(Concat({feat, encoded_directions}, Axis::kCols),
                                leaves[dir_layer()], leaves[dir_layer() + 1]));
  out.rgb = Sigmoid(Linear(hd, leaves[rgb_head()], leaves[rgb_head() + 1]));
  return out;
}

FieldSample RadianceField::Evaluate(const Eigen::Vector3d& position,
                                    const Eigen::Vector3d& direction) const {
  Graph graph;
  std::vector<Tensor> leaves;
  for (const Parameter& p : params_) leaves.push_back(graph.Constant(p.value));
  const Tensor x = graph.Constant(position.transpose());
  const Tensor d = graph.Constant(direction.normalized().transpose());
  const Output out = Forward(leaves, x, d);
  FieldSample s;
  s.sigma = out.sigma.value()(0, 0);
  s.rgb = out.rgb.value().row(0).transpose();
  return s;
}

}  // namespace jointnerf
