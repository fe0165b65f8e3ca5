#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "jointnerf/autodiff.h"

namespace jointnerf {

struct EncodingConfig {
  int pos_frequencies = 10;
  int dir_frequencies = 4;
  bool include_input = true;

  // Length of the encoding of a k-vector with `frequencies` octaves.
  int EncodedSize(int k, int frequencies) const {
    return k * ((include_input ? 1 : 0) + 2 * frequencies);
  }
};

// MLP layout. `depth` ReLU trunk layers of `width`; the encoded position is
// concatenated to the trunk after layer `skip_after` (0-based). A linear
// feature layer of `width` follows the trunk, is concatenated with the
// encoded direction and fed to one ReLU layer of `dir_width` and the RGB
// head. Density is read from the trunk output and never sees the direction.
struct FieldConfig {
  EncodingConfig encoding;
  int depth = 8;
  int width = 128;
  int skip_after = 4;
  int dir_width = 64;

  // Half-width original architecture: 9 layers of 128, last layer 64.
  static FieldConfig FullScale();
  // 4 x 32 trunk with 6 / 2 frequencies, for CPU-scale runs.
  static FieldConfig Tiny();
};

// [v?, sin(2^0 pi v), cos(2^0 pi v), ..., sin(2^{L-1} pi v), cos(2^{L-1} pi v)]
// per row of `v` (N x k), each block k wide.
Matrix PositionalEncode(const Matrix& v, int frequencies, bool include_input);
Tensor PositionalEncode(Tensor v, int frequencies, bool include_input);

struct FieldSample {
  Eigen::Vector3d rgb;
  double sigma;
};

class RadianceField {
 public:
  struct Output {
    Tensor sigma;  // N x 1, >= 0
    Tensor rgb;    // N x 3, in [0, 1]
  };

  RadianceField() = default;
  // Kaiming-uniform weights (ReLU gain), zero biases; deterministic in seed.
  RadianceField(const FieldConfig& config, uint64_t seed);

  const FieldConfig& config() const { return config_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::vector<Parameter*> parameter_ptrs();
  int64_t ParameterCount() const;

  // One graph leaf per parameter, in parameters() order.
  std::vector<Tensor> Bind(Graph& graph, bool trainable = true) const;

  Tensor EncodeDirections(Tensor directions) const;
  // positions: N x 3; directions: N x 3 unit vectors.
  Output Forward(std::span<const Tensor> leaves, Tensor positions,
                 Tensor directions) const;
  // As Forward, with directions already encoded (N x EncodedSize(3, L_dir)).
  Output ForwardEncoded(std::span<const Tensor> leaves, Tensor positions,
                        Tensor encoded_directions) const;

  // Single-point convenience evaluation; `direction` is normalised first.
  FieldSample Evaluate(const Eigen::Vector3d& position,
                       const Eigen::Vector3d& direction) const;

 private:
  // Parameter layout: trunk (W, b) x depth, sigma (W, b), feature (W, b),
  // direction layer (W, b), rgb (W, b).
  size_t trunk(int layer) const { return static_cast<size_t>(2 * layer); }
  size_t sigma_head() const { return trunk(config_.depth); }
  size_t feature() const { return sigma_head() + 2; }
  size_t dir_layer() const { return feature() + 2; }
  size_t rgb_head() const { return dir_layer() + 2; }

  FieldConfig config_;
  std::vector<Parameter> params_;
};

// Kaiming-uniform bound for a ReLU layer: gain * sqrt(3 / fan_in), gain = sqrt 2.
double KaimingUniformBound(int fan_in);

}  // namespace jointnerf
