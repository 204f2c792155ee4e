#pragma once

#include <map>
#include <string>

#include <Eigen/Dense>

#include "layoutmrc/config.hpp"

namespace layoutmrc {

using Mat = Eigen::MatrixXd;

// Named learnable tensors. std::map keeps iteration (and checkpoint byte
// layout) deterministic.
struct ModelParams {
  std::map<std::string, Mat> tensors;

  Mat& at(const std::string& name);
  const Mat& at(const std::string& name) const;
  bool has(const std::string& name) const { return tensors.count(name) > 0; }
};

// Relative-position bias table half-width (clamped distance buckets).
inline constexpr int kMaxRelDistance = 64;

// Weights ~ N(0, 0.02), biases zero, layer-norm gains one.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// Flat named-tensor checkpoint: plain-text header (one "tensor <name>
// <rows> <cols>" line per tensor), then row-major little-endian f32 data.
void save_checkpoint(const std::string& path, const ModelParams& params);

// Loads into an already-shaped ModelParams; mismatches name the tensor.
void load_checkpoint(const std::string& path, ModelParams& params);

}  // namespace layoutmrc
