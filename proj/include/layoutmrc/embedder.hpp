#pragma once

#include <random>
#include <unordered_map>
#include <vector>

#include "layoutmrc/autograd.hpp"
#include "layoutmrc/params.hpp"
#include "layoutmrc/serializer.hpp"

namespace layoutmrc {

// One forward/backward pass. Parameter leaves are created on demand and
// remembered so gradients can be read back per tensor name.
struct GraphContext {
  ag::Tape tape;
  const ModelParams* params;
  const ModelConfig* cfg;
  bool train = false;
  std::mt19937 dropout_rng;
  std::unordered_map<std::string, ag::Node*> leaves;

  GraphContext(const ModelParams& p, const ModelConfig& c)
      : params(&p), cfg(&c) {}

  ag::Node* param(const std::string& name);
  ag::Node* maybe_dropout(ag::Node* x);
};

struct EmbeddedSequence {
  Mat rows;                 // length x H
  std::vector<bool> mask;   // validity bits (all true for unpadded input)
};

inline constexpr double kLayerNormEps = 1e-5;

// z_k = LN(token + pos + seg + loc + app); seg/loc/app are zero vectors on
// special and question positions, and skipped entirely in text_only mode.
ag::Node* encoder_embedding_graph(GraphContext& ctx, const InputSequence& seq);

// LN(token + pos); the decoder uses no segment/location/appearance.
ag::Node* decoder_embedding_graph(GraphContext& ctx,
                                  const std::vector<int>& token_ids);

// Forward-only wrappers over the graph builders.
EmbeddedSequence fuse(const InputSequence& seq, const ModelParams& params,
                      const ModelConfig& cfg);
EmbeddedSequence decoder_embedding(const std::vector<int>& token_ids,
                                   const ModelParams& params,
                                   const ModelConfig& cfg);

// Single-vector convenience forms: W^T x + b.
Eigen::VectorXd location_embedding(const std::array<double, 4>& x_loc,
                                   const Mat& w, const Mat& b);
// Affine map applied to ReLU(feat).
Eigen::VectorXd appearance_embedding(const Eigen::VectorXd& feat, const Mat& w,
                                     const Mat& b);

}  // namespace layoutmrc
