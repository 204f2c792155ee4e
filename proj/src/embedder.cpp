#include "layoutmrc/embedder.hpp"

#include <numeric>
#include <stdexcept>

namespace layoutmrc {

ag::Node* GraphContext::param(const std::string& name) {
  auto it = leaves.find(name);
  if (it != leaves.end()) return it->second;
  ag::Node* n = tape.leaf(params->at(name));
  leaves.emplace(name, n);
  return n;
}

ag::Node* GraphContext::maybe_dropout(ag::Node* x) {
  if (!train || cfg->dropout <= 0.0) return x;
  return tape.dropout(x, cfg->dropout, dropout_rng);
}

ag::Node* encoder_embedding_graph(GraphContext& ctx, const InputSequence& seq) {
  const ModelConfig& cfg = *ctx.cfg;
  const int len = static_cast<int>(seq.size());
  if (len > cfg.l_max) {
    throw std::invalid_argument("sequence length exceeds l_max");
  }
  ag::Tape& t = ctx.tape;

  std::vector<int> token_ids(seq.size());
  for (std::size_t k = 0; k < seq.size(); ++k) {
    int id = seq.positions[k].token_id;
    if (id < 0 || id >= cfg.vocab_size) {
      throw std::out_of_range("token id out of vocabulary range: " +
                              std::to_string(id));
    }
    token_ids[k] = id;
  }
  ag::Node* sum = t.gather_rows(ctx.param("emb.token"), token_ids);

  if (cfg.position_mode == PositionMode::Absolute) {
    std::vector<int> pos_ids(seq.size());
    std::iota(pos_ids.begin(), pos_ids.end(), 0);
    sum = t.add(sum, t.gather_rows(ctx.param("emb.pos"), pos_ids));
  }

  if (!cfg.text_only) {
    // Row mask: 1 on ROI-label and OCR positions, 0 elsewhere, so the
    // seg/loc/app contributions (biases included) stay zero vectors on
    // special and question positions.
    Mat layout_mask = Mat::Zero(len, cfg.hidden);
    std::vector<int> seg_ids(seq.size(), 0);
    Mat x_loc = Mat::Zero(len, 4);
    Mat app_relu = Mat::Zero(len, cfg.d_app);
    for (int k = 0; k < len; ++k) {
      const InputPosition& p = seq.positions[static_cast<std::size_t>(k)];
      if (p.origin != Origin::RoiLabel && p.origin != Origin::Ocr) continue;
      layout_mask.row(k).setOnes();
      seg_ids[static_cast<std::size_t>(k)] = static_cast<int>(*p.seg_class);
      for (int c = 0; c < 4; ++c) x_loc(k, c) = (*p.loc)[static_cast<std::size_t>(c)];
      if (p.appearance) {
        if (static_cast<int>(p.appearance->size()) != cfg.d_app) {
          throw std::invalid_argument(
              "appearance feature size " + std::to_string(p.appearance->size()) +
              " != configured d_app " + std::to_string(cfg.d_app));
        }
        for (int c = 0; c < cfg.d_app; ++c) {
          app_relu(k, c) = std::max((*p.appearance)[static_cast<std::size_t>(c)], 0.0);
        }
      }
    }

    ag::Node* seg = t.gather_rows(ctx.param("emb.seg"), seg_ids);
    ag::Node* loc = t.add_rowvec(t.matmul(t.constant(x_loc), ctx.param("emb.loc.w")),
                                 ctx.param("emb.loc.b"));
    ag::Node* app = t.add_rowvec(t.matmul(t.constant(app_relu), ctx.param("emb.app.w")),
                                 ctx.param("emb.app.b"));
    sum = t.add(sum, t.mul_const(seg, layout_mask));
    sum = t.add(sum, t.mul_const(loc, layout_mask));
    sum = t.add(sum, t.mul_const(app, layout_mask));
  }

  ag::Node* z = t.layer_norm_rows(sum, ctx.param("emb.ln.g"),
                                  ctx.param("emb.ln.b"), kLayerNormEps);
  return ctx.maybe_dropout(z);
}

ag::Node* decoder_embedding_graph(GraphContext& ctx,
                                  const std::vector<int>& token_ids) {
  const ModelConfig& cfg = *ctx.cfg;
  if (static_cast<int>(token_ids.size()) > cfg.l_max) {
    throw std::invalid_argument("decoder sequence exceeds l_max");
  }
  for (int id : token_ids) {
    if (id < 0 || id >= cfg.vocab_size) {
      throw std::out_of_range("token id out of vocabulary range: " +
                              std::to_string(id));
    }
  }
  ag::Tape& t = ctx.tape;
  ag::Node* sum = t.gather_rows(ctx.param("emb.token"), token_ids);
  if (cfg.position_mode == PositionMode::Absolute) {
    std::vector<int> pos_ids(token_ids.size());
    std::iota(pos_ids.begin(), pos_ids.end(), 0);
    sum = t.add(sum, t.gather_rows(ctx.param("emb.pos"), pos_ids));
  }
  ag::Node* z = t.layer_norm_rows(sum, ctx.param("emb.ln.g"),
                                  ctx.param("emb.ln.b"), kLayerNormEps);
  return ctx.maybe_dropout(z);
}

EmbeddedSequence fuse(const InputSequence& seq, const ModelParams& params,
                      const ModelConfig& cfg) {
  GraphContext ctx(params, cfg);
  ag::Node* z = encoder_embedding_graph(ctx, seq);
  return {z->val, std::vector<bool>(seq.size(), true)};
}

EmbeddedSequence decoder_embedding(const std::vector<int>& token_ids,
                                   const ModelParams& params,
                                   const ModelConfig& cfg) {
  if (token_ids.empty()) return {Mat(0, cfg.hidden), {}};
  GraphContext ctx(params, cfg);
  ag::Node* z = decoder_embedding_graph(ctx, token_ids);
  return {z->val, std::vector<bool>(token_ids.size(), true)};
}

Eigen::VectorXd location_embedding(const std::array<double, 4>& x_loc,
                                   const Mat& w, const Mat& b) {
  Eigen::RowVector4d x(x_loc[0], x_loc[1], x_loc[2], x_loc[3]);
  return (x * w + b.row(0)).transpose();
}

Eigen::VectorXd appearance_embedding(const Eigen::VectorXd& feat, const Mat& w,
                                     const Mat& b) {
  Eigen::RowVectorXd r = feat.cwiseMax(0.0).transpose();
  return (r * w + b.row(0)).transpose();
}

}  // namespace layoutmrc
