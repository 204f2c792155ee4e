#include "layoutmrc/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace layoutmrc {

namespace {

constexpr double kMaskBias = -1e30;

Mat attention_bias(int q_len, const std::vector<bool>& key_mask, bool causal) {
  const int k_len = static_cast<int>(key_mask.size());
  Mat bias = Mat::Zero(q_len, k_len);
  for (int i = 0; i < q_len; ++i) {
    for (int j = 0; j < k_len; ++j) {
      if (!key_mask[static_cast<std::size_t>(j)] || (causal && j > i)) {
        bias(i, j) = kMaskBias;
      }
    }
  }
  return bias;
}

// Multi-head attention; relbias_name selects the learned relative-position
// bias table ("" for none).
ag::Node* mha(GraphContext& ctx, const std::string& prefix, ag::Node* q_in,
              ag::Node* kv_in, const Mat& bias,
              const std::string& relbias_name) {
  ag::Tape& t = ctx.tape;
  const int dh = ctx.cfg->head_dim();
  ag::Node* q = t.add_rowvec(t.matmul(q_in, ctx.param(prefix + ".wq")),
                             ctx.param(prefix + ".bq"));
  ag::Node* k = t.add_rowvec(t.matmul(kv_in, ctx.param(prefix + ".wk")),
                             ctx.param(prefix + ".bk"));
  ag::Node* v = t.add_rowvec(t.matmul(kv_in, ctx.param(prefix + ".wv")),
                             ctx.param(prefix + ".bv"));
  std::vector<ag::Node*> heads;
  for (int h = 0; h < ctx.cfg->n_heads; ++h) {
    ag::Node* qh = t.col_slice(q, h * dh, dh);
    ag::Node* kh = t.col_slice(k, h * dh, dh);
    ag::Node* vh = t.col_slice(v, h * dh, dh);
    ag::Node* scores =
        t.add_const(t.scale(t.matmul(qh, t.transpose(kh)), 1.0 / std::sqrt(dh)),
                    bias);
    if (!relbias_name.empty()) {
      ag::Node* row = t.gather_rows(ctx.param(relbias_name), {h});
      scores = t.add(scores, t.relpos_bias(row, static_cast<int>(bias.rows()),
                                           static_cast<int>(bias.cols()),
                                           kMaxRelDistance));
    }
    heads.push_back(t.matmul(t.softmax_rows(scores), vh));
  }
  ag::Node* cat = heads.size() == 1 ? heads[0] : t.col_concat(heads);
  return t.add_rowvec(t.matmul(cat, ctx.param(prefix + ".wo")),
                      ctx.param(prefix + ".bo"));
}

ag::Node* ffn(GraphContext& ctx, const std::string& prefix, ag::Node* x) {
  ag::Tape& t = ctx.tape;
  ag::Node* h = t.relu(t.add_rowvec(t.matmul(x, ctx.param(prefix + ".w1")),
                                    ctx.param(prefix + ".b1")));
  return t.add_rowvec(t.matmul(h, ctx.param(prefix + ".w2")),
                      ctx.param(prefix + ".b2"));
}

ag::Node* residual_ln(GraphContext& ctx, const std::string& ln, ag::Node* x,
                      ag::Node* sub) {
  ag::Tape& t = ctx.tape;
  return t.layer_norm_rows(t.add(x, ctx.maybe_dropout(sub)),
                           ctx.param(ln + ".g"), ctx.param(ln + ".b"),
                           kLayerNormEps);
}

}  // namespace

ag::Node* encode_graph(GraphContext& ctx, ag::Node* x,
                       const std::vector<bool>& mask) {
  const bool rel = ctx.cfg->position_mode == PositionMode::RelativeBias;
  const Mat bias = attention_bias(static_cast<int>(x->val.rows()), mask, false);
  for (int l = 0; l < ctx.cfg->n_enc_layers; ++l) {
    std::string base = "enc." + std::to_string(l);
    ag::Node* a = mha(ctx, base + ".attn", x, x, bias,
                      rel ? "relbias.enc" : "");
    x = residual_ln(ctx, base + ".ln1", x, a);
    x = residual_ln(ctx, base + ".ln2", x, ffn(ctx, base + ".ffn", x));
  }
  return x;
}

ag::Node* decode_graph(GraphContext& ctx, ag::Node* dec_emb, ag::Node* enc,
                       const std::vector<bool>& enc_mask) {
  ag::Tape& t = ctx.tape;
  const bool rel = ctx.cfg->position_mode == PositionMode::RelativeBias;
  const int tlen = static_cast<int>(dec_emb->val.rows());
  const Mat causal =
      attention_bias(tlen, std::vector<bool>(static_cast<std::size_t>(tlen), true), true);
  const bool has_enc = enc->val.rows() > 0;
  const Mat cross_bias =
      has_enc ? attention_bias(tlen, enc_mask, false) : Mat();

  ag::Node* x = dec_emb;
  for (int l = 0; l < ctx.cfg->n_dec_layers; ++l) {
    std::string base = "dec." + std::to_string(l);
    ag::Node* a = mha(ctx, base + ".self", x, x, causal,
                      rel ? "relbias.dec" : "");
    x = residual_ln(ctx, base + ".ln1", x, a);
    if (has_enc) {
      ag::Node* c = mha(ctx, base + ".cross", x, enc, cross_bias, "");
      x = residual_ln(ctx, base + ".ln2", x, c);
    } else {
      x = t.layer_norm_rows(x, ctx.param(base + ".ln2.g"),
                            ctx.param(base + ".ln2.b"), kLayerNormEps);
    }
    x = residual_ln(ctx, base + ".ln3", x, ffn(ctx, base + ".ffn", x));
  }
  return t.matmul(x, t.transpose(ctx.param("out.w")));
}

ag::Node* saliency_logits_graph(GraphContext& ctx, ag::Node* enc_hidden,
                                const std::vector<int>& positions) {
  ag::Tape& t = ctx.tape;
  ag::Node* rows = t.gather_rows(enc_hidden, positions);
  return t.add_rowvec(t.matmul(rows, ctx.param("sal.w")), ctx.param("sal.b"));
}

std::vector<int> ocr_positions(const InputSequence& seq) {
  std::vector<int> out;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    if (seq.positions[k].origin == Origin::Ocr) out.push_back(static_cast<int>(k));
  }
  return out;
}

EncoderOutput encode(const EmbeddedSequence& seq, const ModelParams& params,
                     const ModelConfig& cfg) {
  GraphContext ctx(params, cfg);
  ag::Node* x = ctx.tape.constant(seq.rows);
  ag::Node* out = encode_graph(ctx, x, seq.mask);
  return {out->val, seq.mask};
}

std::vector<SaliencyEntry> saliency_scores(const EncoderOutput& enc,
                                           const InputSequence& seq,
                                           const ModelParams& params,
                                           const ModelConfig& cfg) {
  std::vector<int> positions = ocr_positions(seq);
  std::vector<SaliencyEntry> out;
  if (positions.empty()) return out;
  GraphContext ctx(params, cfg);
  ag::Node* logits = saliency_logits_graph(
      ctx, ctx.tape.constant(enc.hidden), positions);
  for (std::size_t n = 0; n < positions.size(); ++n) {
    const InputPosition& p = seq.positions[static_cast<std::size_t>(positions[n])];
    double prob = 1.0 / (1.0 + std::exp(-logits->val(static_cast<Eigen::Index>(n), 0)));
    out.push_back({positions[n], p.roi_index, p.token_index, prob});
  }
  return out;
}

Mat decode_train(const std::vector<int>& target_ids, const EncoderOutput& enc,
                 const ModelParams& params, const ModelConfig& cfg) {
  if (target_ids.empty() || target_ids.front() != kBos) {
    throw std::invalid_argument("decoder target must begin with [BOS]");
  }
  GraphContext ctx(params, cfg);
  ag::Node* emb = decoder_embedding_graph(ctx, target_ids);
  ag::Node* logits =
      decode_graph(ctx, emb, ctx.tape.constant(enc.hidden), enc.mask);
  return logits->val;
}

namespace {

Eigen::RowVectorXd log_softmax_row(const Eigen::RowVectorXd& row) {
  double m = row.maxCoeff();
  Eigen::ArrayXd e = (row.transpose().array() - m).exp();
  double lse = m + std::log(e.sum());
  return (row.array() - lse).matrix();
}

Eigen::RowVectorXd next_token_logits(const std::vector<int>& ids,
                                     const Mat& enc_hidden,
                                     const std::vector<bool>& enc_mask,
                                     const ModelParams& params,
                                     const ModelConfig& cfg) {
  GraphContext ctx(params, cfg);
  ag::Node* emb = decoder_embedding_graph(ctx, ids);
  ag::Node* logits =
      decode_graph(ctx, emb, ctx.tape.constant(enc_hidden), enc_mask);
  return logits->val.row(logits->val.rows() - 1);
}

int argmax_lowest_id(const Eigen::RowVectorXd& row) {
  int best = 0;
  for (int i = 1; i < row.size(); ++i) {
    if (row(i) > row(best)) best = i;
  }
  return best;
}

}  // namespace

std::vector<int> generate_ids(const InputSequence& input,
                              const ModelParams& params,
                              const ModelConfig& cfg, DecodeMode mode,
                              int beam_size, int max_len) {
  EmbeddedSequence emb = fuse(input, params, cfg);
  EncoderOutput enc = encode(emb, params, cfg);

  if (mode == DecodeMode::Greedy || beam_size == 1) {
    std::vector<int> ids = {kBos};
    for (int step = 0; step < max_len; ++step) {
      Eigen::RowVectorXd row =
          next_token_logits(ids, enc.hidden, enc.mask, params, cfg);
      int next = argmax_lowest_id(row);
      if (next == kEos) break;
      ids.push_back(next);
    }
    return {ids.begin() + 1, ids.end()};
  }

  struct Hyp {
    std::vector<int> ids;
    double logp = 0;
    bool done = false;
    double score() const {
      std::size_t gen = ids.size() - 1;
      return gen == 0 ? logp : logp / static_cast<double>(gen);
    }
  };
  auto better = [](const Hyp& a, const Hyp& b) {
    if (a.score() != b.score()) return a.score() > b.score();
    return a.ids < b.ids;
  };

  std::vector<Hyp> beam = {Hyp{{kBos}, 0.0, false}};
  for (int step = 0; step < max_len; ++step) {
    std::vector<Hyp> candidates;
    bool any_open = false;
    for (const Hyp& h : beam) {
      if (h.done) {
        candidates.push_back(h);
        continue;
      }
      any_open = true;
      Eigen::RowVectorXd row =
          next_token_logits(h.ids, enc.hidden, enc.mask, params, cfg);
      Eigen::RowVectorXd logp = log_softmax_row(row);
      std::vector<int> order(static_cast<std::size_t>(logp.size()));
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      std::partial_sort(order.begin(),
                        order.begin() + std::min<std::size_t>(order.size(),
                                                              static_cast<std::size_t>(beam_size)),
                        order.end(), [&](int a, int b) {
                          if (logp(a) != logp(b)) return logp(a) > logp(b);
                          return a < b;
                        });
      for (int k = 0; k < beam_size && k < logp.size(); ++k) {
        int tok = order[static_cast<std::size_t>(k)];
        Hyp next = h;
        next.logp += logp(tok);
        if (tok == kEos) {
          next.done = true;
        } else {
          next.ids.push_back(tok);
        }
        candidates.push_back(std::move(next));
      }
    }
    if (!any_open) break;
    std::sort(candidates.begin(), candidates.end(), better);
    if (static_cast<int>(candidates.size()) > beam_size) {
      candidates.resize(static_cast<std::size_t>(beam_size));
    }
    beam = std::move(candidates);
  }
  const Hyp* best = nullptr;
  for (const Hyp& h : beam) {
    if (h.done && (!best || better(h, *best))) best = &h;
  }
  if (!best) best = &*std::min_element(beam.begin(), beam.end(),
                                       [&](const Hyp& a, const Hyp& b) {
                                         return better(a, b);
                                       });
  return {best->ids.begin() + 1, best->ids.end()};
}

std::string detokenize(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::string out;
  for (int id : ids) {
    if (!out.empty()) out.push_back(' ');
    out += vocab.token_of(id);
  }
  return out;
}

std::string generate(const std::string& question, const DocumentRecord& doc,
                     const ModelParams& params, const ModelConfig& cfg,
                     const Vocabulary& vocab, DecodeMode mode, int beam_size,
                     int max_len) {
  InputSequence seq = build_input_sequence(question, doc, vocab,
                                           static_cast<std::size_t>(cfg.l_max));
  std::vector<int> ids = generate_ids(seq, params, cfg, mode, beam_size, max_len);
  return detokenize(ids, vocab);
}

}  // namespace layoutmrc
