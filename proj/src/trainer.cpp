#include "layoutmrc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>
#include <unordered_set>

#include "layoutmrc/metrics.hpp"

namespace layoutmrc {

SaliencyLabels pseudo_saliency_labels(const InputSequence& seq,
                                      const QaPair& qa) {
  std::unordered_set<std::string> answer_pieces;
  for (const auto& p : split_pieces(qa.answer)) answer_pieces.insert(p);
  std::unordered_set<int> relevant(qa.relevant_roi_ids.begin(),
                                   qa.relevant_roi_ids.end());
  SaliencyLabels out;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const InputPosition& p = seq.positions[k];
    if (p.origin != Origin::Ocr) continue;
    bool in_answer = answer_pieces.count(p.piece) > 0;
    bool in_relevant = relevant.count(p.roi_id) > 0;
    out.entries.push_back({static_cast<int>(k), p.roi_index, p.token_index,
                           (in_answer && in_relevant) ? 1 : 0});
  }
  return out;
}

double saliency_loss(const std::vector<double>& probs,
                     const SaliencyLabels& labels, double smooth_pos) {
  if (probs.size() != labels.entries.size()) {
    throw std::invalid_argument("saliency_loss: score/label count mismatch");
  }
  if (probs.empty()) return 0.0;
  double loss = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    double s = labels.entries[k].label == 1 ? smooth_pos : 0.0;
    double p = std::clamp(probs[k], 1e-12, 1.0 - 1e-12);
    loss -= s * std::log(p) + (1.0 - s) * std::log(1.0 - p);
  }
  return loss / static_cast<double>(probs.size());
}

double nll_loss(const Mat& logits, const std::vector<int>& target_ids) {
  if (logits.rows() != static_cast<Eigen::Index>(target_ids.size())) {
    throw std::invalid_argument(
        "nll_loss: " + std::to_string(logits.rows()) + " logit rows vs " +
        std::to_string(target_ids.size()) + " targets");
  }
  ag::Tape tape;
  ag::Node* l = tape.leaf(logits);
  return tape.softmax_xent(l, target_ids)->val(0, 0);
}

namespace {

struct Example {
  const DocumentRecord* doc;
  const QaPair* qa;
  InputSequence seq;
  std::vector<int> dec_input;   // [BOS] a_1 .. a_T
  std::vector<int> targets;     // a_1 .. a_T [EOS]
  std::vector<int> sal_positions;
  Eigen::VectorXd sal_targets;  // smoothed labels
};

struct Adam {
  double lr, b1, b2, eps;
  int t = 0;
  std::map<std::string, Mat> m, v;

  void step(ModelParams& params, const std::map<std::string, Mat>& grads) {
    ++t;
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    for (auto& [name, g] : grads) {
      Mat& p = params.at(name);
      Mat& mm = m.try_emplace(name, Mat::Zero(p.rows(), p.cols())).first->second;
      Mat& vv = v.try_emplace(name, Mat::Zero(p.rows(), p.cols())).first->second;
      mm = b1 * mm + (1.0 - b1) * g;
      vv = b2 * vv + (1.0 - b2) * g.cwiseProduct(g);
      p.array() -= lr * (mm.array() / c1) /
                   ((vv.array() / c2).sqrt() + eps);
    }
  }
};

double validation_rouge(const std::vector<Example>& dev,
                        const ModelParams& params, const ModelConfig& mcfg,
                        const Vocabulary& vocab, int max_len) {
  if (dev.empty()) return 0.0;
  std::vector<metrics::EvalPair> pairs;
  for (const auto& ex : dev) {
    auto ids = generate_ids(ex.seq, params, mcfg, DecodeMode::Greedy, 1, max_len);
    pairs.push_back({detokenize(ids, vocab), {ex.qa->answer}});
  }
  return metrics::rouge_l(pairs);
}

}  // namespace

TrainResult train(const std::vector<DocumentRecord>& train_corpus,
                  const std::vector<DocumentRecord>& dev_corpus,
                  const Vocabulary& vocab, ModelParams& params,
                  const ModelConfig& mcfg, const TrainConfig& tcfg,
                  std::ostream* log) {
  mcfg.validate();
  tcfg.validate();

  auto build_examples = [&](const std::vector<DocumentRecord>& corpus) {
    std::vector<Example> out;
    for (const auto& doc : corpus) {
      for (const auto& qa : doc.qas) {
        Example ex;
        ex.doc = &doc;
        ex.qa = &qa;
        ex.seq = build_input_sequence(qa.question, doc, vocab,
                                      static_cast<std::size_t>(mcfg.l_max));
        ex.dec_input = {kBos};
        for (auto& tp : tokenize(qa.answer, vocab)) ex.dec_input.push_back(tp.id);
        ex.targets.assign(ex.dec_input.begin() + 1, ex.dec_input.end());
        ex.targets.push_back(kEos);
        SaliencyLabels labels = pseudo_saliency_labels(ex.seq, qa);
        ex.sal_targets.resize(static_cast<Eigen::Index>(labels.entries.size()));
        for (std::size_t k = 0; k < labels.entries.size(); ++k) {
          ex.sal_positions.push_back(labels.entries[k].pos);
          ex.sal_targets(static_cast<Eigen::Index>(k)) =
              labels.entries[k].label == 1 ? tcfg.label_smooth_pos : 0.0;
        }
        out.push_back(std::move(ex));
      }
    }
    return out;
  };

  std::vector<Example> examples = build_examples(train_corpus);
  if (examples.empty()) {
    throw std::invalid_argument("training corpus has no QA pairs");
  }
  std::vector<Example> dev = build_examples(dev_corpus);

  Adam adam{tcfg.lr, tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps};
  std::mt19937 rng(static_cast<std::uint32_t>(tcfg.seed));

  TrainResult result;
  ModelParams best = params;
  double best_rouge = -1.0;

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum_nll = 0, sum_sal = 0;

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(tcfg.batch_size)) {
      std::size_t end = std::min(order.size(),
                                 start + static_cast<std::size_t>(tcfg.batch_size));
      std::map<std::string, Mat> grads;
      const std::size_t batch_index = start / static_cast<std::size_t>(tcfg.batch_size);

      for (std::size_t idx = start; idx < end; ++idx) {
        const Example& ex = examples[order[idx]];
        GraphContext ctx(params, mcfg);
        ctx.train = true;
        ctx.dropout_rng.seed(rng());

        ag::Node* emb = encoder_embedding_graph(ctx, ex.seq);
        std::vector<bool> mask(ex.seq.size(), true);
        ag::Node* enc = encode_graph(ctx, emb, mask);
        ag::Node* dec_emb = decoder_embedding_graph(ctx, ex.dec_input);
        ag::Node* logits = decode_graph(ctx, dec_emb, enc, mask);
        ag::Node* nll = ctx.tape.softmax_xent(logits, ex.targets);

        ag::Node* loss;
        double sal_value = 0;
        if (!ex.sal_positions.empty()) {
          ag::Node* sal_logits = saliency_logits_graph(ctx, enc, ex.sal_positions);
          ag::Node* sal = ctx.tape.bce_logits(sal_logits, ex.sal_targets);
          sal_value = sal->val(0, 0);
          loss = ctx.tape.add_scaled(nll, sal, tcfg.gamma_sal);
        } else {
          loss = nll;
        }
        if (!std::isfinite(loss->val(0, 0))) {
          throw std::runtime_error("training diverged (non-finite loss) at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index));
        }
        sum_nll += nll->val(0, 0);
        sum_sal += sal_value;

        ctx.tape.backward(loss);
        for (auto& [name, leaf] : ctx.leaves) {
          auto it = grads.find(name);
          if (it == grads.end()) {
            grads.emplace(name, leaf->grad);
          } else {
            it->second += leaf->grad;
          }
        }
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& [name, g] : grads) g *= inv;
      adam.step(params, grads);
    }

    EpochLog el;
    el.epoch = epoch;
    el.l_nll = sum_nll / static_cast<double>(examples.size());
    el.l_sal = sum_sal / static_cast<double>(examples.size());
    el.l_multi = multitask_loss(el.l_nll, el.l_sal, tcfg.gamma_sal);
    el.dev_rouge_l = validation_rouge(dev, params, mcfg, vocab, tcfg.gen_max_len);
    result.trace.push_back(el);
    if (log) {
      (*log) << "epoch " << epoch << " nll " << el.l_nll << " sal " << el.l_sal
             << " multi " << el.l_multi << " dev_rouge_l " << el.dev_rouge_l
             << "\n";
    }
    if (dev.empty() || el.dev_rouge_l > best_rouge) {
      best_rouge = el.dev_rouge_l;
      best = params;
      result.best_epoch = epoch;
    }
  }

  if (result.best_epoch >= 0) params = best;
  return result;
}

}  // namespace layoutmrc
