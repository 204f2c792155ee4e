#pragma once

#include <iosfwd>
#include <vector>

#include "layoutmrc/model.hpp"

namespace layoutmrc {

// Pseudo saliency labels, one entry per OCR piece position.
struct SaliencyLabels {
  struct Entry {
    int pos = -1;         // sequence position
    int roi_index = -1;
    int token_index = -1;
    int label = 0;        // 1 iff piece in answer AND ROI relevant
  };
  std::vector<Entry> entries;
};

// Label 1 iff the OCR piece occurs in the answer's piece multiset
// (case-insensitive, same tokenizer) and its ROI is among the QA's relevant
// ROIs.
SaliencyLabels pseudo_saliency_labels(const InputSequence& seq,
                                      const QaPair& qa);

// Mean binary cross-entropy over labeled positions; positives smoothed to
// smooth_pos. Empty label set gives 0. probs[k] aligns with labels.entries[k].
double saliency_loss(const std::vector<double>& probs,
                     const SaliencyLabels& labels, double smooth_pos = 0.9);

// Mean token-level cross-entropy; logits row t scores target_ids[t].
double nll_loss(const Mat& logits, const std::vector<int>& target_ids);

inline double multitask_loss(double l_nll, double l_sal, double gamma_sal) {
  return l_nll + gamma_sal * l_sal;
}

struct EpochLog {
  int epoch = 0;
  double l_nll = 0, l_sal = 0, l_multi = 0;
  double dev_rouge_l = 0;
};

struct TrainResult {
  std::vector<EpochLog> trace;
  int best_epoch = -1;  // epoch whose checkpoint was selected
};

// Adam over the full parameter set; deterministic given seed (single
// thread, fixed reduction order). The best epoch by validation ROUGE-L is
// restored into params at the end. Throws on non-finite loss, naming the
// batch. One log line per epoch is written to `log` when non-null.
TrainResult train(const std::vector<DocumentRecord>& train_corpus,
                  const std::vector<DocumentRecord>& dev_corpus,
                  const Vocabulary& vocab, ModelParams& params,
                  const ModelConfig& mcfg, const TrainConfig& tcfg,
                  std::ostream* log = nullptr);

}  // namespace layoutmrc
