#pragma once

#include <string>
#include <vector>

namespace layoutmrc::metrics {

struct EvalPair {
  std::string prediction;
  std::vector<std::string> references;  // at least one
};

struct PerExample {
  double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
  double rouge_l = 0, cider = 0, exact_match = 0;
};

struct EvalReport {
  double bleu[4] = {0, 0, 0, 0};  // corpus-level BLEU-1..4
  double rouge_l = 0;
  double cider = 0;
  double exact_match = 0;
  std::size_t num_pairs = 0;
  std::vector<PerExample> per_example;

  // Plain-text table plus one "METRIC <name> <value>" line per metric.
  std::string to_text() const;
};

// Corpus-level BLEU-n: geometric mean of modified n-gram precisions up to n
// times the brevity penalty (closest reference length). 0..100 scale.
double bleu_n(const std::vector<EvalPair>& pairs, int n);

// LCS F-measure with beta^2 = 1.2, max over references, mean over pairs.
double rouge_l(const std::vector<EvalPair>& pairs);

// CIDEr-D: TF-IDF n-gram cosine for n=1..4 with count clipping and a
// Gaussian length penalty (sigma=6), x10; IDF over the corpus references.
double cider(const std::vector<EvalPair>& pairs);

double exact_match(const std::vector<EvalPair>& pairs);

EvalReport evaluate(const std::vector<EvalPair>& pairs);

// One answer per line; throws on line-count mismatch naming both counts.
EvalReport evaluate_files(const std::string& predictions_path,
                          const std::string& references_path);

std::vector<std::string> read_lines(const std::string& path);

}  // namespace layoutmrc::metrics
