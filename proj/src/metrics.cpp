#include "layoutmrc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "layoutmrc/corpus.hpp"
#include "layoutmrc/serializer.hpp"

namespace layoutmrc::metrics {

namespace {

constexpr int kMaxOrder = 4;
constexpr double kRougeBetaSq = 1.2;
constexpr double kCiderSigma = 6.0;

using Counts = std::map<std::string, double>;

std::vector<std::string> pieces(const std::string& text) {
  return split_pieces(text);
}

// n-gram counts keyed by the joined pieces; \x1f never occurs in pieces.
Counts ngram_counts(const std::vector<std::string>& toks, int n) {
  Counts c;
  if (static_cast<int>(toks.size()) < n) return c;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) {
    std::string key = toks[i];
    for (int k = 1; k < n; ++k) {
      key.push_back('\x1f');
      key += toks[i + static_cast<std::size_t>(k)];
    }
    c[key] += 1.0;
  }
  return c;
}

std::size_t lcs_length(const std::vector<std::string>& a,
                       const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = (a[i - 1] == b[j - 1]) ? prev[j - 1] + 1
                                      : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

void require_nonempty(const std::vector<EvalPair>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("empty evaluation corpus");
  for (const auto& p : pairs) {
    if (p.references.empty()) {
      throw std::invalid_argument("evaluation pair without references");
    }
  }
}

double bleu_on(const std::vector<EvalPair>& pairs, int n) {
  std::vector<double> clipped(static_cast<std::size_t>(n), 0.0);
  std::vector<double> total(static_cast<std::size_t>(n), 0.0);
  double cand_len = 0, ref_len = 0;
  for (const auto& pair : pairs) {
    auto cand = pieces(pair.prediction);
    cand_len += static_cast<double>(cand.size());
    // closest reference length, ties toward the shorter
    std::size_t closest = pieces(pair.references[0]).size();
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : pair.references) refs.push_back(pieces(r));
    for (const auto& r : refs) {
      auto diff = [&](std::size_t len) {
        return std::llabs(static_cast<long long>(len) -
                          static_cast<long long>(cand.size()));
      };
      if (diff(r.size()) < diff(closest) ||
          (diff(r.size()) == diff(closest) && r.size() < closest)) {
        closest = r.size();
      }
    }
    ref_len += static_cast<double>(closest);
    for (int k = 1; k <= n; ++k) {
      Counts cc = ngram_counts(cand, k);
      Counts max_ref;
      for (const auto& r : refs) {
        for (const auto& [g, cnt] : ngram_counts(r, k)) {
          max_ref[g] = std::max(max_ref[g], cnt);
        }
      }
      for (const auto& [g, cnt] : cc) {
        total[static_cast<std::size_t>(k - 1)] += cnt;
        auto it = max_ref.find(g);
        if (it != max_ref.end()) {
          clipped[static_cast<std::size_t>(k - 1)] += std::min(cnt, it->second);
        }
      }
    }
  }
  double log_prec = 0;
  for (int k = 0; k < n; ++k) {
    if (total[static_cast<std::size_t>(k)] == 0 ||
        clipped[static_cast<std::size_t>(k)] == 0) {
      return 0.0;
    }
    log_prec += std::log(clipped[static_cast<std::size_t>(k)] /
                         total[static_cast<std::size_t>(k)]) /
                static_cast<double>(n);
  }
  double bp = (cand_len >= ref_len || cand_len == 0)
                  ? 1.0
                  : std::exp(1.0 - ref_len / cand_len);
  if (cand_len == 0) return 0.0;
  return 100.0 * bp * std::exp(log_prec);
}

double rouge_on(const EvalPair& pair) {
  auto cand = pieces(pair.prediction);
  double best = 0;
  for (const auto& ref_text : pair.references) {
    auto ref = pieces(ref_text);
    if (cand.empty() || ref.empty()) continue;
    double lcs = static_cast<double>(lcs_length(cand, ref));
    if (lcs == 0) continue;
    double p = lcs / static_cast<double>(cand.size());
    double r = lcs / static_cast<double>(ref.size());
    double f = (1.0 + kRougeBetaSq) * p * r / (r + kRougeBetaSq * p);
    best = std::max(best, f);
  }
  return 100.0 * best;
}

struct CiderVec {
  std::array<Counts, kMaxOrder> vec;   // tf-idf weighted counts per order
  std::array<double, kMaxOrder> norm;  // L2 norms per order
  double length = 0;                   // unigram count
};

// default_idf applies to n-grams absent from the reference corpus (df
// treated as 1, i.e. full weight log N).
CiderVec cider_vec(const std::vector<std::string>& toks,
                   const std::map<std::string, double>& idf,
                   double default_idf) {
  CiderVec v;
  v.length = static_cast<double>(toks.size());
  for (int n = 0; n < kMaxOrder; ++n) {
    double sq = 0;
    for (const auto& [g, cnt] : ngram_counts(toks, n + 1)) {
      auto it = idf.find(g);
      double w = cnt * (it == idf.end() ? default_idf : it->second);
      v.vec[static_cast<std::size_t>(n)][g] = w;
      sq += w * w;
    }
    v.norm[static_cast<std::size_t>(n)] = std::sqrt(sq);
  }
  return v;
}

}  // namespace

double bleu_n(const std::vector<EvalPair>& pairs, int n) {
  if (n < 1 || n > kMaxOrder) throw std::invalid_argument("BLEU order must be 1..4");
  require_nonempty(pairs);
  return bleu_on(pairs, n);
}

double rouge_l(const std::vector<EvalPair>& pairs) {
  require_nonempty(pairs);
  double sum = 0;
  for (const auto& p : pairs) sum += rouge_on(p);
  return sum / static_cast<double>(pairs.size());
}

namespace {

// Per-pair CIDEr-D scores with IDF taken over the whole corpus's references.
std::vector<double> cider_per_pair(const std::vector<EvalPair>& pairs) {
  // document frequency: one count per pair whose reference set contains the n-gram
  std::map<std::string, double> df;
  for (const auto& pair : pairs) {
    std::map<std::string, bool> seen;
    for (const auto& r : pair.references) {
      auto toks = pieces(r);
      for (int n = 1; n <= kMaxOrder; ++n) {
        for (const auto& [g, cnt] : ngram_counts(toks, n)) seen[g] = true;
      }
    }
    for (const auto& [g, unused] : seen) df[g] += 1.0;
  }
  const double log_n = std::log(static_cast<double>(pairs.size()));
  std::map<std::string, double> idf;
  for (const auto& [g, d] : df) idf[g] = log_n - std::log(std::max(1.0, d));

  std::vector<double> scores;
  scores.reserve(pairs.size());
  for (const auto& pair : pairs) {
    CiderVec hyp = cider_vec(pieces(pair.prediction), idf, log_n);
    std::array<double, kMaxOrder> acc{};
    for (const auto& r : pair.references) {
      CiderVec ref = cider_vec(pieces(r), idf, log_n);
      double delta = hyp.length - ref.length;
      double len_pen = std::exp(-(delta * delta) / (2.0 * kCiderSigma * kCiderSigma));
      for (int n = 0; n < kMaxOrder; ++n) {
        double dot = 0;
        for (const auto& [g, w] : hyp.vec[static_cast<std::size_t>(n)]) {
          auto it = ref.vec[static_cast<std::size_t>(n)].find(g);
          if (it != ref.vec[static_cast<std::size_t>(n)].end()) {
            dot += std::min(w, it->second) * it->second;  // candidate count clipping
          }
        }
        double denom = hyp.norm[static_cast<std::size_t>(n)] *
                       ref.norm[static_cast<std::size_t>(n)];
        acc[static_cast<std::size_t>(n)] += denom > 0 ? len_pen * dot / denom : 0.0;
      }
    }
    double pair_score = 0;
    for (int n = 0; n < kMaxOrder; ++n) {
      pair_score += acc[static_cast<std::size_t>(n)] /
                    static_cast<double>(pair.references.size());
    }
    scores.push_back(10.0 * pair_score / static_cast<double>(kMaxOrder));
  }
  return scores;
}

}  // namespace

double cider(const std::vector<EvalPair>& pairs) {
  require_nonempty(pairs);
  auto scores = cider_per_pair(pairs);
  double sum = 0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

double exact_match(const std::vector<EvalPair>& pairs) {
  require_nonempty(pairs);
  double hits = 0;
  for (const auto& p : pairs) {
    std::string pred = normalize_text(p.prediction);
    for (const auto& r : p.references) {
      if (pred == normalize_text(r)) {
        hits += 1;
        break;
      }
    }
  }
  return 100.0 * hits / static_cast<double>(pairs.size());
}

EvalReport evaluate(const std::vector<EvalPair>& pairs) {
  require_nonempty(pairs);
  EvalReport rep;
  rep.num_pairs = pairs.size();
  for (int n = 1; n <= kMaxOrder; ++n) {
    rep.bleu[n - 1] = bleu_on(pairs, n);
  }
  rep.rouge_l = rouge_l(pairs);
  rep.cider = cider(pairs);
  rep.exact_match = exact_match(pairs);
  rep.per_example.resize(pairs.size());
  auto cider_scores = cider_per_pair(pairs);  // IDF shared with the corpus score
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::vector<EvalPair> one = {pairs[i]};
    PerExample& pe = rep.per_example[i];
    pe.bleu1 = bleu_on(one, 1);
    pe.bleu2 = bleu_on(one, 2);
    pe.bleu3 = bleu_on(one, 3);
    pe.bleu4 = bleu_on(one, 4);
    pe.rouge_l = rouge_on(pairs[i]);
    pe.cider = cider_scores[i];
    pe.exact_match = exact_match(one);
  }
  return rep;
}

EvalReport evaluate_files(const std::string& predictions_path,
                          const std::string& references_path) {
  auto preds = read_lines(predictions_path);
  auto refs = read_lines(references_path);
  if (preds.size() != refs.size()) {
    throw std::runtime_error("line count mismatch: predictions has " +
                             std::to_string(preds.size()) +
                             " lines, references has " +
                             std::to_string(refs.size()));
  }
  std::vector<EvalPair> pairs;
  pairs.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    pairs.push_back({preds[i], {refs[i]}});
  }
  return evaluate(pairs);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  out << "evaluation over " << num_pairs << " pairs\n";
  out << "  BLEU-1      " << bleu[0] << "\n";
  out << "  BLEU-2      " << bleu[1] << "\n";
  out << "  BLEU-3      " << bleu[2] << "\n";
  out << "  BLEU-4      " << bleu[3] << "\n";
  out << "  ROUGE-L     " << rouge_l << "\n";
  out << "  CIDEr       " << cider << "\n";
  out << "  ExactMatch  " << exact_match << "\n";
  out << "  METEOR      (not computed)\n";
  out << "  BERTScore   (not computed)\n";
  out << "METRIC bleu1 " << bleu[0] << "\n";
  out << "METRIC bleu2 " << bleu[1] << "\n";
  out << "METRIC bleu3 " << bleu[2] << "\n";
  out << "METRIC bleu4 " << bleu[3] << "\n";
  out << "METRIC rouge_l " << rouge_l << "\n";
  out << "METRIC cider " << cider << "\n";
  out << "METRIC exact_match " << exact_match << "\n";
  return out.str();
}

}  // namespace layoutmrc::metrics
