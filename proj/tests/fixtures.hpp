#pragma once

#include <random>
#include <string>
#include <vector>

#include "layoutmrc/corpus.hpp"
#include "layoutmrc/serializer.hpp"

namespace layoutmrc::testing {

inline BBox box(double x0, double y0, double x1, double y1) {
  return BBox{x0, y0, x1, y1};
}

inline Roi make_roi(int id, RoiClass cls, BBox b,
                    const std::vector<std::pair<std::string, BBox>>& words,
                    std::optional<std::vector<double>> app = std::nullopt) {
  Roi r;
  r.id = id;
  r.cls = cls;
  r.bbox = b;
  for (const auto& [form, wb] : words) r.tokens.push_back({form, wb});
  r.appearance = std::move(app);
  return r;
}

// One paragraph ROI with "Figure 1" plus a picture ROI, one QA.
inline DocumentRecord fixture_doc() {
  DocumentRecord doc;
  doc.width = 100;
  doc.height = 200;
  doc.rois.push_back(make_roi(
      0, RoiClass::Paragraph, box(10, 20, 90, 60),
      {{"Figure", box(12, 22, 40, 30)}, {"1", box(42, 22, 50, 30)}}));
  doc.rois.push_back(make_roi(1, RoiClass::Picture, box(10, 80, 90, 180), {},
                              std::vector<double>{0.5, -1.0, 2.0, 0.0}));
  QaPair qa;
  qa.question = "who?";
  qa.answer = "figure 1";
  qa.relevant_roi_ids = {0};
  doc.qas.push_back(qa);
  return doc;
}

// Small deterministic synthetic corpus: each document has one relevant ROI
// whose words appear in the answer and one distractor ROI.
inline std::vector<DocumentRecord> synthetic_corpus(int n_docs,
                                                    unsigned seed = 7) {
  static const std::vector<std::string> words = {
      "alpha", "bravo",  "charlie", "delta", "echo",  "foxtrot",
      "golf",  "hotel",  "india",   "juliet", "kilo",  "lima",
      "mike",  "november", "oscar", "papa",  "quebec", "romeo"};
  std::mt19937 rng(seed);
  std::vector<DocumentRecord> corpus;
  for (int d = 0; d < n_docs; ++d) {
    DocumentRecord doc;
    doc.width = 400;
    doc.height = 400;
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    std::string w1 = words[pick(rng)], w2 = words[pick(rng)], w3 = words[pick(rng)];
    doc.rois.push_back(make_roi(0, RoiClass::Heading, box(10, 10, 390, 60),
                                {{w1, box(12, 12, 100, 40)},
                                 {w2, box(110, 12, 200, 40)}}));
    doc.rois.push_back(make_roi(1, RoiClass::Paragraph, box(10, 80, 390, 200),
                                {{w3, box(12, 82, 100, 110)},
                                 {"zulu", box(110, 82, 200, 110)}}));
    QaPair qa;
    qa.question = "what is item " + std::to_string(d) + " ?";
    qa.answer = w1 + " " + w2;
    qa.relevant_roi_ids = {0};
    doc.qas.push_back(qa);
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

}  // namespace layoutmrc::testing
