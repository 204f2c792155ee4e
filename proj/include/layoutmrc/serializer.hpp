#pragma once

#include <array>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "layoutmrc/corpus.hpp"

namespace layoutmrc {

// Reserved vocabulary ids. The nine ROI-label tokens follow [EOS] in
// RoiClass order.
enum SpecialToken : int {
  kPad = 0,
  kUnk = 1,
  kS = 2,
  kSep = 3,
  kBos = 4,
  kEos = 5,
  kFirstLabel = 6,  // [L_heading] .. [L_other] occupy 6..14
};

inline constexpr int kNumReserved = kFirstLabel + kNumRoiClasses;

inline int label_token_id(RoiClass c) {
  return kFirstLabel + static_cast<int>(c);
}

class Vocabulary {
 public:
  Vocabulary();

  int add(const std::string& token);  // returns existing id if present
  int id_of(const std::string& token) const;  // kUnk when absent
  const std::string& token_of(int id) const;
  std::size_t size() const { return id_to_token_.size(); }

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// Lowercases and splits on whitespace and punctuation boundaries;
// punctuation characters become single-character pieces.
std::vector<std::string> split_pieces(const std::string& text);

struct TokenPiece {
  int id;
  std::string piece;
};

// Most-frequent pieces kept up to max_size (reserved tokens included in the
// budget); frequency ties broken lexicographically.
Vocabulary build_vocabulary(const std::vector<DocumentRecord>& corpus,
                            std::size_t max_size);

std::vector<TokenPiece> tokenize(const std::string& text,
                                 const Vocabulary& vocab);

enum class Origin { Special, Question, RoiLabel, Ocr };

struct InputPosition {
  int token_id = kPad;
  std::string piece;
  Origin origin = Origin::Special;
  std::optional<RoiClass> seg_class;
  std::optional<std::array<double, 4>> loc;
  const std::vector<double>* appearance = nullptr;  // owned by the document
  int roi_index = -1;   // position of the ROI in reading order
  int roi_id = -1;      // the ROI's id in the record
  int token_index = -1; // OCR word index within the ROI
};

struct InputSequence {
  std::vector<InputPosition> positions;
  std::size_t size() const { return positions.size(); }
};

// Reading order: top-to-bottom then left-to-right by bbox corner; stable.
std::vector<const Roi*> order_rois(const std::vector<Roi>& rois);

std::array<double, 4> normalize_bbox(const BBox& b, double width,
                                     double height);

// Assembles [S] question [SEP] [L_c1] w_11 ... per ordered ROI, truncated
// at l_max. Sub-word pieces of one OCR word share the whole word's bbox.
// Throws if the [S] question [SEP] portion alone exceeds l_max.
InputSequence build_input_sequence(const std::string& question,
                                   const DocumentRecord& doc,
                                   const Vocabulary& vocab, std::size_t l_max);

}  // namespace layoutmrc
