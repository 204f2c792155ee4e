#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace layoutmrc {

struct BBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  bool contains(const BBox& inner) const {
    return inner.x_min >= x_min && inner.y_min >= y_min &&
           inner.x_max <= x_max && inner.y_max <= y_max;
  }
};

// The nine ROI semantic classes. Closed set; order fixes the segment
// embedding row and the [L_*] special-token ids.
enum class RoiClass {
  Heading = 0,
  Subtitle,
  Paragraph,
  Picture,
  Caption,
  List,
  Data,
  SubData,
  Other,
};

inline constexpr int kNumRoiClasses = 9;

const char* roi_class_name(RoiClass c);
std::optional<RoiClass> roi_class_from_name(const std::string& name);

struct OcrToken {
  std::string form;
  BBox bbox;
};

struct Roi {
  int id = 0;
  BBox bbox;
  RoiClass cls = RoiClass::Other;
  std::vector<OcrToken> tokens;
  std::optional<std::vector<double>> appearance;
};

struct QaPair {
  std::string question;
  std::string answer;
  std::vector<int> relevant_roi_ids;
};

struct DocumentRecord {
  double width = 0, height = 0;
  std::vector<Roi> rois;
  std::vector<QaPair> qas;

  const Roi* find_roi(int id) const;
};

struct CorpusStats {
  std::size_t num_images = 0;
  std::size_t num_questions = 0;
  std::size_t num_unique_questions = 0;
  double pct_unique_answers = 0;
  double avg_len_questions = 0;
  double avg_len_documents = 0;
  double avg_len_answers = 0;
};

// Loads a line-delimited corpus (one JSON document record per line).
// Throws std::runtime_error with the line number on parse errors and the
// field path on invariant violations. Token bboxes overhanging their ROI
// produce a warning on `warnings` (when non-null), not an error.
std::vector<DocumentRecord> load_corpus(const std::string& path,
                                        std::vector<std::string>* warnings = nullptr);

// Parses a single record line. line_no is used in error messages.
DocumentRecord parse_record(const std::string& line, std::size_t line_no,
                            std::vector<std::string>* warnings = nullptr);

// Serializes one record back to its single-line JSON form.
std::string serialize_record(const DocumentRecord& doc);

CorpusStats compute_stats(const std::vector<DocumentRecord>& corpus);

// Lowercases and collapses runs of whitespace to single spaces; used for
// uniqueness counting and exact-match scoring.
std::string normalize_text(const std::string& text);

}  // namespace layoutmrc
