#include "layoutmrc/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace layoutmrc {

using nlohmann::json;

namespace {

const std::array<const char*, kNumRoiClasses> kClassNames = {
    "heading", "subtitle", "paragraph", "picture", "caption",
    "list",    "data",     "subdata",   "other"};

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("line " + std::to_string(line_no) + ": " + what);
}

BBox parse_bbox(const json& j, std::size_t line_no, const std::string& path) {
  if (!j.is_array() || j.size() != 4) {
    fail(line_no, path + ": expected [x_min,y_min,x_max,y_max]");
  }
  BBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
         j[3].get<double>()};
  if (b.x_min < 0 || b.y_min < 0) {
    fail(line_no, path + ": negative coordinate");
  }
  if (!(b.x_min < b.x_max)) {
    fail(line_no, path + ": x_min must be < x_max");
  }
  if (!(b.y_min < b.y_max)) {
    fail(line_no, path + ": y_min must be < y_max");
  }
  return b;
}

std::size_t whitespace_token_count(const std::string& text) {
  std::istringstream in(text);
  std::string word;
  std::size_t n = 0;
  while (in >> word) ++n;
  return n;
}

}  // namespace

const char* roi_class_name(RoiClass c) {
  return kClassNames[static_cast<int>(c)];
}

std::optional<RoiClass> roi_class_from_name(const std::string& name) {
  for (int i = 0; i < kNumRoiClasses; ++i) {
    if (name == kClassNames[i]) return static_cast<RoiClass>(i);
  }
  return std::nullopt;
}

const Roi* DocumentRecord::find_roi(int id) const {
  for (const auto& r : rois) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

DocumentRecord parse_record(const std::string& line, std::size_t line_no,
                            std::vector<std::string>* warnings) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    fail(line_no, std::string("JSON parse error: ") + e.what());
  }

  DocumentRecord doc;
  doc.width = j.at("width").get<double>();
  doc.height = j.at("height").get<double>();
  if (doc.width <= 0 || doc.height <= 0) {
    fail(line_no, "width/height must be positive");
  }

  std::set<int> seen_ids;
  std::size_t ri = 0;
  for (const auto& jr : j.value("rois", json::array())) {
    const std::string path = "rois[" + std::to_string(ri) + "]";
    Roi roi;
    roi.id = jr.at("id").get<int>();
    if (!seen_ids.insert(roi.id).second) {
      fail(line_no, path + ".id: duplicate ROI id " + std::to_string(roi.id));
    }
    const std::string cls = jr.at("class").get<std::string>();
    auto parsed = roi_class_from_name(cls);
    if (!parsed) fail(line_no, path + ".class: unknown class \"" + cls + "\"");
    roi.cls = *parsed;
    roi.bbox = parse_bbox(jr.at("bbox"), line_no, path + ".bbox");
    if (roi.bbox.x_max > doc.width || roi.bbox.y_max > doc.height) {
      fail(line_no, path + ".bbox: outside image bounds");
    }
    std::size_t ti = 0;
    for (const auto& jt : jr.value("tokens", json::array())) {
      const std::string tpath = path + ".tokens[" + std::to_string(ti) + "]";
      OcrToken tok;
      tok.form = jt.at("form").get<std::string>();
      if (tok.form.empty()) fail(line_no, tpath + ".form: empty");
      tok.bbox = parse_bbox(jt.at("bbox"), line_no, tpath + ".bbox");
      if (warnings && !roi.bbox.contains(tok.bbox)) {
        warnings->push_back("line " + std::to_string(line_no) + ": " + tpath +
                            ".bbox overhangs its ROI");
      }
      roi.tokens.push_back(std::move(tok));
      ++ti;
    }
    if (jr.contains("appearance") && !jr["appearance"].is_null()) {
      roi.appearance = jr["appearance"].get<std::vector<double>>();
    }
    doc.rois.push_back(std::move(roi));
    ++ri;
  }

  std::size_t qi = 0;
  for (const auto& jq : j.value("qas", json::array())) {
    const std::string path = "qas[" + std::to_string(qi) + "]";
    QaPair qa;
    qa.question = jq.at("question").get<std::string>();
    qa.answer = jq.at("answer").get<std::string>();
    if (qa.question.empty()) fail(line_no, path + ".question: empty");
    if (qa.answer.empty()) fail(line_no, path + ".answer: empty");
    for (const auto& jid : jq.value("relevant_rois", json::array())) {
      int id = jid.get<int>();
      if (!seen_ids.count(id)) {
        fail(line_no, path + ".relevant_rois: unknown ROI id " +
                          std::to_string(id));
      }
      qa.relevant_roi_ids.push_back(id);
    }
    doc.qas.push_back(std::move(qa));
    ++qi;
  }
  return doc;
}

std::vector<DocumentRecord> load_corpus(const std::string& path,
                                        std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::vector<DocumentRecord> corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    corpus.push_back(parse_record(line, line_no, warnings));
  }
  return corpus;
}

std::string serialize_record(const DocumentRecord& doc) {
  json j;
  j["width"] = doc.width;
  j["height"] = doc.height;
  j["rois"] = json::array();
  for (const auto& roi : doc.rois) {
    json jr;
    jr["id"] = roi.id;
    jr["class"] = roi_class_name(roi.cls);
    jr["bbox"] = {roi.bbox.x_min, roi.bbox.y_min, roi.bbox.x_max,
                  roi.bbox.y_max};
    jr["tokens"] = json::array();
    for (const auto& tok : roi.tokens) {
      jr["tokens"].push_back({{"form", tok.form},
                              {"bbox",
                               {tok.bbox.x_min, tok.bbox.y_min, tok.bbox.x_max,
                                tok.bbox.y_max}}});
    }
    if (roi.appearance) {
      jr["appearance"] = *roi.appearance;
    } else {
      jr["appearance"] = nullptr;
    }
    j["rois"].push_back(std::move(jr));
  }
  j["qas"] = json::array();
  for (const auto& qa : doc.qas) {
    j["qas"].push_back({{"question", qa.question},
                        {"answer", qa.answer},
                        {"relevant_rois", qa.relevant_roi_ids}});
  }
  return j.dump();
}

std::string normalize_text(const std::string& text) {
  std::string out;
  bool in_space = true;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!in_space && !out.empty()) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(static_cast<char>(std::tolower(c)));
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

CorpusStats compute_stats(const std::vector<DocumentRecord>& corpus) {
  CorpusStats s;
  s.num_images = corpus.size();
  std::set<std::string> unique_q, unique_a;
  std::size_t q_len_sum = 0, a_len_sum = 0, d_len_sum = 0, num_answers = 0;
  for (const auto& doc : corpus) {
    std::size_t doc_words = 0;
    for (const auto& roi : doc.rois) doc_words += roi.tokens.size();
    d_len_sum += doc_words;
    for (const auto& qa : doc.qas) {
      ++s.num_questions;
      ++num_answers;
      unique_q.insert(normalize_text(qa.question));
      unique_a.insert(normalize_text(qa.answer));
      q_len_sum += whitespace_token_count(qa.question);
      a_len_sum += whitespace_token_count(qa.answer);
    }
  }
  s.num_unique_questions = unique_q.size();
  if (num_answers > 0) {
    s.pct_unique_answers = 100.0 * static_cast<double>(unique_a.size()) /
                           static_cast<double>(num_answers);
    s.avg_len_questions =
        static_cast<double>(q_len_sum) / static_cast<double>(s.num_questions);
    s.avg_len_answers =
        static_cast<double>(a_len_sum) / static_cast<double>(num_answers);
  }
  if (!corpus.empty()) {
    s.avg_len_documents =
        static_cast<double>(d_len_sum) / static_cast<double>(corpus.size());
  }
  return s;
}

}  // namespace layoutmrc
