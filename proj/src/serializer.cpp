#include "layoutmrc/serializer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

namespace layoutmrc {

namespace {

const std::array<const char*, kNumReserved> kReservedNames = {
    "[PAD]",      "[UNK]",       "[S]",     "[SEP]",  "[BOS]",
    "[EOS]",      "[L_heading]", "[L_subtitle]", "[L_paragraph]",
    "[L_picture]", "[L_caption]", "[L_list]", "[L_data]", "[L_subdata]",
    "[L_other]"};

}  // namespace

Vocabulary::Vocabulary() {
  for (const char* name : kReservedNames) {
    token_to_id_.emplace(name, static_cast<int>(id_to_token_.size()));
    id_to_token_.push_back(name);
  }
}

int Vocabulary::add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  int id = static_cast<int>(id_to_token_.size());
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(token);
  return id;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || id >= static_cast<int>(id_to_token_.size())) {
    throw std::out_of_range("vocab id out of range: " + std::to_string(id));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary: " + path);
  for (const auto& tok : id_to_token_) out << tok << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary: " + path);
  Vocabulary v;
  std::string line;
  std::size_t idx = 0;
  while (std::getline(in, line)) {
    if (idx < static_cast<std::size_t>(kNumReserved)) {
      if (line != kReservedNames[idx]) {
        throw std::runtime_error("vocabulary file has unexpected reserved token at line " +
                                 std::to_string(idx + 1));
      }
    } else {
      v.add(line);
    }
    ++idx;
  }
  return v;
}

std::vector<std::string> split_pieces(const std::string& text) {
  std::vector<std::string> pieces;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      pieces.push_back(current);
      current.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      pieces.emplace_back(1, static_cast<char>(c));
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return pieces;
}

Vocabulary build_vocabulary(const std::vector<DocumentRecord>& corpus,
                            std::size_t max_size) {
  if (max_size <= static_cast<std::size_t>(kNumReserved)) {
    throw std::invalid_argument("vocabulary max_size must exceed the reserved token count");
  }
  std::map<std::string, std::size_t> freq;  // ordered map gives the lexicographic tie-break
  auto count = [&](const std::string& text) {
    for (auto& p : split_pieces(text)) ++freq[p];
  };
  for (const auto& doc : corpus) {
    for (const auto& roi : doc.rois) {
      for (const auto& tok : roi.tokens) count(tok.form);
    }
    for (const auto& qa : doc.qas) {
      count(qa.question);
      count(qa.answer);
    }
  }
  std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(),
                                                           freq.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [tok, n] : entries) {
    if (v.size() >= max_size) break;
    v.add(tok);
  }
  return v;
}

std::vector<TokenPiece> tokenize(const std::string& text,
                                 const Vocabulary& vocab) {
  std::vector<TokenPiece> out;
  for (auto& p : split_pieces(text)) {
    out.push_back({vocab.id_of(p), p});
  }
  return out;
}

std::vector<const Roi*> order_rois(const std::vector<Roi>& rois) {
  std::vector<const Roi*> out;
  out.reserve(rois.size());
  for (const auto& r : rois) out.push_back(&r);
  std::stable_sort(out.begin(), out.end(), [](const Roi* a, const Roi* b) {
    if (a->bbox.y_min != b->bbox.y_min) return a->bbox.y_min < b->bbox.y_min;
    return a->bbox.x_min < b->bbox.x_min;
  });
  return out;
}

std::array<double, 4> normalize_bbox(const BBox& b, double width,
                                     double height) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("image dimensions must be positive");
  }
  return {b.x_min / width, b.y_min / height, b.x_max / width,
          b.y_max / height};
}

InputSequence build_input_sequence(const std::string& question,
                                   const DocumentRecord& doc,
                                   const Vocabulary& vocab,
                                   std::size_t l_max) {
  InputSequence seq;
  auto push_plain = [&](int id, const std::string& piece, Origin origin) {
    InputPosition p;
    p.token_id = id;
    p.piece = piece;
    p.origin = origin;
    seq.positions.push_back(std::move(p));
  };

  push_plain(kS, "[S]", Origin::Special);
  for (auto& tp : tokenize(question, vocab)) {
    push_plain(tp.id, tp.piece, Origin::Question);
  }
  push_plain(kSep, "[SEP]", Origin::Special);
  if (seq.size() > l_max) {
    throw std::runtime_error("question does not fit within l_max=" +
                             std::to_string(l_max));
  }

  auto ordered = order_rois(doc.rois);
  for (std::size_t i = 0; i < ordered.size() && seq.size() < l_max; ++i) {
    const Roi& roi = *ordered[i];
    const std::vector<double>* app =
        roi.appearance ? &*roi.appearance : nullptr;

    InputPosition label;
    label.token_id = label_token_id(roi.cls);
    label.piece = vocab.token_of(label.token_id);
    label.origin = Origin::RoiLabel;
    label.seg_class = roi.cls;
    label.loc = normalize_bbox(roi.bbox, doc.width, doc.height);
    label.appearance = app;
    label.roi_index = static_cast<int>(i);
    label.roi_id = roi.id;
    seq.positions.push_back(std::move(label));

    for (std::size_t j = 0; j < roi.tokens.size(); ++j) {
      const OcrToken& word = roi.tokens[j];
      auto loc = normalize_bbox(word.bbox, doc.width, doc.height);
      for (auto& tp : tokenize(word.form, vocab)) {
        if (seq.size() >= l_max) return seq;
        InputPosition p;
        p.token_id = tp.id;
        p.piece = tp.piece;
        p.origin = Origin::Ocr;
        p.seg_class = roi.cls;
        p.loc = loc;  // every piece carries the whole word's bbox
        p.appearance = app;
        p.roi_index = static_cast<int>(i);
        p.roi_id = roi.id;
        p.token_index = static_cast<int>(j);
        seq.positions.push_back(std::move(p));
      }
    }
  }
  return seq;
}

}  // namespace layoutmrc
