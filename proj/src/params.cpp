#include "layoutmrc/params.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "layoutmrc/corpus.hpp"

namespace layoutmrc {

Mat& ModelParams::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw std::out_of_range("unknown parameter tensor: " + name);
  }
  return it->second;
}

const Mat& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw std::out_of_range("unknown parameter tensor: " + name);
  }
  return it->second;
}

namespace {

struct Init {
  std::mt19937_64 rng;
  std::normal_distribution<double> dist{0.0, 0.02};

  Mat normal(Eigen::Index r, Eigen::Index c) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = dist(rng);
    }
    return m;
  }
};

void add_attention(ModelParams& p, Init& init, const std::string& prefix,
                   int h) {
  for (const char* w : {"wq", "wk", "wv", "wo"}) {
    p.tensors[prefix + "." + w] = init.normal(h, h);
  }
  for (const char* b : {"bq", "bk", "bv", "bo"}) {
    p.tensors[prefix + "." + b] = Mat::Zero(1, h);
  }
}

void add_layer_norm(ModelParams& p, const std::string& prefix, int h) {
  p.tensors[prefix + ".g"] = Mat::Ones(1, h);
  p.tensors[prefix + ".b"] = Mat::Zero(1, h);
}

void add_ffn(ModelParams& p, Init& init, const std::string& prefix, int h,
             int f) {
  p.tensors[prefix + ".w1"] = init.normal(h, f);
  p.tensors[prefix + ".b1"] = Mat::Zero(1, f);
  p.tensors[prefix + ".w2"] = init.normal(f, h);
  p.tensors[prefix + ".b2"] = Mat::Zero(1, h);
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams p;
  Init init{std::mt19937_64(seed)};

  p.tensors["emb.token"] = init.normal(cfg.vocab_size, cfg.hidden);
  p.tensors["emb.pos"] = init.normal(cfg.l_max, cfg.hidden);
  p.tensors["emb.seg"] = init.normal(kNumRoiClasses, cfg.hidden);
  p.tensors["emb.loc.w"] = init.normal(4, cfg.hidden);
  p.tensors["emb.loc.b"] = Mat::Zero(1, cfg.hidden);
  p.tensors["emb.app.w"] = init.normal(cfg.d_app, cfg.hidden);
  p.tensors["emb.app.b"] = Mat::Zero(1, cfg.hidden);
  add_layer_norm(p, "emb.ln", cfg.hidden);

  for (int l = 0; l < cfg.n_enc_layers; ++l) {
    std::string base = "enc." + std::to_string(l);
    add_attention(p, init, base + ".attn", cfg.hidden);
    add_layer_norm(p, base + ".ln1", cfg.hidden);
    add_ffn(p, init, base + ".ffn", cfg.hidden, cfg.ffn_dim);
    add_layer_norm(p, base + ".ln2", cfg.hidden);
  }
  for (int l = 0; l < cfg.n_dec_layers; ++l) {
    std::string base = "dec." + std::to_string(l);
    add_attention(p, init, base + ".self", cfg.hidden);
    add_layer_norm(p, base + ".ln1", cfg.hidden);
    add_attention(p, init, base + ".cross", cfg.hidden);
    add_layer_norm(p, base + ".ln2", cfg.hidden);
    add_ffn(p, init, base + ".ffn", cfg.hidden, cfg.ffn_dim);
    add_layer_norm(p, base + ".ln3", cfg.hidden);
  }

  p.tensors["out.w"] = init.normal(cfg.vocab_size, cfg.hidden);
  p.tensors["sal.w"] = init.normal(cfg.hidden, 1);
  p.tensors["sal.b"] = Mat::Zero(1, 1);

  if (cfg.position_mode == PositionMode::RelativeBias) {
    p.tensors["relbias.enc"] = Mat::Zero(cfg.n_heads, 2 * kMaxRelDistance + 1);
    p.tensors["relbias.dec"] = Mat::Zero(cfg.n_heads, 2 * kMaxRelDistance + 1);
  }
  return p;
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << "layoutmrc-checkpoint v1\n";
  for (const auto& [name, m] : params.tensors) {
    out << "tensor " << name << " " << m.rows() << " " << m.cols() << "\n";
  }
  out << "data\n";
  for (const auto& [name, m] : params.tensors) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        float f = static_cast<float>(m(i, j));
        out.write(reinterpret_cast<const char*>(&f), sizeof(f));
      }
    }
  }
  if (!out) throw std::runtime_error("write failure on checkpoint: " + path);
}

void load_checkpoint(const std::string& path, ModelParams& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "layoutmrc-checkpoint v1") {
    throw std::runtime_error("not a layoutmrc checkpoint: " + path);
  }
  std::vector<std::tuple<std::string, Eigen::Index, Eigen::Index>> header;
  while (std::getline(in, line)) {
    if (line == "data") break;
    std::istringstream ls(line);
    std::string kw, name;
    Eigen::Index rows, cols;
    if (!(ls >> kw >> name >> rows >> cols) || kw != "tensor") {
      throw std::runtime_error("malformed checkpoint header line: " + line);
    }
    header.emplace_back(name, rows, cols);
  }
  if (header.size() != params.tensors.size()) {
    throw std::runtime_error(
        "checkpoint tensor count " + std::to_string(header.size()) +
        " does not match model (" + std::to_string(params.tensors.size()) +
        " tensors); check position_mode and layer counts");
  }
  for (const auto& [name, rows, cols] : header) {
    if (!params.has(name)) {
      throw std::runtime_error("checkpoint tensor not in model: " + name);
    }
    Mat& m = params.at(name);
    if (m.rows() != rows || m.cols() != cols) {
      throw std::runtime_error(
          "shape mismatch for tensor " + name + ": checkpoint " +
          std::to_string(rows) + "x" + std::to_string(cols) + ", model " +
          std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        float f;
        in.read(reinterpret_cast<char*>(&f), sizeof(f));
        m(i, j) = static_cast<double>(f);
      }
    }
  }
  if (!in) throw std::runtime_error("truncated checkpoint data: " + path);
}

}  // namespace layoutmrc
