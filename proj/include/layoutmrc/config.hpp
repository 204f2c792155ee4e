#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace layoutmrc {

enum class PositionMode { Absolute, RelativeBias };

struct ModelConfig {
  int hidden = 128;
  int n_heads = 4;
  int n_enc_layers = 2;
  int n_dec_layers = 2;
  int ffn_dim = 256;
  int l_max = 512;
  double dropout = 0.1;
  PositionMode position_mode = PositionMode::Absolute;
  int vocab_size = 0;  // set once the vocabulary is built
  int d_app = 64;
  // Disables segment/location/appearance fusion (the text-only baseline).
  bool text_only = false;

  int head_dim() const { return hidden / n_heads; }

  void validate() const {
    if (hidden < 1 || n_heads < 1 || n_enc_layers < 0 || n_dec_layers < 1 ||
        ffn_dim < 1 || l_max < 1 || vocab_size < 1 || d_app < 1) {
      throw std::invalid_argument("model config: all sizes must be positive");
    }
    if (hidden % n_heads != 0) {
      throw std::invalid_argument("model config: hidden must be divisible by n_heads");
    }
    if (dropout < 0 || dropout >= 1) {
      throw std::invalid_argument("model config: dropout must be in [0,1)");
    }
  }
};

struct TrainConfig {
  double gamma_sal = 1.0;
  double lr = 3e-4;  // from-scratch training wants a higher rate than fine-tuning
  int batch_size = 4;
  int max_epochs = 10;
  std::uint64_t seed = 0;
  double label_smooth_pos = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int gen_max_len = 32;  // validation-time generation cap

  void validate() const {
    if (gamma_sal < 0) throw std::invalid_argument("train config: gamma_sal must be >= 0");
    if (lr < 0) throw std::invalid_argument("train config: lr must be >= 0");
    if (batch_size < 1 || max_epochs < 0) {
      throw std::invalid_argument("train config: batch_size/max_epochs invalid");
    }
  }
};

}  // namespace layoutmrc
