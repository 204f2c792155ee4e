#pragma once

#include <string>
#include <vector>

#include "layoutmrc/embedder.hpp"

namespace layoutmrc {

struct EncoderOutput {
  Mat hidden;               // length x H, last-layer states
  std::vector<bool> mask;   // validity per position
};

struct SaliencyEntry {
  int pos = -1;         // index into the input sequence
  int roi_index = -1;   // reading-order ROI index i
  int token_index = -1; // OCR word index j within the ROI
  double prob = 0;      // P_{i,j}
};

enum class DecodeMode { Greedy, Beam };

// Graph builders (used by both the forward ops below and the trainer).
ag::Node* encode_graph(GraphContext& ctx, ag::Node* x,
                       const std::vector<bool>& mask);
// dec_emb: T x H decoder embedding; enc may have zero rows (pure LM).
ag::Node* decode_graph(GraphContext& ctx, ag::Node* dec_emb, ag::Node* enc,
                       const std::vector<bool>& enc_mask);
// Logits sigma^-1(P_{i,j}) for the given sequence positions.
ag::Node* saliency_logits_graph(GraphContext& ctx, ag::Node* enc_hidden,
                                const std::vector<int>& positions);

// Positions of origin=ocr in the sequence, in order.
std::vector<int> ocr_positions(const InputSequence& seq);

// Forward-only ops.
EncoderOutput encode(const EmbeddedSequence& seq, const ModelParams& params,
                     const ModelConfig& cfg);
std::vector<SaliencyEntry> saliency_scores(const EncoderOutput& enc,
                                           const InputSequence& seq,
                                           const ModelParams& params,
                                           const ModelConfig& cfg);
// Teacher-forced decoder logits; target_ids must begin with [BOS]. Row t
// holds the distribution over token t+1.
Mat decode_train(const std::vector<int>& target_ids, const EncoderOutput& enc,
                 const ModelParams& params, const ModelConfig& cfg);

// Greedy or beam generation from [BOS]; stops at [EOS] or max_len generated
// tokens. Beam hypotheses are ranked by log-probability divided by generated
// length; greedy ties break toward the lowest token id.
std::string generate(const std::string& question, const DocumentRecord& doc,
                     const ModelParams& params, const ModelConfig& cfg,
                     const Vocabulary& vocab, DecodeMode mode = DecodeMode::Greedy,
                     int beam_size = 4, int max_len = 32);

// As generate(), but returns the raw generated token ids (without [BOS]).
std::vector<int> generate_ids(const InputSequence& input,
                              const ModelParams& params,
                              const ModelConfig& cfg, DecodeMode mode,
                              int beam_size, int max_len);

std::string detokenize(const std::vector<int>& ids, const Vocabulary& vocab);

}  // namespace layoutmrc
