#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "msqg/adam.hpp"
#include "msqg/tensor.hpp"
#include "msqg/text.hpp"

namespace msqg::s2s {

using nn::Tensor;

struct Seq2SeqConfig {
    int vocab_size = 0;
    int embed_dim = 128;
    int enc_hidden = 256;  // per direction
    int max_source_len = 512;

    int enc_dim() const { return 2 * enc_hidden; }
    int dec_hidden() const { return enc_dim(); }
};

// Bidirectional 2-layer LSTM encoder, single-layer LSTM decoder with a
// bilinear attention over the encoder states and an input-feed connection.
struct Seq2SeqModel {
    Seq2SeqConfig cfg;

    Tensor src_embed, tgt_embed;
    // enc[layer][direction]: 0=forward, 1=backward
    Tensor enc_wx[2][2], enc_wh[2][2], enc_b[2][2];
    Tensor dec_wx, dec_wh, dec_b;
    Tensor att_wa;
    Tensor comb_w, comb_b;
    Tensor out_w, out_b;
    Tensor init_w, init_b;

    // uniform ±0.08 init
    Seq2SeqModel(Seq2SeqConfig config, std::mt19937& rng);
    explicit Seq2SeqModel(Seq2SeqConfig config);  // zero filled, for loading

    // stable order; checkpoint layout and the optimizer both follow it
    std::vector<std::pair<std::string, Tensor*>> named_params();
    std::vector<std::pair<std::string, const Tensor*>> named_params() const;

    void check_finite() const;
};

struct EncodedDocument {
    Tensor H;  // [source_len, enc_dim]
    Tensor v;  // [1, enc_dim], forward-final and backward-final top-layer states
};

struct DecoderState {
    Tensor h;     // [1, dec_hidden]
    Tensor c;     // [1, dec_hidden]
    Tensor feed;  // [1, dec_hidden], previous attentional output
};

struct StepDistribution {
    std::vector<float> probs;  // length vocab_size, sums to 1
};

struct StepResult {
    StepDistribution dist;
    DecoderState state;
    std::vector<float> attention;  // over source positions, sums to 1
};

EncodedDocument encode(const Seq2SeqModel& m, const std::vector<int>& source_ids);

DecoderState init_decoder(const Seq2SeqModel& m, const Tensor& v);

// One decoder step. H may stack rows from several documents; attention spans
// whatever rows it is given.
StepResult decode_step(const Seq2SeqModel& m, const DecoderState& state,
                       int prev_token_id, const Tensor& H);

// Teacher-forced loss for one pair; with_grad accumulates parameter grads.
// Shared by the training loop and the gradient tests.
float pair_loss(Seq2SeqModel& m, const text::TrainingPair& pair, bool with_grad);

struct TrainConfig {
    int epochs = 10;
    int batch_size = 16;
    unsigned seed = 42;
    nn::AdamConfig adam;
};

// Returns the per-epoch mean loss trace.
std::vector<float> train(Seq2SeqModel& m, const std::vector<text::TrainingPair>& pairs,
                         const TrainConfig& tc);

// Checkpoint: magic "MSQG", u32 LE version=1, u32 tensor count; per tensor a
// u16 name length, the name, u8 ndim, u32 dims, then f32 LE row-major data.
void save_checkpoint(const Seq2SeqModel& m, const std::string& path);
Seq2SeqModel load_checkpoint(const std::string& path);

}  // namespace msqg::s2s
