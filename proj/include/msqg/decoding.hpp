#pragma once

#include <string>
#include <vector>

#include "msqg/seq2seq.hpp"
#include "msqg/text.hpp"

namespace msqg::decoding {

using s2s::EncodedDocument;
using s2s::Seq2SeqModel;
using s2s::StepDistribution;

enum class AggregateMode { Average, Mult, Max };

struct MsqgOptions {
    AggregateMode aggregate_mode = AggregateMode::Average;
    bool rmrep = false;
    bool sharedh = false;
    std::vector<float> betas;  // empty means all ones
    int max_len = 25;
};

struct GeneratedQuestion {
    std::vector<int> ids;  // EOS terminated, or cut at max_len
    std::string text;      // detokenized, specials stripped
    bool truncated = false;
};

// Zeroes the listed ids and renormalizes in place. Returns false when the
// distribution lost all mass, leaving probs untouched in that case.
bool mask_and_renormalize(std::vector<float>& probs, const std::vector<int>& masked);

// Ties go to the lowest id.
int argmax_token(const std::vector<float>& probs);

// Aggregate in double precision with a canonical term order, so any
// permutation of (dists, betas) yields a bitwise identical result.
// betas scale only the average mode; they are validated for every mode.
StepDistribution aggregate(const std::vector<StepDistribution>& dists,
                           const std::vector<float>& betas, AggregateMode mode);

// Per-step attention rows captured during greedy decoding.
struct AttentionTrace {
    std::vector<std::vector<float>> per_step;
};

GeneratedQuestion greedy_decode(const Seq2SeqModel& m, const text::Vocabulary& vocab,
                                const std::vector<int>& doc, int max_len = 25,
                                AttentionTrace* trace = nullptr);

GeneratedQuestion beam_decode(const Seq2SeqModel& m, const text::Vocabulary& vocab,
                              const std::vector<int>& doc, int beam_width = 5,
                              int max_len = 25, bool rmrep = false);

// S2S baseline: documents joined in order, then beam searched.
GeneratedQuestion concat_decode(const Seq2SeqModel& m, const text::Vocabulary& vocab,
                                const std::vector<std::vector<int>>& docs,
                                int beam_width = 5, int max_len = 25, bool rmrep = false);

// MESD baseline: one decoder started from mean(v_i), attention over the
// stacked rows of every H_i.
GeneratedQuestion mesd_decode(const Seq2SeqModel& m, const text::Vocabulary& vocab,
                              const std::vector<std::vector<int>>& docs, int max_len = 25);

// Distribute/Aggregate decoding across N documents.
GeneratedQuestion msqg_decode(const Seq2SeqModel& m, const text::Vocabulary& vocab,
                              const std::vector<std::vector<int>>& docs,
                              const MsqgOptions& options);

}  // namespace msqg::decoding
