#include "msqg/decoding.hpp"

#include <algorithm>
#include <cmath>

namespace msqg::decoding {

namespace {

using s2s::DecoderState;
using s2s::StepResult;
using s2s::Tensor;

std::string detok(const text::Vocabulary& vocab, const std::vector<int>& ids) {
    std::string out;
    for (int id : ids) {
        if (id == text::kEos) continue;
        if (!out.empty()) out += ' ';
        out += vocab.token_of(id);
    }
    return out;
}

void validate_betas(const std::vector<float>& betas, size_t n) {
    if (betas.size() != n) throw ConfigError("betas: one weight per document required");
    double sum = 0.0;
    for (float b : betas) {
        if (b < 0.0f) throw ConfigError("betas: weights must be nonnegative");
        sum += b;
    }
    if (std::abs(sum - static_cast<double>(n)) > 1e-6) {
        throw ConfigError("betas: weights must sum to N");
    }
}

// per-dimension mean of the v_i, summed in sorted order so document
// permutations cannot change a single bit
Tensor mean_summary(const std::vector<EncodedDocument>& encs) {
    const int dim = encs[0].v.cols();
    Tensor mean({1, dim});
    std::vector<double> terms(encs.size());
    for (int d = 0; d < dim; ++d) {
        for (size_t i = 0; i < encs.size(); ++i) {
            terms[i] = encs[i].v.data[static_cast<size_t>(d)];
        }
        std::sort(terms.begin(), terms.end());
        double acc = 0.0;
        for (double t : terms) acc += t;
        mean.data[static_cast<size_t>(d)] =
            static_cast<float>(acc / static_cast<double>(encs.size()));
    }
    return mean;
}

std::vector<int> rmrep_mask(const std::vector<int>& emitted) {
    std::vector<int> ids;
    for (int id : emitted) {
        if (id == text::kEos || id == text::kUnk) continue;
        ids.push_back(id);
    }
    return ids;
}

struct Hypothesis {
    std::vector<int> ids;
    double logp = 0.0;
    DecoderState state;
    bool finished = false;

    double score() const {
        return logp / static_cast<double>(std::max<size_t>(1, ids.size()));
    }
};

// higher score wins; ties prefer finished, then the lexicographically
// smaller token sequence
bool better(const Hypothesis& a, const Hypothesis& b) {
    if (a.score() != b.score()) return a.score() > b.score();
    if (a.finished != b.finished) return a.finished;
    return a.ids < b.ids;
}

GeneratedQuestion finish(const text::Vocabulary& vocab, std::vector<int> ids,
                         bool truncated) {
    GeneratedQuestion q;
    q.text = detok(vocab, ids);
    q.ids = std::move(ids);
    q.truncated = truncated;
    return q;
}

GeneratedQuestion beam_over(const Seq2SeqModel& m, const text::Vocabulary& vocab,
                            const EncodedDocument& enc, int beam_width, int max_len,
                            bool rmrep) {
    if (beam_width < 1) throw ConfigError("beam_decode: beam_width must be >= 1");
    if (max_len < 1) throw ConfigError("decode: max_len must be >= 1");

    std::vector<Hypothesis> live(1);
    live[0].state = s2s::init_decoder(m, enc.v);
    std::vector<Hypothesis> done;

    for (int step = 0; step < max_len && !live.empty(); ++step) {
        struct Cand {
            double logp;
            int token;
            int parent;
        };
        std::vector<Cand> cands;
        std::vector<StepResult> results(live.size());
        for (size_t p = 0; p < live.size(); ++p) {
            const Hypothesis& h = live[p];
            const int prev = h.ids.empty() ? text::kBos : h.ids.back();
            results[p] = s2s::decode_step(m, h.state, prev, enc.H);
            std::vector<float> probs = results[p].dist.probs;
            std::vector<int> masked = {text::kPad, text::kBos};
            if (rmrep) {
                for (int id : rmrep_mask(h.ids)) masked.push_back(id);
            }
            if (!mask_and_renormalize(probs, masked)) continue;
            for (size_t t = 0; t < probs.size(); ++t) {
                if (probs[t] <= 0.0f) continue;
                cands.push_back({h.logp + std::log(static_cast<double>(probs[t])),
                                 static_cast<int>(t), static_cast<int>(p)});
            }
        }
        if (cands.empty()) break;
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.logp != b.logp) return a.logp > b.logp;
            if (a.token != b.token) return a.token < b.token;
            return a.parent < b.parent;
        });
        if (static_cast<int>(cands.size()) > beam_width) {
            cands.resize(static_cast<size_t>(beam_width));
        }
        std::vector<Hypothesis> next;
        for (const Cand& c : cands) {
            Hypothesis h;
            h.ids = live[static_cast<size_t>(c.parent)].ids;
            h.ids.push_back(c.token);
            h.logp = c.logp;
            h.state = results[static_cast<size_t>(c.parent)].state;
            if (c.token == text::kEos) {
                h.finished = true;
                done.push_back(std::move(h));
            } else {
                next.push_back(std::move(h));
            }
        }
        live = std::move(next);
    }

    std::vector<Hypothesis> pool = std::move(done);
    for (Hypothesis& h : live) {
        if (!h.ids.empty()) pool.push_back(std::move(h));
    }
    if (pool.empty()) {
        // nothing survived the masks at the very first step
        return finish(vocab, {text::kEos}, true);
    }
    const Hypothesis* best = &pool[0];
    for (const Hypothesis& h : pool) {
        if (better(h, *best)) best = &h;
    }
    return finish(vocab, best->ids, !best->finished);
}

}  // namespace

bool mask_and_renormalize(std::vector<float>& probs, const std::vector<int>& masked) {
    std::vector<float> work = probs;
    for (int id : masked) {
        if (id >= 0 && id < static_cast<int>(work.size())) {
            work[static_cast<size_t>(id)] = 0.0f;
        }
    }
    double total = 0.0;
    for (float p : work) total += p;
    if (total <= 0.0) return false;
    for (float& p : work) p = static_cast<float>(p / total);
    probs = std::move(work);
    return true;
}

int argmax_token(const std::vector<float>& probs) {
    if (probs.empty()) throw ConfigError("argmax: empty distribution");
    int best = 0;
    for (int i = 1; i < static_cast<int>(probs.size()); ++i) {
        if (probs[static_cast<size_t>(i)] > probs[static_cast<size_t>(best)]) best = i;
    }
    return best;
}

StepDistribution aggregate(const std::vector<StepDistribution>& dists,
                           const std::vector<float>& betas, AggregateMode mode) {
    if (dists.empty()) throw ConfigError("aggregate: no distributions");
    const size_t n = dists.size();
    const size_t len = dists[0].probs.size();
    for (const StepDistribution& d : dists) {
        if (d.probs.size() != len) throw ConfigError("aggregate: length mismatch");
    }
    validate_betas(betas, n);

    StepDistribution out;
    out.probs.resize(len);
    std::vector<double> terms(n);
    switch (mode) {
        case AggregateMode::Average: {
            for (size_t k = 0; k < len; ++k) {
                for (size_t i = 0; i < n; ++i) {
                    terms[i] = static_cast<double>(betas[i]) *
                               static_cast<double>(dists[i].probs[k]);
                }
                std::sort(terms.begin(), terms.end());
                double acc = 0.0;
                for (double t : terms) acc += t;
                out.probs[k] = static_cast<float>(acc / static_cast<double>(n));
            }
            break;
        }
        case AggregateMode::Mult: {
            std::vector<double> raw(len);
            double total = 0.0;
            for (size_t k = 0; k < len; ++k) {
                for (size_t i = 0; i < n; ++i) {
                    terms[i] = static_cast<double>(dists[i].probs[k]);
                }
                std::sort(terms.begin(), terms.end());
                double prod = 1.0;
                for (double t : terms) prod *= t;
                raw[k] = prod;
                total += prod;
            }
            if (total <= 0.0) {
                throw NumericError("aggregate: product distribution is all zero");
            }
            for (size_t k = 0; k < len; ++k) {
                out.probs[k] = static_cast<float>(raw[k] / total);
            }
            break;
        }
        case AggregateMode::Max: {
            double total = 0.0;
            std::vector<double> raw(len);
            for (size_t k = 0; k < len; ++k) {
                double mx = dists[0].probs[k];
                for (size_t i = 1; i < n; ++i) {
                    mx = std::max(mx, static_cast<double>(dists[i].probs[k]));
                }
                raw[k] = mx;
                total += mx;
            }
            if (total <= 0.0) {
                throw NumericError("aggregate: max distribution is all zero");
            }
            for (size_t k = 0; k < len; ++k) {
                out.probs[k] = static_cast<float>(raw[k] / total);
            }
            break;
        }
    }
    return out;
}

GeneratedQuestion greedy_decode(const Seq2SeqModel& m, const text::Vocabulary& vocab,
                                const std::vector<int>& doc, int max_len,
                                AttentionTrace* trace) {
    if (max_len < 1) throw ConfigError("decode: max_len must be >= 1");
    const EncodedDocument enc = s2s::encode(m, doc);
    DecoderState state = s2s::init_decoder(m, enc.v);
    std::vector<int> ids;
    int prev = text::kBos;
    bool truncated = true;
    for (int step = 0; step < max_len; ++step) {
        StepResult r = s2s::decode_step(m, state, prev, enc.H);
        if (trace) trace->per_step.push_back(r.attention);
        std::vector<float> probs = r.dist.probs;
        if (!mask_and_renormalize(probs, {text::kPad, text::kBos})) {
            ids.push_back(text::kEos);
            break;
        }
        const int tok = argmax_token(probs);
        ids.push_back(tok);
        if (tok == text::kEos) {
            truncated = false;
            break;
        }
        state = r.state;
        prev = tok;
    }
    return finish(vocab, std::move(ids), truncated);
}

GeneratedQuestion beam_decode(const Seq2SeqModel& m, const text::Vocabulary& vocab,
                              const std::vector<int>& doc, int beam_width, int max_len,
                              bool rmrep) {
    return beam_over(m, vocab, s2s::encode(m, doc), beam_width, max_len, rmrep);
}

GeneratedQuestion concat_decode(const Seq2SeqModel& m, const text::Vocabulary& vocab,
                                const std::vector<std::vector<int>>& docs,
                                int beam_width, int max_len, bool rmrep) {
    if (docs.empty()) throw DataError("concat_decode: no documents");
    std::vector<int> joined;
    for (const auto& d : docs) joined.insert(joined.end(), d.begin(), d.end());
    return beam_over(m, vocab, s2s::encode(m, joined), beam_width, max_len, rmrep);
}

GeneratedQuestion mesd_decode(const Seq2SeqModel& m, const text::Vocabulary& vocab,
                              const std::vector<std::vector<int>>& docs, int max_len) {
    if (docs.empty()) throw DataError("mesd_decode: no documents");
    if (max_len < 1) throw ConfigError("decode: max_len must be >= 1");
    std::vector<EncodedDocument> encs;
    encs.reserve(docs.size());
    int total_rows = 0;
    for (const auto& d : docs) {
        encs.push_back(s2s::encode(m, d));
        total_rows += encs.back().H.rows();
    }
    Tensor H_all({total_rows, m.cfg.enc_dim()});
    int row = 0;
    for (const EncodedDocument& e : encs) {
        for (int i = 0; i < e.H.rows(); ++i) {
            for (int j = 0; j < e.H.cols(); ++j) H_all.at(row, j) = e.H.at(i, j);
            ++row;
        }
    }
    DecoderState state = s2s::init_decoder(m, mean_summary(encs));
    std::vector<int> ids;
    int prev = text::kBos;
    bool truncated = true;
    for (int step = 0; step < max_len; ++step) {
        StepResult r = s2s::decode_step(m, state, prev, H_all);
        std::vector<float> probs = r.dist.probs;
        if (!mask_and_renormalize(probs, {text::kPad, text::kBos})) {
            ids.push_back(text::kEos);
            break;
        }
        const int tok = argmax_token(probs);
        ids.push_back(tok);
        if (tok == text::kEos) {
            truncated = false;
            break;
        }
        state = r.state;
        prev = tok;
    }
    return finish(vocab, std::move(ids), truncated);
}

GeneratedQuestion msqg_decode(const Seq2SeqModel& m, const text::Vocabulary& vocab,
                              const std::vector<std::vector<int>>& docs,
                              const MsqgOptions& options) {
    if (docs.empty()) throw DataError("msqg_decode: no documents");
    if (options.max_len < 1) throw ConfigError("decode: max_len must be >= 1");
    const size_t n = docs.size();
    std::vector<float> betas = options.betas;
    if (betas.empty()) betas.assign(n, 1.0f);
    validate_betas(betas, n);

    std::vector<EncodedDocument> encs;
    encs.reserve(n);
    for (const auto& d : docs) encs.push_back(s2s::encode(m, d));

    std::vector<DecoderState> states(n);
    if (options.sharedh) {
        const Tensor vmean = mean_summary(encs);
        for (size_t i = 0; i < n; ++i) states[i] = s2s::init_decoder(m, vmean);
    } else {
        for (size_t i = 0; i < n; ++i) states[i] = s2s::init_decoder(m, encs[i].v);
    }

    std::vector<int> ids;
    int prev = text::kBos;
    bool truncated = true;
    for (int step = 0; step < options.max_len; ++step) {
        std::vector<StepDistribution> dists(n);
        std::vector<StepResult> results(n);
        for (size_t i = 0; i < n; ++i) {
            results[i] = s2s::decode_step(m, states[i], prev, encs[i].H);
            dists[i] = results[i].dist;
        }
        StepDistribution agg = aggregate(dists, betas, options.aggregate_mode);
        std::vector<float> probs = agg.probs;
        std::vector<int> masked = {text::kPad, text::kBos};
        if (options.rmrep) {
            for (int id : rmrep_mask(ids)) masked.push_back(id);
        }
        if (!mask_and_renormalize(probs, masked)) {
            ids.push_back(text::kEos);
            break;
        }
        const int tok = argmax_token(probs);
        ids.push_back(tok);
        if (tok == text::kEos) {
            truncated = false;
            break;
        }
        for (size_t i = 0; i < n; ++i) states[i] = results[i].state;
        prev = tok;
    }
    return finish(vocab, std::move(ids), truncated);
}

}  // namespace msqg::decoding
