#include "msqg/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "msqg/autodiff.hpp"

namespace msqg::s2s {

namespace {

// Each parameter enters a graph through one leaf. Training mode binds params
// (grads accumulate); inference mode binds const inputs and never mutates.
struct Leaves {
    nn::Graph& g;
    bool train;
    std::unordered_map<const Tensor*, int> seen;

    int of(const Tensor& t) {
        auto it = seen.find(&t);
        if (it != seen.end()) return it->second;
        // training callers own a mutable model
        const int id = train ? g.param(const_cast<Tensor&>(t)) : g.input(t);
        seen.emplace(&t, id);
        return id;
    }
};

struct HC {
    int h;
    int c;
};

HC lstm_step(nn::Graph& g, int x, HC prev, int wx, int wh, int b, int hidden) {
    const int gates = g.add(g.add(g.matmul(x, wx), g.matmul(prev.h, wh)), b);
    const int i = g.sigmoid_of(g.slice(gates, 1, 0, hidden));
    const int f = g.sigmoid_of(g.slice(gates, 1, hidden, hidden));
    const int o = g.sigmoid_of(g.slice(gates, 1, 2 * hidden, hidden));
    const int u = g.tanh_of(g.slice(gates, 1, 3 * hidden, hidden));
    const int c = g.add(g.mul(f, prev.c), g.mul(i, u));
    const int h = g.mul(o, g.tanh_of(c));
    return {h, c};
}

struct EncNodes {
    int H;
    int v;
};

EncNodes build_encoder(nn::Graph& g, Leaves& L, const Seq2SeqModel& m,
                       const std::vector<int>& source_ids) {
    if (source_ids.empty()) throw DataError("encode: empty source");
    std::vector<int> ids = source_ids;
    if (static_cast<int>(ids.size()) > m.cfg.max_source_len) {
        ids.resize(static_cast<size_t>(m.cfg.max_source_len));
    }
    const int n = static_cast<int>(ids.size());
    const int hid = m.cfg.enc_hidden;

    const int emb = g.embedding(L.of(m.src_embed), ids);
    std::vector<int> in_rows(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t) in_rows[static_cast<size_t>(t)] = g.slice(emb, 0, t, 1);

    std::vector<int> fwd_h(static_cast<size_t>(n)), bwd_h(static_cast<size_t>(n));
    for (int layer = 0; layer < 2; ++layer) {
        for (int dir = 0; dir < 2; ++dir) {
            HC s = {g.value_leaf(Tensor({1, hid})), g.value_leaf(Tensor({1, hid}))};
            for (int k = 0; k < n; ++k) {
                const int t = dir == 0 ? k : n - 1 - k;
                s = lstm_step(g, in_rows[static_cast<size_t>(t)], s,
                              L.of(m.enc_wx[layer][dir]), L.of(m.enc_wh[layer][dir]),
                              L.of(m.enc_b[layer][dir]), hid);
                (dir == 0 ? fwd_h : bwd_h)[static_cast<size_t>(t)] = s.h;
            }
        }
        for (int t = 0; t < n; ++t) {
            in_rows[static_cast<size_t>(t)] =
                g.concat({fwd_h[static_cast<size_t>(t)], bwd_h[static_cast<size_t>(t)]}, 1);
        }
    }
    const int H = n == 1 ? in_rows[0] : g.concat(in_rows, 0);
    const int v = g.concat({fwd_h[static_cast<size_t>(n - 1)], bwd_h[0]}, 1);
    return {H, v};
}

struct DecNodes {
    int h;
    int c;
    int feed;  // the combined vector, fed to the next step
    int logits;
    int att;
};

DecNodes build_decoder_step(nn::Graph& g, Leaves& L, const Seq2SeqModel& m, int x_row,
                            int h_prev, int c_prev, int feed_prev, int H_node) {
    const int x = g.concat({x_row, feed_prev}, 1);
    const HC s = lstm_step(g, x, {h_prev, c_prev}, L.of(m.dec_wx), L.of(m.dec_wh),
                           L.of(m.dec_b), m.cfg.dec_hidden());
    const int scores = g.matmul(g.matmul(s.h, L.of(m.att_wa)), H_node, true);
    const int att = g.softmax_rows(scores);
    const int context = g.matmul(att, H_node);
    const int combined = g.relu_of(
        g.add(g.matmul(g.concat({context, s.h}, 1), L.of(m.comb_w)), L.of(m.comb_b)));
    const int logits = g.add(g.matmul(combined, L.of(m.out_w)), L.of(m.out_b));
    return {s.h, s.c, combined, logits, att};
}

int build_init_hidden(nn::Graph& g, Leaves& L, const Seq2SeqModel& m, int v_node) {
    return g.add(g.matmul(v_node, L.of(m.init_w)), L.of(m.init_b));
}

void validate_config(const Seq2SeqConfig& c) {
    if (c.vocab_size <= text::kNumReserved) {
        throw ConfigError("seq2seq: vocab_size must exceed the reserved ids");
    }
    if (c.embed_dim <= 0 || c.enc_hidden <= 0 || c.max_source_len <= 0) {
        throw ConfigError("seq2seq: dims must be positive");
    }
}

}  // namespace

Seq2SeqModel::Seq2SeqModel(Seq2SeqConfig config) : cfg(config) {
    validate_config(cfg);
    const int V = cfg.vocab_size;
    const int E = cfg.embed_dim;
    const int H = cfg.enc_hidden;
    const int D = cfg.dec_hidden();
    src_embed = Tensor({V, E});
    tgt_embed = Tensor({V, E});
    for (int layer = 0; layer < 2; ++layer) {
        const int in_dim = layer == 0 ? E : 2 * H;
        for (int dir = 0; dir < 2; ++dir) {
            enc_wx[layer][dir] = Tensor({in_dim, 4 * H});
            enc_wh[layer][dir] = Tensor({H, 4 * H});
            enc_b[layer][dir] = Tensor({1, 4 * H});
        }
    }
    dec_wx = Tensor({E + D, 4 * D});
    dec_wh = Tensor({D, 4 * D});
    dec_b = Tensor({1, 4 * D});
    att_wa = Tensor({D, cfg.enc_dim()});
    comb_w = Tensor({2 * D, D});
    comb_b = Tensor({1, D});
    out_w = Tensor({D, V});
    out_b = Tensor({1, V});
    init_w = Tensor({cfg.enc_dim(), D});
    init_b = Tensor({1, D});
}

Seq2SeqModel::Seq2SeqModel(Seq2SeqConfig config, std::mt19937& rng)
    : Seq2SeqModel(config) {
    std::uniform_real_distribution<float> dist(-0.08f, 0.08f);
    for (auto& [name, t] : named_params()) {
        for (float& v : t->data) v = dist(rng);
    }
}

std::vector<std::pair<std::string, Tensor*>> Seq2SeqModel::named_params() {
    std::vector<std::pair<std::string, Tensor*>> out;
    out.emplace_back("src_embed", &src_embed);
    out.emplace_back("tgt_embed", &tgt_embed);
    for (int layer = 0; layer < 2; ++layer) {
        for (int dir = 0; dir < 2; ++dir) {
            const std::string base =
                "enc_l" + std::to_string(layer) + (dir == 0 ? "_fwd" : "_bwd");
            out.emplace_back(base + "_wx", &enc_wx[layer][dir]);
            out.emplace_back(base + "_wh", &enc_wh[layer][dir]);
            out.emplace_back(base + "_b", &enc_b[layer][dir]);
        }
    }
    out.emplace_back("dec_wx", &dec_wx);
    out.emplace_back("dec_wh", &dec_wh);
    out.emplace_back("dec_b", &dec_b);
    out.emplace_back("att_wa", &att_wa);
    out.emplace_back("comb_w", &comb_w);
    out.emplace_back("comb_b", &comb_b);
    out.emplace_back("out_w", &out_w);
    out.emplace_back("out_b", &out_b);
    out.emplace_back("init_w", &init_w);
    out.emplace_back("init_b", &init_b);
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> Seq2SeqModel::named_params() const {
    auto mut = const_cast<Seq2SeqModel*>(this)->named_params();
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(mut.size());
    for (auto& [n, t] : mut) out.emplace_back(n, t);
    return out;
}

void Seq2SeqModel::check_finite() const {
    for (const auto& [name, t] : named_params()) t->check_finite(name);
}

EncodedDocument encode(const Seq2SeqModel& m, const std::vector<int>& source_ids) {
    nn::Graph g;
    Leaves L{g, false, {}};
    const EncNodes e = build_encoder(g, L, m, source_ids);
    return {g.value(e.H), g.value(e.v)};
}

DecoderState init_decoder(const Seq2SeqModel& m, const Tensor& v) {
    if (v.rows() != 1 || v.cols() != m.cfg.enc_dim()) {
        throw ConfigError("init_decoder: summary vector has the wrong dimension");
    }
    nn::Graph g;
    Leaves L{g, false, {}};
    const int h = build_init_hidden(g, L, m, g.input(v));
    DecoderState s;
    s.h = g.value(h);
    s.c = Tensor({1, m.cfg.dec_hidden()});
    s.feed = Tensor({1, m.cfg.dec_hidden()});
    return s;
}

StepResult decode_step(const Seq2SeqModel& m, const DecoderState& state,
                       int prev_token_id, const Tensor& H) {
    const int D = m.cfg.dec_hidden();
    if (state.h.cols() != D || state.c.cols() != D || state.feed.cols() != D) {
        throw ConfigError("decode_step: state dimension mismatch");
    }
    if (H.cols() != m.cfg.enc_dim()) {
        throw ConfigError("decode_step: H dimension mismatch");
    }
    nn::Graph g;
    Leaves L{g, false, {}};
    const int emb = g.embedding(L.of(m.tgt_embed), {prev_token_id});
    const DecNodes d = build_decoder_step(g, L, m, emb, g.input(state.h),
                                          g.input(state.c), g.input(state.feed),
                                          g.input(H));
    const int probs = g.softmax_rows(d.logits);
    StepResult r;
    r.dist.probs = g.value(probs).data;
    r.state.h = g.value(d.h);
    r.state.c = g.value(d.c);
    r.state.feed = g.value(d.feed);
    r.attention = g.value(d.att).data;
    return r;
}

float pair_loss(Seq2SeqModel& m, const text::TrainingPair& pair, bool with_grad) {
    if (pair.target.size() < 2) {
        throw DataError("train: target must hold BOS and EOS at least");
    }
    nn::Graph g;
    Leaves L{g, with_grad, {}};
    const EncNodes e = build_encoder(g, L, m, pair.source);
    int h = build_init_hidden(g, L, m, e.v);
    int c = g.value_leaf(Tensor({1, m.cfg.dec_hidden()}));
    int feed = g.value_leaf(Tensor({1, m.cfg.dec_hidden()}));

    const std::vector<int> prev_ids(pair.target.begin(), pair.target.end() - 1);
    const int emb = g.embedding(L.of(m.tgt_embed), prev_ids);
    std::vector<int> logit_rows;
    logit_rows.reserve(prev_ids.size());
    for (int t = 0; t < static_cast<int>(prev_ids.size()); ++t) {
        const int x = g.slice(emb, 0, t, 1);
        const DecNodes d = build_decoder_step(g, L, m, x, h, c, feed, e.H);
        h = d.h;
        c = d.c;
        feed = d.feed;
        logit_rows.push_back(d.logits);
    }
    const int all = logit_rows.size() == 1 ? logit_rows[0] : g.concat(logit_rows, 0);
    const std::vector<int> targets(pair.target.begin() + 1, pair.target.end());
    const int loss = g.cross_entropy(all, targets, text::kPad);
    if (with_grad) g.backward(loss);
    return g.value(loss).data[0];
}

std::vector<float> train(Seq2SeqModel& m, const std::vector<text::TrainingPair>& pairs,
                         const TrainConfig& tc) {
    if (pairs.empty()) throw DataError("train: no training pairs");
    if (tc.epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (tc.batch_size <= 0) throw ConfigError("train: batch_size must be positive");

    std::mt19937 rng(tc.seed);
    nn::Adam opt(tc.adam);
    auto params = m.named_params();
    for (auto& [name, t] : params) opt.add_param(*t);

    std::vector<size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), size_t{0});

    std::vector<float> trace;
    trace.reserve(static_cast<size_t>(tc.epochs));
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(tc.batch_size)) {
            const size_t n = std::min(static_cast<size_t>(tc.batch_size), order.size() - start);
            opt.zero_grad();
            for (size_t k = start; k < start + n; ++k) {
                float l = 0.0f;
                try {
                    l = pair_loss(m, pairs[order[k]], true);
                } catch (const NumericError& e) {
                    throw NumericError("train: aborted at epoch " + std::to_string(epoch) +
                                       ", example " + std::to_string(order[k]) + ": " + e.what());
                }
                if (!std::isfinite(l)) {
                    throw NumericError("train: non-finite loss at epoch " +
                                       std::to_string(epoch));
                }
                epoch_loss += l;
            }
            // the batch loss is the mean of the example losses
            const float inv = 1.0f / static_cast<float>(n);
            for (auto& [name, t] : params) {
                for (float& gv : t->grad) gv *= inv;
            }
            opt.clip_gradients();
            opt.step();
        }
        trace.push_back(static_cast<float>(epoch_loss / static_cast<double>(order.size())));
    }
    m.check_finite();
    return trace;
}

}  // namespace msqg::s2s
