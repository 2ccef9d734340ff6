#include "msqg/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace msqg::retrieval {

Bm25Index::Bm25Index(const std::vector<std::vector<std::string>>& corpus,
                     Bm25Params params)
    : params_(params) {
    if (corpus.empty()) throw DataError("bm25: empty corpus");
    if (params_.k1 <= 0.0) throw ConfigError("bm25: k1 must be positive");
    if (params_.b < 0.0 || params_.b > 1.0) throw ConfigError("bm25: b must lie in [0,1]");
    lengths_.reserve(corpus.size());
    int64_t total_len = 0;
    for (int doc = 0; doc < static_cast<int>(corpus.size()); ++doc) {
        const auto& tokens = corpus[static_cast<size_t>(doc)];
        lengths_.push_back(static_cast<int>(tokens.size()));
        total_len += static_cast<int64_t>(tokens.size());
        std::unordered_map<std::string, int> tf;
        for (const std::string& t : tokens) ++tf[t];
        for (const auto& [term, count] : tf) {
            postings_[term].emplace_back(doc, count);
        }
    }
    // postings stay sorted by doc id because docs were walked in order
    avg_len_ = static_cast<double>(total_len) / static_cast<double>(corpus.size());
}

int Bm25Index::term_frequency(const std::string& term, int doc_id) const {
    auto it = postings_.find(term);
    if (it == postings_.end()) return 0;
    for (const auto& [doc, tf] : it->second) {
        if (doc == doc_id) return tf;
    }
    return 0;
}

std::vector<double> Bm25Index::score_all(const std::vector<std::string>& query) const {
    std::vector<double> scores(lengths_.size(), 0.0);
    const double n_docs = static_cast<double>(lengths_.size());
    std::set<std::string> terms(query.begin(), query.end());
    for (const std::string& term : terms) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const double df = static_cast<double>(it->second.size());
        const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
        for (const auto& [doc, tf] : it->second) {
            const double len = lengths_[static_cast<size_t>(doc)];
            const double denom =
                tf + params_.k1 * (1.0 - params_.b + params_.b * len / avg_len_);
            scores[static_cast<size_t>(doc)] += idf * tf * (params_.k1 + 1.0) / denom;
        }
    }
    return scores;
}

std::vector<int> Bm25Index::top_k(const std::vector<std::string>& query, int k) const {
    const std::vector<double> scores = score_all(query);
    std::vector<int> ids(scores.size());
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    std::sort(ids.begin(), ids.end(), [&](int a, int b) {
        const double sa = scores[static_cast<size_t>(a)];
        const double sb = scores[static_cast<size_t>(b)];
        if (sa != sb) return sa > sb;
        return a < b;
    });
    if (k >= 0 && static_cast<size_t>(k) < ids.size()) ids.resize(static_cast<size_t>(k));
    return ids;
}

EvaluationSet build_eval_set(const std::vector<std::vector<std::string>>& source_10,
                             const decoding::GeneratedQuestion& question,
                             const Bm25Index& index,
                             const std::vector<std::vector<std::string>>& pool) {
    if (source_10.size() != 10) {
        throw ConfigError("build_eval_set: exactly 10 source passages required");
    }
    if (index.doc_count() != static_cast<int>(pool.size())) {
        throw ConfigError("build_eval_set: index and pool disagree");
    }
    EvaluationSet set;
    set.question = question;
    set.source_passages = source_10;
    set.small_pool = pool.size() < 90;

    const std::vector<std::string> query_tokens = text::tokenize(question.text);
    const std::vector<int> top = index.top_k(query_tokens, 90);
    for (int doc : top) {
        const auto& passage = pool[static_cast<size_t>(doc)];
        bool dup = false;
        for (const auto& src : source_10) {
            if (passage == src) {
                dup = true;
                break;
            }
        }
        if (!dup) set.distractors.push_back(passage);
    }
    return set;
}

std::vector<double> Bm25RelevanceScorer::score_set(
    const std::vector<std::string>& question,
    const std::vector<std::vector<std::string>>& passages) const {
    if (passages.empty()) return {};
    Bm25Index index(passages);
    const std::vector<double> raw = index.score_all(question);
    double mean = 0.0;
    for (double s : raw) mean += s;
    mean /= static_cast<double>(raw.size());
    double var = 0.0;
    for (double s : raw) var += (s - mean) * (s - mean);
    var /= static_cast<double>(raw.size());
    const double sd = std::sqrt(var);
    std::vector<double> out(raw.size());
    for (size_t i = 0; i < raw.size(); ++i) {
        const double z = sd > 0.0 ? (raw[i] - mean) / sd : 0.0;
        out[i] = 1.0 / (1.0 + std::exp(-z));
    }
    return out;
}

RetrievalResult score_and_rank(const RelevanceScorer& scorer, const EvaluationSet& set) {
    if (set.source_passages.empty()) {
        throw DataError("score_and_rank: no source passages");
    }
    std::vector<std::vector<std::string>> all = set.source_passages;
    all.insert(all.end(), set.distractors.begin(), set.distractors.end());
    const std::vector<std::string> q = text::tokenize(set.question.text);
    const std::vector<double> scores = scorer.score_set(q, all);
    if (scores.size() != all.size()) {
        throw NumericError("score_and_rank: scorer returned the wrong count");
    }
    for (double s : scores) {
        if (!std::isfinite(s) || s <= 0.0 || s >= 1.0) {
            throw NumericError("score_and_rank: score outside (0,1)");
        }
    }
    const size_t n_src = set.source_passages.size();
    double combined = 0.0;
    for (size_t i = 0; i < n_src; ++i) combined += scores[i];
    combined /= static_cast<double>(n_src);

    // ties count against the combined item
    int rank = 1;
    for (size_t i = n_src; i < scores.size(); ++i) {
        if (scores[i] >= combined) ++rank;
    }
    RetrievalResult r;
    r.rank_of_source = rank;
    r.mrr = 1.0 / static_cast<double>(rank);
    r.mrr_at_10 = rank <= 10 ? r.mrr : 0.0;
    r.ndcg = 1.0 / std::log2(1.0 + static_cast<double>(rank));
    return r;
}

std::vector<std::vector<double>> TfidfEmbedder::embed(
    const std::vector<std::vector<std::string>>& passages) const {
    const size_t n = passages.size();
    std::set<std::string> term_set;
    for (const auto& p : passages) term_set.insert(p.begin(), p.end());
    std::vector<std::string> terms(term_set.begin(), term_set.end());
    std::unordered_map<std::string, size_t> dim;
    for (size_t i = 0; i < terms.size(); ++i) dim.emplace(terms[i], i);

    std::vector<double> df(terms.size(), 0.0);
    std::vector<std::vector<double>> vecs(n, std::vector<double>(terms.size(), 0.0));
    for (size_t p = 0; p < n; ++p) {
        std::set<std::string> seen;
        for (const std::string& t : passages[p]) {
            vecs[p][dim[t]] += 1.0;
            seen.insert(t);
        }
        for (const std::string& t : seen) df[dim[t]] += 1.0;
    }
    for (size_t p = 0; p < n; ++p) {
        double norm_sq = 0.0;
        for (size_t d = 0; d < terms.size(); ++d) {
            const double idf =
                std::log((1.0 + static_cast<double>(n)) / (1.0 + df[d])) + 1.0;
            vecs[p][d] *= idf;
            norm_sq += vecs[p][d] * vecs[p][d];
        }
        if (norm_sq > 0.0) {
            const double inv = 1.0 / std::sqrt(norm_sq);
            for (double& v : vecs[p]) v *= inv;
        }
    }
    return vecs;
}

double mean_pairwise_similarity(const std::vector<std::vector<std::string>>& passages,
                                const Embedder& embedder, int* skipped) {
    if (passages.size() < 2) {
        throw DataError("similarity: at least two passages required");
    }
    const auto vecs = embedder.embed(passages);
    std::vector<bool> zero(vecs.size(), true);
    for (size_t i = 0; i < vecs.size(); ++i) {
        for (double v : vecs[i]) {
            if (v != 0.0) {
                zero[i] = false;
                break;
            }
        }
    }
    double total = 0.0;
    int pairs = 0;
    int skip = 0;
    for (size_t i = 0; i < vecs.size(); ++i) {
        for (size_t j = i + 1; j < vecs.size(); ++j) {
            if (zero[i] || zero[j]) {
                ++skip;
                continue;
            }
            double dot = 0.0;
            for (size_t d = 0; d < vecs[i].size(); ++d) dot += vecs[i][d] * vecs[j][d];
            total += dot;  // embeddings are unit length already
            ++pairs;
        }
    }
    if (skipped) *skipped = skip;
    if (pairs == 0) throw NumericError("similarity: every pair had a zero embedding");
    return total / static_cast<double>(pairs);
}

}  // namespace msqg::retrieval
