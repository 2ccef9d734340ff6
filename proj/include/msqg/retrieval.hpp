#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "msqg/decoding.hpp"
#include "msqg/errors.hpp"

namespace msqg::retrieval {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

// Okapi BM25 with idf(t) = ln(1 + (N - df + 0.5)/(df + 0.5)). Query terms are
// deduplicated; scoring iterates terms in sorted order so sums are stable.
class Bm25Index {
  public:
    explicit Bm25Index(const std::vector<std::vector<std::string>>& corpus,
                       Bm25Params params = {});

    // one score per document, zero included
    std::vector<double> score_all(const std::vector<std::string>& query) const;

    // document ids ordered by (score desc, id asc)
    std::vector<int> top_k(const std::vector<std::string>& query, int k) const;

    int doc_count() const { return static_cast<int>(lengths_.size()); }
    int term_frequency(const std::string& term, int doc_id) const;

  private:
    std::unordered_map<std::string, std::vector<std::pair<int, int>>> postings_;
    std::vector<int> lengths_;
    double avg_len_ = 0.0;
    Bm25Params params_;
};

struct EvaluationSet {
    std::string query_id;
    decoding::GeneratedQuestion question;
    std::vector<std::vector<std::string>> source_passages;  // exactly 10
    std::vector<std::vector<std::string>> distractors;      // at most 90
    bool small_pool = false;
};

// index must be built over pool (doc ids are pool positions). Top-90 by BM25
// for the question text, then any distractor textually identical to a source
// passage is dropped without replacement.
EvaluationSet build_eval_set(const std::vector<std::vector<std::string>>& source_10,
                             const decoding::GeneratedQuestion& question,
                             const Bm25Index& index,
                             const std::vector<std::vector<std::string>>& pool);

// Relevance scorers stand in for a learned re-ranker: deterministic, every
// score strictly inside (0,1).
class RelevanceScorer {
  public:
    virtual ~RelevanceScorer() = default;
    virtual std::vector<double> score_set(
        const std::vector<std::string>& question,
        const std::vector<std::vector<std::string>>& passages) const = 0;
};

// BM25 of (question, passage) over an index of just the given passages,
// z-scored within the set and squashed by a logistic.
class Bm25RelevanceScorer : public RelevanceScorer {
  public:
    std::vector<double> score_set(
        const std::vector<std::string>& question,
        const std::vector<std::vector<std::string>>& passages) const override;
};

struct RetrievalResult {
    double mrr = 0.0;
    double mrr_at_10 = 0.0;
    double ndcg = 0.0;
    int rank_of_source = 0;
};

// The 10 source scores average into one combined item ranked against each
// distractor; ties rank the combined item below (pessimistic).
RetrievalResult score_and_rank(const RelevanceScorer& scorer, const EvaluationSet& set);

class Embedder {
  public:
    virtual ~Embedder() = default;
    virtual std::vector<std::vector<double>> embed(
        const std::vector<std::vector<std::string>>& passages) const = 0;
};

// Bag of words with smooth idf ln((1+N)/(1+df)) + 1, L2 normalized.
// Dimensions follow the sorted union of terms.
class TfidfEmbedder : public Embedder {
  public:
    std::vector<std::vector<double>> embed(
        const std::vector<std::vector<std::string>>& passages) const override;
};

// Mean cosine similarity over unordered pairs. Pairs with a zero-vector side
// are skipped; *skipped reports how many when non-null.
double mean_pairwise_similarity(const std::vector<std::vector<std::string>>& passages,
                                const Embedder& embedder, int* skipped = nullptr);

}  // namespace msqg::retrieval
