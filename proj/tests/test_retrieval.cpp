#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "doctest.h"
#include "msqg/retrieval.hpp"

using namespace msqg;
using namespace msqg::retrieval;

namespace {

std::vector<std::string> toks(std::initializer_list<const char*> words) {
    std::vector<std::string> out;
    for (const char* w : words) out.emplace_back(w);
    return out;
}

decoding::GeneratedQuestion question_of(const std::string& text) {
    decoding::GeneratedQuestion q;
    q.text = text;
    return q;
}

// scores keyed by the passage's joined text; question ignored
struct StubScorer : RelevanceScorer {
    std::unordered_map<std::string, double> by_text;
    std::vector<double> score_set(
        const std::vector<std::string>&,
        const std::vector<std::vector<std::string>>& passages) const override {
        std::vector<double> out;
        for (const auto& p : passages) {
            std::string key;
            for (const auto& t : p) {
                if (!key.empty()) key += ' ';
                key += t;
            }
            out.push_back(by_text.at(key));
        }
        return out;
    }
};

// positional scores, for the random oracle runs
struct PositionalScorer : RelevanceScorer {
    std::vector<double> scores;
    std::vector<double> score_set(
        const std::vector<std::string>&,
        const std::vector<std::vector<std::string>>& passages) const override {
        REQUIRE(passages.size() == scores.size());
        return scores;
    }
};

}  // namespace

TEST_CASE("bm25 matches the formula on a tiny corpus") {
    const std::vector<std::vector<std::string>> corpus = {
        toks({"a", "b"}), toks({"a", "c"}), toks({"d"})};
    Bm25Index index(corpus);

    auto s_a = index.score_all({"a"});
    CHECK(s_a[2] == 0.0);
    CHECK(s_a[0] == doctest::Approx(s_a[1]).epsilon(1e-12));

    // idf(a) = ln(1 + (3-2+0.5)/(2+0.5)), tf part = 1*(k1+1)/(1 + k1*(1-b+b*len/avg))
    const double avg = 5.0 / 3.0;
    const double idf_a = std::log(1.0 + 1.5 / 2.5);
    const double denom = 1.0 + 1.2 * (1.0 - 0.75 + 0.75 * 2.0 / avg);
    const double expect_a = idf_a * 2.2 / denom;
    CHECK(s_a[0] == doctest::Approx(expect_a).epsilon(1e-6));
    CHECK(s_a[0] == doctest::Approx(0.4344571).epsilon(1e-6));

    auto s_ac = index.score_all({"a", "c"});
    const double idf_c = std::log(1.0 + 2.5 / 1.5);
    CHECK(s_ac[1] == doctest::Approx(expect_a + idf_c * 2.2 / denom).epsilon(1e-6));
    CHECK(s_ac[0] == doctest::Approx(expect_a).epsilon(1e-6));
    CHECK(s_ac[2] == 0.0);

    auto absent = index.score_all({"zzz"});
    for (double s : absent) CHECK(s == 0.0);

    // duplicated query terms count once
    CHECK(index.score_all({"a", "a"})[0] == doctest::Approx(s_a[0]).epsilon(1e-12));

    CHECK_THROWS_AS(Bm25Index({}), DataError);
    CHECK_THROWS_AS(Bm25Index(corpus, Bm25Params{0.0, 0.5}), ConfigError);
    CHECK_THROWS_AS(Bm25Index(corpus, Bm25Params{1.2, 1.5}), ConfigError);
}

TEST_CASE("bm25 top_k breaks score ties by doc id") {
    const std::vector<std::vector<std::string>> corpus = {
        toks({"x", "y"}), toks({"x", "y"}), toks({"x", "y"}), toks({"q"})};
    Bm25Index index(corpus);
    auto top = index.top_k({"x"}, 4);
    CHECK(top == std::vector<int>{0, 1, 2, 3});
    auto top2 = index.top_k({"x"}, 2);
    CHECK(top2 == std::vector<int>{0, 1});
}

TEST_CASE("bm25 stored term frequencies ignore later corpus growth") {
    const std::vector<std::vector<std::string>> base = {toks({"a", "a", "b"}),
                                                        toks({"b", "c"})};
    std::vector<std::vector<std::string>> grown = base;
    grown.push_back(toks({"unrelated", "words"}));
    Bm25Index small(base);
    Bm25Index big(grown);
    CHECK(small.term_frequency("a", 0) == 2);
    CHECK(big.term_frequency("a", 0) == 2);
    CHECK(small.term_frequency("b", 1) == big.term_frequency("b", 1));
    CHECK(big.term_frequency("unrelated", 2) == 1);
    CHECK(big.term_frequency("a", 2) == 0);
}

TEST_CASE("build_eval_set assembles 100 passages from a disjoint pool") {
    std::vector<std::vector<std::string>> sources;
    for (int i = 0; i < 10; ++i) sources.push_back({"source", std::to_string(i)});
    std::vector<std::vector<std::string>> pool;
    for (int i = 0; i < 120; ++i) pool.push_back({"filler", std::to_string(i)});
    Bm25Index index(pool);
    auto set = build_eval_set(sources, question_of("some question"), index, pool);
    CHECK(set.distractors.size() == 90);
    CHECK(set.source_passages.size() == 10);
    CHECK_FALSE(set.small_pool);

    CHECK_THROWS_AS(
        build_eval_set({sources[0]}, question_of("q"), index, pool), ConfigError);
    Bm25Index other({toks({"a"})});
    CHECK_THROWS_AS(build_eval_set(sources, question_of("q"), other, pool), ConfigError);
}

TEST_CASE("build_eval_set drops source-identical passages without replacement") {
    std::vector<std::vector<std::string>> sources;
    for (int i = 0; i < 10; ++i) sources.push_back({"topic", "alpha", std::to_string(i)});
    // pool = the 10 sources plus 80 fillers; every doc lands in the top 90
    std::vector<std::vector<std::string>> pool = sources;
    for (int i = 0; i < 80; ++i) pool.push_back({"filler", std::to_string(i)});
    Bm25Index index(pool);
    auto set = build_eval_set(sources, question_of("topic alpha"), index, pool);
    CHECK(set.distractors.size() == 80);
    for (const auto& d : set.distractors) {
        for (const auto& s : sources) CHECK(d != s);
    }
}

TEST_CASE("build_eval_set flags small pools and keeps score order") {
    std::vector<std::vector<std::string>> sources;
    for (int i = 0; i < 10; ++i) sources.push_back({"src", std::to_string(i)});
    // varying tf of the query term, equal lengths, so scores strictly order
    std::vector<std::vector<std::string>> pool = {
        {"beta", "x", "y", "z"},
        {"beta", "beta", "y", "z"},
        {"beta", "beta", "beta", "z"},
        {"none", "x", "y", "z"},
    };
    Bm25Index index(pool);
    auto set = build_eval_set(sources, question_of("beta"), index, pool);
    CHECK(set.small_pool);
    REQUIRE(set.distractors.size() == 4);
    CHECK(set.distractors[0] == pool[2]);
    CHECK(set.distractors[1] == pool[1]);
    CHECK(set.distractors[2] == pool[0]);
    CHECK(set.distractors[3] == pool[3]);
}

TEST_CASE("score_and_rank on the worked rank examples") {
    EvaluationSet set;
    set.question = question_of("irrelevant");
    StubScorer scorer;
    for (int i = 0; i < 10; ++i) {
        set.source_passages.push_back({"s", std::to_string(i)});
        scorer.by_text["s " + std::to_string(i)] = 0.6;  // combined = 0.6
    }
    auto add_distractor = [&](int i, double score) {
        set.distractors.push_back({"d", std::to_string(i)});
        scorer.by_text["d " + std::to_string(i)] = score;
    };

    // all distractors below: rank 1
    for (int i = 0; i < 5; ++i) add_distractor(i, 0.1 + 0.01 * i);
    auto r1 = score_and_rank(scorer, set);
    CHECK(r1.rank_of_source == 1);
    CHECK(r1.mrr == 1.0);
    CHECK(r1.mrr_at_10 == 1.0);
    CHECK(r1.ndcg == 1.0);

    // three distractors above: rank 4
    add_distractor(5, 0.7);
    add_distractor(6, 0.8);
    add_distractor(7, 0.9);
    auto r4 = score_and_rank(scorer, set);
    CHECK(r4.rank_of_source == 4);
    CHECK(r4.mrr == doctest::Approx(0.25));
    CHECK(r4.mrr_at_10 == doctest::Approx(0.25));
    CHECK(r4.ndcg == doctest::Approx(1.0 / std::log2(5.0)).epsilon(1e-9));
    CHECK(r4.ndcg == doctest::Approx(0.4306766).epsilon(1e-6));

    // ten distractors above: rank 11, the MRR@10 cutoff zeroes
    for (int i = 8; i < 15; ++i) add_distractor(i, 0.65);
    auto r11 = score_and_rank(scorer, set);
    CHECK(r11.rank_of_source == 11);
    CHECK(r11.mrr == doctest::Approx(1.0 / 11.0));
    CHECK(r11.mrr_at_10 == 0.0);

    // equal scores count against the source
    add_distractor(20, 0.6);
    auto tie = score_and_rank(scorer, set);
    CHECK(tie.rank_of_source == 12);
}

TEST_CASE("score_and_rank rejects out-of-range scorers") {
    EvaluationSet set;
    set.question = question_of("q");
    for (int i = 0; i < 10; ++i) set.source_passages.push_back({"s", std::to_string(i)});
    set.distractors.push_back({"d", "0"});

    PositionalScorer bad;
    bad.scores.assign(11, 0.5);
    bad.scores[10] = 1.5;
    CHECK_THROWS_AS(score_and_rank(bad, set), NumericError);
    bad.scores[10] = std::nan("");
    CHECK_THROWS_AS(score_and_rank(bad, set), NumericError);
    bad.scores[10] = 0.0;
    CHECK_THROWS_AS(score_and_rank(bad, set), NumericError);

    EvaluationSet empty;
    empty.question = question_of("q");
    PositionalScorer any;
    CHECK_THROWS_AS(score_and_rank(any, empty), DataError);
}

TEST_CASE("score_and_rank is invariant to distractor order") {
    EvaluationSet set;
    set.question = question_of("orderless");
    StubScorer scorer;
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (int i = 0; i < 10; ++i) {
        set.source_passages.push_back({"s", std::to_string(i)});
        scorer.by_text["s " + std::to_string(i)] = u(rng);
    }
    for (int i = 0; i < 30; ++i) {
        set.distractors.push_back({"d", std::to_string(i)});
        scorer.by_text["d " + std::to_string(i)] = u(rng);
    }
    auto base = score_and_rank(scorer, set);
    EvaluationSet shuffled = set;
    std::shuffle(shuffled.distractors.begin(), shuffled.distractors.end(), rng);
    auto again = score_and_rank(scorer, shuffled);
    CHECK(base.rank_of_source == again.rank_of_source);
    CHECK(base.mrr == again.mrr);
    CHECK(base.ndcg == again.ndcg);
}

TEST_CASE("metrics match a naive sorting oracle on random scores") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0.001, 0.999);
    EvaluationSet set;
    set.question = question_of("oracle");
    for (int i = 0; i < 10; ++i) set.source_passages.push_back({"s", std::to_string(i)});
    for (int i = 0; i < 90; ++i) set.distractors.push_back({"d", std::to_string(i)});

    for (int trial = 0; trial < 1000; ++trial) {
        PositionalScorer scorer;
        scorer.scores.resize(100);
        for (double& s : scorer.scores) s = u(rng);

        auto got = score_and_rank(scorer, set);

        double combined = 0.0;
        for (int i = 0; i < 10; ++i) combined += scorer.scores[static_cast<size_t>(i)];
        combined /= 10.0;
        struct Item {
            double score;
            bool is_combined;
        };
        std::vector<Item> items = {{combined, true}};
        for (int i = 10; i < 100; ++i) {
            items.push_back({scorer.scores[static_cast<size_t>(i)], false});
        }
        std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
            if (a.score != b.score) return a.score > b.score;
            return !a.is_combined && b.is_combined;
        });
        int rank = 0;
        for (size_t i = 0; i < items.size(); ++i) {
            if (items[i].is_combined) {
                rank = static_cast<int>(i) + 1;
                break;
            }
        }
        REQUIRE(got.rank_of_source == rank);
        CHECK(std::abs(got.mrr - 1.0 / rank) <= 1e-12);
        CHECK(std::abs(got.ndcg - 1.0 / std::log2(1.0 + rank)) <= 1e-12);
        CHECK(got.mrr >= got.mrr_at_10);
        CHECK(got.ndcg > 0.0);
        CHECK(got.ndcg <= 1.0);
    }
}

TEST_CASE("bm25 relevance scorer stays in (0,1) and tracks relevance") {
    Bm25RelevanceScorer scorer;
    std::vector<std::string> q = {"solar", "power"};
    std::vector<std::vector<std::string>> passages = {
        toks({"solar", "power", "is", "growing"}),
        toks({"wind", "turbines", "spin"}),
        toks({"cooking", "pasta", "al", "dente"}),
    };
    auto a = scorer.score_set(q, passages);
    auto b = scorer.score_set(q, passages);
    CHECK(a == b);
    for (double s : a) {
        CHECK(s > 0.0);
        CHECK(s < 1.0);
    }
    CHECK(a[0] > a[1]);
    CHECK(a[0] > a[2]);

    // indistinguishable passages all collapse to 1/2
    std::vector<std::vector<std::string>> same = {toks({"x"}), toks({"x"})};
    auto flat = scorer.score_set(q, same);
    CHECK(flat[0] == doctest::Approx(0.5));
    CHECK(flat[1] == doctest::Approx(0.5));
}

TEST_CASE("mean pairwise similarity") {
    TfidfEmbedder emb;
    // identical passages
    std::vector<std::vector<std::string>> same = {toks({"x", "y"}), toks({"x", "y"})};
    CHECK(mean_pairwise_similarity(same, emb) == doctest::Approx(1.0).epsilon(1e-12));

    // disjoint bags are orthogonal
    std::vector<std::vector<std::string>> disjoint = {toks({"aa"}), toks({"bb"})};
    CHECK(mean_pairwise_similarity(disjoint, emb) == doctest::Approx(0.0));

    // two-passage overlap, worked by hand from the smooth idf formula
    std::vector<std::vector<std::string>> pair = {toks({"a"}), toks({"a", "b"})};
    const double idf_b = std::log(3.0 / 2.0) + 1.0;
    const double expect = 1.0 / std::sqrt(1.0 + idf_b * idf_b);
    CHECK(mean_pairwise_similarity(pair, emb) == doctest::Approx(expect).epsilon(1e-9));

    // three passages: mean over the three pairs, against direct enumeration
    std::vector<std::vector<std::string>> three = {toks({"a", "b"}), toks({"b", "c"}),
                                                   toks({"c", "d"})};
    auto vecs = emb.embed(three);
    double manual = 0.0;
    for (size_t i = 0; i < 3; ++i) {
        for (size_t j = i + 1; j < 3; ++j) {
            double dot = 0.0;
            for (size_t d = 0; d < vecs[i].size(); ++d) dot += vecs[i][d] * vecs[j][d];
            manual += dot;
        }
    }
    manual /= 3.0;
    CHECK(mean_pairwise_similarity(three, emb) == doctest::Approx(manual).epsilon(1e-12));

    // zero-vector passages drop their pairs
    std::vector<std::vector<std::string>> with_empty = {toks({"a"}), {}, toks({"a"})};
    int skipped = 0;
    const double sim = mean_pairwise_similarity(with_empty, emb, &skipped);
    CHECK(skipped == 2);
    CHECK(sim == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<std::vector<std::string>> all_empty = {{}, {}};
    CHECK_THROWS_AS(mean_pairwise_similarity(all_empty, emb), NumericError);
    CHECK_THROWS_AS(mean_pairwise_similarity({toks({"a"})}, emb), DataError);
}
