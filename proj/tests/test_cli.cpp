#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "msqg/cli.hpp"
#include "msqg/decoding.hpp"
#include "msqg/seq2seq.hpp"
#include "msqg/text.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string err;
};

CliResult run(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.emplace_back("msqg");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : full) argv.push_back(a.c_str());
    std::ostringstream captured;
    auto* old = std::cerr.rdbuf(captured.rdbuf());
    const int code = msqg::cli::run_cli(static_cast<int>(argv.size()), argv.data());
    std::cerr.rdbuf(old);
    return {code, captured.str()};
}

struct TmpDir {
    fs::path path;
    explicit TmpDir(const std::string& tag) : path(fs::temp_directory_path() / ("msqg_cli_" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TmpDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string str(const std::string& rel) const { return (path / rel).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << content;
}

std::vector<std::vector<std::string>> read_tsv(const std::string& path) {
    std::istringstream in(slurp(path));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cols;
        size_t at = 0;
        while (true) {
            const auto tab = line.find('\t', at);
            cols.push_back(line.substr(at, tab == std::string::npos ? tab : tab - at));
            if (tab == std::string::npos) break;
            at = tab + 1;
        }
        rows.push_back(std::move(cols));
    }
    return rows;
}

// small corpus: every instance carries one selected passage so training
// pairs exist, and every token is private to its instance
void write_tiny_dataset(const std::string& path, int n_instances) {
    std::ofstream out(path, std::ios::binary);
    for (int i = 0; i < n_instances; ++i) {
        nlohmann::json j;
        j["query_id"] = "q" + std::to_string(i);
        j["query"] = "what is term" + std::to_string(i);
        nlohmann::json ps = nlohmann::json::array();
        nlohmann::json p1;
        p1["text"] = "term" + std::to_string(i) + " appears with filler" + std::to_string(i) +
                     " and common words";
        p1["is_selected"] = true;
        ps.push_back(p1);
        nlohmann::json p2;
        p2["text"] = "extra" + std::to_string(i) + " unselected text";
        p2["is_selected"] = false;
        ps.push_back(p2);
        j["passages"] = ps;
        out << j.dump() << "\n";
    }
}

// ten passages per instance so evaluation sets can be assembled
void write_eval_dataset(const std::string& path, int n_instances) {
    std::ofstream out(path, std::ios::binary);
    for (int i = 0; i < n_instances; ++i) {
        nlohmann::json j;
        j["query_id"] = "q" + std::to_string(i);
        j["query"] = "what about inst" + std::to_string(i);
        nlohmann::json ps = nlohmann::json::array();
        for (int k = 0; k < 10; ++k) {
            nlohmann::json p;
            p["text"] = "inst" + std::to_string(i) + " passage" + std::to_string(k) +
                        " body" + std::to_string(i * 10 + k);
            p["is_selected"] = k == 0;
            ps.push_back(p);
        }
        j["passages"] = ps;
        out << j.dump() << "\n";
    }
}

const std::vector<std::string> kTrainTiny = {
    "--min-freq", "1", "--embed-dim", "8", "--enc-hidden", "8",
    "--batch", "2", "--lr", "0.01"};

void train_tiny(const std::string& dataset, const std::string& out_dir, int epochs,
                unsigned seed = 7) {
    std::vector<std::string> args = {"train", "--dataset", dataset, "--output-dir",
                                     out_dir, "--epochs", std::to_string(epochs),
                                     "--seed", std::to_string(seed)};
    args.insert(args.end(), kTrainTiny.begin(), kTrainTiny.end());
    const auto r = run(args);
    REQUIRE_MESSAGE(r.code == 0, r.err);
}

}  // namespace

TEST_CASE("cli rejects malformed invocations with exit code 2") {
    TmpDir tmp("badinvoke");
    write_tiny_dataset(tmp.str("ds.jsonl"), 2);

    SUBCASE("missing dataset path is a config error naming the path") {
        const auto r = run({"train", "--dataset", tmp.str("absent.jsonl"), "--output-dir",
                            tmp.str("out")});
        CHECK(r.code == 2);
        CHECK(r.err.find(tmp.str("absent.jsonl")) != std::string::npos);
    }
    SUBCASE("no subcommand") {
        const auto r = run({});
        CHECK(r.code == 2);
    }
    SUBCASE("unknown flag") {
        const auto r = run({"train", "--bogus", "3"});
        CHECK(r.code == 2);
    }
    SUBCASE("unknown method") {
        train_tiny(tmp.str("ds.jsonl"), tmp.str("model"), 0);
        const auto r = run({"generate", "--dataset", tmp.str("ds.jsonl"), "--model-dir",
                            tmp.str("model"), "--method", "beam_search", "--output-dir",
                            tmp.str("out")});
        CHECK(r.code == 2);
        CHECK(r.err.find("beam_search") != std::string::npos);
    }
    SUBCASE("out-of-range setting") {
        const auto r = run({"train", "--dataset", tmp.str("ds.jsonl"), "--output-dir",
                            tmp.str("out"), "--batch", "0"});
        CHECK(r.code == 2);
    }
}

TEST_CASE("cli config files merge under explicit flags") {
    TmpDir tmp("config");
    write_tiny_dataset(tmp.str("ds.jsonl"), 2);

    SUBCASE("unknown key is rejected with its location") {
        spit(tmp.str("bad.cfg"), "bogus_key = 3\n");
        const auto r = run({"train", "--config", tmp.str("bad.cfg"), "--dataset",
                            tmp.str("ds.jsonl"), "--output-dir", tmp.str("out")});
        CHECK(r.code == 2);
        CHECK(r.err.find("bad.cfg:1") != std::string::npos);
        CHECK(r.err.find("bogus_key") != std::string::npos);
    }
    SUBCASE("non-numeric value for a numeric key") {
        spit(tmp.str("bad.cfg"), "epochs = soon\n");
        const auto r = run({"train", "--config", tmp.str("bad.cfg"), "--dataset",
                            tmp.str("ds.jsonl"), "--output-dir", tmp.str("out")});
        CHECK(r.code == 2);
    }
    SUBCASE("missing config file") {
        const auto r = run({"train", "--config", tmp.str("absent.cfg"), "--dataset",
                            tmp.str("ds.jsonl"), "--output-dir", tmp.str("out")});
        CHECK(r.code == 2);
    }
    SUBCASE("config supplies values, flags override them") {
        spit(tmp.str("run.cfg"),
             "# comment line\n\nepochs = 3\nlr = 0.01\nmin_freq = 1\n"
             "embed_dim = 4\nenc_hidden = 4\nbatch = 2\n");
        auto r = run({"train", "--config", tmp.str("run.cfg"), "--dataset",
                      tmp.str("ds.jsonl"), "--output-dir", tmp.str("cfg_only")});
        REQUIRE_MESSAGE(r.code == 0, r.err);
        CHECK(read_tsv(tmp.str("cfg_only/loss_trace.tsv")).size() == 4);

        r = run({"train", "--config", tmp.str("run.cfg"), "--dataset", tmp.str("ds.jsonl"),
                 "--output-dir", tmp.str("flag_wins"), "--epochs", "0"});
        REQUIRE_MESSAGE(r.code == 0, r.err);
        CHECK(read_tsv(tmp.str("flag_wins/loss_trace.tsv")).size() == 1);
    }
}

TEST_CASE("cli train writes a loadable model directory") {
    TmpDir tmp("train");
    write_tiny_dataset(tmp.str("ds.jsonl"), 3);
    train_tiny(tmp.str("ds.jsonl"), tmp.str("model"), 0);

    CHECK(fs::exists(tmp.str("model/model.ckpt")));
    CHECK(fs::exists(tmp.str("model/vocab.txt")));
    const auto trace = read_tsv(tmp.str("model/loss_trace.tsv"));
    REQUIRE(trace.size() == 1);
    CHECK(trace[0] == std::vector<std::string>{"epoch", "mean_loss"});

    const auto model = msqg::s2s::load_checkpoint(tmp.str("model/model.ckpt"));
    const auto vocab = msqg::text::Vocabulary::load(tmp.str("model/vocab.txt"));
    CHECK(model.cfg.vocab_size == vocab.size());
    CHECK(model.cfg.embed_dim == 8);
    CHECK(model.cfg.enc_hidden == 8);

    SUBCASE("two epochs append two trace rows") {
        train_tiny(tmp.str("ds.jsonl"), tmp.str("model2"), 2);
        const auto t2 = read_tsv(tmp.str("model2/loss_trace.tsv"));
        REQUIRE(t2.size() == 3);
        CHECK(t2[1][0] == "1");
        CHECK(t2[2][0] == "2");
        CHECK(std::stod(t2[1][1]) > 0.0);
    }
}

TEST_CASE("cli train is byte-identical across reruns") {
    TmpDir tmp("determinism");
    write_tiny_dataset(tmp.str("ds.jsonl"), 3);
    train_tiny(tmp.str("ds.jsonl"), tmp.str("a"), 2);
    train_tiny(tmp.str("ds.jsonl"), tmp.str("b"), 2);
    CHECK(slurp(tmp.str("a/model.ckpt")) == slurp(tmp.str("b/model.ckpt")));
    CHECK(slurp(tmp.str("a/vocab.txt")) == slurp(tmp.str("b/vocab.txt")));
    CHECK(slurp(tmp.str("a/loss_trace.tsv")) == slurp(tmp.str("b/loss_trace.tsv")));

    train_tiny(tmp.str("ds.jsonl"), tmp.str("c"), 2, 8);
    CHECK(slurp(tmp.str("a/model.ckpt")) != slurp(tmp.str("c/model.ckpt")));
}

TEST_CASE("cli generate emits every method sorted by query then method") {
    TmpDir tmp("generate");
    write_tiny_dataset(tmp.str("ds.jsonl"), 2);
    train_tiny(tmp.str("ds.jsonl"), tmp.str("model"), 0);
    const auto r = run({"generate", "--dataset", tmp.str("ds.jsonl"), "--model-dir",
                        tmp.str("model"), "--method", "all", "--output-dir",
                        tmp.str("out"), "--beam", "2"});
    REQUIRE_MESSAGE(r.code == 0, r.err);

    const auto rows = read_tsv(tmp.str("out/generations.tsv"));
    REQUIRE(rows.size() == 17);
    CHECK(rows[0] == std::vector<std::string>{"query_id", "method", "question"});
    const std::vector<std::string> methods_sorted = {
        "mesd",         "msqg",    "msqg_max",           "msqg_mult",
        "msqg_sharedh", "msqg_sharedh_rmrep", "s2s",     "s2s_rmrep"};
    for (int i = 0; i < 16; ++i) {
        const auto& row = rows[1 + i];
        REQUIRE(row.size() == 3);
        CHECK(row[0] == (i < 8 ? "q0" : "q1"));
        CHECK(row[1] == methods_sorted[i % 8]);
    }

    const auto uniq = read_tsv(tmp.str("out/uniqueness.tsv"));
    REQUIRE(uniq.size() == 9);
    CHECK(uniq[0] == std::vector<std::string>{"method", "unique", "total", "pct_unique"});
    for (int i = 0; i < 8; ++i) {
        CHECK(uniq[1 + i][0] == methods_sorted[i]);
        CHECK(uniq[1 + i][2] == "2");
    }
}

TEST_CASE("cli generate on a single passage matches the library greedy decoder") {
    TmpDir tmp("single");
    nlohmann::json inst;
    inst["query_id"] = "q0";
    inst["query"] = "what is alpha";
    nlohmann::json p;
    p["text"] = "alpha beta gamma delta epsilon";
    p["is_selected"] = true;
    inst["passages"] = nlohmann::json::array({p});
    spit(tmp.str("ds.jsonl"), inst.dump() + "\n");
    train_tiny(tmp.str("ds.jsonl"), tmp.str("model"), 0);
    const auto r = run({"generate", "--dataset", tmp.str("ds.jsonl"), "--model-dir",
                        tmp.str("model"), "--method", "msqg", "--output-dir",
                        tmp.str("out")});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto rows = read_tsv(tmp.str("out/generations.tsv"));
    REQUIRE(rows.size() == 2);

    const auto model = msqg::s2s::load_checkpoint(tmp.str("model/model.ckpt"));
    const auto vocab = msqg::text::Vocabulary::load(tmp.str("model/vocab.txt"));
    const auto doc = vocab.encode(msqg::text::tokenize("alpha beta gamma delta epsilon"));
    const auto greedy = msqg::decoding::greedy_decode(model, vocab, doc);
    CHECK(rows[1][2] == greedy.text);
}

TEST_CASE("cli pipeline runs end to end over a ten-passage corpus") {
    TmpDir tmp("pipeline");
    write_eval_dataset(tmp.str("ds.jsonl"), 3);
    train_tiny(tmp.str("ds.jsonl"), tmp.str("model"), 1);

    auto r = run({"generate", "--dataset", tmp.str("ds.jsonl"), "--model-dir",
                  tmp.str("model"), "--method", "msqg,s2s", "--output-dir", tmp.str("gen"),
                  "--beam", "2"});
    REQUIRE_MESSAGE(r.code == 0, r.err);

    r = run({"build-evalsets", "--generations", tmp.str("gen/generations.tsv"),
             "--dataset", tmp.str("ds.jsonl"), "--pool", tmp.str("ds.jsonl"),
             "--output-dir", tmp.str("sets")});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    {
        std::istringstream lines(slurp(tmp.str("sets/evalsets.jsonl")));
        std::string line;
        int n = 0;
        while (std::getline(lines, line)) {
            const auto j = nlohmann::json::parse(line);
            CHECK(j["sources"].size() == 10);
            // the pool is the dataset itself, so only 20 foreign passages exist
            CHECK(j["small_pool"].get<bool>());
            CHECK(j["distractors"].size() == 20);
            for (const auto& d : j["distractors"]) {
                CHECK(d.get<std::string>().find(
                          "inst" + j["query_id"].get<std::string>().substr(1) + " ") ==
                      std::string::npos);
            }
            ++n;
        }
        CHECK(n == 6);
    }

    r = run({"evaluate", "--evalsets", tmp.str("sets/evalsets.jsonl"), "--scorer",
             "oracle", "--output-dir", tmp.str("eval"), "--significance"});
    REQUIRE_MESSAGE(r.code == 0, r.err);

    const auto per_set = read_tsv(tmp.str("eval/per_set.tsv"));
    REQUIRE(per_set.size() == 7);
    CHECK(per_set[0] == std::vector<std::string>{"query_id", "method", "rank", "mrr",
                                                 "mrr_at_10", "ndcg"});
    for (int i = 1; i <= 6; ++i) {
        CHECK(per_set[i][2] == "1");
        CHECK(per_set[i][3] == "1");
        CHECK(per_set[i][4] == "1");
        CHECK(per_set[i][5] == "1");
    }

    const auto report = read_tsv(tmp.str("eval/report.tsv"));
    REQUIRE(report.size() == 3);
    CHECK(report[1][0] == "msqg");
    CHECK(report[2][0] == "s2s");
    for (int i = 1; i <= 2; ++i) {
        CHECK(report[i][1] == "3");
        CHECK(report[i][2] == "1");
        CHECK(report[i][3] == "1");
        CHECK(report[i][4] == "1");
    }

    // identical per-method MRR vectors are a fully tied pool
    const auto sig = read_tsv(tmp.str("eval/significance.tsv"));
    REQUIRE(sig.size() == 2);
    CHECK(sig[1][0] == "msqg");
    CHECK(sig[1][1] == "s2s");
    CHECK(sig[1][4] == "1");

    SUBCASE("evaluation reruns and worker counts are byte-identical") {
        auto rr = run({"evaluate", "--evalsets", tmp.str("sets/evalsets.jsonl"),
                       "--scorer", "oracle", "--output-dir", tmp.str("eval2"),
                       "--significance"});
        REQUIRE_MESSAGE(rr.code == 0, rr.err);
        CHECK(slurp(tmp.str("eval/per_set.tsv")) == slurp(tmp.str("eval2/per_set.tsv")));
        CHECK(slurp(tmp.str("eval/report.tsv")) == slurp(tmp.str("eval2/report.tsv")));
        CHECK(slurp(tmp.str("eval/significance.tsv")) ==
              slurp(tmp.str("eval2/significance.tsv")));

        rr = run({"evaluate", "--evalsets", tmp.str("sets/evalsets.jsonl"), "--scorer",
                  "bm25", "--output-dir", tmp.str("w1"), "--workers", "1"});
        REQUIRE_MESSAGE(rr.code == 0, rr.err);
        rr = run({"evaluate", "--evalsets", tmp.str("sets/evalsets.jsonl"), "--scorer",
                  "bm25", "--output-dir", tmp.str("w4"), "--workers", "4"});
        REQUIRE_MESSAGE(rr.code == 0, rr.err);
        CHECK(slurp(tmp.str("w1/per_set.tsv")) == slurp(tmp.str("w4/per_set.tsv")));
        CHECK(slurp(tmp.str("w1/report.tsv")) == slurp(tmp.str("w4/report.tsv")));
    }

    SUBCASE("random scorer is reproducible under a fixed seed") {
        auto rr = run({"evaluate", "--evalsets", tmp.str("sets/evalsets.jsonl"),
                       "--scorer", "random", "--seed", "5", "--output-dir", tmp.str("r1")});
        REQUIRE_MESSAGE(rr.code == 0, rr.err);
        rr = run({"evaluate", "--evalsets", tmp.str("sets/evalsets.jsonl"), "--scorer",
                  "random", "--seed", "5", "--output-dir", tmp.str("r2")});
        REQUIRE_MESSAGE(rr.code == 0, rr.err);
        CHECK(slurp(tmp.str("r1/per_set.tsv")) == slurp(tmp.str("r2/per_set.tsv")));
    }

    SUBCASE("analyses consume the evaluation sets") {
        auto rr = run({"analyze", "cluster", "--evalsets", tmp.str("sets/evalsets.jsonl"),
                       "--threshold", "0", "--output-dir", tmp.str("cl")});
        REQUIRE_MESSAGE(rr.code == 0, rr.err);
        const auto clusters = read_tsv(tmp.str("cl/clusters.tsv"));
        REQUIRE(clusters.size() == 7);
        // msqg and s2s sets for one query share sources, so they merge at
        // distance zero; distinct queries stay apart at threshold zero
        std::set<std::string> labels;
        for (int i = 1; i <= 6; ++i) labels.insert(clusters[i][2]);
        CHECK(labels.size() == 3);
        const auto dendro = read_tsv(tmp.str("cl/dendrogram.tsv"));
        CHECK(dendro.size() == 6);
        const auto curve = read_tsv(tmp.str("cl/curve.tsv"));
        REQUIRE(curve.size() == 6);
        CHECK(curve[1][1] == "5");
        CHECK(curve[5][1] == "1");

        rr = run({"analyze", "similarity", "--evalsets", tmp.str("sets/evalsets.jsonl"),
                  "--output-dir", tmp.str("sim")});
        REQUIRE_MESSAGE(rr.code == 0, rr.err);
        const auto sim = read_tsv(tmp.str("sim/similarity.tsv"));
        REQUIRE(sim.size() == 7);
        for (int i = 1; i <= 6; ++i) {
            const double v = std::stod(sim[i][2]);
            CHECK(v > 0.0);
            CHECK(v <= 1.0);
            CHECK(sim[i][3] == "0");
        }

        rr = run({"analyze", "attention-ols", "--dataset", tmp.str("ds.jsonl"),
                  "--model-dir", tmp.str("model"), "--output-dir", tmp.str("att")});
        REQUIRE_MESSAGE(rr.code == 0, rr.err);
        const auto att = read_tsv(tmp.str("att/attention_ols.tsv"));
        REQUIRE(att.size() == 2);
        CHECK(att[0][0] == "slope");
        const double slope = std::stod(att[1][0]);
        const double lo = std::stod(att[1][1]);
        const double hi = std::stod(att[1][2]);
        CHECK(lo <= slope);
        CHECK(slope <= hi);
        CHECK(std::stoi(att[1][6]) > 0);
    }
}

TEST_CASE("cli build-evalsets rejects instances without exactly ten passages") {
    TmpDir tmp("tensources");
    write_tiny_dataset(tmp.str("ds.jsonl"), 1);
    spit(tmp.str("gen.tsv"), "query_id\tmethod\tquestion\nq0\tmsqg\twhat is term0\n");
    const auto r = run({"build-evalsets", "--generations", tmp.str("gen.tsv"),
                        "--dataset", tmp.str("ds.jsonl"), "--pool", tmp.str("ds.jsonl"),
                        "--output-dir", tmp.str("out")});
    CHECK(r.code == 2);
}

TEST_CASE("cli build-evalsets rejects unknown query ids and bad headers") {
    TmpDir tmp("badgen");
    write_eval_dataset(tmp.str("ds.jsonl"), 1);
    SUBCASE("unknown query id") {
        spit(tmp.str("gen.tsv"), "query_id\tmethod\tquestion\nq9\tmsqg\tsomething\n");
        const auto r = run({"build-evalsets", "--generations", tmp.str("gen.tsv"),
                            "--dataset", tmp.str("ds.jsonl"), "--pool", tmp.str("ds.jsonl"),
                            "--output-dir", tmp.str("out")});
        CHECK(r.code == 3);
        CHECK(r.err.find("q9") != std::string::npos);
    }
    SUBCASE("wrong header") {
        spit(tmp.str("gen.tsv"), "id\tmethod\tquestion\nq0\tmsqg\tsomething\n");
        const auto r = run({"build-evalsets", "--generations", tmp.str("gen.tsv"),
                            "--dataset", tmp.str("ds.jsonl"), "--pool", tmp.str("ds.jsonl"),
                            "--output-dir", tmp.str("out")});
        CHECK(r.code == 3);
    }
    SUBCASE("wrong column count") {
        spit(tmp.str("gen.tsv"), "query_id\tmethod\tquestion\nq0\tmsqg\n");
        const auto r = run({"build-evalsets", "--generations", tmp.str("gen.tsv"),
                            "--dataset", tmp.str("ds.jsonl"), "--pool", tmp.str("ds.jsonl"),
                            "--output-dir", tmp.str("out")});
        CHECK(r.code == 3);
    }
}

TEST_CASE("cli similarity reports unity for identical source passages") {
    TmpDir tmp("simident");
    nlohmann::json j;
    j["query_id"] = "s1";
    j["method"] = "msqg";
    j["question"] = "anything";
    j["small_pool"] = false;
    j["sources"] = nlohmann::json::array();
    for (int i = 0; i < 10; ++i) j["sources"].push_back("same tokens everywhere");
    j["distractors"] = nlohmann::json::array();
    spit(tmp.str("sets.jsonl"), j.dump() + "\n");

    const auto r = run({"analyze", "similarity", "--evalsets", tmp.str("sets.jsonl"),
                        "--output-dir", tmp.str("out")});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto sim = read_tsv(tmp.str("out/similarity.tsv"));
    REQUIRE(sim.size() == 2);
    CHECK(sim[1][0] == "s1");
    CHECK(std::stod(sim[1][2]) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(sim[1][3] == "0");
}

TEST_CASE("cli evaluate rejects malformed evaluation sets") {
    TmpDir tmp("badsets");
    SUBCASE("missing field") {
        spit(tmp.str("sets.jsonl"), "{\"query_id\": \"a\"}\n");
        const auto r = run({"evaluate", "--evalsets", tmp.str("sets.jsonl"),
                            "--output-dir", tmp.str("out")});
        CHECK(r.code == 3);
    }
    SUBCASE("not json") {
        spit(tmp.str("sets.jsonl"), "not json at all\n");
        const auto r = run({"evaluate", "--evalsets", tmp.str("sets.jsonl"),
                            "--output-dir", tmp.str("out")});
        CHECK(r.code == 3);
    }
    SUBCASE("empty file") {
        spit(tmp.str("sets.jsonl"), "");
        const auto r = run({"evaluate", "--evalsets", tmp.str("sets.jsonl"),
                            "--output-dir", tmp.str("out")});
        CHECK(r.code == 3);
    }
}
