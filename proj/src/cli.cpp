#include "msqg/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "msqg/decoding.hpp"
#include "msqg/errors.hpp"
#include "msqg/retrieval.hpp"
#include "msqg/seq2seq.hpp"
#include "msqg/stats.hpp"
#include "msqg/text.hpp"

namespace msqg::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kMethods = {
    "s2s",      "s2s_rmrep", "mesd",         "msqg",
    "msqg_mult", "msqg_max",  "msqg_sharedh", "msqg_sharedh_rmrep"};

struct Settings {
    std::string dataset;
    std::string pool;
    std::string generations;
    std::string evalsets;
    std::string model_dir;
    std::string output_dir = ".";
    int max_vocab = 20000;
    int min_freq = 2;
    int embed_dim = 128;
    int enc_hidden = 256;
    int max_source_len = 512;
    int epochs = 10;
    int batch = 16;
    double lr = 2e-5;
    unsigned seed = 42;
    double clip = 5.0;
    std::string method = "all";
    int beam = 5;
    int max_len = 25;
    double k1 = 1.2;
    double b = 0.75;
    int workers = 1;
    std::string scorer = "bm25";
    std::string linkage = "average";
    double threshold = 0.5;
    bool significance = false;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const int out = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for '" + key + "': " + v);
    }
}

unsigned parse_unsigned(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const unsigned long out = std::stoul(v, &pos);
        if (pos != v.size() || out > 0xffffffffUL) throw std::invalid_argument(v);
        return static_cast<unsigned>(out);
    } catch (const std::exception&) {
        throw ConfigError("config: bad unsigned for '" + key + "': " + v);
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for '" + key + "': " + v);
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("config: bad boolean for '" + key + "': " + v);
}

std::string identity(const std::string&, const std::string& v) { return v; }

// ties config keys to flags; a key from the file applies only when none of
// its flags appeared on the command line
struct Binder {
    std::map<std::string, std::function<void(const std::string&)>> setters;
    std::map<std::string, std::vector<CLI::Option*>> options;

    bool flag_given(const std::string& key) const {
        auto it = options.find(key);
        if (it == options.end()) return false;
        for (const auto* o : it->second) {
            if (o->count() > 0) return true;
        }
        return false;
    }
};

template <typename T, typename Parse>
void bind_key(Binder& b, std::initializer_list<CLI::App*> cmds, const std::string& key,
              const std::string& flag, T& field, const std::string& desc, Parse parse) {
    b.setters[key] = [&field, key, parse](const std::string& v) { field = parse(key, v); };
    for (CLI::App* cmd : cmds) {
        b.options[key].push_back(cmd->add_option(flag, field, desc));
    }
}

void bind_flag(Binder& b, std::initializer_list<CLI::App*> cmds, const std::string& key,
               const std::string& flag, bool& field, const std::string& desc) {
    b.setters[key] = [&field, key](const std::string& v) { field = parse_bool(key, v); };
    for (CLI::App* cmd : cmds) {
        b.options[key].push_back(cmd->add_flag(flag, field, desc));
    }
}

std::string trim(const std::string& s) {
    size_t a = 0;
    size_t z = s.size();
    while (a < z && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (z > a && std::isspace(static_cast<unsigned char>(s[z - 1]))) --z;
    return s.substr(a, z - a);
}

void apply_config(const std::string& path, const Binder& b) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
    std::ifstream in(path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        const std::string where = path + ":" + std::to_string(lineno);
        if (eq == std::string::npos) throw ConfigError(where + ": expected key=value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        auto it = b.setters.find(key);
        if (it == b.setters.end()) {
            throw ConfigError(where + ": unknown key '" + key + "'");
        }
        if (b.flag_given(key)) continue;
        it->second(value);
    }
}

void validate(const Settings& s) {
    if (s.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (s.batch < 1) throw ConfigError("batch must be >= 1");
    if (s.beam < 1) throw ConfigError("beam must be >= 1");
    if (s.max_len < 1) throw ConfigError("max_len must be >= 1");
    if (s.embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
    if (s.enc_hidden < 1) throw ConfigError("enc_hidden must be >= 1");
    if (s.max_source_len < 1) throw ConfigError("max_source_len must be >= 1");
    if (s.max_vocab <= text::kNumReserved) {
        throw ConfigError("max_vocab must exceed the reserved entries");
    }
    if (s.min_freq < 1) throw ConfigError("min_freq must be >= 1");
    if (!(s.lr > 0.0)) throw ConfigError("lr must be positive");
    if (!(s.k1 > 0.0)) throw ConfigError("k1 must be positive");
    if (s.b < 0.0 || s.b > 1.0) throw ConfigError("b must lie in [0,1]");
    if (s.workers < 1) throw ConfigError("workers must be >= 1");
    if (s.threshold < 0.0) throw ConfigError("threshold must be >= 0");
    if (s.linkage != "max" && s.linkage != "average") {
        throw ConfigError("linkage must be max or average");
    }
    if (s.scorer != "bm25" && s.scorer != "oracle" && s.scorer != "random") {
        throw ConfigError("scorer must be bm25, oracle, or random");
    }
}

std::vector<std::string> parse_methods(const std::string& spec) {
    if (spec == "all") return kMethods;
    std::vector<std::string> out;
    std::set<std::string> seen;
    size_t at = 0;
    while (at <= spec.size()) {
        const auto comma = spec.find(',', at);
        const std::string piece =
            trim(spec.substr(at, comma == std::string::npos ? comma : comma - at));
        if (piece.empty()) throw ConfigError("empty method name in: " + spec);
        if (std::find(kMethods.begin(), kMethods.end(), piece) == kMethods.end()) {
            throw ConfigError("unknown method: " + piece);
        }
        if (seen.insert(piece).second) out.push_back(piece);
        if (comma == std::string::npos) break;
        at = comma + 1;
    }
    return out;
}

void require_file(const std::string& path, const char* what) {
    if (path.empty()) throw ConfigError(std::string(what) + " path not set");
    if (!fs::exists(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write " + p.string());
    return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

int cmd_train(const Settings& s) {
    require_file(s.dataset, "dataset");
    const auto data = text::load_dataset(s.dataset);

    // the vocabulary covers exactly the text the pairs train on
    std::vector<std::vector<std::string>> corpus;
    for (const auto& inst : data) {
        for (const auto& p : inst.passages) {
            if (p.is_selected) {
                corpus.push_back(p.tokens);
                corpus.push_back(inst.query);
                break;
            }
        }
    }
    const auto vocab = text::Vocabulary::build(corpus, s.max_vocab, s.min_freq);
    const auto pairs = text::make_training_pairs(data, vocab);

    s2s::Seq2SeqConfig mc;
    mc.vocab_size = vocab.size();
    mc.embed_dim = s.embed_dim;
    mc.enc_hidden = s.enc_hidden;
    mc.max_source_len = s.max_source_len;
    std::mt19937 rng(s.seed);
    s2s::Seq2SeqModel model(mc, rng);

    s2s::TrainConfig tc;
    tc.epochs = s.epochs;
    tc.batch_size = s.batch;
    tc.seed = s.seed;
    tc.adam.lr = static_cast<float>(s.lr);
    tc.adam.clip_norm = static_cast<float>(s.clip);
    const auto trace = s2s::train(model, pairs, tc);

    fs::create_directories(s.output_dir);
    s2s::save_checkpoint(model, (fs::path(s.output_dir) / "model.ckpt").string());
    vocab.save((fs::path(s.output_dir) / "vocab.txt").string());
    auto out = open_out(fs::path(s.output_dir) / "loss_trace.tsv");
    out << "epoch\tmean_loss\n";
    for (size_t e = 0; e < trace.size(); ++e) {
        out << (e + 1) << "\t" << fmt(trace[e]) << "\n";
    }
    return 0;
}

struct LoadedModel {
    s2s::Seq2SeqModel model;
    text::Vocabulary vocab;
};

LoadedModel load_model_dir(const std::string& dir) {
    require_file(dir, "model dir");
    const auto ckpt = fs::path(dir) / "model.ckpt";
    const auto voc = fs::path(dir) / "vocab.txt";
    if (!fs::exists(ckpt)) throw ConfigError("checkpoint not found: " + ckpt.string());
    if (!fs::exists(voc)) throw ConfigError("vocabulary not found: " + voc.string());
    LoadedModel lm{s2s::load_checkpoint(ckpt.string()), text::Vocabulary::load(voc.string())};
    if (lm.model.cfg.vocab_size != lm.vocab.size()) {
        throw DataError("vocabulary size " + std::to_string(lm.vocab.size()) +
                        " does not match checkpoint " +
                        std::to_string(lm.model.cfg.vocab_size));
    }
    return lm;
}

decoding::GeneratedQuestion run_method(const s2s::Seq2SeqModel& m,
                                       const text::Vocabulary& vocab,
                                       const std::vector<std::vector<int>>& docs,
                                       const std::string& method, int beam,
                                       int max_len) {
    using decoding::AggregateMode;
    if (method == "s2s") return decoding::concat_decode(m, vocab, docs, beam, max_len, false);
    if (method == "s2s_rmrep") return decoding::concat_decode(m, vocab, docs, beam, max_len, true);
    if (method == "mesd") return decoding::mesd_decode(m, vocab, docs, max_len);
    decoding::MsqgOptions opt;
    opt.max_len = max_len;
    if (method == "msqg") {
    } else if (method == "msqg_mult") {
        opt.aggregate_mode = AggregateMode::Mult;
    } else if (method == "msqg_max") {
        opt.aggregate_mode = AggregateMode::Max;
    } else if (method == "msqg_sharedh") {
        opt.sharedh = true;
    } else if (method == "msqg_sharedh_rmrep") {
        opt.sharedh = true;
        opt.rmrep = true;
    } else {
        throw ConfigError("unknown method: " + method);
    }
    return decoding::msqg_decode(m, vocab, docs, opt);
}

int cmd_generate(const Settings& s) {
    const auto methods = parse_methods(s.method);
    auto lm = load_model_dir(s.model_dir);
    require_file(s.dataset, "dataset");
    auto data = text::load_dataset(s.dataset);
    if (data.empty()) throw DataError("no instances in " + s.dataset);

    struct Row {
        std::string query_id, method, question;
    };
    std::vector<Row> rows;
    for (const auto& inst : data) {
        std::vector<std::vector<int>> docs;
        for (const auto& p : inst.passages) docs.push_back(lm.vocab.encode(p.tokens));
        for (const auto& method : methods) {
            rows.push_back(
                {inst.query_id, method,
                 run_method(lm.model, lm.vocab, docs, method, s.beam, s.max_len).text});
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return std::tie(a.query_id, a.method) < std::tie(b.query_id, b.method);
    });

    fs::create_directories(s.output_dir);
    auto out = open_out(fs::path(s.output_dir) / "generations.tsv");
    out << "query_id\tmethod\tquestion\n";
    for (const auto& r : rows) {
        out << r.query_id << "\t" << r.method << "\t" << r.question << "\n";
    }

    std::map<std::string, std::pair<std::set<std::string>, int>> uniq;
    for (const auto& r : rows) {
        auto& u = uniq[r.method];
        u.first.insert(r.question);
        ++u.second;
    }
    auto uout = open_out(fs::path(s.output_dir) / "uniqueness.tsv");
    uout << "method\tunique\ttotal\tpct_unique\n";
    for (const auto& [method, u] : uniq) {
        uout << method << "\t" << u.first.size() << "\t" << u.second << "\t"
             << fmt(100.0 * static_cast<double>(u.first.size()) / u.second) << "\n";
    }
    return 0;
}

struct GenRow {
    std::string query_id, method, question;
};

std::vector<GenRow> read_generations(const std::string& path) {
    require_file(path, "generations");
    std::ifstream in(path);
    std::string line;
    auto chomp = [](std::string& l) {
        if (!l.empty() && l.back() == '\r') l.pop_back();
    };
    if (!std::getline(in, line)) throw DataError("empty generations file: " + path);
    chomp(line);
    if (line != "query_id\tmethod\tquestion") {
        throw DataError(path + ": unexpected header: " + line);
    }
    std::vector<GenRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        chomp(line);
        if (line.empty()) continue;
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 3 columns");
        }
        rows.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1),
                        line.substr(t2 + 1)});
    }
    return rows;
}

int cmd_build_evalsets(const Settings& s) {
    auto gens = read_generations(s.generations);
    if (gens.empty()) throw DataError("no generation rows in " + s.generations);
    require_file(s.dataset, "dataset");
    const auto data = text::load_dataset(s.dataset);
    std::map<std::string, const text::DataInstance*> by_id;
    for (const auto& inst : data) by_id.emplace(inst.query_id, &inst);

    require_file(s.pool, "pool");
    const auto pool_data = text::load_dataset(s.pool);
    std::vector<std::vector<std::string>> pool;
    for (const auto& inst : pool_data) {
        for (const auto& p : inst.passages) pool.push_back(p.tokens);
    }
    const retrieval::Bm25Index index(pool, {s.k1, s.b});

    std::sort(gens.begin(), gens.end(), [](const GenRow& a, const GenRow& b) {
        return std::tie(a.query_id, a.method) < std::tie(b.query_id, b.method);
    });
    fs::create_directories(s.output_dir);
    auto out = open_out(fs::path(s.output_dir) / "evalsets.jsonl");
    for (const auto& g : gens) {
        auto it = by_id.find(g.query_id);
        if (it == by_id.end()) throw DataError("query_id not in dataset: " + g.query_id);
        std::vector<std::vector<std::string>> sources;
        for (const auto& p : it->second->passages) sources.push_back(p.tokens);
        decoding::GeneratedQuestion q;
        q.text = g.question;
        auto set = retrieval::build_eval_set(sources, q, index, pool);

        nlohmann::json j;
        j["query_id"] = g.query_id;
        j["method"] = g.method;
        j["question"] = g.question;
        j["small_pool"] = set.small_pool;
        std::vector<std::string> texts;
        for (const auto& p : set.source_passages) texts.push_back(join_tokens(p));
        j["sources"] = texts;
        texts.clear();
        for (const auto& p : set.distractors) texts.push_back(join_tokens(p));
        j["distractors"] = texts;
        out << j.dump() << "\n";
    }
    return 0;
}

struct NamedSet {
    std::string method;
    retrieval::EvaluationSet set;
};

std::vector<NamedSet> read_evalsets(const std::string& path) {
    require_file(path, "evalsets");
    std::ifstream in(path);
    std::string line;
    std::vector<NamedSet> sets;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw DataError(where + ": bad json");
        auto need = [&](const char* key) -> const nlohmann::json& {
            auto f = j.find(key);
            if (f == j.end()) throw DataError(where + ": missing " + key);
            return *f;
        };
        NamedSet ns;
        const auto& qid = need("query_id");
        const auto& method = need("method");
        const auto& question = need("question");
        const auto& small = need("small_pool");
        const auto& sources = need("sources");
        const auto& distractors = need("distractors");
        if (!qid.is_string() || !method.is_string() || !question.is_string() ||
            !small.is_boolean() || !sources.is_array() || !distractors.is_array()) {
            throw DataError(where + ": wrong field type");
        }
        ns.set.query_id = qid.get<std::string>();
        ns.method = method.get<std::string>();
        ns.set.question.text = question.get<std::string>();
        ns.set.small_pool = small.get<bool>();
        for (const auto& t : sources) {
            if (!t.is_string()) throw DataError(where + ": wrong field type");
            ns.set.source_passages.push_back(text::tokenize(t.get<std::string>()));
        }
        for (const auto& t : distractors) {
            if (!t.is_string()) throw DataError(where + ": wrong field type");
            ns.set.distractors.push_back(text::tokenize(t.get<std::string>()));
        }
        sets.push_back(std::move(ns));
    }
    if (sets.empty()) throw DataError("no evaluation sets in " + path);
    std::sort(sets.begin(), sets.end(), [](const NamedSet& a, const NamedSet& b) {
        return std::tie(a.set.query_id, a.method) < std::tie(b.set.query_id, b.method);
    });
    return sets;
}

// the first 10 rows handed to a scorer are always the source passages
class OracleScorer : public retrieval::RelevanceScorer {
  public:
    std::vector<double> score_set(
        const std::vector<std::string>&,
        const std::vector<std::vector<std::string>>& passages) const override {
        std::vector<double> out(passages.size(), 0.1);
        for (size_t i = 0; i < passages.size() && i < 10; ++i) out[i] = 0.9;
        return out;
    }
};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t hash_tokens(const std::vector<std::string>& tokens, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (const auto& t : tokens) {
        for (const char c : t) {
            h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
        }
        h = (h ^ 0x1f) * 0x100000001b3ULL;
    }
    return h;
}

// deterministic per (question, passage, seed), uniform on (0,1)
class HashScorer : public retrieval::RelevanceScorer {
  public:
    explicit HashScorer(unsigned seed) : seed_(seed) {}
    std::vector<double> score_set(
        const std::vector<std::string>& question,
        const std::vector<std::vector<std::string>>& passages) const override {
        const std::uint64_t qh = hash_tokens(question, seed_);
        std::vector<double> out;
        out.reserve(passages.size());
        for (const auto& p : passages) {
            const std::uint64_t h = splitmix64(qh ^ hash_tokens(p, seed_ + 0x51ed));
            out.push_back((static_cast<double>(h >> 11) + 0.5) / 9007199254740992.0);
        }
        return out;
    }

  private:
    unsigned seed_;
};

int cmd_evaluate(const Settings& s) {
    const auto sets = read_evalsets(s.evalsets);
    std::unique_ptr<retrieval::RelevanceScorer> scorer;
    if (s.scorer == "bm25") {
        scorer = std::make_unique<retrieval::Bm25RelevanceScorer>();
    } else if (s.scorer == "oracle") {
        scorer = std::make_unique<OracleScorer>();
    } else {
        scorer = std::make_unique<HashScorer>(s.seed);
    }

    std::vector<retrieval::RetrievalResult> results(sets.size());
    const int workers = std::min<int>(s.workers, static_cast<int>(sets.size()));
    if (workers <= 1) {
        for (size_t i = 0; i < sets.size(); ++i) {
            results[i] = retrieval::score_and_rank(*scorer, sets[i].set);
        }
    } else {
        // results land by index, so the merge ignores scheduling order
        std::atomic<size_t> next{0};
        std::mutex err_mu;
        std::exception_ptr err;
        std::vector<std::thread> threads;
        for (int w = 0; w < workers; ++w) {
            threads.emplace_back([&] {
                while (true) {
                    const size_t i = next.fetch_add(1);
                    if (i >= sets.size()) return;
                    try {
                        results[i] = retrieval::score_and_rank(*scorer, sets[i].set);
                    } catch (...) {
                        const std::lock_guard<std::mutex> lock(err_mu);
                        if (!err) err = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& t : threads) t.join();
        if (err) std::rethrow_exception(err);
    }

    fs::create_directories(s.output_dir);
    auto pout = open_out(fs::path(s.output_dir) / "per_set.tsv");
    pout << "query_id\tmethod\trank\tmrr\tmrr_at_10\tndcg\n";
    for (size_t i = 0; i < sets.size(); ++i) {
        const auto& r = results[i];
        pout << sets[i].set.query_id << "\t" << sets[i].method << "\t"
             << r.rank_of_source << "\t" << fmt(r.mrr) << "\t" << fmt(r.mrr_at_10)
             << "\t" << fmt(r.ndcg) << "\n";
    }

    std::map<std::string, std::vector<size_t>> groups;
    for (size_t i = 0; i < sets.size(); ++i) groups[sets[i].method].push_back(i);
    auto rout = open_out(fs::path(s.output_dir) / "report.tsv");
    rout << "method\tn\tmean_mrr\tmean_mrr_at_10\tmean_ndcg\tpct_unique\n";
    for (const auto& [method, idx] : groups) {
        double mrr = 0.0;
        double mrr10 = 0.0;
        double ndcg = 0.0;
        std::set<std::string> distinct;
        for (const size_t i : idx) {
            mrr += results[i].mrr;
            mrr10 += results[i].mrr_at_10;
            ndcg += results[i].ndcg;
            distinct.insert(sets[i].set.question.text);
        }
        const double n = static_cast<double>(idx.size());
        rout << method << "\t" << idx.size() << "\t" << fmt(mrr / n) << "\t"
             << fmt(mrr10 / n) << "\t" << fmt(ndcg / n) << "\t"
             << fmt(100.0 * static_cast<double>(distinct.size()) / n) << "\n";
    }

    if (s.significance) {
        auto sout = open_out(fs::path(s.output_dir) / "significance.tsv");
        sout << "method_a\tmethod_b\tu\tz\tp\n";
        for (auto a = groups.begin(); a != groups.end(); ++a) {
            for (auto b = std::next(a); b != groups.end(); ++b) {
                std::vector<double> ma, mb;
                for (const size_t i : a->second) ma.push_back(results[i].mrr);
                for (const size_t i : b->second) mb.push_back(results[i].mrr);
                const auto t = stats::mann_whitney_u(ma, mb);
                sout << a->first << "\t" << b->first << "\t" << fmt(t.statistic)
                     << "\t" << fmt(t.z) << "\t" << fmt(t.p_two_sided) << "\n";
            }
        }
    }
    return 0;
}

int cmd_analyze_cluster(const Settings& s) {
    const auto sets = read_evalsets(s.evalsets);
    // one tf-idf fit across every source passage keeps dimensions aligned
    std::vector<std::vector<std::string>> all;
    for (const auto& ns : sets) {
        for (const auto& p : ns.set.source_passages) all.push_back(p);
    }
    const retrieval::TfidfEmbedder emb;
    const auto vecs = emb.embed(all);
    std::vector<std::vector<double>> set_vecs;
    size_t at = 0;
    for (const auto& ns : sets) {
        const size_t k = ns.set.source_passages.size();
        std::vector<double> mean(vecs.empty() ? size_t{0} : vecs[0].size(), 0.0);
        for (size_t i = 0; i < k; ++i) {
            for (size_t d = 0; d < mean.size(); ++d) mean[d] += vecs[at + i][d];
        }
        for (double& m : mean) m /= static_cast<double>(k);
        at += k;
        set_vecs.push_back(std::move(mean));
    }
    const auto linkage =
        s.linkage == "max" ? stats::Linkage::Max : stats::Linkage::Average;
    const auto res = stats::agglomerative_cluster(set_vecs, linkage, s.threshold);

    fs::create_directories(s.output_dir);
    auto cout_ = open_out(fs::path(s.output_dir) / "clusters.tsv");
    cout_ << "query_id\tmethod\tcluster\n";
    for (size_t i = 0; i < sets.size(); ++i) {
        cout_ << sets[i].set.query_id << "\t" << sets[i].method << "\t"
              << res.assignment[i] << "\n";
    }
    auto vout = open_out(fs::path(s.output_dir) / "curve.tsv");
    vout << "threshold\tn_clusters\n";
    for (const auto& [d, count] : res.count_curve) {
        vout << fmt(d) << "\t" << count << "\n";
    }
    auto dout = open_out(fs::path(s.output_dir) / "dendrogram.tsv");
    dout << "step\ta\tb\tdistance\n";
    for (size_t k = 0; k < res.dendrogram.merges.size(); ++k) {
        const auto& m = res.dendrogram.merges[k];
        dout << k << "\t" << m.a << "\t" << m.b << "\t" << fmt(m.distance) << "\n";
    }
    return 0;
}

int cmd_analyze_attention(const Settings& s) {
    auto lm = load_model_dir(s.model_dir);
    require_file(s.dataset, "dataset");
    const auto data = text::load_dataset(s.dataset);

    // one observation per (instance, concatenated source position): the mean
    // attention share that position received across decode steps
    std::vector<double> xs, ys;
    for (const auto& inst : data) {
        std::vector<int> joined;
        for (const auto& p : inst.passages) {
            const auto ids = lm.vocab.encode(p.tokens);
            joined.insert(joined.end(), ids.begin(), ids.end());
        }
        if (joined.empty()) continue;
        decoding::AttentionTrace trace;
        decoding::greedy_decode(lm.model, lm.vocab, joined, s.max_len, &trace);
        if (trace.per_step.empty()) continue;
        const size_t len = trace.per_step[0].size();
        for (size_t pos = 0; pos < len; ++pos) {
            double mean = 0.0;
            for (const auto& step : trace.per_step) mean += step[pos];
            xs.push_back(static_cast<double>(pos));
            ys.push_back(mean / static_cast<double>(trace.per_step.size()));
        }
    }
    const auto fit = stats::ols_fit(xs, ys);

    fs::create_directories(s.output_dir);
    auto out = open_out(fs::path(s.output_dir) / "attention_ols.tsv");
    out << "slope\tci_lo\tci_hi\tci_contains_zero\tintercept\tintercept_p\tn\n";
    out << fmt(fit.slope) << "\t" << fmt(fit.slope_ci_lo) << "\t"
        << fmt(fit.slope_ci_hi) << "\t" << (fit.slope_ci_contains_zero() ? 1 : 0)
        << "\t" << fmt(fit.intercept) << "\t" << fmt(fit.intercept_p) << "\t"
        << fit.n << "\n";
    return 0;
}

int cmd_analyze_similarity(const Settings& s) {
    const auto sets = read_evalsets(s.evalsets);
    const retrieval::TfidfEmbedder emb;
    fs::create_directories(s.output_dir);
    auto out = open_out(fs::path(s.output_dir) / "similarity.tsv");
    out << "query_id\tmethod\tmean_similarity\tskipped_pairs\n";
    for (const auto& ns : sets) {
        int skipped = 0;
        const double sim =
            retrieval::mean_pairwise_similarity(ns.set.source_passages, emb, &skipped);
        out << ns.set.query_id << "\t" << ns.method << "\t" << fmt(sim) << "\t"
            << skipped << "\n";
    }
    return 0;
}

int dispatch(int argc, const char* const* argv) {
    Settings s;
    CLI::App app{"multi-source question generation laboratory"};
    app.require_subcommand(1);
    auto* train = app.add_subcommand("train", "train the single-document model");
    auto* generate = app.add_subcommand("generate", "decode questions for each instance");
    auto* build = app.add_subcommand("build-evalsets", "assemble retrieval evaluation sets");
    auto* evaluate = app.add_subcommand("evaluate", "rank sources and report metrics");
    auto* analyze = app.add_subcommand("analyze", "supplementary analyses");
    analyze->require_subcommand(1);
    auto* cluster = analyze->add_subcommand("cluster", "agglomerative clustering of passage sets");
    auto* attol = analyze->add_subcommand("attention-ols", "regress attention weight on position");
    auto* simil = analyze->add_subcommand("similarity", "mean pairwise passage similarity");

    Binder b;
    std::string config_path;
    for (CLI::App* cmd : {train, generate, build, evaluate, cluster, attol, simil}) {
        cmd->add_option("--config", config_path, "flat key=value config file");
    }

    bind_key(b, {train, generate, build, attol}, "dataset", "--dataset", s.dataset,
             "JSONL dataset path", identity);
    bind_key(b, {build}, "pool", "--pool", s.pool, "JSONL pool of passages", identity);
    bind_key(b, {build}, "generations", "--generations", s.generations,
             "generations TSV", identity);
    bind_key(b, {evaluate, cluster, simil}, "evalsets", "--evalsets", s.evalsets,
             "evalsets JSONL", identity);
    bind_key(b, {generate, attol}, "model_dir", "--model-dir", s.model_dir,
             "directory holding model.ckpt and vocab.txt", identity);
    bind_key(b, {train, generate, build, evaluate, cluster, attol, simil},
             "output_dir", "--output-dir", s.output_dir, "output directory", identity);
    bind_key(b, {train}, "max_vocab", "--max-vocab", s.max_vocab,
             "vocabulary size cap", parse_int);
    bind_key(b, {train}, "min_freq", "--min-freq", s.min_freq,
             "minimum token frequency", parse_int);
    bind_key(b, {train}, "embed_dim", "--embed-dim", s.embed_dim,
             "embedding width", parse_int);
    bind_key(b, {train}, "enc_hidden", "--enc-hidden", s.enc_hidden,
             "encoder hidden width per direction", parse_int);
    bind_key(b, {train}, "max_source_len", "--max-source-len", s.max_source_len,
             "encoder input truncation", parse_int);
    bind_key(b, {train}, "epochs", "--epochs", s.epochs, "training epochs", parse_int);
    bind_key(b, {train}, "batch", "--batch", s.batch, "batch size", parse_int);
    bind_key(b, {train}, "lr", "--lr", s.lr, "Adam learning rate", parse_double);
    bind_key(b, {train, evaluate}, "seed", "--seed", s.seed, "RNG seed", parse_unsigned);
    bind_key(b, {train}, "clip", "--clip", s.clip,
             "gradient norm clip, <= 0 disables", parse_double);
    bind_key(b, {generate}, "method", "--method", s.method,
             "comma-separated methods, or 'all'", identity);
    bind_key(b, {generate}, "beam", "--beam", s.beam, "beam width", parse_int);
    bind_key(b, {generate, attol}, "max_len", "--max-len", s.max_len,
             "generation length cap", parse_int);
    bind_key(b, {build}, "k1", "--k1", s.k1, "BM25 k1", parse_double);
    bind_key(b, {build}, "b", "--b", s.b, "BM25 b", parse_double);
    bind_key(b, {evaluate}, "workers", "--workers", s.workers,
             "evaluation worker threads", parse_int);
    bind_key(b, {evaluate}, "scorer", "--scorer", s.scorer,
             "bm25, oracle, or random", identity);
    bind_key(b, {cluster}, "linkage", "--linkage", s.linkage,
             "max or average", identity);
    bind_key(b, {cluster}, "threshold", "--threshold", s.threshold,
             "merge distance cutoff", parse_double);
    bind_flag(b, {evaluate}, "significance", "--significance", s.significance,
              "pairwise MW tests on per-set MRR");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (!config_path.empty()) apply_config(config_path, b);
    validate(s);

    if (train->parsed()) return cmd_train(s);
    if (generate->parsed()) return cmd_generate(s);
    if (build->parsed()) return cmd_build_evalsets(s);
    if (evaluate->parsed()) return cmd_evaluate(s);
    if (cluster->parsed()) return cmd_analyze_cluster(s);
    if (attol->parsed()) return cmd_analyze_attention(s);
    return cmd_analyze_similarity(s);
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    try {
        return dispatch(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    }
}

}  // namespace msqg::cli
