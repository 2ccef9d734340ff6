#include "msqg/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "json.hpp"

namespace msqg::text {

namespace {

const std::vector<std::string>& reserved_tokens() {
    static const std::vector<std::string> kReserved = {"<pad>", "<unk>", "<bos>", "<eos>"};
    return kReserved;
}

bool is_word_byte(unsigned char c) {
    return std::isalnum(c) != 0 || c >= 0x80;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else if (is_word_byte(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
            out.emplace_back(1, ch);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

Vocabulary::Vocabulary() {
    for (const std::string& t : reserved_tokens()) {
        to_id_.emplace(t, static_cast<int>(to_token_.size()));
        to_token_.push_back(t);
    }
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus,
                             int max_size, int min_freq) {
    if (max_size <= kNumReserved) throw ConfigError("vocabulary: max_size must exceed 4");
    std::unordered_map<std::string, int64_t> freq;
    int64_t total = 0;
    for (const auto& seq : corpus) {
        for (const std::string& tok : seq) {
            ++freq[tok];
            ++total;
        }
    }
    if (total == 0) throw DataError("vocabulary: empty corpus");

    std::vector<std::pair<std::string, int64_t>> ranked;
    ranked.reserve(freq.size());
    const auto& reserved = reserved_tokens();
    for (auto& [tok, cnt] : freq) {
        if (cnt < min_freq) continue;
        if (std::find(reserved.begin(), reserved.end(), tok) != reserved.end()) continue;
        ranked.emplace_back(tok, cnt);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary v;
    for (const auto& [tok, cnt] : ranked) {
        if (v.size() >= max_size) break;
        v.to_id_.emplace(tok, v.size());
        v.to_token_.push_back(tok);
    }
    return v;
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = to_id_.find(token);
    return it == to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
    if (id < 0 || id >= size()) throw ConfigError("vocabulary: id out of range");
    return to_token_[static_cast<size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const std::string& t : tokens) ids.push_back(id_of(t));
    return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
    std::vector<std::string> tokens;
    tokens.reserve(ids.size());
    for (int id : ids) tokens.push_back(token_of(id));
    return tokens;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("vocabulary: cannot write " + path);
    for (int id = kNumReserved; id < size(); ++id) {
        out << to_token_[static_cast<size_t>(id)] << '\n';
    }
    if (!out) throw DataError("vocabulary: write failed for " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("vocabulary: cannot read " + path);
    Vocabulary v;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (v.to_id_.count(line) != 0) {
            throw DataError("vocabulary: duplicate token in " + path);
        }
        v.to_id_.emplace(line, v.size());
        v.to_token_.push_back(line);
    }
    return v;
}

std::vector<DataInstance> load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("dataset: cannot open " + path);
    std::vector<DataInstance> out;
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& what) {
        throw DataError("dataset: " + path + ":" + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) fail("malformed JSON line");
        if (!j.contains("query_id") || !j["query_id"].is_string()) fail("missing query_id");
        if (!j.contains("query") || !j["query"].is_string()) fail("missing query");
        if (!j.contains("passages") || !j["passages"].is_array()) fail("missing passages");

        DataInstance inst;
        inst.query_id = j["query_id"].get<std::string>();
        inst.query = tokenize(j["query"].get<std::string>());
        if (inst.query.empty()) fail("query tokenizes to nothing");
        for (const auto& pj : j["passages"]) {
            if (!pj.contains("text") || !pj["text"].is_string()) fail("passage missing text");
            if (!pj.contains("is_selected")) fail("passage missing is_selected");
            Passage p;
            p.tokens = tokenize(pj["text"].get<std::string>());
            if (p.tokens.empty()) fail("passage tokenizes to nothing");
            const auto& sel = pj["is_selected"];
            if (sel.is_boolean()) {
                p.is_selected = sel.get<bool>();
            } else if (sel.is_number_integer()) {
                const int v = sel.get<int>();
                if (v != 0 && v != 1) fail("is_selected must be 0 or 1");
                p.is_selected = v == 1;
            } else {
                fail("is_selected must be 0 or 1");
            }
            inst.passages.push_back(std::move(p));
        }
        if (inst.passages.empty()) fail("no passages");
        out.push_back(std::move(inst));
    }
    return out;
}

std::vector<TrainingPair> make_training_pairs(const std::vector<DataInstance>& data,
                                              const Vocabulary& vocab) {
    std::vector<TrainingPair> pairs;
    for (const DataInstance& inst : data) {
        const Passage* selected = nullptr;
        for (const Passage& p : inst.passages) {
            if (p.is_selected) {
                selected = &p;
                break;
            }
        }
        if (!selected) continue;
        TrainingPair tp;
        tp.source = vocab.encode(selected->tokens);
        tp.target.push_back(kBos);
        for (int id : vocab.encode(inst.query)) tp.target.push_back(id);
        tp.target.push_back(kEos);
        pairs.push_back(std::move(tp));
    }
    return pairs;
}

}  // namespace msqg::text
