#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "msqg/errors.hpp"

namespace msqg::text {

// Reserved vocabulary ids. These are fixed across every artifact the CLI
// writes, including checkpoints.
inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kBos = 2;
inline constexpr int kEos = 3;
inline constexpr int kNumReserved = 4;

// Lowercases, splits on whitespace, and breaks punctuation into standalone
// tokens. Alphanumeric runs stay together; bytes >= 0x80 are treated as word
// bytes so UTF-8 sequences survive intact.
std::vector<std::string> tokenize(const std::string& text);

class Vocabulary {
  public:
    Vocabulary();  // reserved entries only

    // Keeps the most frequent tokens, ties broken lexicographically.
    // Tokens seen fewer than min_freq times are dropped (they encode as UNK).
    static Vocabulary build(const std::vector<std::vector<std::string>>& corpus,
                            int max_size = 20000, int min_freq = 2);

    int id_of(const std::string& token) const;  // UNK when absent
    const std::string& token_of(int id) const;
    std::vector<int> encode(const std::vector<std::string>& tokens) const;
    std::vector<std::string> decode(const std::vector<int>& ids) const;
    int size() const { return static_cast<int>(to_token_.size()); }

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

  private:
    std::unordered_map<std::string, int> to_id_;
    std::vector<std::string> to_token_;
};

struct Passage {
    std::vector<std::string> tokens;
    bool is_selected = false;
};

struct DataInstance {
    std::string query_id;
    std::vector<std::string> query;
    std::vector<Passage> passages;
};

struct TrainingPair {
    std::vector<int> source;  // the first selected passage
    std::vector<int> target;  // BOS ... EOS
};

// JSON Lines, one {"query_id", "query", "passages": [{"text", "is_selected"}]}
// object per line. Instances without a selected passage load fine; training
// pair extraction skips them.
std::vector<DataInstance> load_dataset(const std::string& path);

std::vector<TrainingPair> make_training_pairs(const std::vector<DataInstance>& data,
                                              const Vocabulary& vocab);

}  // namespace msqg::text
