#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mgtd {

struct tokenizer_config {
    enum class split_mode { unicode_word, character };
    split_mode mode = split_mode::unicode_word;
    bool lowercase = true;
};

// Seeded FNV-1a over one n-gram. The seed is fed first as 8 little-endian
// bytes; each token's UTF-8 bytes are followed by a 0x1F separator so that
// ("ab","c") and ("a","bc") hash differently. The exact definition is part of
// the model file contract (see README).
std::uint64_t ngram_hash(std::uint64_t seed, std::span<const std::string> tokens);

struct feature_config {
    std::set<int> ngram_orders;  // empty = default for the tokenizer mode
    std::uint32_t dim = 1u << 20;
    std::uint64_t hash_seed = 0;
    enum class tf_mode { raw_count, log1p };
    tf_mode tf_scaling = tf_mode::log1p;
    // Token-prefix limit applied before featurization; 0 disables.
    std::size_t max_tokens = 512;

    void validate() const;  // dim power of two >= 2, orders all >= 1
    std::set<int> effective_orders(const tokenizer_config& tok) const;
};

// Sparse hashed representation of one text. Entries are sorted by index and
// unique; indices < dim.
struct feature_vector {
    std::uint32_t dim = 0;
    std::vector<std::pair<std::uint32_t, double>> entries;

    std::size_t size() const { return entries.size(); }
    bool empty() const { return entries.empty(); }
    double weight_sum() const;
    double dot(std::span<const double> dense) const;
};

std::vector<std::string> tokenize(std::string_view text, const tokenizer_config& config);

// First min(size, max_len) tokens. max_len must be >= 1.
std::vector<std::string> truncate(std::vector<std::string> tokens, std::size_t max_len);

feature_vector featurize(std::span<const std::string> tokens, const feature_config& config,
                         const tokenizer_config& tok = {});

// tokenize -> truncate(config.max_tokens) -> featurize; the text-to-vector
// path embedded in every model.
feature_vector vectorize_text(std::string_view text, const tokenizer_config& tok,
                              const feature_config& config);

}  // namespace mgtd
