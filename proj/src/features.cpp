#include "mgtd/features.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "mgtd/error.hpp"

namespace mgtd {

namespace {

constexpr std::uint64_t kFnvBasis = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;
constexpr unsigned char kTokenSeparator = 0x1f;

inline std::uint64_t fnv_byte(std::uint64_t h, unsigned char b) {
    return (h ^ b) * kFnvPrime;
}

// Decodes the UTF-8 sequence starting at s[i]; advances i. Invalid bytes
// decode as U+FFFD one byte at a time.
char32_t next_codepoint(std::string_view s, std::size_t& i) {
    const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
    const unsigned char b0 = byte(i);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xe0) == 0xc0) {
        len = 2;
        cp = b0 & 0x1f;
    } else if ((b0 & 0xf0) == 0xe0) {
        len = 3;
        cp = b0 & 0x0f;
    } else if ((b0 & 0xf8) == 0xf0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return 0xfffd;
    }
    if (i + len > s.size()) {
        ++i;
        return 0xfffd;
    }
    for (int k = 1; k < len; ++k) {
        if ((byte(i + k) & 0xc0) != 0x80) {
            ++i;
            return 0xfffd;
        }
        cp = (cp << 6) | (byte(i + k) & 0x3f);
    }
    i += len;
    return cp;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else {
        out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
}

bool is_space_cp(char32_t cp) {
    if (cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v') return true;
    switch (cp) {
        case 0x0085:
        case 0x00a0:
        case 0x1680:
        case 0x2028:
        case 0x2029:
        case 0x202f:
        case 0x205f:
        case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200a;
    }
}

// Word-splitting boundary classes beyond whitespace. ASCII: everything that
// is not alphanumeric. Non-ASCII: the common punctuation blocks; other
// scalars (letters, digits, marks, symbols) count as word constituents.
bool is_punct_cp(char32_t cp) {
    if (cp < 0x80) {
        const bool alnum = (cp >= '0' && cp <= '9') || (cp >= 'A' && cp <= 'Z') || (cp >= 'a' && cp <= 'z');
        return !alnum;
    }
    switch (cp) {
        case 0x00a1:
        case 0x00a7:
        case 0x00ab:
        case 0x00b6:
        case 0x00b7:
        case 0x00bb:
        case 0x00bf:
            return true;
        default:
            break;
    }
    if (cp >= 0x2010 && cp <= 0x2027) return true;  // dashes, quotes, bullets
    if (cp >= 0x2030 && cp <= 0x205e) return true;  // permille, primes, brackets
    if (cp >= 0x3001 && cp <= 0x303f) return true;  // CJK punctuation
    if (cp >= 0xfe50 && cp <= 0xfe6f) return true;  // small form variants
    if (cp >= 0xff01 && cp <= 0xff0f) return true;  // fullwidth ASCII punctuation
    if (cp >= 0xff1a && cp <= 0xff20) return true;
    if (cp >= 0xff3b && cp <= 0xff40) return true;
    if (cp >= 0xff5b && cp <= 0xff65) return true;
    return false;
}

inline char32_t fold_case(char32_t cp, bool lowercase) {
    if (lowercase && cp >= 'A' && cp <= 'Z') return cp + ('a' - 'A');
    return cp;
}

}  // namespace

std::uint64_t ngram_hash(std::uint64_t seed, std::span<const std::string> tokens) {
    std::uint64_t h = kFnvBasis;
    for (int k = 0; k < 8; ++k) {
        h = fnv_byte(h, static_cast<unsigned char>((seed >> (8 * k)) & 0xff));
    }
    for (const std::string& tok : tokens) {
        for (unsigned char b : tok) h = fnv_byte(h, b);
        h = fnv_byte(h, kTokenSeparator);
    }
    return h;
}

void feature_config::validate() const {
    if (dim < 2 || (dim & (dim - 1)) != 0) {
        throw config_error("feature dim must be a power of two >= 2, got " + std::to_string(dim));
    }
    for (int n : ngram_orders) {
        if (n < 1) throw config_error("ngram order must be >= 1, got " + std::to_string(n));
    }
}

std::set<int> feature_config::effective_orders(const tokenizer_config& tok) const {
    if (!ngram_orders.empty()) return ngram_orders;
    if (tok.mode == tokenizer_config::split_mode::character) return {3, 4};
    return {1, 2};
}

double feature_vector::weight_sum() const {
    double s = 0.0;
    for (const auto& [idx, w] : entries) s += w;
    return s;
}

double feature_vector::dot(std::span<const double> dense) const {
    double s = 0.0;
    for (const auto& [idx, w] : entries) s += dense[idx] * w;
    return s;
}

std::vector<std::string> tokenize(std::string_view text, const tokenizer_config& config) {
    std::vector<std::string> tokens;
    if (config.mode == tokenizer_config::split_mode::character) {
        std::size_t i = 0;
        while (i < text.size()) {
            char32_t cp = fold_case(next_codepoint(text, i), config.lowercase);
            std::string tok;
            append_utf8(tok, cp);
            tokens.push_back(std::move(tok));
        }
        return tokens;
    }
    std::string current;
    std::size_t i = 0;
    while (i < text.size()) {
        char32_t cp = next_codepoint(text, i);
        if (is_space_cp(cp) || is_punct_cp(cp)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
            continue;
        }
        append_utf8(current, fold_case(cp, config.lowercase));
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::vector<std::string> truncate(std::vector<std::string> tokens, std::size_t max_len) {
    if (max_len < 1) throw data_error("truncate: max_len must be >= 1");
    if (tokens.size() > max_len) tokens.resize(max_len);
    return tokens;
}

feature_vector featurize(std::span<const std::string> tokens, const feature_config& config,
                         const tokenizer_config& tok) {
    config.validate();
    feature_vector fv;
    fv.dim = config.dim;

    std::unordered_map<std::uint32_t, double> acc;
    const std::uint32_t mask = config.dim - 1;
    for (int n : config.effective_orders(tok)) {
        if (tokens.size() < static_cast<std::size_t>(n)) continue;
        for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
            const std::uint64_t h = ngram_hash(config.hash_seed, tokens.subspan(i, n));
            acc[static_cast<std::uint32_t>(h) & mask] += 1.0;
        }
    }

    fv.entries.reserve(acc.size());
    for (const auto& [idx, count] : acc) {
        const double w = config.tf_scaling == feature_config::tf_mode::log1p ? std::log1p(count) : count;
        fv.entries.emplace_back(idx, w);
    }
    std::sort(fv.entries.begin(), fv.entries.end());
    return fv;
}

feature_vector vectorize_text(std::string_view text, const tokenizer_config& tok,
                              const feature_config& config) {
    std::vector<std::string> tokens = tokenize(text, tok);
    if (config.max_tokens > 0) tokens = truncate(std::move(tokens), config.max_tokens);
    return featurize(tokens, config, tok);
}

}  // namespace mgtd
