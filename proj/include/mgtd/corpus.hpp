#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "mgtd/features.hpp"

namespace mgtd {

inline constexpr int kNumClasses = 6;

// One labeled text. label is -1 until the record has been labeled (either
// from the input file or by relabel()).
struct text_record {
    std::string id;
    std::string text;
    int label = -1;
    std::string source;
    std::string generator;
};

// Field names of one JSONL dataset. The text field is required on every
// line; each line must carry the label field or the generator field. A
// missing id is synthesized as "<file-stem>:<line-number>".
struct jsonl_schema {
    std::string text_field = "text";
    std::string label_field = "label";
    std::string generator_field = "model";
    std::string source_field = "source";
    std::string id_field = "id";

    // Field names used by write_corpus_jsonl (the merged-corpus format).
    static jsonl_schema merged_output() {
        jsonl_schema s;
        s.generator_field = "generator";
        return s;
    }
};

std::vector<text_record> load_dataset(const std::filesystem::path& path,
                                      const jsonl_schema& schema = {});

struct label_schema {
    std::vector<std::string> class_names;            // exactly kNumClasses
    std::map<std::string, int> generator_to_class;   // total over input generators

    void validate() const;
    std::string digest() const;  // hex FNV-1a over the class names
    static label_schema mgt_default();
};

// Maps every record's generator string through the schema. Unmapped strings
// are an error naming the string; they never fall back to class 0.
std::vector<text_record> relabel(std::vector<text_record> records, const label_schema& schema);

// Unifies primary + supplement, dropping duplicate text keys (primary wins,
// first occurrence wins) and any key present in holdout. Output order:
// surviving primary records, then surviving supplement records.
std::vector<text_record> merge_and_dedup(const std::vector<text_record>& primary,
                                         const std::vector<text_record>& supplement,
                                         const std::vector<text_record>& holdout);

struct class_counts {
    std::vector<std::int64_t> counts;
    std::int64_t total = 0;

    int num_classes() const { return static_cast<int>(counts.size()); }
};

class_counts count_classes(const std::vector<text_record>& records,
                           int num_classes = kNumClasses);

struct split_assignment {
    std::unordered_set<std::string> train_ids;
    std::unordered_set<std::string> val_ids;
    double val_fraction = 0.2;
    std::uint64_t seed = 0;

    bool is_val(const std::string& id) const { return val_ids.count(id) > 0; }
};

// Per-class seeded shuffle, first round(val_fraction * N_class) records go to
// val. Deterministic per (records, val_fraction, seed).
split_assignment stratified_split(const std::vector<text_record>& records, double val_fraction,
                                  std::uint64_t seed);

// "8:2" -> 0.2; a bare number is taken as the val fraction itself.
double parse_split_ratio(const std::string& ratio);

struct length_bucket {
    std::int64_t lo = 0;  // inclusive
    std::int64_t hi = 0;  // inclusive
    std::int64_t count = 0;

    bool operator==(const length_bucket&) const = default;
};

// Contiguous bucket_width-wide buckets from 0 through the longest record;
// lengths counted with the features tokenizer.
std::vector<length_bucket> token_length_histogram(const std::vector<text_record>& records,
                                                  std::int64_t bucket_width,
                                                  const tokenizer_config& tok = {});

void write_corpus_jsonl(const std::filesystem::path& path,
                        const std::vector<text_record>& records);
void write_split_csv(const std::filesystem::path& path, const std::vector<text_record>& records,
                     const split_assignment& split);
split_assignment read_split_csv(const std::filesystem::path& path);

}  // namespace mgtd
