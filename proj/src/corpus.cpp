#include "mgtd/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "mgtd/error.hpp"
#include "mgtd/kernels.hpp"
#include "mgtd/rng.hpp"
#include "mgtd/text_norm.hpp"

namespace mgtd {

namespace {

using nlohmann::json;

std::string location(const std::filesystem::path& path, std::size_t line_no) {
    return path.string() + ":" + std::to_string(line_no);
}

}  // namespace

std::vector<text_record> load_dataset(const std::filesystem::path& path,
                                      const jsonl_schema& schema) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open dataset file: " + path.string());

    const std::string stem = path.stem().string();
    std::vector<text_record> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_whitespace(line).empty()) continue;

        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw parse_error("malformed JSON at " + location(path, line_no) + ": " + e.what());
        }
        if (!obj.is_object()) {
            throw parse_error("line is not a JSON object at " + location(path, line_no));
        }

        text_record rec;
        if (!obj.contains(schema.text_field) || !obj[schema.text_field].is_string()) {
            throw parse_error("missing field \"" + schema.text_field + "\" at line " +
                              std::to_string(line_no) + " of " + path.string());
        }
        rec.text = obj[schema.text_field].get<std::string>();
        if (trim_whitespace(rec.text).empty()) {
            throw parse_error("empty text at " + location(path, line_no));
        }

        const bool has_label = obj.contains(schema.label_field) && !obj[schema.label_field].is_null();
        const bool has_generator =
            obj.contains(schema.generator_field) && !obj[schema.generator_field].is_null();
        if (!has_label && !has_generator) {
            throw parse_error("missing field \"" + schema.label_field + "\" (or \"" +
                              schema.generator_field + "\") at line " + std::to_string(line_no) +
                              " of " + path.string());
        }
        if (has_label) {
            if (!obj[schema.label_field].is_number_integer()) {
                throw parse_error("field \"" + schema.label_field + "\" is not an integer at " +
                                  location(path, line_no));
            }
            rec.label = obj[schema.label_field].get<int>();
            if (rec.label < 0 || rec.label >= kNumClasses) {
                throw parse_error("label " + std::to_string(rec.label) + " out of range [0," +
                                  std::to_string(kNumClasses - 1) + "] at " +
                                  location(path, line_no));
            }
        }
        if (has_generator) {
            if (!obj[schema.generator_field].is_string()) {
                throw parse_error("field \"" + schema.generator_field + "\" is not a string at " +
                                  location(path, line_no));
            }
            rec.generator = obj[schema.generator_field].get<std::string>();
        }
        if (obj.contains(schema.source_field) && obj[schema.source_field].is_string()) {
            rec.source = obj[schema.source_field].get<std::string>();
        }
        if (obj.contains(schema.id_field) && !obj[schema.id_field].is_null()) {
            const auto& v = obj[schema.id_field];
            rec.id = v.is_string() ? v.get<std::string>() : v.dump();
        } else {
            rec.id = stem + ":" + std::to_string(line_no);
        }
        records.push_back(std::move(rec));
    }

    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!seen.insert(records[i].id).second) {
            throw parse_error("duplicate record id \"" + records[i].id + "\" in " + path.string());
        }
    }
    return records;
}

void label_schema::validate() const {
    if (class_names.size() != static_cast<std::size_t>(kNumClasses)) {
        throw config_error("label schema must name exactly " + std::to_string(kNumClasses) +
                           " classes, got " + std::to_string(class_names.size()));
    }
    for (const auto& [gen, cls] : generator_to_class) {
        if (cls < 0 || cls >= kNumClasses) {
            throw config_error("generator \"" + gen + "\" maps to invalid class " +
                               std::to_string(cls));
        }
    }
}

std::string label_schema::digest() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    const auto feed = [&h](unsigned char b) { h = (h ^ b) * 0x100000001b3ull; };
    for (const std::string& name : class_names) {
        for (unsigned char b : name) feed(b);
        feed(0x1f);
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

label_schema label_schema::mgt_default() {
    label_schema s;
    s.class_names = {"human", "ChatGPT", "Cohere", "Davinci", "BLOOMZ", "Dolly"};
    s.generator_to_class = {
        {"human", 0},   {"Human", 0},   {"chatGPT", 1}, {"ChatGPT", 1}, {"chatgpt", 1},
        {"cohere", 2},  {"Cohere", 2},  {"davinci", 3}, {"Davinci", 3}, {"davinci-003", 3},
        {"bloomz", 4},  {"BLOOMZ", 4},  {"dolly", 5},   {"Dolly", 5},   {"dolly-v2", 5},
    };
    return s;
}

std::vector<text_record> relabel(std::vector<text_record> records, const label_schema& schema) {
    schema.validate();
    for (text_record& rec : records) {
        auto it = schema.generator_to_class.find(rec.generator);
        if (it == schema.generator_to_class.end()) {
            throw data_error("relabel: generator \"" + rec.generator +
                             "\" has no class mapping (record id \"" + rec.id + "\")");
        }
        rec.label = it->second;
    }
    return records;
}

std::vector<text_record> merge_and_dedup(const std::vector<text_record>& primary,
                                         const std::vector<text_record>& supplement,
                                         const std::vector<text_record>& holdout) {
    std::unordered_set<std::string> holdout_keys;
    holdout_keys.reserve(holdout.size());
    for (const text_record& rec : holdout) holdout_keys.insert(dedup_key(rec.text));

    std::vector<text_record> merged;
    merged.reserve(primary.size() + supplement.size());
    std::unordered_set<std::string> seen;
    seen.reserve(primary.size() + supplement.size());

    const auto take = [&](const std::vector<text_record>& in) {
        for (const text_record& rec : in) {
            std::string key = dedup_key(rec.text);
            if (holdout_keys.count(key) > 0) continue;
            if (!seen.insert(std::move(key)).second) continue;
            merged.push_back(rec);
        }
    };
    take(primary);
    take(supplement);
    return merged;
}

class_counts count_classes(const std::vector<text_record>& records, int num_classes) {
    class_counts cc;
    cc.counts.assign(static_cast<std::size_t>(num_classes), 0);
    for (const text_record& rec : records) {
        if (rec.label < 0 || rec.label >= num_classes) {
            throw data_error("count_classes: record \"" + rec.id + "\" has invalid label " +
                             std::to_string(rec.label));
        }
        ++cc.counts[static_cast<std::size_t>(rec.label)];
    }
    cc.total = static_cast<std::int64_t>(records.size());
    return cc;
}

split_assignment stratified_split(const std::vector<text_record>& records, double val_fraction,
                                  std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw data_error("stratified_split: val fraction must be in (0,1), got " +
                         std::to_string(val_fraction));
    }
    if (records.empty()) throw data_error("stratified_split: no records to split");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].label < 0) {
            throw data_error("stratified_split: record \"" + records[i].id + "\" is unlabeled");
        }
        by_class[records[i].label].push_back(i);
    }

    split_assignment split;
    split.val_fraction = val_fraction;
    split.seed = seed;
    for (auto& [label, indices] : by_class) {
        deterministic_shuffle(indices, mix_seed(seed, static_cast<std::uint64_t>(label)));
        const auto n_val = static_cast<std::size_t>(
            std::llround(val_fraction * static_cast<double>(indices.size())));
        for (std::size_t k = 0; k < indices.size(); ++k) {
            const std::string& id = records[indices[k]].id;
            if (k < n_val) {
                split.val_ids.insert(id);
            } else {
                split.train_ids.insert(id);
            }
        }
    }
    return split;
}

double parse_split_ratio(const std::string& ratio) {
    const auto colon = ratio.find(':');
    try {
        if (colon != std::string::npos) {
            const double train = std::stod(ratio.substr(0, colon));
            const double val = std::stod(ratio.substr(colon + 1));
            if (train <= 0.0 || val <= 0.0) throw config_error("split ratio parts must be positive");
            return val / (train + val);
        }
        return std::stod(ratio);
    } catch (const std::exception&) {
        throw config_error("cannot parse split ratio \"" + ratio + "\" (want e.g. \"8:2\" or 0.2)");
    }
}

std::vector<length_bucket> token_length_histogram(const std::vector<text_record>& records,
                                                  std::int64_t bucket_width,
                                                  const tokenizer_config& tok) {
    if (bucket_width < 1) {
        throw data_error("token_length_histogram: bucket width must be >= 1");
    }
    if (records.empty()) return {};

    const std::vector<std::int64_t> lengths = kernels::token_lengths(records, tok);
    const std::int64_t max_len = *std::max_element(lengths.begin(), lengths.end());
    std::vector<length_bucket> buckets(static_cast<std::size_t>(max_len / bucket_width) + 1);
    for (std::size_t b = 0; b < buckets.size(); ++b) {
        buckets[b].lo = static_cast<std::int64_t>(b) * bucket_width;
        buckets[b].hi = buckets[b].lo + bucket_width - 1;
    }
    for (std::int64_t len : lengths) {
        ++buckets[static_cast<std::size_t>(len / bucket_width)].count;
    }
    return buckets;
}

void write_corpus_jsonl(const std::filesystem::path& path,
                        const std::vector<text_record>& records) {
    std::ofstream out(path);
    if (!out) throw error("cannot write corpus file: " + path.string());
    for (const text_record& rec : records) {
        json obj;
        obj["id"] = rec.id;
        obj["text"] = rec.text;
        obj["label"] = rec.label;
        obj["source"] = rec.source;
        obj["generator"] = rec.generator;
        out << obj.dump() << '\n';
    }
}

void write_split_csv(const std::filesystem::path& path, const std::vector<text_record>& records,
                     const split_assignment& split) {
    std::ofstream out(path);
    if (!out) throw error("cannot write split file: " + path.string());
    out << "id,split\n";
    for (const text_record& rec : records) {
        out << rec.id << ',' << (split.is_val(rec.id) ? "val" : "train") << '\n';
    }
}

split_assignment read_split_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open split file: " + path.string());
    split_assignment split;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || trim_whitespace(line).empty()) continue;  // header
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) {
            throw parse_error("malformed split row at " + location(path, line_no));
        }
        std::string id = line.substr(0, comma);
        std::string which(trim_whitespace(line.substr(comma + 1)));
        if (which == "train") {
            split.train_ids.insert(std::move(id));
        } else if (which == "val") {
            split.val_ids.insert(std::move(id));
        } else {
            throw parse_error("unknown split \"" + which + "\" at " + location(path, line_no));
        }
    }
    return split;
}

}  // namespace mgtd
