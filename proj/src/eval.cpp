#include "mgtd/eval.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mgtd/error.hpp"

namespace mgtd {

namespace {

std::string fixed4(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

// Commas and quotes in ids would break the CSV shape.
std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += "\"\"";
        else out += ch;
    }
    out += '"';
    return out;
}

}  // namespace

eval_report evaluate(std::span<const int> predictions, std::span<const int> golds,
                     const std::string& model_id, int num_classes) {
    if (predictions.empty()) throw data_error("evaluate: empty input");
    if (predictions.size() != golds.size()) {
        throw data_error("evaluate: " + std::to_string(predictions.size()) + " predictions vs " +
                         std::to_string(golds.size()) + " golds");
    }
    eval_report report;
    report.model_id = model_id;
    report.confusion = confusion(predictions, golds, num_classes);
    report.per_class = per_class_scores(report.confusion);
    report.n = static_cast<std::int64_t>(predictions.size());
    report.accuracy =
        static_cast<double>(report.confusion.trace()) / static_cast<double>(report.n);
    return report;
}

rendered_table comparison_table(const std::vector<comparison_row>& rows) {
    if (rows.empty()) throw data_error("comparison_table: no rows");
    std::size_t id_w = 5, cfg_w = 6;
    for (const comparison_row& r : rows) {
        id_w = std::max(id_w, r.model_id.size());
        cfg_w = std::max(cfg_w, r.config_summary.size());
    }

    std::ostringstream text;
    text << pad("model", id_w) << "  " << pad("config", cfg_w) << "  accuracy\n";
    text << std::string(id_w + cfg_w + 12, '-') << '\n';
    std::ostringstream csv;
    csv << "model,config,accuracy\n";
    for (const comparison_row& r : rows) {
        const std::string acc = fixed4(r.accuracy);
        text << pad(r.model_id, id_w) << "  " << pad(r.config_summary, cfg_w) << "  " << acc
             << '\n';
        csv << csv_escape(r.model_id) << ',' << csv_escape(r.config_summary) << ',' << acc << '\n';
    }
    return {text.str(), csv.str()};
}

rendered_table ensemble_table(const std::vector<ensemble_table_row>& rows, int num_classes) {
    if (rows.empty()) throw data_error("ensemble_table: no rows");
    std::size_t id_w = std::string("ensemble base models").size();
    for (const ensemble_table_row& r : rows) {
        id_w = std::max(id_w, r.label.size());
        for (const std::string& m : r.member_ids) id_w = std::max(id_w, m.size());
    }

    std::ostringstream text;
    text << pad("ensemble base models", id_w) << "  ";
    for (int k = 0; k < num_classes; ++k) text << "C" << k << "  ";
    text << "accuracy\n";
    text << std::string(id_w + 4 * static_cast<std::size_t>(num_classes) + 10, '-') << '\n';

    std::ostringstream csv;
    csv << "ensemble,model";
    for (int k = 0; k < num_classes; ++k) csv << ",excels_c" << k;
    csv << ",accuracy\n";

    for (const ensemble_table_row& r : rows) {
        const std::string acc = fixed4(r.accuracy);
        if (r.member_ids.empty()) {
            text << pad(r.label, id_w) << "  ";
            for (int k = 0; k < num_classes; ++k) text << "    ";
            text << acc << '\n';
            csv << csv_escape(r.label) << ',';
            for (int k = 0; k < num_classes; ++k) csv << ',';
            csv << acc << '\n';
        } else {
            // One line per member with its checkmarks; group accuracy on the
            // first line, mirroring the multirow layout.
            for (std::size_t m = 0; m < r.member_ids.size(); ++m) {
                const std::string& member = r.member_ids[m];
                text << pad(member, id_w) << "  ";
                const auto it = r.excels_in.find(member);
                for (int k = 0; k < num_classes; ++k) {
                    const bool has =
                        it != r.excels_in.end() && it->second.count(k) > 0;
                    text << (has ? "x " : "  ") << "  ";
                }
                text << (m == 0 ? acc : "") << '\n';
                csv << csv_escape(r.label) << ',' << csv_escape(member);
                for (int k = 0; k < num_classes; ++k) {
                    const bool has = it != r.excels_in.end() && it->second.count(k) > 0;
                    csv << ',' << (has ? '1' : '0');
                }
                csv << ',' << acc << '\n';
            }
        }
        text << std::string(id_w + 4 * static_cast<std::size_t>(num_classes) + 10, '-') << '\n';
    }
    return {text.str(), csv.str()};
}

std::string report_text(const eval_report& report, const std::vector<std::string>& class_names) {
    std::ostringstream os;
    os << "model: " << report.model_id << '\n';
    os << "n: " << report.n << '\n';
    os << "accuracy: " << fixed4(report.accuracy) << '\n';
    os << '\n';
    std::size_t name_w = 5;
    for (const std::string& n : class_names) name_w = std::max(name_w, n.size());
    os << pad("class", name_w) << "  precision  recall  f1      support\n";
    for (std::size_t k = 0; k < report.per_class.size(); ++k) {
        const class_score& s = report.per_class[k];
        const std::string name =
            k < class_names.size() ? class_names[k] : "class" + std::to_string(k);
        os << pad(name, name_w) << "  " << fixed4(s.precision) << "     " << fixed4(s.recall)
           << "  " << fixed4(s.f1) << "  " << s.support;
        if (s.support == 0) os << "  (no gold rows)";
        os << '\n';
    }
    os << '\n' << "confusion (rows gold, cols predicted):\n";
    for (int g = 0; g < report.confusion.num_classes; ++g) {
        for (int p = 0; p < report.confusion.num_classes; ++p) {
            os << std::setw(8) << report.confusion.at(g, p);
        }
        os << '\n';
    }
    return os.str();
}

std::string report_csv(const eval_report& report, const std::vector<std::string>& class_names) {
    std::ostringstream csv;
    csv << "model,n,accuracy\n";
    csv << csv_escape(report.model_id) << ',' << report.n << ',' << fixed4(report.accuracy)
        << '\n';
    csv << "class,precision,recall,f1,support\n";
    for (std::size_t k = 0; k < report.per_class.size(); ++k) {
        const class_score& s = report.per_class[k];
        const std::string name =
            k < class_names.size() ? class_names[k] : "class" + std::to_string(k);
        csv << csv_escape(name) << ',' << fixed4(s.precision) << ',' << fixed4(s.recall) << ','
            << fixed4(s.f1) << ',' << s.support << '\n';
    }
    return csv.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw error("cannot write file: " + path.string());
    out << content;
}

}  // namespace mgtd
