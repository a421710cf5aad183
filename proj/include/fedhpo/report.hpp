#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedhpo/format.hpp"
#include "fedhpo/metrics.hpp"

namespace fedhpo {

struct ReportRow {
    std::string model;
    std::string scheme;
    MetricsReport metrics;
    bool is_best = false;
};

/// Per-model, per-scheme federated metrics with the mean-F1 summary.
struct SchemeReport {
    /// Scheme names in first-appearance order.
    std::vector<std::string> schemes;
    std::vector<ReportRow> rows;
    /// Arithmetic mean of each scheme's per-model F1, in `schemes` order.
    std::vector<std::pair<std::string, double>> mean_f1;

    std::vector<std::string> models() const {
        std::vector<std::string> out;
        for (const auto& r : rows)
            if (std::find(out.begin(), out.end(), r.model) == out.end()) out.push_back(r.model);
        return out;
    }

    double mean_f1_of(const std::string& scheme) const {
        for (const auto& [s, v] : mean_f1)
            if (s == scheme) return v;
        throw std::out_of_range("SchemeReport: unknown scheme '" + scheme + "'");
    }

    const ReportRow& row(const std::string& model, const std::string& scheme) const {
        for (const auto& r : rows)
            if (r.model == model && r.scheme == scheme) return r;
        throw std::out_of_range("SchemeReport: no row for " + model + "/" + scheme);
    }

    /// Recomputes scheme order, best-scheme flags (highest F1 per model; every
    /// tied scheme is flagged) and mean F1 per scheme. Every model must have
    /// exactly one row per scheme.
    void finalize(bool recompute_best = true) {
        schemes.clear();
        for (const auto& r : rows)
            if (std::find(schemes.begin(), schemes.end(), r.scheme) == schemes.end()) schemes.push_back(r.scheme);

        const auto model_names = models();
        for (const auto& m : model_names) {
            for (const auto& s : schemes) {
                const auto n = std::count_if(rows.begin(), rows.end(),
                                             [&](const ReportRow& r) { return r.model == m && r.scheme == s; });
                if (n != 1)
                    throw std::invalid_argument("SchemeReport: model " + m + " needs exactly one row for scheme " + s);
            }
            if (!recompute_best) continue;
            double best = -1.0;
            for (const auto& r : rows)
                if (r.model == m) best = std::max(best, r.metrics.f1);
            for (auto& r : rows)
                if (r.model == m) r.is_best = r.metrics.f1 == best;
        }

        mean_f1.clear();
        for (const auto& s : schemes) {
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& r : rows)
                if (r.scheme == s) {
                    sum += r.metrics.f1;
                    ++n;
                }
            mean_f1.emplace_back(s, sum / static_cast<double>(n));
        }
    }
};

enum class ReportFormat { Csv, Markdown };

inline constexpr const char* kReportCsvHeader = "model,scheme,accuracy,precision,recall,f1,is_best";

/// Renders the report. Numbers carry three decimals.
///
/// CSV: one line per (model, scheme). Markdown: one line per model with a
/// column group per scheme; the best scheme's cells are bold, followed by the
/// mean-F1 summary.
inline std::string emit_report(const SchemeReport& report, ReportFormat fmt) {
    std::ostringstream out;
    auto num = [](double v) { return format_fixed(v, 3); };

    if (fmt == ReportFormat::Csv) {
        out << kReportCsvHeader << '\n';
        for (const auto& r : report.rows)
            out << r.model << ',' << r.scheme << ',' << num(r.metrics.accuracy) << ',' << num(r.metrics.precision)
                << ',' << num(r.metrics.recall) << ',' << num(r.metrics.f1) << ',' << (r.is_best ? 1 : 0) << '\n';
        return out.str();
    }

    out << "| Model |";
    for (const auto& s : report.schemes) out << ' ' << s << " Acc | Prec | Rec | F1 |";
    out << "\n|---|";
    for (std::size_t i = 0; i < report.schemes.size(); ++i) out << "---|---|---|---|";
    out << '\n';
    for (const auto& m : report.models()) {
        out << "| " << m << " |";
        for (const auto& s : report.schemes) {
            const auto& r = report.row(m, s);
            for (double v : {r.metrics.accuracy, r.metrics.precision, r.metrics.recall, r.metrics.f1}) {
                if (r.is_best)
                    out << " **" << num(v) << "** |";
                else
                    out << ' ' << num(v) << " |";
            }
        }
        out << '\n';
    }
    out << "\n| Scheme | Mean F1 |\n|---|---|\n";
    for (const auto& [s, v] : report.mean_f1) out << "| " << s << " | " << num(v) << " |\n";
    return out.str();
}

/// Parses CSV produced by emit_report back into a finalized report.
inline SchemeReport parse_report_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kReportCsvHeader)
        throw std::invalid_argument("report csv: unexpected header");
    SchemeReport report;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 7) throw std::invalid_argument("report csv: expected 7 columns: " + line);
        ReportRow r;
        r.model = cells[0];
        r.scheme = cells[1];
        r.metrics.accuracy = std::stod(cells[2]);
        r.metrics.precision = std::stod(cells[3]);
        r.metrics.recall = std::stod(cells[4]);
        r.metrics.f1 = std::stod(cells[5]);
        r.is_best = cells[6] == "1";
        report.rows.push_back(std::move(r));
    }
    report.finalize(false);
    return report;
}

}  // namespace fedhpo
