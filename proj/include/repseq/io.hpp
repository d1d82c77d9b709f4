#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

// Table output with embedded run metadata. CSV carries the metadata as
// leading '#' comment lines; JSON carries it in a "meta" object. Numbers are
// serialized with 17 significant digits so outputs are byte-stable.

namespace repseq {

inline constexpr const char* kVersion = "0.1.0";

/// %.17g rendering; round-trips any double exactly.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Table cell; monostate is an absent value (empty CSV field, JSON null).
using Cell = std::variant<std::monostate, double, long, std::string>;

inline std::string cell_to_string(const Cell& c) {
    if (std::holds_alternative<std::monostate>(c)) return "";
    if (std::holds_alternative<double>(c)) return fmt17(std::get<double>(c));
    if (std::holds_alternative<long>(c)) return std::to_string(std::get<long>(c));
    return std::get<std::string>(c);
}

/// Rectangular output table: named columns, row-major cells, and ordered
/// metadata key/value pairs recorded in every serialization.
class OutputTable {
  public:
    explicit OutputTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void meta(const std::string& key, const std::string& value) {
        meta_.emplace_back(key, value);
    }

    void add_row(std::vector<Cell> row) {
        if (row.size() != columns_.size())
            throw std::invalid_argument("OutputTable: row width mismatch");
        rows_.push_back(std::move(row));
    }

    std::size_t row_count() const { return rows_.size(); }

    void write_csv(std::ostream& out) const {
        for (const auto& [k, v] : meta_) out << "# " << k << ": " << v << "\n";
        for (std::size_t c = 0; c < columns_.size(); ++c)
            out << (c ? "," : "") << columns_[c];
        out << "\n";
        for (const auto& row : rows_) {
            for (std::size_t c = 0; c < row.size(); ++c)
                out << (c ? "," : "") << cell_to_string(row[c]);
            out << "\n";
        }
    }

    void write_json(std::ostream& out) const {
        out << "{\n  \"meta\": {\n";
        for (std::size_t i = 0; i < meta_.size(); ++i)
            out << "    \"" << json_escape(meta_[i].first) << "\": \""
                << json_escape(meta_[i].second) << (i + 1 < meta_.size() ? "\",\n" : "\"\n");
        out << "  },\n  \"rows\": [\n";
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            out << "    {";
            for (std::size_t c = 0; c < columns_.size(); ++c) {
                out << (c ? ", " : "") << "\"" << json_escape(columns_[c]) << "\": ";
                const Cell& cell = rows_[r][c];
                if (std::holds_alternative<std::string>(cell))
                    out << "\"" << json_escape(std::get<std::string>(cell)) << "\"";
                else if (std::holds_alternative<std::monostate>(cell))
                    out << "null";
                else
                    out << cell_to_string(cell);
            }
            out << (r + 1 < rows_.size() ? "},\n" : "}\n");
        }
        out << "  ]\n}\n";
    }

    void write_file(const std::string& path, const std::string& format) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open output file: " + path);
        if (format == "csv")
            write_csv(out);
        else if (format == "json")
            write_json(out);
        else
            throw std::invalid_argument("unknown output format: " + format);
        if (!out) throw std::runtime_error("write failed: " + path);
    }

  private:
    static std::string json_escape(const std::string& s) {
        std::string out;
        out.reserve(s.size());
        for (char ch : s) {
            if (ch == '"' || ch == '\\') out.push_back('\\');
            out.push_back(ch);
        }
        return out;
    }

    std::vector<std::string> columns_;
    std::vector<std::vector<Cell>> rows_;
    std::vector<std::pair<std::string, std::string>> meta_;
};

}  // namespace repseq
