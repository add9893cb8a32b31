#include "mcno/csv.hpp"

#include "mcno/binary_io.hpp"
#include "mcno/error.hpp"

#include <charconv>
#include <cmath>

namespace mcno {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : columns_(header.size()) {
    for (const auto& h : header) cell(h);
    end_row();
    rows_ = 0;
}

void CsvTable::separator() {
    if (in_row_ > 0) text_ += ',';
    ++in_row_;
}

CsvTable& CsvTable::cell(double v) {
    separator();
    text_ += format_double(v);
    return *this;
}

CsvTable& CsvTable::cell(std::uint64_t v) {
    separator();
    text_ += std::to_string(v);
    return *this;
}

CsvTable& CsvTable::cell(std::string_view v) {
    if (v.find_first_of(",\"\n") != std::string_view::npos) throw ConfigError("CSV cell needs quoting: " + std::string(v));
    separator();
    text_ += v;
    return *this;
}

void CsvTable::end_row() {
    if (in_row_ != columns_) {
        throw ConfigError("CSV row has " + std::to_string(in_row_) + " cells, header has " + std::to_string(columns_));
    }
    text_ += '\n';
    in_row_ = 0;
    ++rows_;
}

void CsvTable::write(const std::filesystem::path& path) const { write_text_atomic(path, text_); }

}  // namespace mcno
