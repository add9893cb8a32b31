#pragma once

// Minimal CSV builder: fixed header, '.' decimals (std::to_chars, shortest
// round-trip form), newline-terminated rows.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mcno {

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    CsvTable& cell(double v);
    CsvTable& cell(std::uint64_t v);
    CsvTable& cell(std::string_view v);
    CsvTable& cell(const char* v) { return cell(std::string_view(v)); }
    // Ends the current row; throws when its width differs from the header.
    void end_row();

    [[nodiscard]] std::size_t rows() const { return rows_; }
    [[nodiscard]] const std::string& text() const { return text_; }
    void write(const std::filesystem::path& path) const;

private:
    void separator();
    std::size_t columns_;
    std::size_t in_row_ = 0;
    std::size_t rows_ = 0;
    std::string text_;
};

[[nodiscard]] std::string format_double(double v);

}  // namespace mcno
