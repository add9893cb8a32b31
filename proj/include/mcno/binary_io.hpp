#pragma once

// Little-endian serialization helpers and atomic file writes.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mcno {

class ByteWriter {
public:
    void bytes(std::string_view raw);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void f64s(std::span<const double> values);

    [[nodiscard]] const std::vector<char>& buffer() const { return buf_; }

private:
    std::vector<char> buf_;
};

class ByteReader {
public:
    ByteReader(std::vector<char> data, std::string source);

    [[nodiscard]] std::string bytes(std::size_t n);
    [[nodiscard]] std::uint32_t u32();
    [[nodiscard]] std::uint64_t u64();
    [[nodiscard]] double f64();
    void f64s(std::span<double> out);
    [[nodiscard]] std::size_t remaining() const { return data_.size() - pos_; }
    [[nodiscard]] const std::string& source() const { return source_; }

private:
    void need(std::size_t n) const;
    std::vector<char> data_;
    std::size_t pos_ = 0;
    std::string source_;
};

[[nodiscard]] std::vector<char> read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const char> data);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

// 64-bit FNV-1a; used for config hashes.
[[nodiscard]] std::uint64_t fnv1a64(std::string_view text);
[[nodiscard]] std::string hex64(std::uint64_t v);

}  // namespace mcno
