#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace imhs {

/// Unicode NFC normalization of UTF-8 input. Throws Error(Parse) on invalid UTF-8.
std::string nfc(std::string_view utf8);

/// Strip ASCII and Unicode whitespace at both ends.
std::string trim(std::string_view s);

std::string to_lower_ascii(std::string_view s);

/// Lowercase hex SHA-256 of the raw bytes.
std::string sha256_hex(std::string_view bytes);

/// Cache/lookup key for a piece of text: SHA-256 of its NFC form.
inline std::string text_hash(std::string_view text) { return sha256_hex(nfc(text)); }

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
std::string file_sha256(const std::filesystem::path& path);

std::vector<std::string> split_lines(std::string_view s);

/// RFC 4180 CSV: quoted fields, doubled quotes, embedded separators and newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view content, char sep = ',');
std::string csv_escape(std::string_view field, char sep = ',');

/// Shortest decimal text that round-trips a double exactly.
std::string format_double(double v);

}  // namespace imhs
