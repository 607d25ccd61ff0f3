#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace chemhop {

using json = nlohmann::json;

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Write via a sibling temp file and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

std::string utc_timestamp();

// Artifact files are JSON-lines: the first line is a header object carrying
// "schema" and "version", every following line is one record.

struct RecordFile {
  json header;
  std::vector<json> records;
};

void write_records(const std::filesystem::path& path, std::string_view schema,
                   const std::vector<json>& records, json extra_header = json::object());
RecordFile read_records(const std::filesystem::path& path, std::string_view expected_schema);

}  // namespace chemhop
