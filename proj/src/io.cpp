#include "chemhop/io.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

#include "chemhop/error.hpp"

namespace chemhop {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  static std::atomic<unsigned long> counter{0};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ostringstream suffix;
  suffix << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id()) << '.' << counter++;
  fs::path tmp = path;
  tmp += suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::InvalidArgument, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingInput, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_records(const fs::path& path, std::string_view schema, const std::vector<json>& records,
                   json extra_header) {
  json header = {{"schema", schema}, {"version", 1}, {"count", records.size()}};
  for (auto& [k, v] : extra_header.items()) header[k] = v;
  std::string body = header.dump() + "\n";
  for (const auto& r : records) body += r.dump() + "\n";
  write_file_atomic(path, body);
}

RecordFile read_records(const fs::path& path, std::string_view expected_schema) {
  if (!fs::exists(path)) throw Error(ErrorCode::MissingInput, path.string() + " does not exist");
  std::ifstream in(path);
  std::string line;
  RecordFile out;
  if (!std::getline(in, line)) throw Error(ErrorCode::CorruptFile, path.string() + ": empty file");
  try {
    out.header = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, path.string() + ": bad header: " + e.what());
  }
  if (out.header.value("schema", "") != expected_schema) {
    throw Error(ErrorCode::CorruptFile, path.string() + ": expected schema " + std::string(expected_schema));
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.records.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::CorruptFile, path.string() + ": bad record: " + e.what());
    }
  }
  if (out.header.contains("count") && out.header["count"].get<std::size_t>() != out.records.size()) {
    throw Error(ErrorCode::CorruptFile, path.string() + ": record count mismatch");
  }
  return out;
}

}  // namespace chemhop
