#include "chemhop/corpus.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <regex>
#include <sstream>

#include "chemhop/error.hpp"
#include "chemhop/io.hpp"
#include "chemhop/text.hpp"

namespace chemhop::corpus {

json Document::to_json() const {
  return {{"doc_id", doc_id}, {"title", title}, {"license", license}, {"body_text", body_text},
          {"retrieved_at", retrieved_at}};
}

Document Document::from_json(const json& j) {
  return Document{j.at("doc_id"), j.value("title", ""), j.value("license", ""), j.at("body_text"),
                  j.value("retrieved_at", "")};
}

json Chunk::to_json() const {
  return {{"chunk_id", chunk_id}, {"doc_id", doc_id}, {"ordinal", ordinal},
          {"text", text},         {"word_count", word_count}, {"oversize", oversize}};
}

Chunk Chunk::from_json(const json& j) {
  return Chunk{j.at("chunk_id"), j.at("doc_id"), j.at("ordinal"), j.at("text"), j.at("word_count"),
               j.value("oversize", false)};
}

SourceConfig SourceConfig::from_json(const json& j) {
  SourceConfig c;
  c.base_url = j.value("base_url", "");
  c.path_template = j.value("path_template", c.path_template);
  c.items_field = j.value("items_field", c.items_field);
  c.page_size = j.value("page_size", c.page_size);
  c.max_pages = j.value("max_pages", c.max_pages);
  c.first_page = j.value("first_page", c.first_page);
  c.id_field = j.value("id_field", c.id_field);
  c.title_field = j.value("title_field", c.title_field);
  c.license_field = j.value("license_field", c.license_field);
  c.body_field = j.value("body_field", c.body_field);
  c.license_allow = j.value("license_allow", c.license_allow);
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  return c;
}

namespace {

const json* lookup(const json& obj, const std::string& dotted) {
  const json* cur = &obj;
  std::size_t start = 0;
  while (start <= dotted.size()) {
    std::size_t dot = dotted.find('.', start);
    std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!cur->is_object() || !cur->contains(key)) return nullptr;
    cur = &(*cur)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return cur;
}

std::string required_string(const json& item, const std::string& field) {
  const json* v = lookup(item, field);
  if (!v || v->is_null()) throw Error(ErrorCode::SchemaMismatch, "article missing field '" + field + "'");
  if (v->is_string()) return v->get<std::string>();
  if (v->is_number()) return v->dump();
  throw Error(ErrorCode::SchemaMismatch, "field '" + field + "' is not a string");
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

}  // namespace

std::optional<Document> document_from_item(const json& item, const SourceConfig& source) {
  Document d;
  d.doc_id = required_string(item, source.id_field);
  d.license = required_string(item, source.license_field);
  d.body_text = required_string(item, source.body_field);
  const json* title = lookup(item, source.title_field);
  d.title = title && title->is_string() ? title->get<std::string>() : "";
  d.retrieved_at = utc_timestamp();
  bool allowed = std::find(source.license_allow.begin(), source.license_allow.end(), d.license) !=
                 source.license_allow.end();
  if (!allowed) return std::nullopt;
  return d;
}

std::vector<Document> load_articles_file(const std::filesystem::path& path, const SourceConfig& source) {
  std::string content = read_file(path);
  json items = json::array();
  try {
    auto first = content.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && content[first] == '[') {
      items = json::parse(content);
    } else {
      std::istringstream in(content);
      std::string line;
      while (std::getline(in, line)) {
        if (!text::trim(line).empty()) items.push_back(json::parse(line));
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, path.string() + ": " + e.what());
  }
  std::vector<Document> docs;
  for (const auto& item : items) {
    if (auto d = document_from_item(item, source)) docs.push_back(std::move(*d));
  }
  return docs;
}

std::vector<Document> fetch_articles(const SourceConfig& source) {
  httplib::Client cli(source.base_url);
  cli.set_connection_timeout(source.timeout_s, 0);
  cli.set_read_timeout(source.timeout_s, 0);
  cli.set_follow_location(true);

  std::vector<Document> docs;
  std::size_t skipped = 0;
  for (std::size_t page = 0; source.max_pages == 0 || page < source.max_pages; ++page) {
    std::string path = source.path_template;
    path = replace_all(path, "{page}", std::to_string(source.first_page + page));
    path = replace_all(path, "{offset}", std::to_string(page * source.page_size));
    path = replace_all(path, "{limit}", std::to_string(source.page_size));

    auto res = cli.Get(path);
    if (!res) {
      throw Error(ErrorCode::SourceUnreachable, source.base_url + path + ": " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw Error(ErrorCode::SourceUnreachable, source.base_url + path + ": status " + std::to_string(res->status));
    }
    json body;
    try {
      body = json::parse(res->body);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaMismatch, std::string("page is not JSON: ") + e.what());
    }
    const json* items = source.items_field.empty() ? &body : lookup(body, source.items_field);
    if (!items || !items->is_array()) {
      throw Error(ErrorCode::SchemaMismatch, "page lacks array '" + source.items_field + "'");
    }
    for (const auto& item : *items) {
      if (auto d = document_from_item(item, source)) {
        docs.push_back(std::move(*d));
      } else {
        ++skipped;
      }
    }
    if (items->size() < source.page_size || items->empty()) break;
  }
  spdlog::info("fetched {} documents ({} skipped by license)", docs.size(), skipped);
  return docs;
}

namespace {

std::vector<std::regex> compile(const std::vector<std::string>& patterns) {
  std::vector<std::regex> out;
  for (const auto& p : patterns) out.emplace_back(p, std::regex::ECMAScript | std::regex::icase);
  return out;
}

bool any_match(const std::vector<std::regex>& res, const std::string& line) {
  return std::any_of(res.begin(), res.end(), [&](const std::regex& r) { return std::regex_search(line, r); });
}

std::string pack_window(const std::vector<std::string>& paragraphs, std::size_t max_words) {
  std::vector<std::string> kept;
  std::size_t total = 0;
  for (const auto& p : paragraphs) {
    std::size_t w = text::word_count(p);
    if (total + w > max_words) break;
    kept.push_back(p);
    total += w;
  }
  if (kept.empty() && !paragraphs.empty()) kept.push_back(paragraphs.front());
  return text::join(kept, "\n\n");
}

}  // namespace

std::string extract_intro_window(const Document& doc, const IntroOptions& opts) {
  const auto headers = compile(opts.header_patterns);
  const auto ends = compile(opts.end_patterns);

  std::vector<std::string> lines;
  {
    std::size_t start = 0;
    const std::string& b = doc.body_text;
    while (start <= b.size()) {
      std::size_t nl = b.find('\n', start);
      lines.push_back(b.substr(start, nl == std::string::npos ? std::string::npos : nl - start));
      if (nl == std::string::npos) break;
      start = nl + 1;
    }
  }

  std::size_t begin = lines.size();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (any_match(headers, lines[i])) {
      begin = i + 1;
      break;
    }
  }
  if (begin == lines.size()) {
    if (!opts.fallback_to_body_start) {
      throw Error(ErrorCode::NoIntroductionFound, "no introduction header in " + doc.doc_id);
    }
    begin = 0;
  }

  std::string section;
  for (std::size_t i = begin; i < lines.size(); ++i) {
    if (i > begin && any_match(ends, lines[i])) break;
    if (i == begin && any_match(ends, lines[i]) && !text::trim(lines[i]).empty()) break;
    section += lines[i];
    section += '\n';
  }
  auto paragraphs = text::split_paragraphs(section);
  if (paragraphs.empty()) throw Error(ErrorCode::NoIntroductionFound, "empty introduction in " + doc.doc_id);
  return pack_window(paragraphs, opts.max_words);
}

std::vector<Chunk> chunk_text(std::string_view input, const std::string& doc_id, std::size_t max_words) {
  std::vector<Chunk> chunks;
  std::vector<std::string> pending;
  std::size_t pending_words = 0;

  auto emit = [&](std::vector<std::string> paras, std::size_t words, bool oversize) {
    Chunk c;
    c.doc_id = doc_id;
    c.ordinal = chunks.size();
    c.chunk_id = doc_id + "#c" + std::to_string(c.ordinal);
    c.text = text::join(paras, "\n\n");
    c.word_count = words;
    c.oversize = oversize;
    chunks.push_back(std::move(c));
  };
  auto flush = [&] {
    if (pending.empty()) return;
    emit(std::move(pending), pending_words, false);
    pending.clear();
    pending_words = 0;
  };

  for (auto& para : text::split_paragraphs(input)) {
    std::size_t w = text::word_count(para);
    if (w > max_words) {
      flush();
      emit({std::move(para)}, w, true);
      continue;
    }
    if (pending_words + w > max_words) flush();
    pending.push_back(std::move(para));
    pending_words += w;
  }
  flush();
  return chunks;
}

}  // namespace chemhop::corpus
