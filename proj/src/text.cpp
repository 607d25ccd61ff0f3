#include "chemhop/text.hpp"

#include <cctype>

#include "chemhop/error.hpp"

namespace chemhop {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ProviderUnreachable: return "ProviderUnreachable";
    case ErrorCode::ProviderRejected: return "ProviderRejected";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::MalformedOutput: return "MalformedOutput";
    case ErrorCode::SourceUnreachable: return "SourceUnreachable";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::NoIntroductionFound: return "NoIntroductionFound";
    case ErrorCode::AmbiguousName: return "AmbiguousName";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::NoPathsAvailable: return "NoPathsAvailable";
    case ErrorCode::AnswerLeak: return "AnswerLeak";
    case ErrorCode::AnswerMismatch: return "AnswerMismatch";
    case ErrorCode::ChainBroken: return "ChainBroken";
    case ErrorCode::IncompleteRecords: return "IncompleteRecords";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

}  // namespace chemhop

namespace chemhop::text {

namespace {
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) {
  // Non-ASCII bytes count as word characters so UTF-8 names are not split.
  auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) != 0;
}
}  // namespace

std::vector<std::string_view> split_words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::size_t word_count(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string collapse_ws(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (auto w : split_words(s)) {
    if (!out.empty()) out.push_back(' ');
    out.append(w);
  }
  return out;
}

std::string casefold(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string normalize(std::string_view s) { return casefold(collapse_ws(s)); }

bool contains_phrase(std::string_view haystack, std::string_view needle) {
  const std::string h = normalize(haystack);
  const std::string n = normalize(needle);
  if (n.empty()) return false;
  for (std::size_t pos = h.find(n); pos != std::string::npos; pos = h.find(n, pos + 1)) {
    bool left_ok = pos == 0 || !is_alnum(h[pos - 1]) || !is_alnum(n.front());
    std::size_t end = pos + n.size();
    bool right_ok = end == h.size() || !is_alnum(h[end]) || !is_alnum(n.back());
    if (left_ok && right_ok) return true;
  }
  return false;
}

std::vector<std::string> split_paragraphs(std::string_view s) {
  std::vector<std::string> out;
  std::string current;
  std::size_t i = 0;
  auto flush = [&] {
    auto t = trim(current);
    if (!t.empty()) out.push_back(std::move(t));
    current.clear();
  };
  while (i <= s.size()) {
    std::size_t nl = s.find('\n', i);
    std::string_view line = s.substr(i, nl == std::string_view::npos ? s.size() - i : nl - i);
    if (trim(line).empty()) {
      flush();
    } else {
      if (!current.empty()) current.push_back('\n');
      current.append(line);
    }
    if (nl == std::string_view::npos) break;
    i = nl + 1;
  }
  flush();
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

std::string fill_template(std::string_view tmpl,
                          const std::vector<std::pair<std::string, std::string>>& values) {
  std::string out;
  out.reserve(tmpl.size() * 2);
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      std::size_t close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        std::string_view key = tmpl.substr(i + 1, close - i - 1);
        bool replaced = false;
        for (const auto& [k, v] : values) {
          if (k == key) {
            out.append(v);
            replaced = true;
            break;
          }
        }
        if (replaced) {
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

std::string py_quote(std::string_view s) {
  char q = (s.find('\'') != std::string_view::npos && s.find('"') == std::string_view::npos) ? '"' : '\'';
  std::string out(1, q);
  for (char c : s) {
    if (c == q || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out.append("\\n");
      continue;
    }
    out.push_back(c);
  }
  out.push_back(q);
  return out;
}

std::string py_list(const std::vector<std::string>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out.append(", ");
    out.append(py_quote(items[i]));
  }
  out.push_back(']');
  return out;
}

}  // namespace chemhop::text
