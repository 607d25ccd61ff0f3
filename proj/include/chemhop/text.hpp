#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace chemhop::text {

/// A word is a maximal run of non-whitespace characters.
std::vector<std::string_view> split_words(std::string_view s);
std::size_t word_count(std::string_view s);

std::string trim(std::string_view s);
/// Trim and collapse internal whitespace runs to a single space.
std::string collapse_ws(std::string_view s);
/// ASCII lowercase.
std::string casefold(std::string_view s);
/// collapse_ws + casefold; the equality key used for answers and entity names.
std::string normalize(std::string_view s);

/// True when `needle` occurs in `haystack` after normalizing both, bounded on
/// each side by a non-alphanumeric character or the string edge.
bool contains_phrase(std::string_view haystack, std::string_view needle);

/// Paragraphs separated by blank lines, each trimmed; empty paragraphs dropped.
std::vector<std::string> split_paragraphs(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Replace every `{name}` in `tmpl` with the matching value. Unknown keys stay.
std::string fill_template(std::string_view tmpl,
                          const std::vector<std::pair<std::string, std::string>>& values);

/// Python-repr style single-quoted string, used when rendering entity lists into prompts.
std::string py_quote(std::string_view s);
std::string py_list(const std::vector<std::string>& items);

}  // namespace chemhop::text
