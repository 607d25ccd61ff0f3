#include <doctest.h>

#include "chemhop/text.hpp"

using namespace chemhop::text;

TEST_CASE("words are runs of non-whitespace") {
  CHECK(word_count("") == 0);
  CHECK(word_count("  a\tb\nc  ") == 3);
  auto w = split_words("Pd/C (2.0 equiv)");
  REQUIRE(w.size() == 3);
  CHECK(w[1] == "(2.0");
}

TEST_CASE("normalize folds case and whitespace") {
  CHECK(trim("  x y \n") == "x y");
  CHECK(collapse_ws(" Carbon \t\n Dioxide ") == "Carbon Dioxide");
  CHECK(normalize(" Carbon \t Dioxide ") == "carbon dioxide");
  CHECK(casefold("HCl") == "hcl");
}

TEST_CASE("contains_phrase respects word boundaries") {
  CHECK(contains_phrase("What is oxidized to form Carbon Dioxide?", "carbon dioxide"));
  CHECK(contains_phrase("methane.", "Methane"));
  CHECK_FALSE(contains_phrase("methanol is formed", "methane"));
  CHECK_FALSE(contains_phrase("polymethane", "methane"));
  CHECK(contains_phrase("carbon   dioxide", "carbon dioxide"));
  CHECK_FALSE(contains_phrase("anything", ""));
}

TEST_CASE("paragraphs split on blank lines") {
  auto p = split_paragraphs("a b\nc\n\n\n  d  \n \n\ne");
  REQUIRE(p.size() == 3);
  CHECK(p[0] == "a b\nc");
  CHECK(p[1] == "d");
  CHECK(p[2] == "e");
  CHECK(split_paragraphs("\n\n").empty());
}

TEST_CASE("fill_template replaces known keys only") {
  CHECK(fill_template("{a} and {b} and {c}", {{"a", "1"}, {"b", "{c}"}}) == "1 and {c} and {c}");
  CHECK(join({"x", "y", "z"}, ", ") == "x, y, z");
  CHECK(join({}, ", ").empty());
}

TEST_CASE("python-style quoting") {
  CHECK(py_quote("HCl") == "'HCl'");
  CHECK(py_quote("it's") == "\"it's\"");
  CHECK(py_quote("a'b\"c") == "'a\\'b\"c'");
  CHECK(py_list({"a", "b"}) == "['a', 'b']");
  CHECK(py_list({}) == "[]");
}
