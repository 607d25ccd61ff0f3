#include "chemhop/entity.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <unordered_map>

#include "chemhop/error.hpp"
#include "chemhop/prompts.hpp"
#include "chemhop/text.hpp"

namespace chemhop::entity {

json Entity::to_json() const {
  return {{"canonical_name", canonical_name},
          {"surface_forms", surface_forms},
          {"first_chunk_id", first_chunk_id},
          {"chunk_ids", chunk_ids}};
}

Entity Entity::from_json(const json& j) {
  Entity e;
  e.canonical_name = j.at("canonical_name");
  e.surface_forms = j.at("surface_forms").get<std::set<std::string>>();
  e.first_chunk_id = j.at("first_chunk_id");
  e.chunk_ids = j.value("chunk_ids", std::vector<std::string>{e.first_chunk_id});
  return e;
}

json ChunkEntities::to_json() const {
  json ents = json::array();
  for (const auto& e : entities) ents.push_back(e.to_json());
  return {{"chunk_id", chunk_id}, {"doc_id", doc_id}, {"entities", ents}};
}

ChunkEntities ChunkEntities::from_json(const json& j) {
  ChunkEntities c{j.at("chunk_id"), j.value("doc_id", ""), {}};
  for (const auto& e : j.at("entities")) c.entities.push_back(Entity::from_json(e));
  return c;
}

// ---------------------------------------------------------------------------
// Providers

namespace {
bool word_char(char c) {
  auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) != 0;
}
}  // namespace

LexiconProvider::LexiconProvider(std::vector<std::string> terms) {
  for (auto& t : terms) {
    auto folded = text::casefold(text::trim(t));
    if (!folded.empty()) terms_.push_back(std::move(folded));
  }
  std::sort(terms_.begin(), terms_.end());
  terms_.erase(std::unique(terms_.begin(), terms_.end()), terms_.end());
}

std::unique_ptr<LexiconProvider> LexiconProvider::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ProviderUnavailable, "cannot open lexicon " + path.string());
  std::vector<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    terms.push_back(std::move(t));
  }
  return std::make_unique<LexiconProvider>(std::move(terms));
}

std::vector<EntitySpan> LexiconProvider::find(std::string_view input) {
  std::vector<EntitySpan> out;
  const std::string folded = text::casefold(input);
  for (const auto& term : terms_) {
    for (auto pos = folded.find(term); pos != std::string::npos; pos = folded.find(term, pos + 1)) {
      std::size_t end = pos + term.size();
      bool left = pos == 0 || !word_char(folded[pos - 1]) || !word_char(term.front());
      bool right = end == folded.size() || !word_char(folded[end]) || !word_char(term.back());
      if (left && right) out.push_back({std::string(input.substr(pos, term.size())), pos, end, 1.0});
    }
  }
  return out;
}

HttpNerProvider::HttpNerProvider(std::string base_url, int timeout_s)
    : base_url_(std::move(base_url)), timeout_s_(timeout_s) {}

bool HttpNerProvider::healthy() {
  httplib::Client cli(base_url_);
  cli.set_connection_timeout(timeout_s_, 0);
  auto res = cli.Get("/health");
  return res && res->status == 200;
}

std::optional<std::size_t> HttpNerProvider::byte_offset(std::string_view utf8, std::size_t codepoints) {
  std::size_t cp = 0;
  for (std::size_t i = 0; i < utf8.size(); ++i) {
    if ((static_cast<unsigned char>(utf8[i]) & 0xC0) == 0x80) continue;
    if (cp == codepoints) return i;
    ++cp;
  }
  if (cp == codepoints) return utf8.size();
  return std::nullopt;
}

std::vector<EntitySpan> HttpNerProvider::find(std::string_view input) {
  httplib::Client cli(base_url_);
  cli.set_connection_timeout(timeout_s_, 0);
  cli.set_read_timeout(timeout_s_, 0);
  json req = {{"text", input}};
  auto res = cli.Post("/ner", req.dump(), "application/json");
  if (!res) throw Error(ErrorCode::ProviderUnavailable, "NER service: " + httplib::to_string(res.error()));
  if (res->status == 413) {
    throw Error(ErrorCode::InvalidArgument, "NER service rejected " + std::to_string(input.size()) + " bytes as too long");
  }
  if (res->status != 200) {
    throw Error(ErrorCode::ProviderUnavailable, "NER service status " + std::to_string(res->status));
  }
  std::vector<EntitySpan> out;
  try {
    const json reply = json::parse(res->body);
    for (const auto& s : reply.at("spans")) {
      auto b = byte_offset(input, s.at("start").get<std::size_t>());
      auto e = byte_offset(input, s.at("end").get<std::size_t>());
      if (!b || !e || *b >= *e) {
        spdlog::warn("NER span with invalid offsets dropped");
        continue;
      }
      EntitySpan span{std::string(input.substr(*b, *e - *b)), *b, *e, s.value("score", 1.0)};
      if (s.contains("surface") && s["surface"].get<std::string>() != span.surface) {
        spdlog::warn("NER span surface mismatch dropped: {}", s["surface"].get<std::string>());
        continue;
      }
      out.push_back(std::move(span));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ProviderUnavailable, std::string("NER response malformed: ") + e.what());
  }
  return out;
}

std::vector<EntitySpan> resolve_overlaps(std::vector<EntitySpan> spans) {
  std::sort(spans.begin(), spans.end(), [](const EntitySpan& a, const EntitySpan& b) {
    std::size_t la = a.end - a.start, lb = b.end - b.start;
    if (la != lb) return la > lb;
    if (a.start != b.start) return a.start < b.start;
    return a.score > b.score;
  });
  std::vector<EntitySpan> kept;
  for (auto& s : spans) {
    bool clash = std::any_of(kept.begin(), kept.end(),
                             [&](const EntitySpan& k) { return s.start < k.end && k.start < s.end; });
    if (!clash) kept.push_back(std::move(s));
  }
  std::sort(kept.begin(), kept.end(), [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
  return kept;
}

std::vector<EntitySpan> detect(const corpus::Chunk& chunk, NerProvider& provider) {
  if (chunk.text.empty()) return {};
  return resolve_overlaps(provider.find(chunk.text));
}

// ---------------------------------------------------------------------------
// Canonical names

namespace {

constexpr std::array<std::string_view, 118> kElements = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",  "S",  "Cl", "Ar",
    "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
    "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe",
    "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf",
    "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs",
    "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

bool is_element(std::string_view s) { return std::find(kElements.begin(), kElements.end(), s) != kElements.end(); }

// Recursive descent over element symbols, digits and parenthesized groups.
bool parse_formula(std::string_view s, std::size_t& i, int depth) {
  bool any = false;
  while (i < s.size()) {
    char c = s[i];
    if (c == '(' || c == '[') {
      char close = c == '(' ? ')' : ']';
      ++i;
      if (!parse_formula(s, i, depth + 1) || i >= s.size() || s[i] != close) return false;
      ++i;
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      // Prefer the two-letter symbol when it exists.
      if (i + 1 < s.size() && std::islower(static_cast<unsigned char>(s[i + 1])) && is_element(s.substr(i, 2))) {
        i += 2;
      } else if (is_element(s.substr(i, 1))) {
        i += 1;
      } else {
        return false;
      }
    } else if ((c == ')' || c == ']') && depth > 0) {
      return any;
    } else {
      return false;
    }
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    any = true;
  }
  return any;
}

const std::unordered_map<std::string_view, std::string_view>& abbreviations() {
  static const std::unordered_map<std::string_view, std::string_view> table = {
      {"MeOH", "methanol"},          {"EtOH", "ethanol"},
      {"iPrOH", "isopropanol"},      {"i-PrOH", "isopropanol"},
      {"DMSO", "dimethyl sulfoxide"}, {"DMF", "dimethylformamide"},
      {"THF", "tetrahydrofuran"},    {"DCM", "dichloromethane"},
      {"MeCN", "acetonitrile"},      {"AcOH", "acetic acid"},
      {"EtOAc", "ethyl acetate"},    {"TFA", "trifluoroacetic acid"},
      {"Et3N", "triethylamine"},     {"TEA", "triethylamine"},
      {"Et2O", "diethyl ether"},     {"NMP", "N-methyl-2-pyrrolidone"},
      {"DME", "1,2-dimethoxyethane"}, {"Ac2O", "acetic anhydride"},
      {"DMAP", "4-dimethylaminopyridine"}, {"TBAF", "tetra-n-butylammonium fluoride"},
  };
  return table;
}

}  // namespace

bool is_formula_token(std::string_view token) {
  if (token.empty()) return false;
  // Ionic charge suffix: Fe3+, SO4(2-)
  while (!token.empty() && (token.back() == '+' || token.back() == '-')) token.remove_suffix(1);
  std::size_t i = 0;
  return parse_formula(token, i, 0) && i == token.size();
}

std::optional<std::string> expand_abbreviation(std::string_view surface) {
  auto key = text::collapse_ws(surface);
  const auto& table = abbreviations();
  if (auto it = table.find(key); it != table.end()) return std::string(it->second);
  return std::nullopt;
}

std::string canonical_name(std::string_view surface) {
  std::string s = text::collapse_ws(surface);
  if (auto ex = expand_abbreviation(s)) return *ex;
  std::string out;
  for (auto word : text::split_words(s)) {
    if (!out.empty()) out.push_back(' ');
    // Hyphenated parts are judged separately: "Pd-decorated" keeps "Pd".
    std::size_t start = 0;
    while (start <= word.size()) {
      std::size_t dash = word.find('-', start);
      auto part = word.substr(start, dash == std::string_view::npos ? std::string_view::npos : dash - start);
      bool keep = is_formula_token(part) || expand_abbreviation(part).has_value();
      if (auto ex = expand_abbreviation(part)) {
        out.append(*ex);
      } else {
        out.append(keep ? std::string(part) : text::casefold(part));
      }
      if (dash == std::string_view::npos) break;
      out.push_back('-');
      start = dash + 1;
    }
  }
  return out;
}

std::string merge_key(std::string_view name) { return text::casefold(canonical_name(name)); }

// ---------------------------------------------------------------------------
// Verification

std::string render_verify_prompt(const std::vector<std::string>& surfaces, std::string_view chunk_text) {
  return text::fill_template(prompts::kEntityVerification,
                             {{"entities", text::py_list(surfaces)}, {"text", std::string(chunk_text)}});
}

namespace {

std::vector<std::string> parse_string_list(std::string_view reply) {
  json v = llm::parse_literal(reply);
  if (!v.is_array()) throw Error(ErrorCode::MalformedOutput, "expected a list of entity names");
  std::vector<std::string> out;
  for (const auto& x : v) {
    if (!x.is_string()) throw Error(ErrorCode::MalformedOutput, "entity list holds a non-string");
    out.push_back(x.get<std::string>());
  }
  return out;
}

// The input surfaces a returned name traces back to; empty when it was invented.
std::vector<std::string> trace_to_inputs(const std::string& name, const std::vector<std::string>& surfaces) {
  std::vector<std::string> hits;
  const auto key = merge_key(name);
  const auto folded = text::normalize(name);
  for (const auto& s : surfaces) {
    if (text::normalize(s) == folded || merge_key(s) == key) hits.push_back(s);
  }
  return hits;
}

}  // namespace

std::vector<Entity> verify(const std::vector<EntitySpan>& spans, const corpus::Chunk& chunk, llm::Gateway& gateway,
                           const VerifyOptions& opts) {
  std::vector<std::string> surfaces;
  for (const auto& s : spans) {
    if (std::find(surfaces.begin(), surfaces.end(), s.surface) == surfaces.end()) surfaces.push_back(s.surface);
  }
  if (surfaces.empty()) return {};

  llm::ChatRequest req;
  req.model_id = opts.model_id;
  req.user_text = render_verify_prompt(surfaces, chunk.text);
  req.decode = opts.decode;
  auto [names, resp] = llm::complete_parsed(gateway, req, parse_string_list, "\n\nReturn only the Python list.");

  std::vector<Entity> out;
  std::map<std::string, std::size_t> index;
  for (const auto& name : names) {
    auto sources = trace_to_inputs(name, surfaces);
    if (sources.empty()) {
      spdlog::info("verifier returned '{}' not among detected entities of {}; dropped", name, chunk.chunk_id);
      continue;
    }
    auto canonical = canonical_name(name);
    if (canonical.empty()) continue;
    auto key = text::casefold(canonical);
    auto it = index.find(key);
    if (it == index.end()) {
      Entity e;
      e.canonical_name = canonical;
      e.first_chunk_id = chunk.chunk_id;
      e.chunk_ids = {chunk.chunk_id};
      index.emplace(key, out.size());
      out.push_back(std::move(e));
      it = index.find(key);
    }
    out[it->second].surface_forms.insert(sources.begin(), sources.end());
  }
  return out;
}

std::vector<Entity> merge_entities(const std::vector<ChunkEntities>& per_chunk) {
  std::vector<Entity> out;
  std::map<std::string, std::size_t> index;
  for (const auto& ce : per_chunk) {
    for (const auto& e : ce.entities) {
      auto key = merge_key(e.canonical_name);
      auto it = index.find(key);
      if (it == index.end()) {
        index.emplace(key, out.size());
        out.push_back(e);
        continue;
      }
      Entity& m = out[it->second];
      m.surface_forms.insert(e.surface_forms.begin(), e.surface_forms.end());
      for (const auto& c : e.chunk_ids) {
        if (std::find(m.chunk_ids.begin(), m.chunk_ids.end(), c) == m.chunk_ids.end()) m.chunk_ids.push_back(c);
      }
    }
  }
  return out;
}

}  // namespace chemhop::entity
