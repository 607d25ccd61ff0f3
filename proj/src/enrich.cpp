#include "chemhop/enrich.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <regex>
#include <set>

#include "chemhop/error.hpp"
#include "chemhop/io.hpp"
#include "chemhop/text.hpp"

namespace chemhop::enrich {

namespace fs = std::filesystem;

namespace {

template <class T>
void put_opt(json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> get_opt(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

}  // namespace

json CompoundProfile::to_json() const {
  json j = {{"record_title", record_title},
            {"synonyms", synonyms},
            {"safety", safety},
            {"computed_properties", computed_properties}};
  put_opt(j, "description", description);
  put_opt(j, "canonical_smiles", canonical_smiles);
  put_opt(j, "molecular_formula", molecular_formula);
  return j;
}

CompoundProfile CompoundProfile::from_json(const json& j) {
  CompoundProfile p;
  p.record_title = j.at("record_title");
  p.synonyms = j.value("synonyms", std::vector<std::string>{});
  p.safety = j.value("safety", std::vector<std::string>{});
  p.computed_properties = j.value("computed_properties", std::map<std::string, std::string>{});
  p.description = get_opt<std::string>(j, "description");
  p.canonical_smiles = get_opt<std::string>(j, "canonical_smiles");
  p.molecular_formula = get_opt<std::string>(j, "molecular_formula");
  return p;
}

json EnrichmentRecord::to_json() const {
  json j = {{"entity", entity}, {"fetched_at", fetched_at}};
  put_opt(j, "wiki_summary", wiki_summary);
  j["compound"] = compound ? compound->to_json() : json(nullptr);
  return j;
}

EnrichmentRecord EnrichmentRecord::from_json(const json& j) {
  EnrichmentRecord r;
  r.entity = j.at("entity");
  r.fetched_at = j.value("fetched_at", "");
  r.wiki_summary = get_opt<std::string>(j, "wiki_summary");
  if (j.contains("compound") && !j["compound"].is_null()) r.compound = CompoundProfile::from_json(j["compound"]);
  return r;
}

bool is_molecular_formula(std::string_view formula) {
  static const std::regex re(R"(^(?:[A-Z][a-z]?\d*)+(?:[+-]\d*)?$)");
  static const std::set<std::string, std::less<>> kElements = {
      "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",  "S",  "Cl", "Ar", "K",
      "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr",
      "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La",
      "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re", "Os",
      "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",  "Np", "Pu", "Am",
      "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl",
      "Mc", "Lv", "Ts", "Og", "D",  "T"};
  if (!std::regex_match(formula.begin(), formula.end(), re)) return false;
  for (std::size_t i = 0; i < formula.size();) {
    if (formula[i] < 'A' || formula[i] > 'Z') {
      ++i;
      continue;
    }
    std::size_t len = i + 1 < formula.size() && formula[i + 1] >= 'a' && formula[i + 1] <= 'z' ? 2 : 1;
    if (!kElements.contains(formula.substr(i, len))) return false;
    i += len;
  }
  return true;
}

// ---------------------------------------------------------------------------

fs::path FetchCache::entry(std::string_view source, std::string_view name) const {
  return *dir_ / std::string(source) / (sha256_hex(text::normalize(name)) + ".json");
}

std::optional<json> FetchCache::get(std::string_view source, std::string_view name) const {
  if (!dir_) return std::nullopt;
  auto p = entry(source, name);
  if (!fs::exists(p)) return std::nullopt;
  try {
    return json::parse(read_file(p)).at("payload");
  } catch (const std::exception& e) {
    spdlog::warn("ignoring unreadable enrichment cache entry {}: {}", p.string(), e.what());
    return std::nullopt;
  }
}

void FetchCache::put(std::string_view source, std::string_view name, const json& payload) const {
  if (!dir_) return;
  json j = {{"source", source}, {"name", name}, {"payload", payload}, {"stored_at", utc_timestamp()}};
  write_file_atomic(entry(source, name), j.dump());
}

std::optional<std::string> FetchCache::stored_at(std::string_view source, std::string_view name) const {
  if (!dir_) return std::nullopt;
  auto p = entry(source, name);
  if (!fs::exists(p)) return std::nullopt;
  try {
    auto j = json::parse(read_file(p));
    if (j.contains("stored_at") && j["stored_at"].is_string()) return j["stored_at"].get<std::string>();
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

HttpSource::HttpSource(Options opts) : opts_(std::move(opts)), cache_(opts_.cache_dir), rate_(opts_.requests_per_second) {}

HttpSource::Reply HttpSource::get(std::string path) {
  httplib::Client cli(opts_.base_url);
  cli.set_connection_timeout(opts_.timeout_s, 0);
  cli.set_read_timeout(opts_.timeout_s, 0);
  for (int hop = 0; hop < 5; ++hop) {
    rate_.acquire();
    ++calls_;
    auto res = cli.Get(path);
    if (!res) throw Error(ErrorCode::SourceUnreachable, opts_.base_url + path + ": " + httplib::to_string(res.error()));
    if (res->status >= 500) {
      throw Error(ErrorCode::SourceUnreachable, opts_.base_url + path + ": status " + std::to_string(res->status));
    }
    bool redirect = res->status == 301 || res->status == 302 || res->status == 303 || res->status == 307 ||
                    res->status == 308;
    if (!redirect) return Reply{res->status, res->body};
    std::string loc = res->get_header_value("Location");
    if (loc.empty()) return Reply{res->status, res->body};
    if (loc.rfind(opts_.base_url, 0) == 0) {
      path = loc.substr(opts_.base_url.size());
    } else if (loc.find("://") != std::string::npos) {
      throw Error(ErrorCode::SourceUnreachable, "redirect to foreign host: " + loc);
    } else if (!loc.empty() && loc.front() == '/') {
      path = loc;
    } else {
      auto q = path.find('?');
      auto base = path.substr(0, q);
      path = base.substr(0, base.rfind('/') + 1) + loc;
    }
  }
  throw Error(ErrorCode::SourceUnreachable, "too many redirects for " + path);
}

// ---------------------------------------------------------------------------

WikiClient::WikiClient(Options opts, std::string path_prefix) : HttpSource(std::move(opts)), prefix_(std::move(path_prefix)) {}

std::optional<std::string> WikiClient::summary(const std::string& name) {
  if (auto cached = cache_.get("wiki", name)) {
    return cached->is_string() ? std::optional<std::string>(cached->get<std::string>()) : std::nullopt;
  }
  std::string title = text::collapse_ws(name);
  std::replace(title.begin(), title.end(), ' ', '_');
  auto reply = get(prefix_ + httplib::detail::encode_query_param(title) + "?redirect=true");
  std::optional<std::string> out;
  if (reply.status == 200) {
    try {
      auto j = json::parse(reply.body);
      std::string extract = j.value("extract", "");
      if (j.value("type", "standard") != "disambiguation" && !text::trim(extract).empty()) out = extract;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaMismatch, std::string("summary response: ") + e.what());
    }
  } else if (reply.status != 404) {
    spdlog::warn("summary lookup for '{}' returned status {}", name, reply.status);
  }
  cache_.put("wiki", name, out ? json(*out) : json(nullptr));
  return out;
}

// ---------------------------------------------------------------------------

PubChemClient::PubChemClient(Options opts) : HttpSource(std::move(opts)) {}

std::optional<long> PubChemClient::resolve_cid(const std::string& name) {
  auto reply = get("/rest/pug/compound/name/" + httplib::detail::encode_query_param(text::collapse_ws(name)) +
                   "/cids/JSON");
  if (reply.status == 404 || reply.status == 400) return std::nullopt;
  if (reply.status != 200) {
    spdlog::warn("cid lookup for '{}' returned status {}", name, reply.status);
    return std::nullopt;
  }
  try {
    auto ids = json::parse(reply.body).at("IdentifierList").at("CID");
    if (!ids.is_array() || ids.empty()) return std::nullopt;
    if (ids.size() > 1) spdlog::info("'{}' resolves to {} compound ids; taking the first", name, ids.size());
    long cid = ids[0].get<long>();
    return cid > 0 ? std::optional<long>(cid) : std::nullopt;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("cid response: ") + e.what());
  }
}

namespace {

std::vector<std::string> value_strings(const json& value) {
  std::vector<std::string> out;
  if (value.contains("StringWithMarkup")) {
    for (const auto& s : value["StringWithMarkup"]) {
      if (s.contains("String")) {
        auto str = text::trim(s["String"].get<std::string>());
        if (!str.empty()) out.push_back(str);
      }
    }
  }
  if (value.contains("Number")) {
    std::string unit = value.value("Unit", "");
    for (const auto& n : value["Number"]) {
      std::string v = n.is_number_integer() ? std::to_string(n.get<long>()) : n.dump();
      out.push_back(unit.empty() ? v : v + " " + unit);
    }
  } else if (value.contains("Unit") && !out.empty()) {
    out.front() += " " + value["Unit"].get<std::string>();
  }
  return out;
}

std::vector<std::string> markup_extras(const json& value) {
  std::vector<std::string> out;
  for (const auto& s : value.value("StringWithMarkup", json::array())) {
    for (const auto& m : s.value("Markup", json::array())) {
      if (m.contains("Extra") && m["Extra"].is_string()) out.push_back(m["Extra"].get<std::string>());
    }
  }
  return out;
}

const json* find_section(const json& sections, std::string_view heading) {
  if (!sections.is_array()) return nullptr;
  for (const auto& s : sections) {
    if (s.value("TOCHeading", "") == heading) return &s;
    if (s.contains("Section")) {
      if (const json* hit = find_section(s["Section"], heading)) return hit;
    }
  }
  return nullptr;
}

std::vector<std::string> section_strings(const json* section) {
  std::vector<std::string> out;
  if (!section) return out;
  for (const auto& info : section->value("Information", json::array())) {
    if (info.contains("Value")) {
      auto v = value_strings(info["Value"]);
      out.insert(out.end(), v.begin(), v.end());
    }
  }
  return out;
}

void append_unique(std::vector<std::string>& dst, const std::vector<std::string>& src) {
  for (const auto& s : src) {
    if (std::find(dst.begin(), dst.end(), s) == dst.end()) dst.push_back(s);
  }
}

}  // namespace

CompoundProfile PubChemClient::parse_record_view(const json& view) {
  if (!view.contains("Record")) throw Error(ErrorCode::SchemaMismatch, "record view lacks 'Record'");
  const json& rec = view["Record"];
  const json sections = rec.value("Section", json::array());
  CompoundProfile p;
  p.record_title = rec.value("RecordTitle", "");

  if (auto d = section_strings(find_section(sections, "Record Description")); !d.empty()) p.description = d.front();

  for (auto heading : {"Canonical SMILES", "SMILES"}) {
    if (auto s = section_strings(find_section(sections, heading)); !s.empty()) {
      p.canonical_smiles = s.front();
      break;
    }
  }

  if (auto f = section_strings(find_section(sections, "Molecular Formula")); !f.empty()) {
    if (is_molecular_formula(f.front())) {
      p.molecular_formula = f.front();
    } else {
      spdlog::warn("discarding malformed molecular formula '{}' for {}", f.front(), p.record_title);
    }
  }

  for (auto heading : {"Depositor-Supplied Synonyms", "MeSH Entry Terms", "Synonyms"}) {
    append_unique(p.synonyms, section_strings(find_section(sections, heading)));
  }

  if (const json* safety = find_section(sections, "Chemical Safety")) {
    for (const auto& info : safety->value("Information", json::array())) {
      if (!info.contains("Value")) continue;
      append_unique(p.safety, markup_extras(info["Value"]));
      append_unique(p.safety, value_strings(info["Value"]));
    }
  }
  if (const json* ghs = find_section(sections, "GHS Classification")) {
    for (const auto& info : ghs->value("Information", json::array())) {
      if (info.value("Name", "") == "GHS Hazard Statements" && info.contains("Value")) {
        append_unique(p.safety, value_strings(info["Value"]));
      }
    }
  }

  if (const json* props = find_section(sections, "Computed Properties")) {
    for (const auto& s : props->value("Section", json::array())) {
      auto v = section_strings(&s);
      if (!v.empty()) p.computed_properties[s.value("TOCHeading", "")] = v.front();
    }
  }
  return p;
}

std::optional<CompoundProfile> PubChemClient::compound_profile(const std::string& name) {
  if (auto cached = cache_.get("pubchem", name)) {
    if (cached->is_null()) return std::nullopt;
    return CompoundProfile::from_json(*cached);
  }
  std::optional<CompoundProfile> out;
  if (auto cid = resolve_cid(name)) {
    auto reply = get("/rest/pug_view/data/compound/" + std::to_string(*cid) + "/JSON");
    if (reply.status == 200) {
      try {
        out = parse_record_view(json::parse(reply.body));
      } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaMismatch, std::string("record view: ") + e.what());
      }
    } else {
      spdlog::warn("record view for cid {} returned status {}", *cid, reply.status);
    }
  }
  cache_.put("pubchem", name, out ? out->to_json() : json(nullptr));
  return out;
}

// ---------------------------------------------------------------------------

std::string render_metadata(const EnrichmentRecord& record) {
  std::vector<std::string> lines;
  if (record.wiki_summary) lines.push_back(*record.wiki_summary);
  if (record.compound) {
    if (record.compound->description) lines.push_back(*record.compound->description);
    if (record.compound->molecular_formula) lines.push_back("Molecular formula: " + *record.compound->molecular_formula);
  }
  return text::join(lines, "\n");
}

std::optional<EnrichmentRecord> enrich_entity(const std::string& name, WikiClient* wiki, PubChemClient* pubchem) {
  EnrichmentRecord r;
  r.entity = name;
  r.fetched_at = utc_timestamp();
  if (wiki) {
    try {
      r.wiki_summary = wiki->summary(name);
    } catch (const Error& e) {
      spdlog::warn("summary lookup for '{}' failed: {}", name, e.what());
    }
  }
  if (pubchem) {
    try {
      r.compound = pubchem->compound_profile(name);
    } catch (const Error& e) {
      spdlog::warn("compound lookup for '{}' failed: {}", name, e.what());
    }
  }
  if (!r.wiki_summary && !r.compound) return std::nullopt;
  // Prefer the cache entry's time so warm re-runs reproduce the record exactly.
  std::optional<std::string> stored;
  if (wiki) stored = wiki->cache().stored_at("wiki", name);
  if (pubchem) {
    auto p = pubchem->cache().stored_at("pubchem", name);
    if (p && (!stored || *p < *stored)) stored = p;
  }
  if (stored) r.fetched_at = *stored;
  return r;
}

}  // namespace chemhop::enrich
