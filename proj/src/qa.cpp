#include "chemhop/qa.hpp"

#include <spdlog/spdlog.h>

#include "chemhop/entity.hpp"
#include "chemhop/error.hpp"
#include "chemhop/prompts.hpp"
#include "chemhop/text.hpp"

namespace chemhop::qa {

std::string OrientedTriplet::relation_text() const {
  if (!inverted) return triplet.relation;
  return "\"" + triplet.relation + "\" (reversed: Entity 2 " + triplet.relation + " Entity 1)";
}

json OrientedTriplet::to_json() const { return {{"triplet", triplet.to_json()}, {"inverted", inverted}}; }

OrientedTriplet OrientedTriplet::from_json(const json& j) {
  return {Triplet::from_json(j.at("triplet")), j.value("inverted", false)};
}

json OneHopQA::to_json() const {
  return {{"question", question}, {"answer", answer}, {"edge", edge.to_json()}, {"used_metadata", used_metadata}};
}

OneHopQA OneHopQA::from_json(const json& j) {
  return {j.at("question"), j.at("answer"), OrientedTriplet::from_json(j.at("edge")), j.value("used_metadata", false)};
}

json MultiHopQA::to_json() const {
  json subs = json::array();
  for (const auto& s : sub_qas) subs.push_back(s.to_json());
  return {{"id", id},
          {"question", question},
          {"answer", answer},
          {"hop_count", hop_count},
          {"shortcut_count", shortcut_count},
          {"path_id", path_id},
          {"context_chunk_ids", context_chunk_ids},
          {"sub_qas", subs}};
}

MultiHopQA MultiHopQA::from_json(const json& j) {
  MultiHopQA m;
  m.id = j.at("id");
  m.question = j.at("question");
  m.answer = j.at("answer");
  m.hop_count = j.at("hop_count");
  m.shortcut_count = j.value("shortcut_count", std::size_t{0});
  m.path_id = j.value("path_id", "");
  m.context_chunk_ids = j.at("context_chunk_ids").get<std::vector<std::string>>();
  if (j.contains("sub_qas")) {
    for (const auto& s : j.at("sub_qas")) m.sub_qas.push_back(OneHopQA::from_json(s));
  }
  return m;
}

bool same_entity(std::string_view candidate, std::string_view expected) {
  if (text::normalize(candidate) == text::normalize(expected)) return true;
  return entity::merge_key(candidate) == entity::merge_key(expected);
}

std::vector<std::string> answer_names(const OrientedTriplet& edge, const std::vector<std::string>& extra) {
  std::vector<std::string> names{edge.triplet.head};
  for (const auto& s : extra) {
    if (!text::trim(s).empty()) names.push_back(s);
  }
  return names;
}

std::string render_onehop_prompt(const OrientedTriplet& edge, std::string_view chunk_text,
                                 const std::optional<std::string>& meta) {
  return text::fill_template(prompts::kOneHopQuestion, {{"entity1", edge.triplet.head},
                                                        {"relation", edge.relation_text()},
                                                        {"entity2", edge.triplet.tail},
                                                        {"text", std::string(chunk_text)},
                                                        {"entity1_meta", meta.value_or("None")}});
}

namespace {

struct QA {
  std::string q;
  std::string a;
};

QA parse_qa(std::string_view reply) {
  json obj = llm::parse_structured(reply);
  auto field = [&](const char* key) {
    if (!obj.contains(key) || !obj[key].is_string() || text::trim(obj[key].get<std::string>()).empty()) {
      throw Error(ErrorCode::MalformedOutput, std::string("reply lacks a non-empty \"") + key + "\"");
    }
    return text::collapse_ws(obj[key].get<std::string>());
  };
  return {field("q"), field("a")};
}

std::optional<std::string> leaked_name(std::string_view question, const std::vector<std::string>& names) {
  for (const auto& n : names) {
    if (text::contains_phrase(question, n)) return n;
    auto expanded = entity::expand_abbreviation(n);
    if (expanded && text::contains_phrase(question, *expanded)) return *expanded;
  }
  return std::nullopt;
}

// Issue `prompt`, checking the answer and leaks; each failure class gets one
// corrective re-ask before it is raised.
QA ask_checked(llm::Gateway& gw, const GenOptions& opts, const std::string& prompt, const std::string& expected,
               const std::vector<std::string>& names) {
  llm::ChatRequest req{opts.model_id, "", prompt, opts.decode, true};
  std::string extra;
  bool mismatch_retried = false;
  bool leak_retried = false;
  for (;;) {
    req.user_text = prompt + extra;
    QA qa = llm::complete_parsed(gw, req, parse_qa).first;
    if (!same_entity(qa.a, expected)) {
      if (mismatch_retried) {
        throw Error(ErrorCode::AnswerMismatch, "answer '" + qa.a + "' is not '" + expected + "'");
      }
      mismatch_retried = true;
      extra += "\n\nThe answer \"a\" must be exactly: " + expected;
      continue;
    }
    auto names_with_reply = names;
    names_with_reply.push_back(qa.a);
    if (auto leak = leaked_name(qa.q, names_with_reply)) {
      if (leak_retried) throw Error(ErrorCode::AnswerLeak, "question mentions '" + *leak + "'");
      leak_retried = true;
      extra += "\n\nThe question must not contain \"" + *leak + "\". Rephrase it without naming the answer.";
      continue;
    }
    return qa;
  }
}

}  // namespace

OneHopQA gen_onehop(const OrientedTriplet& edge, std::string_view chunk_text, const std::optional<std::string>& meta,
                    llm::Gateway& gateway, const GenOptions& opts, const std::vector<std::string>& surface_forms) {
  std::string prompt = render_onehop_prompt(edge, chunk_text, meta);
  QA qa = ask_checked(gateway, opts, prompt, edge.triplet.head, answer_names(edge, surface_forms));
  return {qa.q, qa.a, edge, meta.has_value()};
}

std::string format_qas(const std::vector<OneHopQA>& sub_qas) {
  std::string out;
  for (std::size_t i = 0; i < sub_qas.size(); ++i) {
    if (i) out += "\n";
    out += "Q" + std::to_string(i + 1) + ": " + sub_qas[i].question + "\n";
    out += "A" + std::to_string(i + 1) + ": " + sub_qas[i].answer;
  }
  return out;
}

void check_chain(const std::vector<OneHopQA>& sub_qas) {
  if (sub_qas.empty()) throw Error(ErrorCode::ChainBroken, "no sub-questions");
  for (std::size_t i = 1; i < sub_qas.size(); ++i) {
    const auto& prev = sub_qas[i - 1].edge.triplet;
    if (!same_entity(sub_qas[i].answer, prev.tail) && !same_entity(sub_qas[i].answer, prev.head)) {
      throw Error(ErrorCode::ChainBroken, "sub-question " + std::to_string(i + 1) + " answers '" + sub_qas[i].answer +
                                              "', which is not an entity of sub-question " + std::to_string(i));
    }
  }
}

MultiHopQA aggregate(const std::vector<OneHopQA>& sub_qas, llm::Gateway& gateway, const GenOptions& opts) {
  check_chain(sub_qas);
  MultiHopQA m;
  m.sub_qas = sub_qas;
  m.hop_count = sub_qas.size();
  m.answer = sub_qas.front().answer;
  if (sub_qas.size() == 1) {
    m.question = sub_qas.front().question;
    return m;
  }
  std::vector<std::string> names;
  for (const auto& s : sub_qas) names.push_back(s.answer);
  std::string prompt = text::fill_template(prompts::kMultiHopAggregation, {{"formatted_qas", format_qas(sub_qas)}});
  m.question = ask_checked(gateway, opts, prompt, m.answer, names).q;
  return m;
}

}  // namespace chemhop::qa
