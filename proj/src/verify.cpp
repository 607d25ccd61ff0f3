#include "chemhop/verify.hpp"

#include <cctype>
#include <cstdio>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "chemhop/error.hpp"
#include "chemhop/io.hpp"
#include "chemhop/prompts.hpp"
#include "chemhop/text.hpp"

namespace chemhop::verify {

namespace {

constexpr std::string_view kStageNames[] = {"onehop", "path", "leak", "length", "final"};
constexpr std::string_view kReasonNames[] = {"multiple_valid_answers", "answer_in_question", "not_chemistry",
                                             "unanswerable",           "overlong_answer",    "malformed"};

constexpr std::string_view kYesNoReminder = "\n\nAnswer with only \"yes\" or \"no\".";

}  // namespace

std::string_view to_string(Stage s) { return kStageNames[static_cast<int>(s)]; }
std::string_view to_string(Reason r) { return kReasonNames[static_cast<int>(r)]; }

Stage parse_stage(std::string_view s) {
  for (int i = 0; i < 5; ++i) {
    if (kStageNames[i] == s) return static_cast<Stage>(i);
  }
  throw Error(ErrorCode::CorruptFile, "unknown stage '" + std::string(s) + "'");
}

Reason parse_reason(std::string_view s) {
  for (int i = 0; i < 6; ++i) {
    if (kReasonNames[i] == s) return static_cast<Reason>(i);
  }
  throw Error(ErrorCode::CorruptFile, "unknown reason '" + std::string(s) + "'");
}

json Verdict::to_json() const {
  return {{"passed", passed},
          {"stage", to_string(stage)},
          {"reason", reason ? json(to_string(*reason)) : json(nullptr)},
          {"raw_judge_text", raw_judge_text},
          {"cache_key", cache_key}};
}

std::optional<bool> parse_yes_no(std::string_view reply) {
  std::string word;
  for (char c : reply) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!word.empty()) {
      break;
    }
  }
  if (word == "yes") return true;
  if (word == "no") return false;
  return std::nullopt;
}

namespace {

Verdict judge(Stage stage, Reason on_no, const std::string& prompt, llm::Gateway& gw, const JudgeOptions& opts) {
  llm::ChatRequest req{opts.model_id, "", prompt, opts.decode, false};
  Verdict v;
  v.stage = stage;
  auto resp = gw.complete(req);
  auto answer = parse_yes_no(resp.text);
  if (!answer) {
    req.user_text += kYesNoReminder;
    resp = gw.complete(req);
    answer = parse_yes_no(resp.text);
  }
  v.raw_judge_text = resp.text;
  v.cache_key = resp.cache_key;
  if (!answer) {
    v.reason = Reason::Malformed;
  } else if (*answer) {
    v.passed = true;
  } else {
    v.reason = on_no;
  }
  return v;
}

}  // namespace

std::string onehop_context(std::string_view chunk_text, const std::optional<std::string>& meta) {
  std::string ctx(chunk_text);
  if (meta && !text::trim(*meta).empty()) ctx += "\n\nInformation about the answer entity: " + *meta;
  return ctx;
}

Verdict verify_onehop(const qa::OneHopQA& qa, std::string_view context, llm::Gateway& gateway,
                      const JudgeOptions& opts) {
  std::string prompt = text::fill_template(
      prompts::kOneHopVerification, {{"question", qa.question}, {"answer", qa.answer}, {"context", std::string(context)}});
  return judge(Stage::OneHop, Reason::MultipleValidAnswers, prompt, gateway, opts);
}

std::string render_path_text(const qa::MultiHopQA& m, const corpus::ChunkIndex& chunks) {
  std::string out;
  for (std::size_t i = 0; i < m.sub_qas.size(); ++i) {
    const auto& oe = m.sub_qas[i].edge;
    const auto& t = oe.triplet;
    const std::string& head = oe.inverted ? t.tail : t.head;
    const std::string& tail = oe.inverted ? t.head : t.tail;
    out += std::to_string(i + 1) + ". (" + head + ", " + t.relation + ", " + tail + ")\n";
  }
  for (std::size_t i = 0; i < m.context_chunk_ids.size(); ++i) {
    auto it = chunks.find(m.context_chunk_ids[i]);
    if (it == chunks.end()) throw Error(ErrorCode::MissingInput, "chunk '" + m.context_chunk_ids[i] + "'");
    out += "\n[Source " + std::to_string(i + 1) + "]: " + it->second.text + "\n";
  }
  return out;
}

Verdict verify_path(const qa::MultiHopQA& m, std::string_view path_text, llm::Gateway& gateway,
                    const JudgeOptions& opts) {
  if (text::trim(path_text).empty()) {
    Verdict v;
    v.stage = Stage::Path;
    v.reason = Reason::Unanswerable;
    return v;
  }
  std::string prompt = text::fill_template(
      prompts::kPathVerification, {{"path_text", std::string(path_text)}, {"question", m.question}, {"answer", m.answer}});
  return judge(Stage::Path, Reason::Unanswerable, prompt, gateway, opts);
}

Verdict leak_and_length_gate(const qa::MultiHopQA& m) {
  Verdict v;
  std::vector<std::string> names{m.answer};
  for (const auto& s : m.sub_qas) names.push_back(s.answer);
  for (const auto& n : names) {
    if (!text::trim(n).empty() && text::contains_phrase(m.question, n)) {
      v.stage = Stage::Leak;
      v.reason = Reason::AnswerInQuestion;
      v.raw_judge_text = n;
      return v;
    }
  }
  if (text::word_count(m.answer) > qa::kMaxAnswerWords) {
    v.stage = Stage::Length;
    v.reason = Reason::OverlongAnswer;
    return v;
  }
  v.stage = Stage::Length;
  v.passed = true;
  return v;
}

json DropRecord::to_json() const {
  json j{{"item_id", item_id},
         {"stage", to_string(stage)},
         {"reason", to_string(reason)},
         {"judge_cache_key", judge_cache_key},
         {"detail", detail}};
  if (!model_tallies.empty()) j["model_tallies"] = model_tallies;
  return j;
}

DropRecord DropRecord::from_json(const json& j) {
  DropRecord d;
  d.item_id = j.at("item_id");
  d.stage = parse_stage(j.at("stage").get<std::string>());
  d.reason = parse_reason(j.at("reason").get<std::string>());
  d.judge_cache_key = j.value("judge_cache_key", "");
  d.detail = j.value("detail", "");
  if (j.contains("model_tallies")) d.model_tallies = j["model_tallies"].get<std::map<std::string, bool>>();
  return d;
}

DropRecord drop_from(const std::string& item_id, const Verdict& v, std::string detail) {
  if (v.passed || !v.reason) throw Error(ErrorCode::InvalidArgument, "cannot drop on a passing verdict");
  DropRecord d;
  d.item_id = item_id;
  d.stage = v.stage;
  d.reason = *v.reason;
  d.judge_cache_key = v.cache_key;
  d.detail = detail.empty() ? v.raw_judge_text : std::move(detail);
  return d;
}

ConsensusResult consensus_filter(const std::vector<qa::MultiHopQA>& items,
                                 const std::vector<eval::EvalRecord>& records) {
  std::map<std::string, std::map<std::string, bool>> by_model;  // model -> item -> any correct
  for (const auto& r : records) {
    auto& slot = by_model[r.model_id][r.item_id];
    slot = slot || r.correct;
  }
  if (by_model.size() < 2) {
    throw Error(ErrorCode::IncompleteRecords,
                "consensus needs records from at least 2 models, got " + std::to_string(by_model.size()));
  }
  for (const auto& [model, per_item] : by_model) {
    for (const auto& item : items) {
      if (!per_item.contains(item.id)) {
        throw Error(ErrorCode::IncompleteRecords, "no record for item " + item.id + " under model " + model);
      }
    }
  }
  ConsensusResult out;
  for (const auto& item : items) {
    std::map<std::string, bool> tallies;
    bool any = false;
    for (const auto& [model, per_item] : by_model) {
      bool ok = per_item.at(item.id);
      tallies[model] = ok;
      any = any || ok;
    }
    if (any) {
      out.kept.push_back(item);
      continue;
    }
    DropRecord d;
    d.item_id = item.id;
    d.stage = Stage::Final;
    d.reason = Reason::Unanswerable;
    d.detail = "no evaluated model answered correctly";
    d.model_tallies = std::move(tallies);
    out.dropped.push_back(std::move(d));
  }
  return out;
}

std::vector<Annotation> read_annotations(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<Annotation> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::CorruptFile, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (j.contains("schema")) continue;
    auto where = path.string() + ":" + std::to_string(lineno);
    if (!j.contains("item_id") || !j.contains("rating") || !j.contains("confidence")) {
      throw Error(ErrorCode::CorruptFile, where + ": needs item_id, rating and confidence");
    }
    Annotation a;
    a.item_id = j["item_id"].get<std::string>();
    std::string rating = text::casefold(j["rating"].get<std::string>());
    std::string conf = text::casefold(j["confidence"].get<std::string>());
    if (rating == "good") a.rating = Rating::Good;
    else if (rating == "ok") a.rating = Rating::Ok;
    else if (rating == "poor") a.rating = Rating::Poor;
    else throw Error(ErrorCode::CorruptFile, where + ": rating must be good, ok or poor");
    if (conf == "high") a.confidence = Confidence::High;
    else if (conf == "low") a.confidence = Confidence::Low;
    else throw Error(ErrorCode::CorruptFile, where + ": confidence must be high or low");
    out.push_back(std::move(a));
  }
  return out;
}

json AnnotationSummary::to_json() const {
  return {{"total", total}, {"high_confidence", high_confidence}, {"good", good},
          {"ok", ok},       {"poor", poor},                       {"unknown_items", unknown_items}};
}

std::string AnnotationSummary::markdown() const {
  auto pct = [&](std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", high_confidence ? 100.0 * static_cast<double>(n) / high_confidence : 0.0);
    return std::string(buf);
  };
  std::string out = "| Rating | Questions | Share (%) |\n|---|---:|---:|\n";
  out += "| Good | " + std::to_string(good) + " | " + pct(good) + " |\n";
  out += "| Ok | " + std::to_string(ok) + " | " + pct(ok) + " |\n";
  out += "| Poor | " + std::to_string(poor) + " | " + pct(poor) + " |\n";
  out += "\n" + std::to_string(high_confidence) + " high-confidence of " + std::to_string(total) +
         " annotated; approved (good or ok): " + pct(good + ok) + "%\n";
  return out;
}

AnnotationSummary summarize_annotations(const std::vector<Annotation>& annotations,
                                        const std::vector<qa::MultiHopQA>& dataset) {
  std::set<std::string> ids;
  for (const auto& m : dataset) ids.insert(m.id);
  AnnotationSummary s;
  s.total = annotations.size();
  for (const auto& a : annotations) {
    if (!ids.empty() && !ids.contains(a.item_id)) ++s.unknown_items;
    if (a.confidence != Confidence::High) continue;
    ++s.high_confidence;
    switch (a.rating) {
      case Rating::Good: ++s.good; break;
      case Rating::Ok: ++s.ok; break;
      case Rating::Poor: ++s.poor; break;
    }
  }
  return s;
}

}  // namespace chemhop::verify
