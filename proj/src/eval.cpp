#include "chemhop/eval.hpp"

#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "chemhop/error.hpp"
#include "chemhop/prompts.hpp"
#include "chemhop/text.hpp"

namespace chemhop::eval {

json EvalRecord::to_json() const {
  json j{{"item_id", item_id},
         {"model_id", model_id},
         {"with_context", with_context},
         {"prediction", prediction},
         {"exact_match", exact_match},
         {"judged_correct", judged_correct ? json(*judged_correct) : json(nullptr)},
         {"correct", correct},
         {"judge_flagged", judge_flagged},
         {"latency_s", latency_s},
         {"input_tokens", input_tokens},
         {"output_tokens", output_tokens},
         {"hop_count", hop_count},
         {"error", error ? json(*error) : json(nullptr)}};
  return j;
}

EvalRecord EvalRecord::from_json(const json& j) {
  EvalRecord r;
  r.item_id = j.at("item_id");
  r.model_id = j.value("model_id", "");
  r.with_context = j.value("with_context", false);
  r.prediction = j.value("prediction", "");
  r.exact_match = j.at("exact_match");
  if (j.contains("judged_correct") && !j["judged_correct"].is_null()) r.judged_correct = j["judged_correct"].get<bool>();
  r.correct = j.at("correct");
  r.judge_flagged = j.value("judge_flagged", false);
  r.latency_s = j.value("latency_s", 0.0);
  r.input_tokens = j.value("input_tokens", 0L);
  r.output_tokens = j.value("output_tokens", 0L);
  r.hop_count = j.value("hop_count", std::size_t{0});
  if (j.contains("error") && !j["error"].is_null()) r.error = j["error"].get<std::string>();
  return r;
}

std::string answer_key(std::string_view s) {
  std::string k = text::normalize(s);
  auto strip = [](char c) { return c == '"' || c == '\'' || c == '.' || c == '!' || c == ',' || c == ';' || c == '`'; };
  std::size_t b = 0, e = k.size();
  while (b < e && strip(k[b])) ++b;
  while (e > b && strip(k[e - 1])) --e;
  return text::trim(std::string_view(k).substr(b, e - b));
}

namespace {

std::optional<bool> parse_verdict(std::string_view reply) {
  std::string word;
  for (char c : reply) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    } else if (!word.empty()) {
      break;
    }
  }
  if (word == "CORRECT") return true;
  if (word == "INCORRECT") return false;
  return std::nullopt;
}

}  // namespace

Grade grade(std::string_view prediction, std::string_view gold, std::string_view question, llm::Gateway* judge,
            const std::string& judge_model, const llm::DecodeParams& judge_decode) {
  Grade g;
  if (!answer_key(prediction).empty() && answer_key(prediction) == answer_key(gold)) {
    g.exact_match = g.correct = true;
    return g;
  }
  if (!judge) {
    g.judged = false;
    return g;
  }
  std::string prompt = text::fill_template(prompts::kJudge, {{"question", std::string(question)},
                                                             {"gold", std::string(gold)},
                                                             {"prediction", std::string(prediction)}});
  llm::ChatRequest req{judge_model, "", prompt, judge_decode, false};
  auto verdict = parse_verdict(judge->complete(req).text);
  if (!verdict) {
    req.user_text += "\n\nReply with exactly one word: CORRECT or INCORRECT.";
    verdict = parse_verdict(judge->complete(req).text);
  }
  if (!verdict) {
    g.flagged = true;
    g.judged = false;
    return g;
  }
  g.judged = *verdict;
  g.correct = *verdict;
  return g;
}

std::string render_context(const qa::MultiHopQA& item, const corpus::ChunkIndex& chunks) {
  std::string out;
  for (std::size_t i = 0; i < item.context_chunk_ids.size(); ++i) {
    auto it = chunks.find(item.context_chunk_ids[i]);
    if (it == chunks.end()) {
      throw Error(ErrorCode::MissingInput, "chunk '" + item.context_chunk_ids[i] + "' of item " + item.id);
    }
    if (i) out += "\n\n";
    out += "[Source " + std::to_string(i + 1) + "]: " + it->second.text;
  }
  return out;
}

std::string extract_answer(std::string_view reply) {
  json obj = llm::parse_structured(reply);
  if (!obj.contains("answer")) throw Error(ErrorCode::MalformedOutput, "reply has no \"answer\" key");
  const auto& a = obj["answer"];
  if (a.is_string()) return text::collapse_ws(a.get<std::string>());
  if (a.is_number() || a.is_boolean()) return a.dump();
  throw Error(ErrorCode::MalformedOutput, "\"answer\" is not a scalar");
}

std::vector<EvalRecord> run_eval(const std::vector<qa::MultiHopQA>& dataset, const EvalSetup& setup,
                                 const corpus::ChunkIndex& chunks, llm::Gateway& gateway) {
  std::vector<std::string> contexts(dataset.size());
  if (setup.with_context) {
    for (std::size_t i = 0; i < dataset.size(); ++i) contexts[i] = render_context(dataset[i], chunks);
  }

  std::vector<EvalRecord> records(dataset.size());
  auto run_one = [&](std::size_t i) {
    const auto& item = dataset[i];
    EvalRecord& r = records[i];
    r.item_id = item.id;
    r.model_id = setup.model_id;
    r.with_context = setup.with_context;
    r.hop_count = item.hop_count;
    std::string user = setup.with_context
                           ? text::fill_template(prompts::kAnswerWithContext,
                                                 {{"context", contexts[i]}, {"question", item.question}})
                           : text::fill_template(prompts::kAnswerNoContext, {{"question", item.question}});
    llm::ChatRequest req{setup.model_id, std::string(prompts::kAnswerSystem), user, setup.decode, true};
    try {
      auto [answer, resp] = llm::complete_parsed(gateway, req, extract_answer);
      r.prediction = answer;
      r.latency_s = resp.latency_s;
      r.input_tokens = resp.input_tokens;
      r.output_tokens = resp.output_tokens;
      Grade g = grade(answer, item.answer, item.question, setup.judge_model.empty() ? nullptr : &gateway,
                      setup.judge_model, setup.judge_decode);
      r.exact_match = g.exact_match;
      r.judged_correct = g.judged;
      r.correct = g.correct;
      r.judge_flagged = g.flagged;
    } catch (const Error& e) {
      r.error = std::string(to_string(e.code())) + ": " + e.what();
      r.correct = false;
      if (!r.exact_match && !r.judged_correct) r.judged_correct = false;
      spdlog::warn("item {}: {}", item.id, *r.error);
    }
  };

  std::size_t workers = std::max<std::size_t>(1, std::min(setup.concurrency, dataset.size()));
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i = next++; i < dataset.size(); i = next++) run_one(i);
  };
  if (workers == 1) {
    loop();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(loop);
  }
  return records;
}

MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd m;
  if (xs.empty()) return m;
  double sum = 0;
  for (double x : xs) sum += x;
  m.mean = sum / static_cast<double>(xs.size());
  double ss = 0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.sd = std::sqrt(ss / static_cast<double>(xs.size()));
  return m;
}

json Report::to_json() const {
  json per_hop = json::object();
  for (const auto& [h, pct] : per_hop_correctness_pct) {
    per_hop[std::to_string(h)] = {{"correctness_rate_pct", pct},
                                  {"items", per_hop_items.at(h)},
                                  {"avg_output_tokens", per_hop_avg_output_tokens.at(h)}};
  }
  return {{"model_id", model_id},
          {"with_context", with_context},
          {"item_count", item_count},
          {"correct_count", correct_count},
          {"error_count", error_count},
          {"correctness_rate_pct", correctness_rate_pct},
          {"avg_duration_s", avg_duration_s},
          {"avg_input_tokens", avg_input_tokens},
          {"avg_output_tokens", avg_output_tokens},
          {"total_input_tokens_k", total_input_tokens_k},
          {"total_output_tokens_k", total_output_tokens_k},
          {"per_hop", per_hop}};
}

Report report(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::InvalidArgument, "report needs at least one record");
  Report r;
  r.model_id = records.front().model_id;
  r.with_context = records.front().with_context;
  r.item_count = records.size();
  double latency = 0, in = 0, out = 0;
  std::map<std::size_t, std::size_t> hop_correct;
  std::map<std::size_t, double> hop_out;
  for (const auto& rec : records) {
    if (rec.correct) ++r.correct_count;
    if (rec.error) ++r.error_count;
    latency += rec.latency_s;
    in += static_cast<double>(rec.input_tokens);
    out += static_cast<double>(rec.output_tokens);
    ++r.per_hop_items[rec.hop_count];
    hop_correct[rec.hop_count] += rec.correct ? 1 : 0;
    hop_out[rec.hop_count] += static_cast<double>(rec.output_tokens);
  }
  const double n = static_cast<double>(records.size());
  r.correctness_rate_pct = 100.0 * static_cast<double>(r.correct_count) / n;
  r.avg_duration_s = latency / n;
  r.avg_input_tokens = in / n;
  r.avg_output_tokens = out / n;
  r.total_input_tokens_k = in / 1000.0;
  r.total_output_tokens_k = out / 1000.0;
  for (const auto& [h, count] : r.per_hop_items) {
    r.per_hop_correctness_pct[h] = 100.0 * static_cast<double>(hop_correct[h]) / static_cast<double>(count);
    r.per_hop_avg_output_tokens[h] = hop_out[h] / static_cast<double>(count);
  }
  return r;
}

std::size_t char_count(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

json DatasetStats::to_json() const {
  auto ms = [](const MeanSd& m) { return json{{"mean", m.mean}, {"sd", m.sd}}; };
  return {{"question_count", question_count},
          {"question_chars", ms(question_chars)},
          {"question_tokens", ms(question_tokens)},
          {"answer_chars", ms(answer_chars)},
          {"answer_tokens", ms(answer_tokens)},
          {"hops", ms(hops)},
          {"context_chars", ms(context_chars)},
          {"context_tokens", ms(context_tokens)},
          {"hop_chars", ms(hop_chars)},
          {"hop_tokens", ms(hop_tokens)},
          {"shortcuts", ms(shortcuts)},
          {"hop_histogram", hop_histogram},
          {"questions_with_shortcut", questions_with_shortcut},
          {"questions_with_shortcut_pct", questions_with_shortcut_pct}};
}

DatasetStats dataset_stats(const std::vector<qa::MultiHopQA>& dataset, const corpus::ChunkIndex& chunks,
                           const llm::Tokenizer& tokenizer) {
  DatasetStats s;
  s.question_count = dataset.size();
  for (const char* key : {"1", "2", "3", "4", ">=5"}) s.hop_histogram[key] = 0;
  std::vector<double> qc, qt, ac, at, hops, cc, ct, hc, ht, sc;
  for (const auto& item : dataset) {
    qc.push_back(static_cast<double>(char_count(item.question)));
    qt.push_back(static_cast<double>(tokenizer(item.question)));
    ac.push_back(static_cast<double>(char_count(item.answer)));
    at.push_back(static_cast<double>(tokenizer(item.answer)));
    hops.push_back(static_cast<double>(item.hop_count));
    sc.push_back(static_cast<double>(item.shortcut_count));
    if (item.shortcut_count > 0) ++s.questions_with_shortcut;
    s.hop_histogram[item.hop_count >= 5 ? ">=5" : std::to_string(item.hop_count)]++;
    double total_c = 0, total_t = 0;
    for (const auto& id : item.context_chunk_ids) {
      auto it = chunks.find(id);
      if (it == chunks.end()) throw Error(ErrorCode::MissingInput, "chunk '" + id + "' of item " + item.id);
      double c = static_cast<double>(char_count(it->second.text));
      double t = static_cast<double>(tokenizer(it->second.text));
      hc.push_back(c);
      ht.push_back(t);
      total_c += c;
      total_t += t;
    }
    cc.push_back(total_c);
    ct.push_back(total_t);
  }
  s.question_chars = mean_sd(qc);
  s.question_tokens = mean_sd(qt);
  s.answer_chars = mean_sd(ac);
  s.answer_tokens = mean_sd(at);
  s.hops = mean_sd(hops);
  s.context_chars = mean_sd(cc);
  s.context_tokens = mean_sd(ct);
  s.hop_chars = mean_sd(hc);
  s.hop_tokens = mean_sd(ht);
  s.shortcuts = mean_sd(sc);
  if (!dataset.empty()) {
    s.questions_with_shortcut_pct =
        100.0 * static_cast<double>(s.questions_with_shortcut) / static_cast<double>(dataset.size());
  }
  return s;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string setup_label(const Report& r) { return r.with_context ? "with" : "without"; }

std::string count_pct(std::size_t count, std::size_t total) {
  double pct = total ? 100.0 * static_cast<double>(count) / static_cast<double>(total) : 0.0;
  return std::to_string(count) + " (" + fmt("%.1f", pct) + "%)";
}

struct StatRow {
  const char* label;
  MeanSd DatasetStats::*field;
};

constexpr StatRow kStatRows[] = {
    {"Question length (chars)", &DatasetStats::question_chars},
    {"Question length (tokens)", &DatasetStats::question_tokens},
    {"Answer length (chars)", &DatasetStats::answer_chars},
    {"Answer length (tokens)", &DatasetStats::answer_tokens},
    {"Mean # hops per question", &DatasetStats::hops},
    {"Total context length (chars)", &DatasetStats::context_chars},
    {"Total context length (tokens)", &DatasetStats::context_tokens},
    {"Hop length (chars, pooled)", &DatasetStats::hop_chars},
    {"Hop length (tokens, pooled)", &DatasetStats::hop_tokens},
    {"Shortcut count per question", &DatasetStats::shortcuts},
};

std::string hop_label(const std::string& key) {
  if (key == ">=5") return ">= 5 hops";
  return key + (key == "1" ? " hop" : " hops");
}

}  // namespace

std::string reports_markdown(const std::vector<Report>& reports) {
  std::string out =
      "| Model | Context | Correctness Rate (%) | Avg Duration (s) | Avg Input Tokens | Avg Output Tokens | "
      "Total Input Tokens (K) | Total Output Tokens (K) |\n"
      "|---|---|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& r : reports) {
    out += "| " + r.model_id + " | " + setup_label(r) + " | " + fmt("%.2f", r.correctness_rate_pct) + " | " +
           fmt("%.2f", r.avg_duration_s) + " | " + fmt("%.2f", r.avg_input_tokens) + " | " +
           fmt("%.2f", r.avg_output_tokens) + " | " + fmt("%.2f", r.total_input_tokens_k) + " | " +
           fmt("%.2f", r.total_output_tokens_k) + " |\n";
  }
  std::set<std::size_t> hops;
  for (const auto& r : reports) {
    for (const auto& [h, _] : r.per_hop_items) hops.insert(h);
  }
  if (!hops.empty()) {
    out += "\n| Model | Context |";
    std::string rule = "|---|---|";
    for (auto h : hops) {
      out += " " + std::to_string(h) + "-hop (%) |";
      rule += "---:|";
    }
    out += "\n" + rule + "\n";
    for (const auto& r : reports) {
      out += "| " + r.model_id + " | " + setup_label(r) + " |";
      for (auto h : hops) {
        auto it = r.per_hop_correctness_pct.find(h);
        out += " " + (it == r.per_hop_correctness_pct.end() ? std::string("-") : fmt("%.2f", it->second)) + " |";
      }
      out += "\n";
    }
  }
  return out;
}

std::string reports_csv(const std::vector<Report>& reports) {
  std::string out =
      "Model,Context,Correctness Rate (%),Avg Duration (s),Avg Input Tokens,Avg Output Tokens,"
      "Total Input Tokens (K),Total Output Tokens (K)\n";
  for (const auto& r : reports) {
    out += r.model_id + "," + setup_label(r) + "," + fmt("%.6f", r.correctness_rate_pct) + "," +
           fmt("%.6f", r.avg_duration_s) + "," + fmt("%.6f", r.avg_input_tokens) + "," +
           fmt("%.6f", r.avg_output_tokens) + "," + fmt("%.6f", r.total_input_tokens_k) + "," +
           fmt("%.6f", r.total_output_tokens_k) + "\n";
  }
  return out;
}

std::string dataset_stats_markdown(const DatasetStats& s) {
  std::string out = "| QA Metric | Mean | Std. Dev. |\n|---|---:|---:|\n";
  for (const auto& row : kStatRows) {
    const MeanSd& m = s.*(row.field);
    out += std::string("| ") + row.label + " | " + fmt("%.2f", m.mean) + " | " + fmt("%.2f", m.sd) + " |\n";
  }
  out += "\n| Hop-count Distribution (of " + std::to_string(s.question_count) + " questions) | |\n|---|---:|\n";
  for (const auto& [key, count] : s.hop_histogram) {
    out += "| " + hop_label(key) + " | " + count_pct(count, s.question_count) + " |\n";
  }
  out += "| Questions w/ >= 1 shortcut | " + count_pct(s.questions_with_shortcut, s.question_count) + " |\n";
  out += "\nToken counts depend on the configured tokenizer.\n";
  return out;
}

std::string dataset_stats_csv(const DatasetStats& s) {
  std::string out = "QA Metric,Mean,Std. Dev.\n";
  for (const auto& row : kStatRows) {
    const MeanSd& m = s.*(row.field);
    out += std::string("\"") + row.label + "\"," + fmt("%.6f", m.mean) + "," + fmt("%.6f", m.sd) + "\n";
  }
  for (const auto& [key, count] : s.hop_histogram) {
    out += "\"" + hop_label(key) + "\"," + std::to_string(count) + ",\n";
  }
  out += "\"Questions w/ >= 1 shortcut\"," + std::to_string(s.questions_with_shortcut) + "," +
         fmt("%.6f", s.questions_with_shortcut_pct) + "\n";
  return out;
}

}  // namespace chemhop::eval
