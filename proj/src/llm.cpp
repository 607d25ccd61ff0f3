#include "chemhop/llm.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "chemhop/io.hpp"
#include "chemhop/text.hpp"

namespace chemhop::llm {

namespace fs = std::filesystem;

void ChatRequest::validate() const {
  if (model_id.empty()) throw Error(ErrorCode::InvalidArgument, "ChatRequest.model_id is empty");
  if (user_text.empty()) throw Error(ErrorCode::InvalidArgument, "ChatRequest.user_text is empty");
  if (decode.temperature < 0.0 || decode.temperature > 2.0) {
    throw Error(ErrorCode::InvalidArgument, "temperature outside [0,2]");
  }
  if (decode.max_output_tokens <= 0) throw Error(ErrorCode::InvalidArgument, "max_output_tokens must be positive");
}

std::string ChatRequest::cache_key() const {
  json k = {{"model", model_id},
            {"system", system_text},
            {"user", user_text},
            {"temperature", decode.temperature},
            {"max_output_tokens", decode.max_output_tokens},
            {"passthrough", decode.passthrough}};
  return sha256_hex(k.dump());
}

long whitespace_tokens(std::string_view s) { return static_cast<long>(text::word_count(s)); }

// ---------------------------------------------------------------------------
// OpenAI-compatible HTTP provider

OpenAICompatibleProvider::OpenAICompatibleProvider(Options opts) : opts_(std::move(opts)) {
  if (!opts_.api_key_env.empty()) {
    if (const char* v = std::getenv(opts_.api_key_env.c_str())) api_key_ = v;
  }
}

json OpenAICompatibleProvider::build_payload(const ChatRequest& req) {
  json messages = json::array();
  if (!req.system_text.empty()) messages.push_back({{"role", "system"}, {"content", req.system_text}});
  messages.push_back({{"role", "user"}, {"content", req.user_text}});
  json payload = {{"model", req.model_id},
                  {"messages", messages},
                  {"temperature", req.decode.temperature},
                  {"max_tokens", req.decode.max_output_tokens}};
  if (req.expect_structured) payload["response_format"] = {{"type", "json_object"}};
  for (auto& [k, v] : req.decode.passthrough.items()) payload[k] = v;
  return payload;
}

ProviderReply OpenAICompatibleProvider::parse_reply(const json& body) {
  ProviderReply out;
  if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) {
    throw ProviderFailure(FailureKind::Rejected, "response has no choices");
  }
  const auto& msg = body["choices"][0].value("message", json::object());
  if (!msg.contains("content") || !msg["content"].is_string()) {
    throw ProviderFailure(FailureKind::Rejected, "response has no message content");
  }
  out.text = msg["content"].get<std::string>();
  if (body.contains("usage") && body["usage"].is_object()) {
    const auto& u = body["usage"];
    if (u.contains("prompt_tokens")) out.input_tokens = u["prompt_tokens"].get<long>();
    if (u.contains("completion_tokens")) out.output_tokens = u["completion_tokens"].get<long>();
  }
  return out;
}

ProviderReply OpenAICompatibleProvider::send(const ChatRequest& req) {
  httplib::Client cli(opts_.base_url);
  auto secs = static_cast<time_t>(opts_.timeout_s);
  cli.set_read_timeout(secs, 0);
  cli.set_write_timeout(secs, 0);
  cli.set_connection_timeout(10, 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = cli.Post(opts_.path, headers, build_payload(req).dump(), "application/json");
  if (!res) {
    throw ProviderFailure(FailureKind::Transport, "transport error: " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw ProviderFailure(FailureKind::Throttled, "status " + std::to_string(res->status), res->status);
  }
  if (res->status != 200) {
    throw ProviderFailure(FailureKind::Rejected, "status " + std::to_string(res->status) + ": " + res->body,
                          res->status);
  }
  try {
    return parse_reply(json::parse(res->body));
  } catch (const json::exception& e) {
    throw ProviderFailure(FailureKind::Rejected, std::string("unparseable body: ") + e.what(), res->status);
  }
}

// ---------------------------------------------------------------------------
// Scripted provider

std::shared_ptr<ScriptedProvider> ScriptedProvider::from_json(const json& script) {
  auto p = std::make_shared<ScriptedProvider>();
  if (script.contains("default") && script["default"].is_string()) p->set_default(script["default"]);
  for (const auto& r : script.value("rules", json::array())) {
    Rule rule;
    if (r.contains("model")) rule.model = r["model"].get<std::string>();
    if (r.contains("prompt_hash")) rule.prompt_hash = r["prompt_hash"].get<std::string>();
    rule.contains = r.value("contains", std::vector<std::string>{});
    rule.system_contains = r.value("system_contains", std::vector<std::string>{});
    if (r.contains("pattern")) rule.pattern = r["pattern"].get<std::string>();
    if (r.contains("replies")) {
      for (const auto& x : r["replies"]) rule.replies.push_back(x);
    } else if (r.contains("reply")) {
      rule.replies.push_back(r["reply"]);
    }
    if (rule.replies.empty()) throw Error(ErrorCode::ConfigInvalid, "mock rule without replies");
    p->add_rule(std::move(rule));
  }
  return p;
}

std::shared_ptr<ScriptedProvider> ScriptedProvider::from_file(const fs::path& path) {
  json script;
  try {
    script = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, "mock script " + path.string() + ": " + e.what());
  }
  if (script.value("schema", "") != "chemhop.mock_llm") {
    throw Error(ErrorCode::ConfigInvalid, "mock script " + path.string() + " lacks schema chemhop.mock_llm");
  }
  return from_json(script);
}

void ScriptedProvider::add_rule(Rule rule) {
  std::lock_guard lock(mu_);
  std::optional<std::regex> re;
  if (rule.pattern) {
    try {
      re.emplace(*rule.pattern);
    } catch (const std::regex_error& e) {
      throw Error(ErrorCode::ConfigInvalid, "mock rule pattern '" + *rule.pattern + "': " + e.what());
    }
  }
  patterns_.push_back(std::move(re));
  rules_.push_back(std::move(rule));
  cursor_.push_back(0);
}

ProviderReply ScriptedProvider::send(const ChatRequest& req) {
  ++calls_;
  std::lock_guard lock(mu_);
  const std::string hash = sha256_hex(req.user_text);
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const Rule& r = rules_[i];
    if (r.model && *r.model != req.model_id) continue;
    if (r.prompt_hash && *r.prompt_hash != hash) continue;
    bool ok = true;
    for (const auto& s : r.contains) ok = ok && req.user_text.find(s) != std::string::npos;
    for (const auto& s : r.system_contains) ok = ok && req.system_text.find(s) != std::string::npos;
    if (!ok) continue;
    std::smatch m;
    if (patterns_[i] && !std::regex_search(req.user_text, m, *patterns_[i])) continue;
    std::size_t idx = cursor_[i] < r.replies.size() ? cursor_[i] : r.replies.size() - 1;
    cursor_[i] = idx + 1;
    const json& step = r.replies[idx];
    if (step.is_object() && step.contains("fail")) {
      const std::string kind = step["fail"];
      if (kind == "throttle") throw ProviderFailure(FailureKind::Throttled, "scripted throttle", 429);
      if (kind == "transport") throw ProviderFailure(FailureKind::Transport, "scripted transport failure");
      throw ProviderFailure(FailureKind::Rejected, "scripted rejection", 400);
    }
    ProviderReply reply;
    reply.text = step.is_string() ? step.get<std::string>() : step.dump();
    if (patterns_[i]) reply.text = m.format(reply.text);
    return reply;
  }
  if (default_reply_) return ProviderReply{*default_reply_, std::nullopt, std::nullopt};
  throw ProviderFailure(FailureKind::Rejected, "no scripted reply for prompt " + hash.substr(0, 12), 404);
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway() : Gateway(Options{}) {}

Gateway::Gateway(Options opts) : opts_(std::move(opts)) {
  if (!opts_.tokenizer) opts_.tokenizer = whitespace_tokens;
}

void Gateway::add_provider(const std::string& name, std::shared_ptr<ChatProvider> provider,
                           ProviderLimits limits) {
  std::lock_guard lock(mu_);
  Slot slot;
  slot.provider = std::move(provider);
  slot.in_flight = std::make_unique<InFlightLimiter>(limits.max_in_flight);
  slot.rate = std::make_unique<RateLimiter>(limits.requests_per_second);
  providers_[name] = std::move(slot);
}

void Gateway::route(const std::string& model_id, const std::string& provider_name) {
  std::lock_guard lock(mu_);
  routes_[model_id] = provider_name;
}

Gateway::Slot& Gateway::slot_for(const std::string& model_id) {
  std::lock_guard lock(mu_);
  std::string name;
  if (auto it = routes_.find(model_id); it != routes_.end()) {
    name = it->second;
  } else if (auto star = routes_.find("*"); star != routes_.end()) {
    name = star->second;
  } else if (providers_.size() == 1) {
    name = providers_.begin()->first;
  }
  auto it = providers_.find(name);
  if (it == providers_.end()) {
    throw Error(ErrorCode::ConfigInvalid, "no provider configured for model '" + model_id + "'");
  }
  return it->second;
}

std::optional<ChatResponse> Gateway::cache_lookup(const std::string& key) {
  if (!opts_.cache_dir) return std::nullopt;
  fs::path p = *opts_.cache_dir / key.substr(0, 2) / (key + ".json");
  if (!fs::exists(p)) return std::nullopt;
  auto t0 = std::chrono::steady_clock::now();
  json j;
  try {
    j = json::parse(read_file(p));
  } catch (const std::exception& e) {
    spdlog::warn("ignoring unreadable cache entry {}: {}", p.string(), e.what());
    return std::nullopt;
  }
  ChatResponse r;
  r.text = j.at("text").get<std::string>();
  r.input_tokens = j.value("input_tokens", 0L);
  r.output_tokens = j.value("output_tokens", 0L);
  r.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.attempts = 1;
  r.cache_hit = true;
  r.cache_key = key;
  return r;
}

void Gateway::cache_store(const std::string& key, const ChatRequest& req, const ChatResponse& resp) {
  if (!opts_.cache_dir) return;
  json j = {{"key", key},
            {"model", req.model_id},
            {"text", resp.text},
            {"input_tokens", resp.input_tokens},
            {"output_tokens", resp.output_tokens},
            {"provider_latency_s", resp.latency_s}};
  write_file_atomic(*opts_.cache_dir / key.substr(0, 2) / (key + ".json"), j.dump());
}

void Gateway::charge_request() {
  std::lock_guard lock(mu_);
  if (opts_.budget.max_requests && stats_.provider_calls >= *opts_.budget.max_requests) {
    throw Error(ErrorCode::BudgetExceeded, "request cap reached");
  }
  if (opts_.budget.max_tokens && stats_.input_tokens + stats_.output_tokens >= *opts_.budget.max_tokens) {
    throw Error(ErrorCode::BudgetExceeded, "token cap reached");
  }
  ++stats_.provider_calls;
}

ChatResponse Gateway::complete(const ChatRequest& req) {
  req.validate();
  const std::string key = req.cache_key();
  if (auto hit = cache_lookup(key)) {
    std::lock_guard lock(mu_);
    ++stats_.cache_hits;
    ++stats_.completed;
    return *hit;
  }

  Slot& slot = slot_for(req.model_id);
  const int max_attempts = opts_.retry.max_retries + 1;
  auto delay = opts_.retry.base_delay;
  std::string last_error;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    charge_request();
    ProviderReply reply;
    std::chrono::steady_clock::time_point t0;
    try {
      slot.rate->acquire();
      InFlightLimiter::Slot guard(*slot.in_flight);
      t0 = std::chrono::steady_clock::now();
      reply = slot.provider->send(req);
    } catch (const ProviderFailure& f) {
      if (f.kind() == FailureKind::Rejected) throw Error(ErrorCode::ProviderRejected, f.what());
      last_error = f.what();
      if (attempt < max_attempts) {
        {
          std::lock_guard lock(mu_);
          ++stats_.retries;
        }
        spdlog::debug("retrying {} after: {}", req.model_id, last_error);
        std::this_thread::sleep_for(delay);
        delay = std::chrono::duration_cast<std::chrono::milliseconds>(delay * opts_.retry.multiplier);
      }
      continue;
    }
    ChatResponse resp;
    resp.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    resp.text = std::move(reply.text);
    resp.input_tokens = reply.input_tokens.value_or(opts_.tokenizer(req.system_text) + opts_.tokenizer(req.user_text));
    resp.output_tokens = reply.output_tokens.value_or(opts_.tokenizer(resp.text));
    resp.attempts = attempt;
    resp.cache_hit = false;
    resp.cache_key = key;
    {
      std::lock_guard lock(mu_);
      stats_.input_tokens += resp.input_tokens;
      stats_.output_tokens += resp.output_tokens;
      ++stats_.completed;
    }
    cache_store(key, req, resp);
    return resp;
  }
  throw Error(ErrorCode::ProviderUnreachable,
              req.model_id + " failed after " + std::to_string(max_attempts) + " attempts: " + last_error);
}

GatewayStats Gateway::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

// ---------------------------------------------------------------------------
// Structured output parsing

std::string strip_wrappers(std::string_view in) {
  std::string s = text::trim(in);
  auto fence = s.find("```");
  if (fence != std::string::npos) {
    auto body_start = s.find('\n', fence);
    auto close = s.find("```", fence + 3);
    if (body_start != std::string::npos && close != std::string::npos && close > body_start) {
      return text::trim(std::string_view(s).substr(body_start + 1, close - body_start - 1));
    }
    // Single-line fence: ```json {...} ```
    std::size_t i = fence + 3;
    while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) ++i;
    if (close != std::string::npos && close > i) return text::trim(std::string_view(s).substr(i, close - i));
  }
  return s;
}

namespace {

class LiteralParser {
 public:
  explicit LiteralParser(std::string_view s) : s_(s) {}

  json parse_value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    char c = s_[pos_];
    if (c == '{') return parse_dict();
    if (c == '[') return parse_seq('[', ']');
    if (c == '(') return parse_seq('(', ')');
    if (c == '"' || c == '\'') return parse_string();
    if (c == '-' || c == '+' || c == '.' || std::isdigit(static_cast<unsigned char>(c))) return parse_number();
    return parse_word();
  }

  std::size_t pos() const { return pos_; }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorCode::MalformedOutput, why + " at offset " + std::to_string(pos_));
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  json parse_dict() {
    ++pos_;
    json obj = json::object();
    while (true) {
      if (eat('}')) return obj;
      json key = parse_value();
      if (!key.is_string()) fail("non-string key");
      if (!eat(':')) fail("expected ':'");
      obj[key.get<std::string>()] = parse_value();
      if (eat(',')) continue;
      if (eat('}')) return obj;
      fail("expected ',' or '}'");
    }
  }

  json parse_seq(char open, char close) {
    (void)open;
    ++pos_;
    json arr = json::array();
    while (true) {
      if (eat(close)) return arr;
      arr.push_back(parse_value());
      if (eat(',')) continue;
      if (eat(close)) return arr;
      fail(std::string("expected ',' or '") + close + "'");
    }
  }

  static void append_utf8(std::string& out, unsigned cp) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }

  unsigned read_hex(int digits) {
    if (pos_ + digits > s_.size()) fail("truncated escape");
    unsigned v = 0;
    for (int i = 0; i < digits; ++i) {
      char h = s_[pos_++];
      v <<= 4;
      if (h >= '0' && h <= '9') v |= h - '0';
      else if (h >= 'a' && h <= 'f') v |= h - 'a' + 10;
      else if (h >= 'A' && h <= 'F') v |= h - 'A' + 10;
      else fail("bad hex digit");
    }
    return v;
  }

  json parse_string() {
    char q = s_[pos_++];
    std::string out;
    while (pos_ < s_.size()) {
      char c = s_[pos_++];
      if (c == q) return out;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (pos_ >= s_.size()) break;
      char e = s_[pos_++];
      switch (e) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        case 'b': out.push_back('\b'); break;
        case 'f': out.push_back('\f'); break;
        case '/': out.push_back('/'); break;
        case 'u': {
          unsigned cp = read_hex(4);
          if (cp >= 0xD800 && cp < 0xDC00 && pos_ + 6 <= s_.size() && s_[pos_] == '\\' && s_[pos_ + 1] == 'u') {
            pos_ += 2;
            unsigned lo = read_hex(4);
            cp = 0x10000 + ((cp - 0xD800) << 10) + (lo - 0xDC00);
          }
          append_utf8(out, cp);
          break;
        }
        case 'x': append_utf8(out, read_hex(2)); break;
        default: out.push_back(e);
      }
    }
    fail("unterminated string");
  }

  json parse_number() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '-' ||
                                s_[pos_] == '+' || s_[pos_] == '.' || s_[pos_] == 'e' || s_[pos_] == 'E')) {
      ++pos_;
    }
    try {
      return json::parse(s_.substr(start, pos_ - start));
    } catch (const json::exception&) {
      fail("bad number");
    }
  }

  json parse_word() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    std::string_view w = s_.substr(start, pos_ - start);
    if (w == "true" || w == "True") return true;
    if (w == "false" || w == "False") return false;
    if (w == "null" || w == "None") return nullptr;
    pos_ = start;
    fail("unexpected token");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

json parse_literal(std::string_view text) {
  std::string body = strip_wrappers(text);
  std::size_t start = body.find_first_of("[{(");
  if (start == std::string::npos) throw Error(ErrorCode::MalformedOutput, "no literal found");
  LiteralParser p(std::string_view(body).substr(start));
  return p.parse_value();
}

json parse_structured(std::string_view text) {
  std::string body = strip_wrappers(text);
  for (std::size_t start = body.find('{'); start != std::string::npos; start = body.find('{', start + 1)) {
    try {
      LiteralParser p(std::string_view(body).substr(start));
      json v = p.parse_value();
      if (v.is_object()) return v;
    } catch (const Error&) {
    }
  }
  throw Error(ErrorCode::MalformedOutput, "no parseable object in model output");
}

}  // namespace chemhop::llm
