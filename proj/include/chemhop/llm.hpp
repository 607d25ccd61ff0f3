#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "chemhop/error.hpp"
#include "chemhop/throttle.hpp"

namespace chemhop::llm {

using json = nlohmann::json;

struct DecodeParams {
  double temperature = 0.0;
  int max_output_tokens = 1024;
  // Provider-specific knobs (e.g. reasoning toggles) forwarded verbatim.
  json passthrough = json::object();
};

struct ChatRequest {
  std::string model_id;
  std::string system_text;
  std::string user_text;
  DecodeParams decode;
  bool expect_structured = false;

  void validate() const;
  /// Content hash over model, prompts and decode params.
  std::string cache_key() const;
};

struct ChatResponse {
  std::string text;
  long input_tokens = 0;
  long output_tokens = 0;
  double latency_s = 0.0;
  int attempts = 1;
  bool cache_hit = false;
  std::string cache_key;
};

enum class FailureKind { Transport, Throttled, Rejected };

/// Thrown by providers. Transport and Throttled are retried by the gateway.
class ProviderFailure : public std::runtime_error {
 public:
  ProviderFailure(FailureKind kind, const std::string& what, int status = 0)
      : std::runtime_error(what), kind_(kind), status_(status) {}
  FailureKind kind() const noexcept { return kind_; }
  int status() const noexcept { return status_; }

 private:
  FailureKind kind_;
  int status_;
};

struct ProviderReply {
  std::string text;
  std::optional<long> input_tokens;
  std::optional<long> output_tokens;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ProviderReply send(const ChatRequest& req) = 0;
};

/// POSTs to an OpenAI-compatible /chat/completions endpoint.
class OpenAICompatibleProvider : public ChatProvider {
 public:
  struct Options {
    std::string base_url;  // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string api_key_env;  // name of the environment variable holding the key
    double timeout_s = 120.0;
  };
  explicit OpenAICompatibleProvider(Options opts);
  ProviderReply send(const ChatRequest& req) override;

  static json build_payload(const ChatRequest& req);
  static ProviderReply parse_reply(const json& body);

 private:
  Options opts_;
  std::string api_key_;
};

/// Wraps a callable; used by tests and by embedding code.
class FunctionProvider : public ChatProvider {
 public:
  using Fn = std::function<ProviderReply(const ChatRequest&)>;
  explicit FunctionProvider(Fn fn) : fn_(std::move(fn)) {}
  ProviderReply send(const ChatRequest& req) override { return fn_(req); }

 private:
  Fn fn_;
};

/// Offline responder driven by a rule script. The first matching rule answers;
/// a rule with several replies plays them in order and then repeats the last.
///
/// Script file:
///   {"schema": "chemhop.mock_llm", "version": 1,
///    "default": "optional fallback text",
///    "rules": [{"model": "...", "prompt_hash": "...", "contains": ["..."],
///               "system_contains": ["..."], "pattern": "regex",
///               "replies": ["text", {"fail": "throttle"}]}]}
/// prompt_hash is sha256_hex(user_text). `pattern` (ECMAScript) must be found in
/// the user text; its capture groups fill $1..$9 in the reply.
class ScriptedProvider : public ChatProvider {
 public:
  struct Rule {
    std::optional<std::string> model;
    std::optional<std::string> prompt_hash;
    std::vector<std::string> contains;
    std::vector<std::string> system_contains;
    std::optional<std::string> pattern;
    std::vector<json> replies;
  };

  ScriptedProvider() = default;
  static std::shared_ptr<ScriptedProvider> from_json(const json& script);
  static std::shared_ptr<ScriptedProvider> from_file(const std::filesystem::path& path);

  void add_rule(Rule rule);
  void set_default(std::string text) { default_reply_ = std::move(text); }
  ProviderReply send(const ChatRequest& req) override;
  long calls() const { return calls_.load(); }

 private:
  std::mutex mu_;
  std::vector<Rule> rules_;
  std::vector<std::optional<std::regex>> patterns_;
  std::vector<std::size_t> cursor_;
  std::optional<std::string> default_reply_;
  std::atomic<long> calls_{0};
};

using Tokenizer = std::function<long(std::string_view)>;
long whitespace_tokens(std::string_view s);

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;
};

struct Budget {
  std::optional<long> max_requests;
  std::optional<long> max_tokens;
};

struct ProviderLimits {
  int max_in_flight = 8;
  double requests_per_second = 0.0;
};

struct GatewayStats {
  long provider_calls = 0;
  long completed = 0;
  long cache_hits = 0;
  long retries = 0;
  long input_tokens = 0;
  long output_tokens = 0;
};

class Gateway {
 public:
  struct Options {
    RetryPolicy retry;
    Budget budget;
    std::optional<std::filesystem::path> cache_dir;
    Tokenizer tokenizer = whitespace_tokens;
  };

  Gateway();
  explicit Gateway(Options opts);
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  void add_provider(const std::string& name, std::shared_ptr<ChatProvider> provider,
                    ProviderLimits limits = {});
  /// Route a model id to a provider; model "*" sets the fallback route.
  void route(const std::string& model_id, const std::string& provider_name);

  ChatResponse complete(const ChatRequest& req);
  GatewayStats stats() const;

 private:
  struct Slot {
    std::shared_ptr<ChatProvider> provider;
    std::unique_ptr<InFlightLimiter> in_flight;
    std::unique_ptr<RateLimiter> rate;
  };

  Slot& slot_for(const std::string& model_id);
  std::optional<ChatResponse> cache_lookup(const std::string& key);
  void cache_store(const std::string& key, const ChatRequest& req, const ChatResponse& resp);
  void charge_request();

  Options opts_;
  mutable std::mutex mu_;
  std::map<std::string, Slot> providers_;
  std::map<std::string, std::string> routes_;
  GatewayStats stats_;
};

/// Remove markdown code fences and surrounding prose markers.
std::string strip_wrappers(std::string_view text);
/// Parse one JSON or Python literal (dict, list, tuple, str, number, bool, None).
/// Tuples become arrays. Throws MalformedOutput.
json parse_literal(std::string_view text);
/// Extract and parse the first key-value object in `text`. Throws MalformedOutput.
json parse_structured(std::string_view text);

inline constexpr std::string_view kReaskReminder =
    "\n\nReturn only the object, with no explanations, code fences, or extra text.";

/// Issue `req`, parse with `parse`; on MalformedOutput re-ask once with a reminder
/// appended, then let the error propagate.
template <class Parse>
auto complete_parsed(Gateway& gw, ChatRequest req, Parse parse, std::string_view reminder = kReaskReminder)
    -> std::pair<decltype(parse(std::string_view{})), ChatResponse> {
  ChatResponse resp = gw.complete(req);
  try {
    return {parse(std::string_view(resp.text)), resp};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::MalformedOutput) throw;
  }
  req.user_text += reminder;
  ChatResponse second = gw.complete(req);
  return {parse(std::string_view(second.text)), second};
}

}  // namespace chemhop::llm
