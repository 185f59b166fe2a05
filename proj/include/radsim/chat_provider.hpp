#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace radsim {

struct ChatMessage {
  std::string role;
  std::string content;
};

enum class ChatStage { Identify, Tasks, Labels };

std::string_view to_string(ChatStage stage);

struct ChatRequest {
  ChatStage stage = ChatStage::Labels;
  std::vector<ChatMessage> messages;
  // Context for logging and offline providers; never sent over the wire.
  std::string report_id;
  std::string report_text;
};

// Chat-completion backend. Implementations must be safe to call from
// several threads at once.
class ChatProvider {
 public:
  virtual ~ChatProvider() = default;

  virtual std::string complete(const ChatRequest& request) = 0;
  virtual std::string model() const = 0;
  virtual double temperature() const = 0;
};

struct ChatProviderConfig {
  // Full URL of an OpenAI-compatible chat-completions endpoint.
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4";
  double temperature = 0.0;
  int max_retries = 3;
  std::chrono::milliseconds timeout{60000};
  std::chrono::milliseconds initial_backoff{500};
  // Environment variable holding the bearer token; unset means no
  // Authorization header.
  std::string api_key_env = "OPENAI_API_KEY";

  void validate() const;
};

// Splits "scheme://host[:port]/path" into the client base and the path.
std::pair<std::string, std::string> split_url(const std::string& url);

class HttpChatProvider : public ChatProvider {
 public:
  explicit HttpChatProvider(ChatProviderConfig config);

  std::string complete(const ChatRequest& request) override;
  std::string model() const override { return config_.model; }
  double temperature() const override { return config_.temperature; }

 private:
  ChatProviderConfig config_;
  std::string base_;
  std::string path_;
};

// Keyword rules for the offline provider. Each rule maps a phrase, matched on
// whole tokens, to a label; rules apply in file order and a token consumed by
// one rule cannot be matched by a later one.
class MockLexicon {
 public:
  struct Rule {
    std::vector<std::string> phrase;
    std::string label;
  };

  static MockLexicon load(const std::filesystem::path& path);
  static MockLexicon parse(std::string_view content);

  void add_rule(std::string_view phrase, std::string label);
  void set_default_label(std::string label) { default_label_ = std::move(label); }

  // Labels in order of first appearance in the text, case-insensitively
  // deduplicated. Falls back to the default label when nothing matches.
  std::vector<std::string> apply(std::string_view text) const;

  const std::vector<Rule>& rules() const { return rules_; }
  const std::optional<std::string>& default_label() const { return default_label_; }

 private:
  std::vector<Rule> rules_;
  std::optional<std::string> default_label_;
};

// Deterministic offline provider: a fixed identification, a fixed task
// list, and lexicon-driven label lists.
class MockChatProvider : public ChatProvider {
 public:
  static constexpr std::string_view kIdentification = "chest radiology report";

  explicit MockChatProvider(MockLexicon lexicon, std::string model = "mock-lexicon",
                            double temperature = 0.0);

  std::string complete(const ChatRequest& request) override;
  std::string model() const override { return model_; }
  double temperature() const override { return temperature_; }

  std::size_t call_count() const { return calls_.load(); }
  void reset_call_count() { calls_ = 0; }

  // Requests about this report fail with ProviderError.
  void fail_on(std::string report_id);
  void clear_failures();
  // Replaces the response for a stage, e.g. to exercise parse errors.
  void override_response(ChatStage stage, std::string response);

  static std::string task_list_response();

 private:
  MockLexicon lexicon_;
  std::string model_;
  double temperature_;
  std::atomic<std::size_t> calls_{0};
  mutable std::mutex mutex_;
  std::set<std::string> failing_;
  std::map<ChatStage, std::string> overrides_;
};

}  // namespace radsim
