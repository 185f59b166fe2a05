#include "radsim/chat_provider.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include "http_client.hpp"
#include "radsim/error.hpp"
#include "radsim/lexical_metrics.hpp"

namespace radsim {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string ascii_lower(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
  }
  return s;
}

}  // namespace

std::string_view to_string(ChatStage stage) {
  switch (stage) {
    case ChatStage::Identify: return "identify";
    case ChatStage::Tasks: return "tasks";
    case ChatStage::Labels: return "labels";
  }
  return "labels";
}

void ChatProviderConfig::validate() const {
  if (temperature < 0.0) throw Error(ErrorKind::InvalidConfig, "temperature must be >= 0");
  if (max_retries < 0) throw Error(ErrorKind::InvalidConfig, "max_retries must be >= 0");
  if (model.empty()) throw Error(ErrorKind::InvalidConfig, "chat model name is empty");
}

std::pair<std::string, std::string> split_url(const std::string& url) {
  static const std::regex kUrl(R"(^(https?://[^/?#]+)(.*)$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) {
    throw Error(ErrorKind::InvalidConfig, "not an http(s) URL: '" + url + "'");
  }
  std::string path = m[2].str();
  if (path.empty()) path = "/";
  return {m[1].str(), path};
}

HttpChatProvider::HttpChatProvider(ChatProviderConfig config) : config_(std::move(config)) {
  config_.validate();
  std::tie(base_, path_) = split_url(config_.endpoint);
}

std::string HttpChatProvider::complete(const ChatRequest& request) {
  nlohmann::json body;
  body["model"] = config_.model;
  body["temperature"] = config_.temperature;
  body["messages"] = nlohmann::json::array();
  for (const auto& m : request.messages) {
    body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  }

  detail::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
  }
  const detail::RetryPolicy policy{config_.max_retries, config_.timeout,
                                   config_.initial_backoff};
  const auto res = detail::send_with_retry(base_, "POST", path_, headers, body.dump(), policy);
  if (res.status != 200) {
    throw Error(ErrorKind::ProviderError, "chat endpoint returned HTTP " +
                                              std::to_string(res.status) + ": " +
                                              res.body.substr(0, 200));
  }
  try {
    const auto reply = nlohmann::json::parse(res.body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ProviderError,
                std::string("malformed chat-completion response: ") + e.what());
  }
}

MockLexicon MockLexicon::parse(std::string_view content) {
  MockLexicon lexicon;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error(ErrorKind::InvalidConfig,
                  "lexicon line " + std::to_string(number) + " has no tab separator");
    }
    const std::string phrase = trim(line.substr(0, tab));
    std::string label = trim(line.substr(tab + 1));
    if (label.empty()) {
      throw Error(ErrorKind::InvalidConfig,
                  "lexicon line " + std::to_string(number) + " has an empty label");
    }
    if (phrase == "*") {
      lexicon.set_default_label(std::move(label));
    } else {
      lexicon.add_rule(phrase, std::move(label));
    }
  }
  return lexicon;
}

MockLexicon MockLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open lexicon " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void MockLexicon::add_rule(std::string_view phrase, std::string label) {
  auto tokens = tokenize(phrase);
  if (tokens.empty()) {
    throw Error(ErrorKind::InvalidConfig, "lexicon phrase '" + std::string(phrase) +
                                              "' has no word characters");
  }
  rules_.push_back({std::move(tokens), std::move(label)});
}

std::vector<std::string> MockLexicon::apply(std::string_view text) const {
  const TokenSequence tokens = tokenize(text);
  std::vector<bool> used(tokens.size(), false);
  std::vector<std::pair<std::size_t, const std::string*>> hits;
  for (const auto& rule : rules_) {
    const std::size_t k = rule.phrase.size();
    for (std::size_t i = 0; i + k <= tokens.size(); ++i) {
      if (!std::equal(rule.phrase.begin(), rule.phrase.end(),
                      tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
        continue;
      }
      const auto first = used.begin() + static_cast<std::ptrdiff_t>(i);
      if (std::any_of(first, first + static_cast<std::ptrdiff_t>(k), [](bool b) { return b; })) {
        continue;
      }
      std::fill(first, first + static_cast<std::ptrdiff_t>(k), true);
      hits.emplace_back(i, &rule.label);
    }
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> labels;
  std::set<std::string> seen;
  for (const auto& [pos, label] : hits) {
    if (seen.insert(ascii_lower(*label)).second) labels.push_back(*label);
  }
  if (labels.empty() && default_label_) labels.push_back(*default_label_);
  return labels;
}

MockChatProvider::MockChatProvider(MockLexicon lexicon, std::string model, double temperature)
    : lexicon_(std::move(lexicon)), model_(std::move(model)), temperature_(temperature) {}

std::string MockChatProvider::task_list_response() {
  return "Tasks suited to documents of this kind:\n"
         "1. Findings-based labeling: List each radiographic finding stated in the report "
         "as a short label, noting whether it is present, absent, or uncertain. "
         "[audience: radiologists]\n"
         "2. Urgency triage labeling: Label the report by how urgently its findings need "
         "clinical attention. [audience: nurses and emergency department staff]\n"
         "3. Report structure labeling: Label which standard report sections are present "
         "and whether the impression follows from the findings. "
         "[audience: quality assurance reviewers]\n";
}

std::string MockChatProvider::complete(const ChatRequest& request) {
  ++calls_;
  {
    std::lock_guard lock(mutex_);
    if (!request.report_id.empty() && failing_.contains(request.report_id)) {
      throw Error(ErrorKind::ProviderError,
                  "mock provider configured to fail on '" + request.report_id + "'");
    }
    if (const auto it = overrides_.find(request.stage); it != overrides_.end()) {
      return it->second;
    }
  }
  switch (request.stage) {
    case ChatStage::Identify:
      return std::string(kIdentification);
    case ChatStage::Tasks:
      return task_list_response();
    case ChatStage::Labels: {
      std::string out;
      int n = 0;
      for (const auto& label : lexicon_.apply(request.report_text)) {
        out += std::to_string(++n) + ". " + label + "\n";
      }
      if (out.empty()) out = "No labels apply.\n";
      return out;
    }
  }
  return {};
}

void MockChatProvider::fail_on(std::string report_id) {
  std::lock_guard lock(mutex_);
  failing_.insert(std::move(report_id));
}

void MockChatProvider::clear_failures() {
  std::lock_guard lock(mutex_);
  failing_.clear();
}

void MockChatProvider::override_response(ChatStage stage, std::string response) {
  std::lock_guard lock(mutex_);
  overrides_[stage] = std::move(response);
}

}  // namespace radsim
