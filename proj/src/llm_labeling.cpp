#include "radsim/llm_labeling.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <set>
#include <sstream>
#include <thread>

#include "radsim/error.hpp"
#include "radsim/hashing.hpp"

namespace radsim {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
  }
  return out;
}

std::size_t code_points(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    const auto end = nl == std::string_view::npos ? text.size() : nl;
    lines.push_back(text.substr(start, end - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines;
}

// Body of a list item ("1. x", "2) x", "- x", "* x"), or nullopt.
std::optional<std::string> list_item(std::string_view line) {
  const std::string t = trim(line);
  std::size_t i = 0;
  if (t.empty()) return std::nullopt;
  if (t[0] == '-' || t[0] == '*') {
    i = 1;
  } else {
    while (i < t.size() && t[i] >= '0' && t[i] <= '9') ++i;
    if (i == 0 || i >= t.size() || (t[i] != '.' && t[i] != ')')) return std::nullopt;
    ++i;
  }
  if (i < t.size() && t[i] != ' ' && t[i] != '\t') return std::nullopt;
  return trim(std::string_view(t).substr(i));
}

std::string strip_decoration(std::string s) {
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    if (s.size() >= 4 && s.starts_with("**") && s.ends_with("**")) {
      s = trim(s.substr(2, s.size() - 4));
      changed = true;
    }
    for (char q : {'"', '\'', '`'}) {
      if (s.size() >= 2 && s.front() == q && s.back() == q) {
        s = trim(s.substr(1, s.size() - 2));
        changed = true;
      }
    }
    if (!s.empty() && s.back() == '.') {
      s.pop_back();
      s = trim(s);
      changed = true;
    }
  }
  return s;
}

std::string slugify(std::string_view name) {
  std::string slug;
  bool dash = false;
  for (char c : name) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) && u < 0x80) {
      if (dash && !slug.empty()) slug.push_back('-');
      dash = false;
      slug.push_back(static_cast<char>(std::tolower(u)));
    } else {
      dash = true;
    }
  }
  return slug;
}

std::string prompt_hash(const std::vector<ChatMessage>& messages) {
  std::string material;
  for (const auto& m : messages) {
    material += m.role;
    material.push_back('\n');
    material += m.content;
    material.push_back('\0');
  }
  return sha256_hex(material);
}

std::string format_temperature(double t) { return fmt::format("{:g}", t); }

nlohmann::json to_json(const CacheRecord& r) {
  nlohmann::json j;
  j["stage"] = r.stage;
  j["subject"] = r.subject;
  j["task_id"] = r.task_id;
  j["model"] = r.model;
  j["temperature"] = r.temperature;
  j["prompt_sha256"] = r.prompt_sha256;
  j["labels"] = r.labels;
  j["raw_response"] = r.raw_response;
  if (r.parse_error) j["parse_error"] = true;
  return j;
}

CacheRecord from_json(const nlohmann::json& j) {
  CacheRecord r;
  r.stage = j.at("stage").get<std::string>();
  r.subject = j.at("subject").get<std::string>();
  r.task_id = j.value("task_id", "");
  r.model = j.at("model").get<std::string>();
  r.temperature = j.at("temperature").get<double>();
  r.prompt_sha256 = j.at("prompt_sha256").get<std::string>();
  r.labels = j.value("labels", std::vector<std::string>{});
  r.raw_response = j.at("raw_response").get<std::string>();
  r.parse_error = j.value("parse_error", false);
  return r;
}

ChatRequest make_request(ChatStage stage, std::string prompt, const std::string& report_id,
                         const std::string& report_text) {
  ChatRequest req;
  req.stage = stage;
  req.messages.push_back({"user", std::move(prompt)});
  req.report_id = report_id;
  req.report_text = report_text;
  return req;
}

CacheRecord make_record(ChatStage stage, std::string subject, std::string task_id,
                        const ChatRequest& req, const std::string& model, double temperature) {
  CacheRecord r;
  r.stage = std::string(to_string(stage));
  r.subject = std::move(subject);
  r.task_id = std::move(task_id);
  r.model = model;
  r.temperature = temperature;
  r.prompt_sha256 = prompt_hash(req.messages);
  return r;
}

// Returns a usable cached record, or nullopt when the exchange must be sent.
std::optional<CacheRecord> usable(const LabelCache& cache, const CacheRecord& key) {
  auto hit = cache.lookup(key.key());
  if (hit && !hit->parse_error) return hit;
  return std::nullopt;
}

GeneratedLabelSet to_label_set(const CacheRecord& r) {
  return {r.subject, r.task_id, r.labels, r.raw_response, r.model, r.temperature};
}

ChatRequest labels_request(const PromptTemplates& prompts, const Report& report,
                           const TaskDefinition& task) {
  return make_request(ChatStage::Labels,
                      render_template(prompts.labels, report.text, task.instruction),
                      report.report_id, report.text);
}

}  // namespace

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  auto read = [&](const char* name) {
    const auto path = dir / name;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open prompt template " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  return {read("identify.txt"), read("tasks.txt"), read("labels.txt")};
}

std::string render_template(std::string_view tmpl, std::string_view report_text,
                            std::string_view task_instruction) {
  std::string out;
  out.reserve(tmpl.size() + report_text.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out += tmpl.substr(pos);
      break;
    }
    out += tmpl.substr(pos, open - pos);
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out += tmpl.substr(open);
      break;
    }
    const auto name = trim(tmpl.substr(open + 2, close - open - 2));
    if (name == "report_text") {
      out += report_text;
    } else if (name == "task_instruction") {
      out += task_instruction;
    } else {
      throw Error(ErrorKind::InvalidConfig, "unknown template placeholder '" + name + "'");
    }
    pos = close + 2;
  }
  return out;
}

std::vector<std::string> parse_label_list(std::string_view response) {
  std::vector<std::string> labels;
  std::set<std::string> seen;
  bool any_item = false;
  for (auto line : split_lines(response)) {
    auto body = list_item(line);
    if (!body) continue;
    any_item = true;
    std::string label = strip_decoration(std::move(*body));
    if (label.empty() || code_points(label) > kMaxLabelLength) continue;
    if (seen.insert(ascii_lower(label)).second) labels.push_back(std::move(label));
  }
  if (!any_item) {
    throw Error(ErrorKind::UnparseableResponse, "response contains no list items");
  }
  if (labels.empty()) {
    throw Error(ErrorKind::EmptyLabelList, "response list has no usable labels");
  }
  return labels;
}

std::vector<TaskDefinition> parse_task_list(std::string_view response) {
  std::vector<TaskDefinition> tasks;
  std::set<std::string> ids;
  for (auto line : split_lines(response)) {
    auto body = list_item(line);
    if (!body || body->empty()) continue;
    std::string text = *body;
    TaskDefinition task;

    const std::string lower = ascii_lower(text);
    const auto tag = lower.rfind("[audience:");
    if (tag != std::string::npos && !text.empty() && text.back() == ']') {
      task.audience = trim(std::string_view(text).substr(tag + 10, text.size() - tag - 11));
      text = trim(std::string_view(text).substr(0, tag));
    }
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
      task.name = strip_decoration(text);
      task.instruction = task.name;
    } else {
      task.name = strip_decoration(trim(std::string_view(text).substr(0, colon)));
      task.instruction = trim(std::string_view(text).substr(colon + 1));
    }
    if (task.name.empty() || task.instruction.empty()) continue;

    std::string id = slugify(task.name);
    if (id.empty()) id = "task";
    std::string unique = id;
    for (int n = 2; ids.contains(unique); ++n) unique = id + "-" + std::to_string(n);
    ids.insert(unique);
    task.task_id = std::move(unique);
    tasks.push_back(std::move(task));
  }
  if (tasks.empty()) {
    throw Error(ErrorKind::UnparseableResponse, "response contains no task list");
  }
  const bool has_findings = std::any_of(tasks.begin(), tasks.end(), [](const auto& t) {
    return ascii_lower(t.name).find("finding") != std::string::npos;
  });
  if (!has_findings) {
    throw Error(ErrorKind::UnparseableResponse, "no findings-based task in response");
  }
  return tasks;
}

const TaskDefinition& select_task(std::span<const TaskDefinition> tasks,
                                  std::string_view pattern) {
  if (tasks.empty()) throw Error(ErrorKind::InvalidArgument, "no tasks to select from");
  const std::string needle = ascii_lower(pattern);
  const TaskDefinition* found = nullptr;
  std::vector<std::string> matches;
  for (const auto& t : tasks) {
    if (ascii_lower(t.name).find(needle) != std::string::npos) {
      found = &t;
      matches.push_back(t.name);
    }
  }
  if (matches.empty()) {
    throw Error(ErrorKind::NoMatch, "no task name contains '" + std::string(pattern) + "'");
  }
  if (matches.size() > 1) {
    std::string list;
    for (const auto& m : matches) list += (list.empty() ? "" : ", ") + m;
    throw Error(ErrorKind::AmbiguousMatch,
                "pattern '" + std::string(pattern) + "' matches " + list);
  }
  return *found;
}

std::string CacheRecord::key() const {
  return fmt::format("{}\x1f{}\x1f{}\x1f{}\x1f{}\x1f{}", stage, subject, task_id, model,
                     format_temperature(temperature), prompt_sha256);
}

LabelCache::LabelCache(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read cache " + path_.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    try {
      CacheRecord r = from_json(nlohmann::json::parse(line));
      records_.insert_or_assign(r.key(), std::move(r));
    } catch (const nlohmann::json::exception& e) {
      spdlog::warn("{}:{}: skipping unreadable cache line ({})", path_.string(), number,
                   e.what());
    }
  }
}

std::optional<CacheRecord> LabelCache::lookup(const std::string& key) const {
  std::lock_guard lock(mutex_);
  const auto it = records_.find(key);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

void LabelCache::store(const CacheRecord& record) {
  std::lock_guard lock(mutex_);
  records_.insert_or_assign(record.key(), record);
  if (path_.empty()) return;
  if (!appender_.is_open()) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    appender_.open(path_, std::ios::binary | std::ios::app);
    if (!appender_) throw Error(ErrorKind::Io, "cannot append to " + path_.string());
  }
  appender_ << to_json(record).dump() << '\n';
  appender_.flush();
}

void LabelCache::compact() {
  std::lock_guard lock(mutex_);
  if (path_.empty()) return;
  if (appender_.is_open()) appender_.close();
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  auto tmp = path_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
    for (const auto& [key, record] : records_) out << to_json(record).dump() << '\n';
  }
  std::filesystem::rename(tmp, path_);
}

std::size_t LabelCache::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::string identify_text(LabelingContext& ctx, const Report& report) {
  if (trim(report.text).empty()) {
    throw Error(ErrorKind::InvalidArgument,
                "report '" + report.report_id + "' has no text to identify");
  }
  const ChatRequest req = make_request(
      ChatStage::Identify, render_template(ctx.prompts.identify, report.text),
      report.report_id, report.text);
  CacheRecord record = make_record(ChatStage::Identify, report.report_id, "", req,
                                   ctx.provider.model(), ctx.provider.temperature());
  if (auto hit = usable(ctx.cache, record)) return trim(hit->raw_response);
  record.raw_response = ctx.provider.complete(req);
  ctx.cache.store(record);
  return trim(record.raw_response);
}

std::vector<TaskDefinition> generate_tasks(LabelingContext& ctx,
                                           std::span<const Report> samples) {
  if (samples.empty()) {
    throw Error(ErrorKind::InvalidArgument, "task generation needs at least one report");
  }
  std::string documents;
  std::string subject = "sample:";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i) {
      documents += "\n\n";
      subject += ",";
    }
    documents += fmt::format("Document {}:\n{}", i + 1, samples[i].text);
    subject += samples[i].report_id;
  }
  const ChatRequest req =
      make_request(ChatStage::Tasks, render_template(ctx.prompts.tasks, documents), "", "");
  CacheRecord record = make_record(ChatStage::Tasks, subject, "", req, ctx.provider.model(),
                                   ctx.provider.temperature());
  if (auto hit = usable(ctx.cache, record)) return parse_task_list(hit->raw_response);
  record.raw_response = ctx.provider.complete(req);
  try {
    auto tasks = parse_task_list(record.raw_response);
    ctx.cache.store(record);
    return tasks;
  } catch (const Error&) {
    record.parse_error = true;
    ctx.cache.store(record);
    throw;
  }
}

GeneratedLabelSet generate_labels(LabelingContext& ctx, const Report& report,
                                  const TaskDefinition& task) {
  const ChatRequest req = labels_request(ctx.prompts, report, task);
  CacheRecord record = make_record(ChatStage::Labels, report.report_id, task.task_id, req,
                                   ctx.provider.model(), ctx.provider.temperature());
  if (auto hit = usable(ctx.cache, record)) return to_label_set(*hit);
  record.raw_response = ctx.provider.complete(req);
  try {
    record.labels = parse_label_list(record.raw_response);
  } catch (const Error&) {
    record.parse_error = true;
    ctx.cache.store(record);
    throw;
  }
  ctx.cache.store(record);
  return to_label_set(record);
}

std::optional<GeneratedLabelSet> cached_labels(const LabelCache& cache,
                                               const PromptTemplates& prompts,
                                               const Report& report, const TaskDefinition& task,
                                               const std::string& model, double temperature) {
  const ChatRequest req = labels_request(prompts, report, task);
  const CacheRecord key =
      make_record(ChatStage::Labels, report.report_id, task.task_id, req, model, temperature);
  if (auto hit = usable(cache, key)) return to_label_set(*hit);
  return std::nullopt;
}

LabelingOutcome label_corpus(LabelingContext& ctx, std::span<const Report> reports,
                             const TaskDefinition& task, std::size_t concurrency) {
  LabelingOutcome outcome;
  std::mutex result_mutex;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= reports.size()) return;
      const Report& report = reports[i];
      try {
        GeneratedLabelSet set = generate_labels(ctx, report, task);
        std::lock_guard lock(result_mutex);
        outcome.labels.insert_or_assign(report.report_id, std::move(set));
      } catch (const std::exception& e) {
        spdlog::warn("labeling {} failed: {}", report.report_id, e.what());
        std::lock_guard lock(result_mutex);
        outcome.failures.insert_or_assign(report.report_id, e.what());
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(concurrency, reports.size()));
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  ctx.cache.compact();
  return outcome;
}

}  // namespace radsim
