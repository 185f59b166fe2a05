#include "http_client.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <thread>

#include "radsim/error.hpp"

namespace radsim::detail {

HttpResponse send_with_retry(const std::string& base, const std::string& method,
                             const std::string& path, const Headers& headers,
                             const std::string& body, const RetryPolicy& policy) {
  httplib::Headers hdrs;
  for (const auto& [k, v] : headers) hdrs.emplace(k, v);

  auto backoff = policy.initial_backoff;
  std::string last_problem;
  bool last_was_rate_limit = false;
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    if (attempt > 0) {
      spdlog::debug("retrying {} {}{} after {} ms ({})", method, base, path, backoff.count(),
                    last_problem);
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(base);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(policy.timeout);
    const auto usecs =
        std::chrono::duration_cast<std::chrono::microseconds>(policy.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Result res = method == "GET"
                              ? client.Get(path, hdrs)
                              : client.Post(path, hdrs, body, "application/json");
    if (!res) {
      last_problem = "connection failed: " + httplib::to_string(res.error());
      last_was_rate_limit = false;
      continue;
    }
    if (res->status == 429) {
      last_problem = "HTTP 429";
      last_was_rate_limit = true;
      continue;
    }
    if (res->status >= 500) {
      last_problem = "HTTP " + std::to_string(res->status);
      last_was_rate_limit = false;
      continue;
    }
    return {res->status, res->body};
  }
  const std::string what = method + " " + base + path + " failed after " +
                           std::to_string(policy.max_retries + 1) + " attempts: " +
                           last_problem;
  throw Error(last_was_rate_limit ? ErrorKind::RateLimited : ErrorKind::ProviderError, what);
}

}  // namespace radsim::detail
