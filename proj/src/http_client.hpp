#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace radsim::detail {

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds timeout{60000};
  std::chrono::milliseconds initial_backoff{500};
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

// Sends the request, retrying connection failures, 429 and 5xx with
// exponential backoff. Any other status is returned to the caller. Throws
// RateLimited when retries run out on 429, ProviderError otherwise.
HttpResponse send_with_retry(const std::string& base, const std::string& method,
                             const std::string& path, const Headers& headers,
                             const std::string& body, const RetryPolicy& policy);

}  // namespace radsim::detail
