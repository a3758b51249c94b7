#include <cstdlib>
#include <semaphore>
#include <thread>

#include "eac/errors.hpp"
#include "eac/reason.hpp"

// after Eigen: resolv.h, pulled in by httplib, defines a _res macro
#include "httplib.h"

namespace eac::reason {

struct HttpReasoner::Impl {
  explicit Impl(int n) : slots(n) {}
  std::counting_semaphore<1024> slots;
};

HttpConfig HttpConfig::with_environment() const {
  HttpConfig out = *this;
  if (out.url.empty())
    if (const char* v = std::getenv("EAC_REASONER_URL")) out.url = v;
  if (out.token.empty())
    if (const char* v = std::getenv("EAC_REASONER_TOKEN")) out.token = v;
  return out;
}

HttpReasoner::HttpReasoner(HttpConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.url.empty()) throw PreconditionError("http reasoner: no endpoint URL (set EAC_REASONER_URL)");
  if (cfg_.url.rfind("http://", 0) != 0)
    throw PreconditionError("http reasoner: only http:// endpoints are supported, got '" + cfg_.url + "'");
  if (cfg_.max_in_flight < 1 || cfg_.max_in_flight > 1024 || cfg_.retries < 0)
    throw PreconditionError("http reasoner: max_in_flight in [1, 1024] and retries >= 0");
  impl_ = std::make_unique<Impl>(cfg_.max_in_flight);
}

HttpReasoner::~HttpReasoner() = default;

std::string HttpReasoner::complete(const Query& q) {
  const std::string endpoint = cfg_.url + cfg_.path;
  const nlohmann::json body{{"model", cfg_.model},
                            {"temperature", 0},
                            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", q.prompt}}})}};
  impl_->slots.acquire();
  struct Release {
    Impl* impl;
    ~Release() { impl->slots.release(); }
  } release{impl_.get()};

  std::string last;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(cfg_.backoff * (1 << (attempt - 1)));
    httplib::Client cli(cfg_.url);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    if (!cfg_.token.empty()) cli.set_bearer_token_auth(cfg_.token);
    auto res = cli.Post(cfg_.path, body.dump(), "application/json");
    if (!res) {
      last = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw TransportError("reasoner " + endpoint + " answered HTTP " + std::to_string(res->status) + ": " +
                           res->body.substr(0, 200));
    try {
      const auto j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("reasoner " + endpoint + " sent an unexpected body: " + std::string(e.what()));
    }
  }
  throw TransportError("reasoner " + endpoint + " unreachable after " + std::to_string(cfg_.retries + 1) +
                       " attempts: " + last);
}

}  // namespace eac::reason
