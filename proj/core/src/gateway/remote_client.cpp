#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "kbound/gateway/remote_client.hpp"

#include <cstdlib>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <openssl/evp.h>

#include "kbound/errors.hpp"
#include "kbound/util/jsonl.hpp"
#include "kbound/util/text.hpp"

namespace kbound::gateway {

using nlohmann::json;

namespace {

bool is_url(const std::string& ref) {
  return ref.rfind("http://", 0) == 0 || ref.rfind("https://", 0) == 0 ||
         ref.rfind("data:", 0) == 0;
}

std::string mime_for(const std::filesystem::path& p) {
  const auto ext = util::to_lower(p.extension().string());
  if (ext == ".png") return "image/png";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return "image/jpeg";
}

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

std::vector<double> logprobs_of(const json& choice) {
  std::vector<double> out;
  if (!choice.contains("logprobs") || choice["logprobs"].is_null()) return out;
  const auto& lp = choice["logprobs"];
  if (!lp.contains("content") || !lp["content"].is_array()) return out;
  for (const auto& tok : lp["content"]) out.push_back(tok.at("logprob").get<double>());
  return out;
}

}  // namespace

std::string image_data_url(const std::string& path) {
  std::string bytes;
  try {
    bytes = util::read_text(path);
  } catch (const IoError&) {
    throw InvalidRequest("image not readable: " + path);
  }
  std::string encoded(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(encoded.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  encoded.resize(static_cast<std::size_t>(n));
  return "data:" + mime_for(path) + ";base64," + encoded;
}

RemoteClient::RemoteClient(ModelEndpoint endpoint, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), retry_(retry) {
  endpoint_.validate();
  const auto& url = endpoint_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigurationError("base_url needs a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

json RemoteClient::user_message(const Query& query) const {
  if (query.image_ref.empty()) throw InvalidRequest("remote request without image_ref");
  const std::string url = is_url(query.image_ref) ? query.image_ref : image_data_url(query.image_ref);
  return {{"role", "user"},
          {"content", json::array({{{"type", "image_url"}, {"image_url", {{"url", url}}}},
                                   {{"type", "text"}, {"text", query.prompt}}})}};
}

json RemoteClient::generation_request(const Query& query, double temperature,
                                      std::uint64_t seed) const {
  return {{"model", endpoint_.model.empty() ? endpoint_.name : endpoint_.model},
          {"messages", json::array({user_message(query)})},
          {"temperature", temperature},
          {"max_tokens", endpoint_.max_tokens},
          {"seed", seed},
          {"n", 1},
          {"logprobs", true}};
}

json RemoteClient::scoring_request(const Query& query, std::string_view target) const {
  return {{"model", endpoint_.model.empty() ? endpoint_.name : endpoint_.model},
          {"messages", json::array({user_message(query),
                                    {{"role", "assistant"}, {"content", std::string(target)}}})},
          {"temperature", 0.0},
          {"max_tokens", 0},
          {"echo", true},
          {"logprobs", true}};
}

json RemoteClient::post(const json& body) {
  httplib::Client http(scheme_host_port_);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(endpoint_.request_timeout_s));
  http.set_connection_timeout(timeout);
  http.set_read_timeout(timeout);
  http.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!endpoint_.auth_token_env.empty()) {
    if (const char* token = std::getenv(endpoint_.auth_token_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  const std::string path = path_prefix_ + "/chat/completions";
  const std::string payload = body.dump();

  std::string last_error;
  auto backoff = retry_.initial_backoff;
  for (int attempt = 0; attempt < retry_.attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    count_call();
    auto res = http.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) {
      try {
        return json::parse(res->body);
      } catch (const json::parse_error& e) {
        last_error = std::string("malformed response body: ") + e.what();
        continue;
      }
    }
    if (!retryable_status(res->status)) {
      throw InvalidRequest(endpoint_.name + ": HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    last_error = "HTTP " + std::to_string(res->status);
  }
  throw RemoteUnavailable(endpoint_.name + ": " + std::to_string(retry_.attempts) +
                          " attempts failed (" + last_error + ")");
}

SampledResponse RemoteClient::draw(const Query& query, double temperature, std::uint64_t seed,
                                   int sample_index) {
  const json reply = post(generation_request(query, temperature, seed + static_cast<std::uint64_t>(sample_index)));
  const auto& choice = reply.at("choices").at(0);
  SampledResponse r;
  r.text = choice.at("message").at("content").get<std::string>();
  r.sample_index = sample_index;
  auto lps = logprobs_of(choice);
  if (!lps.empty()) {
    double total = 0.0;
    for (double v : lps) total += v;
    r.total_logprob = total;
    r.token_logprobs = std::move(lps);
  }
  return r;
}

SampledResponse RemoteClient::greedy(const Query& query) { return draw(query, 0.0, 0, 0); }

ScoredSequence RemoteClient::score(const Query& query, std::string_view target) {
  if (!endpoint_.supports_scoring) throw ScoringUnsupported(endpoint_.name);
  const json reply = post(scoring_request(query, target));
  ScoredSequence s;
  s.token_logprobs = logprobs_of(reply.at("choices").at(0));
  if (s.token_logprobs.empty()) throw ScoringUnsupported(endpoint_.name + " (no echoed logprobs)");
  for (double v : s.token_logprobs) s.total_logprob += v;
  return s;
}

}  // namespace kbound::gateway
