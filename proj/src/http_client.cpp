// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>

#include <fmt/format.h>
#include <httplib.h>

#include "knobforge/advisor.hpp"
#include "knobforge/error.hpp"

namespace knobforge {

namespace {

// Splits "http://host:port/v1" into the scheme+authority and the path prefix.
std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const auto scheme = url.find("://");
  const auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string path = url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, path_start), path};
}

}  // namespace

HttpChatClient::HttpChatClient(HttpClientOptions options) : options_(std::move(options)) {
  if (options_.base_url.empty()) throw Error(ErrorCode::config_error, "llm.base_url is empty");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (options_.base_url.rfind("https://", 0) == 0) {
    throw Error(ErrorCode::config_error, "https base_url requires a build with OpenSSL");
  }
#endif
}

std::string HttpChatClient::complete(const ChatRequest& request) {
  const auto [host, prefix] = split_base_url(options_.base_url);
  httplib::Client client(host);
  client.set_connection_timeout(std::chrono::duration<double>(options_.connect_timeout_seconds));
  client.set_read_timeout(std::chrono::duration<double>(options_.read_timeout_seconds));
  client.set_write_timeout(std::chrono::duration<double>(options_.read_timeout_seconds));
  httplib::Headers headers;
  if (const char* key = std::getenv(options_.api_key_env.c_str()); key != nullptr && *key != '\0') {
    headers.emplace("Authorization", fmt::format("Bearer {}", key));
  }
  auto res = client.Post(prefix + "/chat/completions", headers, chat_request_to_json(request).dump(),
                         "application/json");
  if (!res) {
    throw Error(ErrorCode::llm_unavailable,
                fmt::format("POST {}/chat/completions: {}", options_.base_url, httplib::to_string(res.error())));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::llm_unavailable, fmt::format("chat completion returned HTTP {}: {}", res->status,
                                                        res->body.substr(0, 200)));
  }
  auto doc = nlohmann::json::parse(res->body, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::llm_unavailable, "chat completion body is not JSON");
  return chat_response_content(doc);
}

}  // namespace knobforge
