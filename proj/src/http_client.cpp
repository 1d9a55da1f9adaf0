#include "care/http_client.hpp"

#include <cstdlib>

#include <httplib.h>

#include "care/errors.hpp"

namespace care {

std::string api_key_from_env() {
  const char* key = std::getenv("CARE_API_KEY");
  return key != nullptr ? key : "";
}

nlohmann::json http_post_json(const HttpEndpoint& endpoint,
                              const nlohmann::json& body) {
  httplib::Client client(endpoint.base_url);
  client.set_connection_timeout(endpoint.timeout_seconds);
  client.set_read_timeout(endpoint.timeout_seconds);
  httplib::Headers headers;
  if (!endpoint.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + endpoint.api_key);
  }
  auto res = client.Post(endpoint.path, headers, body.dump(), "application/json");
  if (!res) {
    throw ProviderError("request to " + endpoint.base_url + endpoint.path +
                        " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw ProviderError("request to " + endpoint.base_url + endpoint.path +
                        " returned HTTP " + std::to_string(res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("malformed JSON response: ") + e.what());
  }
}

}  // namespace care
