#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "care/embedding.hpp"

namespace care {

/// POSTs a JSON body and returns the parsed JSON response. Throws
/// ProviderError on transport failure, non-2xx status or malformed JSON.
nlohmann::json http_post_json(const HttpEndpoint& endpoint,
                              const nlohmann::json& body);

/// Credentials for remote backends.
std::string api_key_from_env();

}  // namespace care
