#pragma once

// Internal: thin HTTP GET helper so only one translation unit pulls in the client.

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace goxn::detail {

struct HttpResponse {
    int status = 0;
    std::string body;
};

struct SplitUrl {
    std::string origin;  // scheme://host:port
    std::string prefix;  // path prefix without trailing slash, may be empty
};

/// Throws ValidationError for URLs that are not http(s)://host[:port][/prefix].
SplitUrl split_url(const std::string& url);

/// nullopt on transport failure (connect refused, timeout, ...).
std::optional<HttpResponse> http_get(const std::string& base_url, const std::string& path,
                                     const std::vector<std::pair<std::string, std::string>>& params,
                                     double timeout_seconds);

}  // namespace goxn::detail
