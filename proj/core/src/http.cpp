#include "http.hpp"

#include <httplib.h>

#include "goxn/error.hpp"

namespace goxn::detail {

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("URL needs a scheme: '" + url + "'");
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw ValidationError("unsupported URL scheme in '" + url + "'");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    SplitUrl out;
    out.origin = url.substr(0, path_start);
    if (out.origin.size() <= scheme_end + 3) throw ValidationError("URL has no host: '" + url + "'");
    if (path_start != std::string::npos) {
        out.prefix = url.substr(path_start);
        while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
    }
    return out;
}

std::optional<HttpResponse> http_get(const std::string& base_url, const std::string& path,
                                     const std::vector<std::pair<std::string, std::string>>& params,
                                     double timeout_seconds) {
    const SplitUrl url = split_url(base_url);
    httplib::Client client(url.origin);
    const auto secs = static_cast<time_t>(timeout_seconds);
    const auto usecs = static_cast<time_t>((timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Params query;
    for (const auto& [k, v] : params) query.emplace(k, v);
    auto result = client.Get(url.prefix + path, query, httplib::Headers{});
    if (!result) return std::nullopt;
    return HttpResponse{result->status, result->body};
}

}  // namespace goxn::detail
