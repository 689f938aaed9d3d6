#pragma once

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace nextpoi::detail {

struct SplitUrl {
    std::string base;    // scheme://host[:port]
    std::string prefix;  // path prefix without trailing slash, may be empty
};

inline SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw std::invalid_argument("endpoint URL must include a scheme: '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path_start), prefix};
}

inline std::string api_key_from_env(const std::string& env_var) {
    if (env_var.empty()) return "";
    const char* value = std::getenv(env_var.c_str());
    return value ? value : "";
}

}  // namespace nextpoi::detail
