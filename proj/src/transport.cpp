#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "mia/errors.hpp"
#include "mia/gateway.hpp"
#include "mia/text.hpp"

namespace mia {

HttplibTransport::HttplibTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

HttpResponse HttplibTransport::post(const HttpRequest& request) {
    // scheme://host[:port]/path
    const auto& url = request.url;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw TransportError("malformed endpoint URL '" + url + "'");
    auto path_start = url.find('/', scheme_end + 3);
    std::string origin = url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);

    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);

    auto res = client.Post(path, headers, request.body, "application/json");
    if (!res) throw TransportError(url + ": " + httplib::to_string(res.error()));

    HttpResponse out;
    out.status = res->status;
    out.body = res->body;
    for (const auto& [k, v] : res->headers) out.headers.emplace(text::to_lower_ascii(k), v);
    return out;
}

}  // namespace mia
