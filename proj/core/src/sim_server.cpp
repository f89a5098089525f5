#include <atomic>
#include <chrono>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "goxn/error.hpp"
#include "goxn/metrics.hpp"
#include "goxn/simenv.hpp"

namespace goxn::sim {

struct SimServer::Impl {
    httplib::Server server;
    std::thread listener;
    std::thread ticker;
    std::atomic<bool> stopping{false};
    std::string host;
    int port = 0;
};

SimServer::SimServer() : impl_(std::make_unique<Impl>()) {}

SimServer::~SimServer() { stop(); }

int SimServer::port() const { return impl_->port; }

std::string SimServer::base_url() const {
    const std::string host = impl_->host == "0.0.0.0" ? "127.0.0.1" : impl_->host;
    return "http://" + host + ":" + std::to_string(impl_->port);
}

void SimServer::stop() {
    impl_->stopping = true;
    impl_->server.stop();
    if (impl_->listener.joinable()) impl_->listener.join();
    if (impl_->ticker.joinable()) impl_->ticker.join();
}

void SimServer::wait() {
    if (impl_->listener.joinable()) impl_->listener.join();
    stop();
}

namespace {

void bad_data(httplib::Response& res, const std::string& message) {
    nlohmann::json body{{"status", "error"}, {"errorType", "bad_data"}, {"error", message}};
    res.status = 400;
    res.set_content(body.dump(), "application/json");
}

TimestampMs parse_bound(const httplib::Request& req, const char* key) {
    if (!req.has_param(key)) throw ParseError(std::string("missing parameter '") + key + "'");
    return parse_seconds(req.get_param_value(key));
}

}  // namespace

std::unique_ptr<SimServer> serve_http(Simulator& sim, const std::string& bind_address,
                                      ServeOptions options) {
    const auto colon = bind_address.rfind(':');
    if (colon == std::string::npos) {
        throw ValidationError("bind address must be host:port, got '" + bind_address + "'");
    }
    std::unique_ptr<SimServer> server(new SimServer());
    auto& impl = *server->impl_;
    impl.host = bind_address.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(bind_address.substr(colon + 1));
    } catch (const std::exception&) {
        throw ValidationError("bad port in '" + bind_address + "'");
    }

    const TimestampMs origin = options.origin_ms;
    auto query_range = [&sim, origin](const httplib::Request& req, httplib::Response& res) {
        try {
            if (!req.has_param("query")) throw ParseError("missing parameter 'query'");
            const TimestampMs start = parse_bound(req, "start");
            const TimestampMs end = parse_bound(req, "end");
            if (start > end) throw ParseError("end timestamp must not be before start time");
            auto series = sim.query_range(req.get_param_value("query"), {start - origin, end - origin});
            for (auto& s : series) {
                for (auto& sample : s.samples) sample.timestamp += origin;
            }
            res.status = 200;
            res.set_content(encode_query_range_response(series), "application/json");
        } catch (const Error& e) {
            bad_data(res, e.what());
        }
    };
    impl.server.Get("/api/v1/query_range", query_range);
    impl.server.Post("/api/v1/query_range", query_range);
    auto route = [&sim](const httplib::Request& req, httplib::Response& res) {
        res.status = sim.handle_request(req.path);
        res.set_content(res.status == 200 ? "ok\n" : "not found\n", "text/plain");
    };
    impl.server.Get(R"(/.*)", route);
    impl.server.Post(R"(/.*)", route);

    if (port == 0) {
        impl.port = impl.server.bind_to_any_port(impl.host);
        if (impl.port <= 0) throw EnvironmentError("cannot bind " + bind_address);
    } else {
        if (!impl.server.bind_to_port(impl.host, port)) throw EnvironmentError("cannot bind " + bind_address);
        impl.port = port;
    }
    impl.listener = std::thread([&impl] { impl.server.listen_after_bind(); });
    impl.server.wait_until_ready();

    if (options.realtime) {
        impl.ticker = std::thread([&impl, &sim] {
            const auto started = std::chrono::steady_clock::now();
            while (!impl.stopping) {
                std::this_thread::sleep_for(std::chrono::milliseconds(50));
                const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - started);
                sim.advance_to(elapsed.count());
            }
        });
    }
    return server;
}

}  // namespace goxn::sim
