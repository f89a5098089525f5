#include "goxn/simenv.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <set>

#include <yaml-cpp/yaml.h>

#include "goxn/csv.hpp"
#include "goxn/error.hpp"

namespace goxn::sim {

namespace {

std::uint64_t idle_bytes(std::uint64_t per_second, TimestampMs t) {
    const auto ms = static_cast<std::uint64_t>(t < 0 ? 0 : t);
    return (ms / 1000) * per_second + ((ms % 1000) * per_second) / 1000;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// --- YAML topology parsing -------------------------------------------------

class TopologyReader {
public:
    explicit TopologyReader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
        throw SchemaError(source_ + ":" + std::to_string(n.Mark().line + 1) + ": " + msg);
    }

    void keys(const YAML::Node& n, const std::set<std::string>& allowed,
              const std::set<std::string>& required = {}) const {
        if (!n.IsMap()) fail(n, "expected a mapping");
        std::set<std::string> seen;
        for (const auto& kv : n) {
            const auto k = kv.first.as<std::string>();
            if (!allowed.count(k)) fail(kv.first, "unknown key '" + k + "'");
            seen.insert(k);
        }
        for (const auto& r : required) {
            if (!seen.count(r)) fail(n, "missing key '" + r + "'");
        }
    }

    template <typename T>
    T get(const YAML::Node& parent, const char* key, T fallback) const {
        const auto n = parent[key];
        if (!n) return fallback;
        try {
            return n.as<T>();
        } catch (const YAML::Exception&) {
            fail(n, std::string("bad value for '") + key + "'");
        }
    }

    std::uint64_t bytes(const YAML::Node& parent, const char* key) const {
        const auto n = parent[key];
        if (!n) return 0;
        const auto text = n.as<std::string>();
        try {
            return parse_unsigned(text);
        } catch (const ParseError&) {
            fail(n, std::string("'") + key + "' must be a nonnegative integer");
        }
    }

    TopologySpec read(const YAML::Node& root) const {
        keys(root, {"entry", "services", "edges", "routes", "telemetry_sink", "storage_backend"},
             {"entry", "services", "telemetry_sink", "storage_backend"});
        TopologySpec t;
        t.entry = root["entry"].as<std::string>();
        t.telemetry_sink = root["telemetry_sink"].as<std::string>();
        t.storage_backend = root["storage_backend"].as<std::string>();
        if (!root["services"].IsSequence()) fail(root["services"], "services must be a list");
        for (const auto& s : root["services"]) {
            keys(s, {"name", "containers", "per_request", "per_span", "idle", "per_scrape_joules"},
                 {"name"});
            ServiceNode node;
            node.name = s["name"].as<std::string>();
            node.containers_per_service = get<int>(s, "containers", 1);
            if (const auto r = s["per_request"]) {
                keys(r, {"compute_joules", "rx_bytes", "fs_write_bytes"});
                node.per_request.compute_joules = get<double>(r, "compute_joules", 0.0);
                node.per_request.rx_bytes = bytes(r, "rx_bytes");
                node.per_request.fs_write_bytes = bytes(r, "fs_write_bytes");
            }
            if (const auto p = s["per_span"]) {
                keys(p, {"rx_bytes_at_sink", "fs_write_bytes_at_backend"});
                node.per_span.rx_bytes_at_sink = bytes(p, "rx_bytes_at_sink");
                node.per_span.fs_write_bytes_at_backend = bytes(p, "fs_write_bytes_at_backend");
            }
            if (const auto i = s["idle"]) {
                keys(i, {"joules_per_s", "rx_bytes_per_s"});
                node.idle.joules_per_s = get<double>(i, "joules_per_s", 0.0);
                node.idle.rx_bytes_per_s = bytes(i, "rx_bytes_per_s");
            }
            node.per_scrape_joules = get<double>(s, "per_scrape_joules", 0.0);
            t.services.push_back(std::move(node));
        }
        if (const auto edges = root["edges"]) {
            if (!edges.IsSequence()) fail(edges, "edges must be a list");
            for (const auto& e : edges) {
                keys(e, {"caller", "callee", "calls"}, {"caller", "callee"});
                t.edges.push_back({e["caller"].as<std::string>(), e["callee"].as<std::string>(),
                                   get<int>(e, "calls", 1)});
            }
        }
        if (const auto routes = root["routes"]) {
            if (!routes.IsSequence()) fail(routes, "routes must be a list");
            for (const auto& r : routes) {
                keys(r, {"path", "entry"}, {"path"});
                t.routes.push_back({r["path"].as<std::string>(), get<std::string>(r, "entry", t.entry)});
            }
        }
        return t;
    }

private:
    std::string source_;
};

}  // namespace

// --- TopologySpec --------------------------------------------------------------

const ServiceNode* TopologySpec::find(const std::string& name) const {
    for (const auto& s : services) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

void TopologySpec::validate() const {
    if (entry.empty() || services.empty()) throw ValidationError("topology: entry service missing");
    std::set<std::string> names;
    for (const auto& s : services) {
        if (s.name.empty()) throw ValidationError("topology: service with empty name");
        if (!std::all_of(s.name.begin(), s.name.end(), [](char c) {
                return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
            })) {
            throw ValidationError("topology: service name '" + s.name + "' must be [A-Za-z0-9_-]");
        }
        if (!names.insert(s.name).second) {
            throw ValidationError("topology: duplicate service '" + s.name + "'");
        }
        if (s.containers_per_service < 1) {
            throw ValidationError("topology: '" + s.name + "' needs at least one container");
        }
        for (double v : {s.per_request.compute_joules, s.idle.joules_per_s, s.per_scrape_joules}) {
            if (!(v >= 0.0) || !std::isfinite(v)) {
                throw ValidationError("topology: '" + s.name + "' has a negative or non-finite cost");
            }
        }
    }
    if (!names.count(entry)) throw ValidationError("topology: entry service missing: '" + entry + "'");
    if (!names.count(telemetry_sink)) {
        throw ValidationError("topology: telemetry sink '" + telemetry_sink + "' is not a service");
    }
    if (!names.count(storage_backend)) {
        throw ValidationError("topology: storage backend '" + storage_backend + "' is not a service");
    }
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& e : edges) {
        if (!names.count(e.caller) || !names.count(e.callee)) {
            throw ValidationError("topology: edge " + e.caller + " -> " + e.callee +
                                  " names an unknown service");
        }
        if (e.calls < 1) throw ValidationError("topology: edge calls must be >= 1");
        adj[e.caller].push_back(e.callee);
    }
    std::set<std::string> paths;
    for (const auto& r : routes) {
        if (r.path.empty() || r.path.front() != '/') {
            throw ValidationError("topology: route '" + r.path + "' must start with '/'");
        }
        if (r.path.rfind("/api/v1/", 0) == 0) {
            throw ValidationError("topology: route '" + r.path + "' collides with the query API");
        }
        if (!names.count(r.entry)) {
            throw ValidationError("topology: route '" + r.path + "' enters unknown service");
        }
        if (!paths.insert(r.path).second) throw ValidationError("topology: duplicate route " + r.path);
    }
    // Cycle check over the whole graph (white/grey/black DFS).
    std::map<std::string, int> color;
    std::function<void(const std::string&)> dfs = [&](const std::string& n) {
        color[n] = 1;
        for (const auto& m : adj[n]) {
            if (color[m] == 1) throw ValidationError("topology: call graph has a cycle through '" + m + "'");
            if (color[m] == 0) dfs(m);
        }
        color[n] = 2;
    };
    for (const auto& n : names) {
        if (color[n] == 0) dfs(n);
    }
}

TopologySpec TopologySpec::from_yaml(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw SchemaError(std::string("topology: ") + e.what());
    }
    auto t = TopologyReader("<topology>").read(root);
    t.validate();
    return t;
}

TopologySpec TopologySpec::load(const std::string& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::BadFile&) {
        throw IoError("cannot read topology " + path);
    } catch (const YAML::Exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    auto t = TopologyReader(path).read(root);
    t.validate();
    return t;
}

TopologySpec TopologySpec::default_demo() {
    // Engine calibration, not measurements: chosen so that at the default intensity
    // factors the collector's network share passes one half at 50 % trace sampling.
    TopologySpec t;
    t.entry = "frontend";
    t.telemetry_sink = "otel-collector";
    t.storage_backend = "jaeger";
    auto app = [](std::string name, double joules, std::uint64_t rx, std::uint64_t fs,
                  std::uint64_t span_rx, std::uint64_t span_fs, double idle_j) {
        ServiceNode n;
        n.name = std::move(name);
        n.per_request = {joules, rx, fs};
        n.per_span = {span_rx, span_fs};
        n.idle = {idle_j, 400};
        n.per_scrape_joules = 0.2;
        return n;
    };
    t.services = {
        app("frontend", 0.15, 1200, 0, 800, 1200, 4.0),
        app("recommendation", 0.10, 900, 0, 800, 1200, 2.5),
        app("product-catalog", 0.08, 1100, 0, 800, 1200, 2.0),
        app("currency", 0.04, 500, 0, 800, 1200, 1.5),
        app("cart", 0.06, 700, 2000, 800, 1200, 2.0),
    };
    ServiceNode sink;
    sink.name = "otel-collector";
    sink.idle = {3.0, 200};
    sink.per_scrape_joules = 0.2;
    ServiceNode backend;
    backend.name = "jaeger";
    backend.idle = {1.5, 200};
    backend.per_scrape_joules = 0.2;
    t.services.push_back(sink);
    t.services.push_back(backend);
    t.edges = {
        {"frontend", "recommendation", 1},
        {"recommendation", "product-catalog", 1},
        {"product-catalog", "currency", 1},
        {"currency", "cart", 1},
    };
    t.routes = {{kRecommendationRoute, "frontend"}};
    t.validate();
    return t;
}

TopologySpec TopologySpec::from_descriptor(const std::string& descriptor) {
    if (descriptor.rfind("sim:", 0) != 0) {
        throw ValidationError("simulated SUE must be 'sim:default' or 'sim:<topology.yaml>', got '" +
                              descriptor + "'");
    }
    const auto rest = descriptor.substr(4);
    if (rest.empty() || rest == "default") return default_demo();
    return load(rest);
}

void SimSettings::validate() const {
    if (!(trace_sampling_fraction >= 0.0 && trace_sampling_fraction <= 1.0)) {
        throw ValidationError("trace sampling fraction must be in [0, 1]");
    }
    if (!(scrape_interval_s > 0.0) || seconds_to_ms(scrape_interval_s) < 1) {
        throw ValidationError("scrape interval must be >= 1 ms");
    }
    if (!(mesh_per_request.compute_joules >= 0.0)) {
        throw ValidationError("mesh per-request compute must be >= 0");
    }
}

// --- Simulator -------------------------------------------------------------------

Simulator::Simulator(TopologySpec topology, SimSettings settings)
    : topology_(std::move(topology)), settings_(settings), rng_(settings.seed) {
    topology_.validate();
    settings_.validate();
    if (topology_.routes.empty()) topology_.routes.push_back({kRecommendationRoute, topology_.entry});

    for (const auto& node : topology_.services) {
        for (int i = 0; i < node.containers_per_service; ++i) {
            Container c;
            c.service = node.name;
            c.pod = node.name + "-" + std::to_string(i);
            c.name = node.name;
            c.id = c.pod + "/" + c.name;
            containers_.push_back(std::move(c));
        }
    }
    std::sort(containers_.begin(), containers_.end(),
              [](const Container& a, const Container& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < containers_.size(); ++i) {
        containers_[i].node = topology_.find(containers_[i].service);
        by_service_[containers_[i].service].push_back(i);
    }
    for (const auto& e : topology_.edges) {
        for (int k = 0; k < e.calls; ++k) callees_[e.caller].push_back(e.callee);
    }

    scrape_interval_ms_ = seconds_to_ms(settings_.scrape_interval_s);
    next_scrape_ = scrape_interval_ms_;
    for (auto& c : containers_) {
        c.joules.push_back({0, 0.0});
        c.rx.push_back({0, 0.0});
        c.fs.push_back({0, 0.0});
    }
}

Simulator::Counters Simulator::counters_before(const Container& c, TimestampMs t) const {
    auto it = std::lower_bound(c.history.begin(), c.history.end(), t,
                               [](const Checkpoint& cp, TimestampMs at) { return cp.at < at; });
    if (it == c.history.begin()) return {};
    return std::prev(it)->after;
}

std::uint64_t Simulator::scrapes_through(TimestampMs t) const {
    return static_cast<std::uint64_t>(
        std::upper_bound(scrape_times_.begin(), scrape_times_.end(), t) - scrape_times_.begin());
}

namespace {

struct Composed {
    double joules;
    std::uint64_t rx;
    std::uint64_t fs;
};

}  // namespace

Simulator::Values Simulator::values_at(const Container& c, TimestampMs t) const {
    const Counters r = counters_before(c, t);
    const auto& node = *c.node;
    Values v;
    v.joules = (r.request_joules + node.idle.joules_per_s * ms_to_seconds(t)) +
               node.per_scrape_joules * static_cast<double>(scrapes_through(t));
    v.rx = r.request_rx + idle_bytes(node.idle.rx_bytes_per_s, t);
    v.fs = r.fs_writes;
    return v;
}

void Simulator::touch(Container& c) {
    if (c.history.empty() || c.history.back().at != now_) {
        c.history.push_back({now_, c.current});
    } else {
        c.history.back().after = c.current;
    }
}

Simulator::Container& Simulator::pick(const std::string& service) {
    const auto& members = by_service_.at(service);
    std::size_t& next = round_robin_[service];
    Container& c = containers_[members[next % members.size()]];
    ++next;
    return c;
}

void Simulator::visit(const std::string& service, bool sampled, std::vector<std::string>& visited) {
    visited.push_back(service);
    Container& c = pick(service);
    const auto& node = *c.node;
    c.current.request_joules += node.per_request.compute_joules;
    c.current.request_rx += node.per_request.rx_bytes;
    c.current.fs_writes += node.per_request.fs_write_bytes;
    if (settings_.mesh_enabled) {
        c.current.request_joules += settings_.mesh_per_request.compute_joules;
        c.current.request_rx += settings_.mesh_per_request.rx_bytes;
    }
    touch(c);
    if (sampled) {
        Container& sink = pick(topology_.telemetry_sink);
        sink.current.request_rx += node.per_span.rx_bytes_at_sink;
        touch(sink);
        Container& backend = pick(topology_.storage_backend);
        backend.current.fs_writes += node.per_span.fs_write_bytes_at_backend;
        touch(backend);
    }
    auto it = callees_.find(service);
    if (it == callees_.end()) return;
    for (const auto& callee : it->second) visit(callee, sampled, visited);
}

int Simulator::handle_request(const std::string& route) {
    std::lock_guard lock(mu_);
    const auto it = std::find_if(topology_.routes.begin(), topology_.routes.end(),
                                 [&](const Route& r) { return r.path == route; });
    if (it == topology_.routes.end()) return 404;
    ++requests_;
    // Head-based sampling: one draw per request decides for all of its spans.
    const bool sampled = uniform01(rng_) < settings_.trace_sampling_fraction;
    std::vector<std::string> visited;
    visit(it->entry, sampled, visited);
    return 200;
}

void Simulator::advance_clock(TimestampMs dt) {
    if (dt <= 0) throw DomainError("advance_clock: dt must be > 0");
    std::lock_guard lock(mu_);
    const TimestampMs target = now_ + dt;
    while (next_scrape_ <= target) {
        now_ = next_scrape_;
        scrape_locked();
        next_scrape_ += scrape_interval_ms_;
    }
    now_ = target;
}

void Simulator::advance_to(TimestampMs t) {
    TimestampMs current;
    {
        std::lock_guard lock(mu_);
        current = now_;
    }
    if (t > current) advance_clock(t - current);
}

TimestampMs Simulator::now() const {
    std::lock_guard lock(mu_);
    return now_;
}

void Simulator::scrape_locked() {
    scrape_times_.push_back(now_);
    const bool reset = settings_.reset_at_scrape &&
                       static_cast<std::size_t>(*settings_.reset_at_scrape) == scrape_times_.size();
    for (auto& c : containers_) {
        const Values v = values_at(c, now_);
        if (reset) {
            c.reset_joules = v.joules;
            c.reset_rx = v.rx;
            c.reset_fs = v.fs;
        }
        c.joules.push_back({now_, v.joules - c.reset_joules});
        c.rx.push_back({now_, static_cast<double>(v.rx - c.reset_rx)});
        c.fs.push_back({now_, static_cast<double>(v.fs - c.reset_fs)});
    }
}

std::vector<MetricSeries> Simulator::query_range(const std::string& selector,
                                                 const TimeWindow& window) const {
    const Selector sel = Selector::parse(selector);
    std::vector<MetricSample> Container::*member = nullptr;
    if (sel.metric == kJoulesMetric) {
        member = &Container::joules;
    } else if (sel.metric == kRxBytesMetric) {
        member = &Container::rx;
    } else if (sel.metric == kFsWritesMetric) {
        member = &Container::fs;
    } else {
        return {};
    }

    std::lock_guard lock(mu_);
    std::vector<MetricSeries> out;
    for (const auto& c : containers_) {
        LabelSet labels{{"namespace", kNamespace}, {"pod", c.pod}, {"container", c.name}, {"app", c.service}};
        const bool match = std::all_of(sel.matchers.begin(), sel.matchers.end(), [&](const auto& m) {
            auto it = labels.find(m.first);
            return it == labels.end() ? m.second.empty() : it->second == m.second;
        });
        if (!match) continue;
        MetricSeries s;
        s.metric_name = sel.metric;
        s.kind = MetricKind::counter;
        s.labels = std::move(labels);
        for (const auto& sample : c.*member) {
            if (window.contains(sample.timestamp)) s.samples.push_back(sample);
        }
        out.push_back(std::move(s));
    }
    std::sort(out.begin(), out.end(),
              [](const MetricSeries& a, const MetricSeries& b) { return a.labels < b.labels; });
    return out;
}

std::vector<LedgerRow> Simulator::ledger_locked(TimestampMs t) const {
    std::vector<LedgerRow> rows;
    for (const auto& [service, members] : by_service_) {
        LedgerRow row;
        row.service = service;
        for (std::size_t idx : members) {
            const Values v = values_at(containers_[idx], t);
            row.compute_joules += v.joules;
            row.rx_bytes += v.rx;
            row.fs_write_bytes += v.fs;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<LedgerRow> Simulator::ledger() const {
    std::lock_guard lock(mu_);
    // Live totals include requests already handled at now_.
    std::vector<LedgerRow> rows;
    for (const auto& [service, members] : by_service_) {
        LedgerRow row;
        row.service = service;
        for (std::size_t idx : members) {
            const Container& c = containers_[idx];
            const auto& node = *c.node;
            row.compute_joules += (c.current.request_joules + node.idle.joules_per_s * ms_to_seconds(now_)) +
                                  node.per_scrape_joules * static_cast<double>(scrape_times_.size());
            row.rx_bytes += c.current.request_rx + idle_bytes(node.idle.rx_bytes_per_s, now_);
            row.fs_write_bytes += c.current.fs_writes;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<LedgerRow> Simulator::ledger_at(TimestampMs t) const {
    std::lock_guard lock(mu_);
    if (t > now_) {
        throw ValidationError("ledger_at: t=" + format_seconds(t) + " is beyond simulated time " +
                              format_seconds(now_));
    }
    return ledger_locked(t);
}

std::vector<ContainerUsage> Simulator::ledger_usages(const TimeWindow& window) const {
    std::lock_guard lock(mu_);
    if (window.start > window.end) throw ValidationError("ledger window has start > end");
    if (window.end > now_) {
        throw ValidationError("ledger window ends at " + format_seconds(window.end) +
                              ", beyond simulated time " + format_seconds(now_));
    }
    std::vector<ContainerUsage> out;
    for (const auto& c : containers_) {
        const Values a = values_at(c, window.start);
        const Values b = values_at(c, window.end);
        ContainerUsage u;
        u.container_id = c.id;
        u.pod = c.pod;
        u.service = c.service;
        u.labels = {{"namespace", kNamespace}, {"pod", c.pod}, {"container", c.name}, {"app", c.service}};
        u.compute_joules = b.joules - a.joules;
        u.network_bytes = b.rx - a.rx;
        u.storage_bytes = b.fs - a.fs;
        u.window = window;
        out.push_back(std::move(u));
    }
    return out;
}

std::vector<ServiceEnergyBreakdown> Simulator::ledger_breakdowns(
    const TimeWindow& window, const EnergyIntensityFactors& f) const {
    return aggregate_services(ledger_usages(window), f);
}

StorageSnapshot Simulator::storage_snapshot() const {
    std::lock_guard lock(mu_);
    StorageSnapshot snap;
    snap.taken_at = now_;
    for (const auto& c : containers_) snap.rows.emplace_back(c.id, c.current.fs_writes);
    return snap;
}

SimSettings Simulator::settings() const {
    std::lock_guard lock(mu_);
    return settings_;
}

void Simulator::set_trace_sampling(double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw ValidationError("trace sampling fraction must be in [0, 1]");
    }
    std::lock_guard lock(mu_);
    settings_.trace_sampling_fraction = fraction;
    mutations_.push_back("trace_sampling_fraction=" + format_number(fraction));
}

TimestampMs Simulator::next_multiple_after(TimestampMs t) const {
    return (t / scrape_interval_ms_ + 1) * scrape_interval_ms_;
}

void Simulator::set_scrape_interval(double seconds) {
    if (!(seconds > 0.0) || seconds_to_ms(seconds) < 1) {
        throw ValidationError("scrape interval must be >= 1 ms");
    }
    std::lock_guard lock(mu_);
    settings_.scrape_interval_s = seconds;
    scrape_interval_ms_ = seconds_to_ms(seconds);
    next_scrape_ = next_multiple_after(now_);
    mutations_.push_back("scrape_interval_s=" + format_number(seconds));
}

void Simulator::set_mesh(bool enabled) {
    std::lock_guard lock(mu_);
    settings_.mesh_enabled = enabled;
    mutations_.push_back(std::string("mesh_enabled=") + (enabled ? "true" : "false"));
}

std::uint64_t Simulator::requests_handled() const {
    std::lock_guard lock(mu_);
    return requests_;
}

std::vector<TimestampMs> Simulator::scrape_times() const {
    std::lock_guard lock(mu_);
    return scrape_times_;
}

std::vector<std::string> Simulator::mutation_log() const {
    std::lock_guard lock(mu_);
    return mutations_;
}

// --- Selector -----------------------------------------------------------------------

Selector Selector::parse(const std::string& text) {
    Selector sel;
    std::size_t i = 0;
    auto skip_ws = [&] {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    };
    auto ident = [&](bool metric) {
        const std::size_t start = i;
        while (i < text.size()) {
            const char c = text[i];
            const bool ok = std::isalpha(static_cast<unsigned char>(c)) || c == '_' ||
                            (metric && c == ':') ||
                            (i > start && std::isdigit(static_cast<unsigned char>(c)));
            if (!ok) break;
            ++i;
        }
        return text.substr(start, i - start);
    };
    auto fail = [&](const std::string& why) {
        throw ParseError("unsupported selector '" + text + "': " + why);
    };

    skip_ws();
    sel.metric = ident(true);
    skip_ws();
    if (i < text.size() && text[i] == '{') {
        ++i;
        skip_ws();
        while (i < text.size() && text[i] != '}') {
            const std::string key = ident(false);
            if (key.empty()) fail("expected a label name");
            skip_ws();
            if (i >= text.size() || text[i] != '=') fail("expected '='");
            ++i;
            if (i < text.size() && (text[i] == '~' || text[i] == '=')) fail("only '=' matchers are supported");
            skip_ws();
            if (i >= text.size() || text[i] != '"') fail("expected a quoted value");
            ++i;
            std::string value;
            while (i < text.size() && text[i] != '"') {
                if (text[i] == '\\' && i + 1 < text.size()) ++i;
                value += text[i++];
            }
            if (i >= text.size()) fail("unterminated label value");
            ++i;
            if (key == "__name__") {
                if (!sel.metric.empty() && sel.metric != value) fail("conflicting metric names");
                sel.metric = value;
            } else {
                sel.matchers[key] = value;
            }
            skip_ws();
            if (i < text.size() && text[i] == ',') {
                ++i;
                skip_ws();
            }
        }
        if (i >= text.size()) fail("missing '}'");
        ++i;
        skip_ws();
    }
    if (i != text.size()) fail("trailing input");
    if (sel.metric.empty()) fail("no metric name");
    return sel;
}

// --- Environment adapters --------------------------------------------------------------

std::vector<MetricSeries> SimMetricSource::query_range(const ResponseQuery& query,
                                                       const TimeWindow& window) {
    auto series = sim_->query_range(query.promql, window);
    for (auto& s : series) s.kind = query.kind;
    return series;
}

class SimEnvironment::Target final : public LoadTarget {
public:
    explicit Target(SimEnvironment& env) : env_(env) {}
    bool send(const std::string& path) override { return env_.simulator().handle_request(path) == 200; }

private:
    SimEnvironment& env_;
};

SimEnvironment::SimEnvironment(TopologySpec topology, SimSettings base_settings)
    : topology_(std::move(topology)),
      base_(base_settings),
      sim_(std::make_unique<Simulator>(topology_, base_)),
      clock_(*sim_),
      source_(*sim_),
      target_(std::make_unique<Target>(*this)) {}

SimEnvironment::~SimEnvironment() = default;

LoadTarget& SimEnvironment::load_target(const LoadProfile&) { return *target_; }

StorageSnapshot SimEnvironment::storage_snapshot() { return sim_->storage_snapshot(); }

namespace {

ActionResult rejected(const std::string& why) { return {false, why, {}}; }

bool same_ms(double a, double b) { return seconds_to_ms(a) == seconds_to_ms(b); }

}  // namespace

ActionResult SimEnvironment::execute(const ActionDescriptor& action) {
    actions_.push_back(action.render());
    const auto& name = action.name;
    auto arg = [&](const char* key) -> const std::string* {
        auto it = action.args.find(key);
        return it == action.args.end() ? nullptr : &it->second;
    };
    try {
        if (name == "clean") {
            sim_ = std::make_unique<Simulator>(topology_, base_);
            clock_.rebind(*sim_);
            source_.rebind(*sim_);
            source_.set_healthy(healthy_);
            return {true, "simulator rebuilt", {}};
        }
        if (name == "setup") {
            return {true, "simulated SUE ready", {}};
        }
        const SimSettings current = sim_->settings();
        if (name == treatment_keys::scrape_interval) {
            const auto* v = arg("seconds");
            if (!v) return rejected("missing seconds");
            sim_->set_scrape_interval(parse_number(*v));
            return {true, "", {{"previous.seconds", format_number(current.scrape_interval_s)}}};
        }
        if (name == std::string("verify_") + treatment_keys::scrape_interval) {
            const auto* v = arg("seconds");
            if (!v) return rejected("missing seconds");
            if (!same_ms(current.scrape_interval_s, parse_number(*v))) {
                return rejected("scrape interval is " + format_number(current.scrape_interval_s) + " s");
            }
            return {true, "scrape interval " + *v + " s in force", {}};
        }
        if (name == std::string("revert_") + treatment_keys::scrape_interval) {
            sim_->set_scrape_interval(base_.scrape_interval_s);
            return {true, "", {}};
        }
        if (name == treatment_keys::trace_sampling) {
            const auto* v = arg("percent");
            if (!v) return rejected("missing percent");
            sim_->set_trace_sampling(parse_number(*v) / 100.0);
            return {true, "",
                    {{"previous.percent", format_number(current.trace_sampling_fraction * 100.0)}}};
        }
        if (name == std::string("verify_") + treatment_keys::trace_sampling) {
            const auto* v = arg("percent");
            if (!v) return rejected("missing percent");
            if (std::fabs(current.trace_sampling_fraction - parse_number(*v) / 100.0) > 1e-12) {
                return rejected("trace sampling is " +
                                format_number(current.trace_sampling_fraction * 100.0) + " %");
            }
            return {true, "trace sampling " + *v + " % in force", {}};
        }
        if (name == std::string("revert_") + treatment_keys::trace_sampling) {
            sim_->set_trace_sampling(base_.trace_sampling_fraction);
            return {true, "", {}};
        }
        if (name == treatment_keys::service_mesh) {
            const auto* v = arg("enabled");
            if (!v || (*v != "true" && *v != "false")) return rejected("enabled must be true or false");
            sim_->set_mesh(*v == "true");
            return {true, "", {{"previous.enabled", current.mesh_enabled ? "true" : "false"}}};
        }
        if (name == std::string("verify_") + treatment_keys::service_mesh) {
            const auto* v = arg("enabled");
            if (!v) return rejected("missing enabled");
            if ((*v == "true") != current.mesh_enabled) {
                return rejected(std::string("service mesh is ") + (current.mesh_enabled ? "on" : "off"));
            }
            return {true, "service mesh " + std::string(current.mesh_enabled ? "on" : "off"), {}};
        }
        if (name == std::string("revert_") + treatment_keys::service_mesh) {
            sim_->set_mesh(base_.mesh_enabled);
            return {true, "", {}};
        }
    } catch (const Error& e) {
        return rejected(e.what());
    }
    return rejected("simulated environment does not support action '" + name + "'");
}

}  // namespace goxn::sim
