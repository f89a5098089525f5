#include "goxn/runner.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "goxn/csv.hpp"
#include "goxn/error.hpp"

namespace goxn {

namespace fs = std::filesystem;

namespace {

// --- strict YAML helpers ------------------------------------------------------

class Strict {
public:
    explicit Strict(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
        const auto mark = n.Mark();
        std::string where = source_;
        if (mark.line >= 0) where += ":" + std::to_string(mark.line + 1);
        throw SchemaError(where + ": " + msg);
    }

    void map(const YAML::Node& n, const std::string& what, const std::set<std::string>& allowed,
             const std::set<std::string>& required = {}) const {
        if (!n.IsMap()) fail(n, what + " must be a mapping");
        std::set<std::string> seen;
        for (const auto& kv : n) {
            const auto k = kv.first.as<std::string>();
            if (!allowed.count(k)) fail(kv.first, "unknown key '" + k + "' in " + what);
            seen.insert(k);
        }
        for (const auto& r : required) {
            if (!seen.count(r)) fail(n, "missing required key '" + r + "' in " + what);
        }
    }

    void seq(const YAML::Node& n, const std::string& what) const {
        if (!n.IsSequence()) fail(n, what + " must be a list");
    }

    std::string str(const YAML::Node& n, const std::string& what) const {
        if (!n.IsScalar()) fail(n, what + " must be a scalar");
        return n.Scalar();
    }

    double num(const YAML::Node& n, const std::string& what) const {
        try {
            return parse_number(str(n, what));
        } catch (const ParseError&) {
            fail(n, what + " must be a number, got '" + n.Scalar() + "'");
        }
    }

    std::uint64_t uint(const YAML::Node& n, const std::string& what) const {
        try {
            return parse_unsigned(str(n, what));
        } catch (const ParseError&) {
            fail(n, what + " must be a nonnegative integer, got '" + n.Scalar() + "'");
        }
    }

    TimestampMs ms(const YAML::Node& n, const std::string& what) const {
        const auto text = str(n, what);
        try {
            std::size_t used = 0;
            const long long v = std::stoll(text, &used);
            if (used != text.size()) throw std::invalid_argument(text);
            return v;
        } catch (const std::exception&) {
            fail(n, what + " must be an integer of milliseconds, got '" + text + "'");
        }
    }

    bool boolean(const YAML::Node& n, const std::string& what) const {
        const auto text = str(n, what);
        if (text == "true") return true;
        if (text == "false") return false;
        fail(n, what + " must be true or false");
    }

    ParamMap params(const YAML::Node& n, const std::string& what) const {
        ParamMap out;
        if (!n || n.IsNull()) return out;
        if (!n.IsMap()) fail(n, what + " must be a mapping");
        for (const auto& kv : n) out[kv.first.as<std::string>()] = str(kv.second, what + "." + kv.first.as<std::string>());
        return out;
    }

private:
    std::string source_;
};

YAML::Node load_yaml(const std::string& text, const std::string& source) {
    try {
        return YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw SchemaError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) throw IoError("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

bool filesystem_safe(const std::string& name) {
    if (name.empty() || name == "." || name == ".." || name == "failed") return false;
    return std::all_of(name.begin(), name.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    });
}

void emit_params(YAML::Emitter& out, const ParamMap& params) {
    out << YAML::BeginMap;
    for (const auto& [k, v] : params) out << YAML::Key << k << YAML::Value << YAML::DoubleQuoted << v;
    out << YAML::EndMap;
}

}  // namespace

// --- spec ------------------------------------------------------------------------

std::string ExperimentSpec::run_dir() const { return (fs::path(output_dir) / name).string(); }

void ExperimentSpec::validate(const TreatmentRegistry& registry) const {
    if (!filesystem_safe(name)) {
        throw ValidationError("name '" + name + "' must be nonempty and use only [A-Za-z0-9._-]");
    }
    if (!scenario.empty() && !filesystem_safe(scenario)) {
        throw ValidationError("scenario '" + scenario + "' must use only [A-Za-z0-9._-]");
    }
    if (sue.empty()) throw ValidationError("sue is empty");
    if (output_dir.empty()) throw ValidationError("output_dir is empty");
    if (!(duration > 0.0) || !std::isfinite(duration)) throw ValidationError("duration must be > 0");
    if (!(settle_seconds >= 0.0) || !std::isfinite(settle_seconds)) {
        throw ValidationError("settle_seconds must be >= 0");
    }
    std::set<std::string> names;
    double max_step = 0.0;
    for (const auto& q : responses) {
        if (q.name.empty() || !filesystem_safe(q.name)) {
            throw ValidationError("response name '" + q.name + "' must use only [A-Za-z0-9._-]");
        }
        if (!names.insert(q.name).second) throw ValidationError("duplicate response name '" + q.name + "'");
        if (q.promql.empty()) throw ValidationError("response '" + q.name + "' has an empty query");
        if (!(q.step_seconds > 0.0)) throw ValidationError("response '" + q.name + "' needs step_seconds > 0");
        max_step = std::max(max_step, q.step_seconds);
    }
    if (duration < 2.0 * max_step) {
        throw ValidationError("duration " + format_number(duration) + " s is shorter than twice the largest step (" +
                              format_number(max_step) + " s)");
    }
    load.validate();
    if (load.duration != duration) throw ValidationError("load duration must equal the experiment duration");
    for (const auto& t : treatments) {
        registry.resolve(t.key)()->validate(t.params);
    }
}

ExperimentSpec parse_spec(const std::string& yaml_text, const std::string& source) {
    const Strict s(source);
    const YAML::Node root = load_yaml(yaml_text, source);
    s.map(root, "spec",
          {"name", "scenario", "sue", "treatments", "responses", "load", "duration", "output_dir",
           "settle_seconds"},
          {"name", "sue"});
    ExperimentSpec spec;
    spec.name = s.str(root["name"], "name");
    spec.sue = s.str(root["sue"], "sue");
    spec.scenario = root["scenario"] ? s.str(root["scenario"], "scenario") : spec.name;
    if (root["duration"]) spec.duration = s.num(root["duration"], "duration");
    if (root["output_dir"]) spec.output_dir = s.str(root["output_dir"], "output_dir");
    if (root["settle_seconds"]) spec.settle_seconds = s.num(root["settle_seconds"], "settle_seconds");

    if (const auto ts = root["treatments"]; ts && !ts.IsNull()) {
        s.seq(ts, "treatments");
        for (const auto& t : ts) {
            s.map(t, "treatment", {"key", "params", "target"}, {"key"});
            TreatmentSpec spec_t;
            spec_t.key = s.str(t["key"], "treatment key");
            spec_t.params = s.params(t["params"], "params");
            if (t["target"]) spec_t.target = s.str(t["target"], "treatment target");
            spec.treatments.push_back(std::move(spec_t));
        }
    }

    if (const auto rs = root["responses"]) {
        s.seq(rs, "responses");
        for (const auto& r : rs) {
            s.map(r, "response", {"name", "promql", "step_seconds", "kind"}, {"name", "promql"});
            ResponseQuery q;
            q.name = s.str(r["name"], "response name");
            q.promql = s.str(r["promql"], "promql");
            q.step_seconds = r["step_seconds"] ? s.num(r["step_seconds"], "step_seconds") : 5.0;
            if (const auto k = r["kind"]) {
                const auto kind = s.str(k, "kind");
                if (kind == "counter") {
                    q.kind = MetricKind::counter;
                } else if (kind == "gauge") {
                    q.kind = MetricKind::gauge;
                } else {
                    s.fail(k, "kind must be counter or gauge");
                }
            }
            spec.responses.push_back(std::move(q));
        }
    } else {
        spec.responses = default_responses();
    }

    spec.load = LoadProfile::defaults(spec.sue, spec.duration);
    if (const auto l = root["load"]) {
        s.map(l, "load", {"target", "routes", "rate", "max_in_flight", "seed"});
        if (l["target"]) spec.load.target = s.str(l["target"], "load.target");
        if (l["rate"]) spec.load.rate = s.num(l["rate"], "load.rate");
        if (l["max_in_flight"]) {
            spec.load.max_in_flight = static_cast<int>(s.uint(l["max_in_flight"], "load.max_in_flight"));
        }
        if (l["seed"]) spec.load.seed = s.uint(l["seed"], "load.seed");
        if (const auto routes = l["routes"]) {
            s.seq(routes, "load.routes");
            spec.load.routes.clear();
            for (const auto& r : routes) {
                s.map(r, "route", {"path", "weight"}, {"path"});
                WeightedRoute wr;
                wr.path = s.str(r["path"], "route path");
                if (r["weight"]) wr.weight = s.num(r["weight"], "route weight");
                spec.load.routes.push_back(std::move(wr));
            }
        }
    }
    try {
        spec.validate();
    } catch (const ValidationError& e) {
        throw SchemaError(source + ": " + e.what());
    }
    return spec;
}

ExperimentSpec load_spec(const std::string& path) { return parse_spec(read_text(path), path); }

std::string dump_spec(const ExperimentSpec& spec) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << spec.name;
    out << YAML::Key << "scenario" << YAML::Value << spec.scenario;
    out << YAML::Key << "sue" << YAML::Value << spec.sue;
    out << YAML::Key << "duration" << YAML::Value << format_number(spec.duration);
    out << YAML::Key << "settle_seconds" << YAML::Value << format_number(spec.settle_seconds);
    out << YAML::Key << "output_dir" << YAML::Value << spec.output_dir;
    out << YAML::Key << "treatments" << YAML::Value << YAML::BeginSeq;
    for (const auto& t : spec.treatments) {
        out << YAML::BeginMap << YAML::Key << "key" << YAML::Value << t.key;
        out << YAML::Key << "params" << YAML::Value;
        emit_params(out, t.params);
        if (!t.target.empty()) out << YAML::Key << "target" << YAML::Value << t.target;
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::Key << "responses" << YAML::Value << YAML::BeginSeq;
    for (const auto& q : spec.responses) {
        out << YAML::BeginMap << YAML::Key << "name" << YAML::Value << q.name << YAML::Key << "promql"
            << YAML::Value << q.promql << YAML::Key << "step_seconds" << YAML::Value
            << format_number(q.step_seconds) << YAML::Key << "kind" << YAML::Value
            << (q.kind == MetricKind::counter ? "counter" : "gauge") << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::Key << "load" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "target" << YAML::Value << spec.load.target;
    out << YAML::Key << "rate" << YAML::Value << format_number(spec.load.rate);
    out << YAML::Key << "max_in_flight" << YAML::Value << spec.load.max_in_flight;
    out << YAML::Key << "seed" << YAML::Value << spec.load.seed;
    out << YAML::Key << "routes" << YAML::Value << YAML::BeginSeq;
    for (const auto& r : spec.load.routes) {
        out << YAML::BeginMap << YAML::Key << "path" << YAML::Value << r.path << YAML::Key << "weight"
            << YAML::Value << format_number(r.weight) << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

// --- report -----------------------------------------------------------------------

std::string to_string(RunStatus status) { return status == RunStatus::complete ? "complete" : "failed"; }

namespace {

RunStatus parse_status(const Strict& s, const YAML::Node& n) {
    const auto text = s.str(n, "status");
    if (text == "complete") return RunStatus::complete;
    if (text == "failed") return RunStatus::failed;
    s.fail(n, "status must be complete or failed");
}

void emit_optional_ms(YAML::Emitter& out, const char* key, const std::optional<TimestampMs>& v) {
    if (v) out << YAML::Key << key << YAML::Value << *v;
}

}  // namespace

void persist_report(const ExperimentReport& r, const std::string& dir) {
    if (r.status == RunStatus::complete && !r.window) {
        throw SchemaError("report '" + r.name + "' is complete but has no window");
    }
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << r.name;
    out << YAML::Key << "scenario_key" << YAML::Value << YAML::DoubleQuoted << r.scenario_key;
    out << YAML::Key << "sue" << YAML::Value << YAML::DoubleQuoted << r.sue;
    out << YAML::Key << "status" << YAML::Value << to_string(r.status);
    out << YAML::Key << "error" << YAML::Value << YAML::DoubleQuoted << r.error;
    if (r.window) {
        out << YAML::Key << "window" << YAML::Value << YAML::BeginMap << YAML::Key << "start_ms"
            << YAML::Value << r.window->start << YAML::Key << "end_ms" << YAML::Value << r.window->end
            << YAML::EndMap;
    }
    out << YAML::Key << "treatments" << YAML::Value << YAML::BeginSeq;
    for (const auto& t : r.treatments) {
        out << YAML::BeginMap;
        out << YAML::Key << "key" << YAML::Value << YAML::DoubleQuoted << t.key;
        out << YAML::Key << "params" << YAML::Value;
        emit_params(out, t.params);
        out << YAML::Key << "target" << YAML::Value << YAML::DoubleQuoted << t.target;
        emit_optional_ms(out, "applied_at_ms", t.applied_at);
        emit_optional_ms(out, "verified_at_ms", t.verified_at);
        emit_optional_ms(out, "reverted_at_ms", t.reverted_at);
        out << YAML::Key << "verified" << YAML::Value << (t.verified ? "true" : "false");
        out << YAML::Key << "detail" << YAML::Value << YAML::DoubleQuoted << t.detail;
        out << YAML::Key << "restore" << YAML::Value;
        emit_params(out, t.restore);
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    const auto& st = r.load_stats;
    out << YAML::Key << "load_stats" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "sent" << YAML::Value << st.sent;
    out << YAML::Key << "completed" << YAML::Value << st.completed;
    out << YAML::Key << "failed" << YAML::Value << st.failed;
    out << YAML::Key << "latency_p50" << YAML::Value << format_number(st.latency_p50);
    out << YAML::Key << "latency_p95" << YAML::Value << format_number(st.latency_p95);
    out << YAML::Key << "latency_p99" << YAML::Value << format_number(st.latency_p99);
    out << YAML::Key << "actual_rate" << YAML::Value << format_number(st.actual_rate);
    out << YAML::EndMap;
    out << YAML::Key << "raw_store_path" << YAML::Value << YAML::DoubleQuoted << r.raw_store_path;
    out << YAML::Key << "storage_snapshot_paths" << YAML::Value << YAML::BeginSeq;
    for (const auto& p : r.storage_snapshot_paths) out << YAML::DoubleQuoted << p;
    out << YAML::EndSeq;
    out << YAML::Key << "engine_version" << YAML::Value << YAML::DoubleQuoted << r.engine_version;
    out << YAML::EndMap;
    fs::create_directories(dir);
    write_text(fs::path(dir) / kReportFile, std::string(out.c_str()) + "\n");
}

ExperimentReport read_report(const std::string& dir) {
    const auto path = (fs::path(dir) / kReportFile).string();
    if (!fs::exists(path)) throw IoError("missing " + path);
    const Strict s(path);
    const YAML::Node root = load_yaml(read_text(path), path);
    s.map(root, "report",
          {"name", "scenario_key", "sue", "status", "error", "window", "treatments", "load_stats",
           "raw_store_path", "storage_snapshot_paths", "engine_version"},
          {"name", "scenario_key", "sue", "status", "treatments", "load_stats", "raw_store_path",
           "storage_snapshot_paths", "engine_version"});
    ExperimentReport r;
    r.name = s.str(root["name"], "name");
    r.scenario_key = s.str(root["scenario_key"], "scenario_key");
    r.sue = s.str(root["sue"], "sue");
    r.status = parse_status(s, root["status"]);
    if (root["error"]) r.error = s.str(root["error"], "error");
    if (const auto w = root["window"]) {
        s.map(w, "window", {"start_ms", "end_ms"}, {"start_ms", "end_ms"});
        r.window = TimeWindow{s.ms(w["start_ms"], "window.start_ms"), s.ms(w["end_ms"], "window.end_ms")};
    }
    const auto ts = root["treatments"];
    s.seq(ts, "treatments");
    for (const auto& t : ts) {
        s.map(t, "treatment",
              {"key", "params", "target", "applied_at_ms", "verified_at_ms", "reverted_at_ms", "verified",
               "detail", "restore"},
              {"key", "params", "verified"});
        TreatmentOutcome o;
        o.key = s.str(t["key"], "key");
        o.params = s.params(t["params"], "params");
        if (t["target"]) o.target = s.str(t["target"], "target");
        if (t["applied_at_ms"]) o.applied_at = s.ms(t["applied_at_ms"], "applied_at_ms");
        if (t["verified_at_ms"]) o.verified_at = s.ms(t["verified_at_ms"], "verified_at_ms");
        if (t["reverted_at_ms"]) o.reverted_at = s.ms(t["reverted_at_ms"], "reverted_at_ms");
        o.verified = s.boolean(t["verified"], "verified");
        if (t["detail"]) o.detail = s.str(t["detail"], "detail");
        o.restore = s.params(t["restore"], "restore");
        if (o.applied_at && o.reverted_at && *o.reverted_at < *o.applied_at) {
            s.fail(t, "reverted_at_ms precedes applied_at_ms");
        }
        r.treatments.push_back(std::move(o));
    }
    const auto st = root["load_stats"];
    s.map(st, "load_stats",
          {"sent", "completed", "failed", "latency_p50", "latency_p95", "latency_p99", "actual_rate"},
          {"sent", "completed", "failed", "latency_p50", "latency_p95", "latency_p99", "actual_rate"});
    r.load_stats.sent = s.uint(st["sent"], "sent");
    r.load_stats.completed = s.uint(st["completed"], "completed");
    r.load_stats.failed = s.uint(st["failed"], "failed");
    r.load_stats.latency_p50 = s.num(st["latency_p50"], "latency_p50");
    r.load_stats.latency_p95 = s.num(st["latency_p95"], "latency_p95");
    r.load_stats.latency_p99 = s.num(st["latency_p99"], "latency_p99");
    r.load_stats.actual_rate = s.num(st["actual_rate"], "actual_rate");
    r.raw_store_path = s.str(root["raw_store_path"], "raw_store_path");
    const auto snaps = root["storage_snapshot_paths"];
    s.seq(snaps, "storage_snapshot_paths");
    for (const auto& p : snaps) r.storage_snapshot_paths.push_back(s.str(p, "storage snapshot path"));
    r.engine_version = s.str(root["engine_version"], "engine_version");

    if (r.status == RunStatus::complete) {
        if (!r.window) s.fail(root, "complete report has no window");
        if (!fs::exists(fs::path(dir) / r.raw_store_path / "manifest.yaml")) {
            throw SchemaError(path + ": referenced raw store '" + r.raw_store_path + "' is missing");
        }
        for (const auto& p : r.storage_snapshot_paths) {
            if (!fs::exists(fs::path(dir) / p)) {
                throw SchemaError(path + ": referenced storage snapshot '" + p + "' is missing");
            }
        }
    }
    return r;
}

// --- catalog ------------------------------------------------------------------------

const std::vector<CatalogEntry>& scenario_catalog() {
    static const std::vector<CatalogEntry> catalog = {
        {"baseline", "recommendation_k8_base_1m_otel_persistence.yaml", {}},
        {"monitoring-medium", "recommendation_k8_base_1m_otel_persistence_scrape_30s.yaml",
         {{treatment_keys::scrape_interval, {{"seconds", "30"}}, "prometheus"}}},
        {"monitoring-high", "recommendation_k8_base_1m_otel_persistence_scrape_5s.yaml",
         {{treatment_keys::scrape_interval, {{"seconds", "5"}}, "prometheus"}}},
        {"tracing-low", "recommendation_k8_base_5_percent_persistence.yaml",
         {{treatment_keys::trace_sampling, {{"percent", "5"}}, "otel-collector"}}},
        {"tracing-medium", "recommendation_k8_base_10_percent_persistence.yaml",
         {{treatment_keys::trace_sampling, {{"percent", "10"}}, "otel-collector"}}},
        {"tracing-high", "recommendation_k8_base_50_percent_persistence.yaml",
         {{treatment_keys::trace_sampling, {{"percent", "50"}}, "otel-collector"}}},
        {"service-mesh", "recommendation_k8_base_1m_otel_persistence_istio.yaml",
         {{treatment_keys::service_mesh, {{"enabled", "true"}}, "mesh"}}},
    };
    return catalog;
}

const CatalogEntry& catalog_entry(const std::string& key) {
    for (const auto& e : scenario_catalog()) {
        if (e.key == key) return e;
    }
    std::string known;
    for (const auto& e : scenario_catalog()) known += (known.empty() ? "" : ", ") + e.key;
    throw ValidationError("unknown scenario '" + key + "' (known: " + known + ")");
}

ExperimentSpec catalog_spec(const std::string& key, const CatalogOptions& options) {
    const auto& entry = catalog_entry(key);
    ExperimentSpec spec;
    spec.name = entry.key;
    spec.scenario = entry.key;
    spec.sue = options.sue;
    spec.treatments = entry.treatments;
    spec.responses = default_responses(options.step_seconds);
    spec.duration = options.duration;
    spec.load = LoadProfile::defaults(options.sue, options.duration);
    spec.load.seed = options.seed;
    spec.output_dir = options.output_dir;
    spec.validate();
    return spec;
}

// --- orchestration ------------------------------------------------------------------

namespace {

// Only directories that look like earlier engine output are replaced.
void clear_output(const fs::path& dir) {
    if (!fs::exists(dir)) return;
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " exists and is not a directory");
    const bool ours = fs::exists(dir / kReportFile) || fs::exists(dir / kRawStoreDir) ||
                      fs::exists(dir / kSnapshotDir) || fs::is_empty(dir);
    if (!ours) {
        throw IoError("refusing to overwrite " + dir.string() + ": it does not hold a previous run");
    }
    fs::remove_all(dir);
}

void require_ok(const ActionResult& r, const std::string& phase) {
    if (!r.ok) throw EnvironmentError(phase + " failed: " + r.message);
}

}  // namespace

ExperimentReport run_experiment(const ExperimentSpec& spec, Environment& env,
                                const TreatmentRegistry& registry) {
    ExperimentReport report;
    report.name = spec.name;
    report.scenario_key = spec.scenario.empty() ? spec.name : spec.scenario;
    report.sue = spec.sue;

    const fs::path run_dir = spec.run_dir();
    const fs::path failed_dir = fs::path(spec.output_dir) / "failed" / spec.name;

    std::vector<StorageSnapshot> snapshots;
    std::optional<RawStore> store;
    std::vector<TreatmentOutcome> outcomes;

    auto revert_all = [&](std::string* first_error) {
        for (auto it = outcomes.rbegin(); it != outcomes.rend(); ++it) {
            if (!it->applied_at || it->reverted_at) continue;
            try {
                *it = revert(*it, env, env.clock(), registry);
            } catch (const Error& e) {
                if (first_error && first_error->empty()) *first_error = e.what();
            }
        }
    };

    try {
        spec.validate(registry);
        clear_output(run_dir);
        clear_output(failed_dir);

        require_ok(env.execute({"clean", {}}), "clean");
        require_ok(env.execute({"setup", {}}), "setup");
        if (!env.metrics().preflight()) throw EnvironmentError("pre-flight query against the metric source failed");

        snapshots.push_back(env.storage_snapshot());

        for (const auto& t : spec.treatments) {
            outcomes.push_back(apply(t, env, env.clock(), registry));
            if (!outcomes.back().verified) {
                throw EnvironmentError("treatment " + t.key + " failed verification: " + outcomes.back().detail);
            }
        }
        if (spec.settle_seconds > 0.0) {
            env.clock().sleep_until(env.clock().now() + seconds_to_ms(spec.settle_seconds));
        }

        LoadProfile profile = spec.load;
        profile.duration = spec.duration;
        LoadOptions options;
        options.inline_execution = env.inline_load();
        const TimestampMs start = env.clock().now();
        report.load_stats = run_load(profile, env.load_target(profile), env.clock(), options);
        const TimestampMs end = start + seconds_to_ms(spec.duration);
        env.clock().sleep_until(end);
        report.window = TimeWindow::make(start, end);

        snapshots.push_back(env.storage_snapshot());

        std::string revert_error;
        revert_all(&revert_error);
        if (!revert_error.empty()) throw EnvironmentError(revert_error);

        store = collect_responses(env.metrics(), spec.responses, *report.window);
        for (const auto& q : store->queries) {
            if (q.status == QueryStatus::failed) {
                throw CollectionError("query '" + q.query.name + "' failed: " + q.error);
            }
        }
    } catch (const std::exception& e) {
        report.status = RunStatus::failed;
        report.error = e.what();
        revert_all(nullptr);
    }
    report.treatments = outcomes;

    const fs::path dir = report.status == RunStatus::complete ? run_dir : failed_dir;
    try {
        fs::create_directories(dir);
        if (store) {
            write_snapshot_store(*store, (dir / kRawStoreDir).string());
            report.raw_store_path = kRawStoreDir;
        }
        for (const auto& snap : snapshots) {
            const auto written = write_storage_snapshot(snap, (dir / kSnapshotDir).string());
            report.storage_snapshot_paths.push_back(
                (fs::path(kSnapshotDir) / fs::path(written).filename()).generic_string());
        }
        persist_report(report, dir.string());
    } catch (const std::exception& e) {
        if (report.status == RunStatus::complete) {
            report.status = RunStatus::failed;
            report.error = std::string("persisting results failed: ") + e.what();
            std::error_code ec;
            fs::create_directories(failed_dir, ec);
            persist_report(report, failed_dir.string());
        } else {
            throw IoError(std::string("cannot write failure report: ") + e.what());
        }
    }
    return report;
}

bool SuiteResult::all_complete() const {
    return std::all_of(entries.begin(), entries.end(),
                       [](const SuiteEntry& e) { return e.status == RunStatus::complete; });
}

namespace {

void write_suite_manifest(const std::vector<SuiteEntry>& entries, const fs::path& dir) {
    YAML::Emitter out;
    out << YAML::BeginMap << YAML::Key << "scenarios" << YAML::Value << YAML::BeginSeq;
    for (const auto& e : entries) {
        out << YAML::BeginMap << YAML::Key << "scenario" << YAML::Value << YAML::DoubleQuoted << e.scenario
            << YAML::Key << "status" << YAML::Value << to_string(e.status) << YAML::Key << "output"
            << YAML::Value << YAML::DoubleQuoted << e.output << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap;
    fs::create_directories(dir);
    write_text(dir / kSuiteManifest, std::string(out.c_str()) + "\n");
}

}  // namespace

SuiteResult run_suite(const std::vector<ExperimentSpec>& specs, Environment& env,
                      const std::string& manifest_dir, const TreatmentRegistry& registry) {
    if (specs.empty()) throw ValidationError("suite needs at least one scenario");
    SuiteResult result;
    for (const auto& spec : specs) {
        auto report = run_experiment(spec, env, registry);
        const fs::path out = report.status == RunStatus::complete
                                 ? fs::path(spec.run_dir())
                                 : fs::path(spec.output_dir) / "failed" / spec.name;
        const auto rel = out.lexically_relative(manifest_dir);
        result.entries.push_back({report.scenario_key, report.status,
                                  (rel.empty() ? out : rel).generic_string()});
        result.reports.push_back(std::move(report));
    }
    write_suite_manifest(result.entries, manifest_dir);
    return result;
}

std::vector<SuiteEntry> read_suite_manifest(const std::string& dir) {
    const auto path = (fs::path(dir) / kSuiteManifest).string();
    const Strict s(path);
    const YAML::Node root = load_yaml(read_text(path), path);
    s.map(root, "suite manifest", {"scenarios"}, {"scenarios"});
    s.seq(root["scenarios"], "scenarios");
    std::vector<SuiteEntry> out;
    for (const auto& e : root["scenarios"]) {
        s.map(e, "suite entry", {"scenario", "status", "output"}, {"scenario", "status", "output"});
        out.push_back({s.str(e["scenario"], "scenario"), parse_status(s, e["status"]), s.str(e["output"], "output")});
    }
    return out;
}

}  // namespace goxn
