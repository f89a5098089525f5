#include "goxn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "goxn/csv.hpp"
#include "goxn/error.hpp"
#include "http.hpp"

namespace goxn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestFile = "manifest.yaml";
constexpr const char* kManifestFormat = "goxn-raw-store/1";
constexpr const char* kNameLabel = "__name__";

bool filesystem_safe(const std::string& name) {
    if (name.empty() || name == "." || name == "..") return false;
    return std::all_of(name.begin(), name.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
}

void sort_series(std::vector<MetricSeries>& series) {
    std::sort(series.begin(), series.end(), [](const MetricSeries& a, const MetricSeries& b) {
        if (a.metric_name != b.metric_name) return a.metric_name < b.metric_name;
        return a.labels < b.labels;
    });
}

std::string line_ref(const std::string& path, std::size_t line) {
    return path + ":" + std::to_string(line);
}

// "2024-05-01 12:00:00.250+00:00", "2024-05-01T12:00:00Z" or epoch seconds.
TimestampMs parse_package_timestamp(const std::string& text) {
    if (text.find('-', 1) == std::string::npos) {
        return seconds_to_ms(parse_number(text));
    }
    std::tm tm{};
    int millis = 0;
    char sep = 0;
    int consumed = 0;
    if (std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d%n", &tm.tm_year, &tm.tm_mon,
                    &tm.tm_mday, &sep, &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &consumed) != 7 ||
        (sep != ' ' && sep != 'T')) {
        throw ParseError("unrecognized timestamp '" + text + "'");
    }
    std::string_view rest = std::string_view(text).substr(static_cast<std::size_t>(consumed));
    if (!rest.empty() && rest.front() == '.') {
        rest.remove_prefix(1);
        int digits = 0;
        while (!rest.empty() && std::isdigit(static_cast<unsigned char>(rest.front()))) {
            if (digits < 3) millis = millis * 10 + (rest.front() - '0');
            ++digits;
            rest.remove_prefix(1);
        }
        for (; digits < 3; ++digits) millis *= 10;
    }
    if (!(rest.empty() || rest == "Z" || rest == "+00:00")) {
        throw ParseError("only UTC timestamps are supported: '" + text + "'");
    }
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    return static_cast<TimestampMs>(timegm(&tm)) * 1000 + millis;
}

}  // namespace

std::string to_string(MetricKind kind) { return kind == MetricKind::counter ? "counter" : "gauge"; }

MetricKind metric_kind_from_string(const std::string& text) {
    if (text == "counter") return MetricKind::counter;
    if (text == "gauge") return MetricKind::gauge;
    throw ValidationError("metric kind must be counter or gauge, got '" + text + "'");
}

std::vector<ResponseQuery> default_responses(double step_seconds) {
    return {
        {"pods_kepler_joules", "kepler_container_joules_total", step_seconds, MetricKind::counter},
        {"cadvisor_network_bytes_received", "container_network_receive_bytes_total", step_seconds,
         MetricKind::counter},
        {"cadvisor_storage_usage_writes", "container_fs_writes_bytes_total", step_seconds,
         MetricKind::counter},
    };
}

// ---------------------------------------------------------------------------
// Query protocol

PrometheusClient::PrometheusClient(std::string endpoint, RetryPolicy retry, Sleeper sleeper)
    : endpoint_(std::move(endpoint)), retry_(retry), sleeper_(std::move(sleeper)) {
    detail::split_url(endpoint_);
    if (retry_.attempts < 1) throw ValidationError("retry attempts must be >= 1");
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::vector<MetricSeries> PrometheusClient::query_range(const ResponseQuery& query,
                                                        const TimeWindow& window) {
    if (!(query.step_seconds > 0.0)) throw ValidationError("query step must be > 0");
    const std::vector<std::pair<std::string, std::string>> params = {
        {"query", query.promql},
        {"start", format_seconds(window.start)},
        {"end", format_seconds(window.end)},
        {"step", format_number(query.step_seconds)},
    };
    auto backoff = retry_.initial_backoff;
    std::string last_error;
    for (int attempt = 1; attempt <= retry_.attempts; ++attempt) {
        auto response = detail::http_get(endpoint_, "/api/v1/query_range", params, 30.0);
        if (response && response->status < 500) {
            if (response->status != 200) {
                std::string message = "HTTP " + std::to_string(response->status);
                try {
                    const auto body = json::parse(response->body);
                    if (body.contains("error")) message += ": " + body["error"].get<std::string>();
                } catch (const std::exception&) {
                }
                throw ParseError("query '" + query.name + "' rejected: " + message);
            }
            return parse_query_range_response(response->body, query);
        }
        last_error = response ? "HTTP " + std::to_string(response->status) : "transport failure";
        if (attempt < retry_.attempts) {
            sleeper_(backoff);
            backoff *= 2;
        }
    }
    throw CollectionError("query '" + query.name + "' against " + endpoint_ + " failed after " +
                          std::to_string(retry_.attempts) + " attempts: " + last_error);
}

bool PrometheusClient::preflight() {
    const std::vector<std::pair<std::string, std::string>> params = {
        {"query", "up"}, {"start", "0"}, {"end", "1"}, {"step", "1"}};
    auto response = detail::http_get(endpoint_, "/api/v1/query_range", params, 5.0);
    return response && response->status == 200;
}

std::vector<MetricSeries> query_range(const std::string& endpoint, const ResponseQuery& query,
                                      const TimeWindow& window, RetryPolicy retry) {
    PrometheusClient client(endpoint, retry);
    return client.query_range(query, window);
}

std::vector<MetricSeries> parse_query_range_response(const std::string& body,
                                                     const ResponseQuery& query) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception& e) {
        throw ParseError("query '" + query.name + "': response is not JSON: " + e.what());
    }
    try {
        if (doc.at("status").get<std::string>() != "success") {
            throw ParseError("query '" + query.name + "': status " +
                             doc.at("status").get<std::string>());
        }
        const auto& data = doc.at("data");
        if (data.at("resultType").get<std::string>() != "matrix") {
            throw ParseError("query '" + query.name + "': expected a matrix result, got " +
                             data.at("resultType").get<std::string>());
        }
        std::vector<MetricSeries> out;
        for (const auto& item : data.at("result")) {
            MetricSeries s;
            s.kind = query.kind;
            s.metric_name = query.name;
            for (const auto& [k, v] : item.at("metric").items()) {
                if (k == kNameLabel) {
                    s.metric_name = v.get<std::string>();
                } else {
                    s.labels[k] = v.get<std::string>();
                }
            }
            for (const auto& pair : item.at("values")) {
                if (!pair.is_array() || pair.size() != 2) {
                    throw ParseError("query '" + query.name + "': malformed sample");
                }
                const double ts = pair[0].get<double>();
                const double value = parse_number(pair[1].get<std::string>());
                if (!std::isfinite(value)) continue;
                s.samples.push_back({static_cast<TimestampMs>(std::llround(ts * 1000.0)), value});
            }
            std::sort(s.samples.begin(), s.samples.end(),
                      [](const MetricSample& a, const MetricSample& b) {
                          return a.timestamp < b.timestamp;
                      });
            for (std::size_t i = 1; i < s.samples.size(); ++i) {
                if (s.samples[i].timestamp == s.samples[i - 1].timestamp) {
                    throw ParseError("query '" + query.name + "': duplicate sample timestamp");
                }
            }
            if (!s.samples.empty()) out.push_back(std::move(s));
        }
        sort_series(out);
        return out;
    } catch (const json::exception& e) {
        throw ParseError("query '" + query.name + "': malformed matrix envelope: " + e.what());
    }
}

std::string encode_query_range_response(const std::vector<MetricSeries>& series) {
    json result = json::array();
    for (const auto& s : series) {
        json metric = json::object();
        metric[kNameLabel] = s.metric_name;
        for (const auto& [k, v] : s.labels) metric[k] = v;
        json values = json::array();
        for (const auto& sample : s.samples) {
            values.push_back(json::array({ms_to_seconds(sample.timestamp), format_number(sample.value)}));
        }
        result.push_back({{"metric", metric}, {"values", values}});
    }
    json doc = {{"status", "success"}, {"data", {{"resultType", "matrix"}, {"result", result}}}};
    return doc.dump();
}

// ---------------------------------------------------------------------------
// Counter algebra

double counter_increase(const std::vector<double>& values) {
    if (values.size() < 2) return 0.0;
    // Telescoping per monotone segment keeps last - first exact for reset-free series.
    double total = 0.0;
    double segment_start = values.front();
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] < values[i - 1]) {
            total += (values[i - 1] - segment_start) + values[i];
            segment_start = values[i];
        }
    }
    return total + (values.back() - segment_start);
}

double increase_over_window(const MetricSeries& series, const TimeWindow& window) {
    if (series.kind != MetricKind::counter) {
        throw ValidationError("increase_over_window needs a counter series, '" + series.metric_name +
                              "' is a gauge");
    }
    std::vector<double> values;
    for (const auto& s : series.samples) {
        if (window.contains(s.timestamp)) values.push_back(s.value);
    }
    return counter_increase(values);
}

// ---------------------------------------------------------------------------
// Raw store

const QueryRecord* RawStore::find(const std::string& name) const {
    for (const auto& q : queries) {
        if (q.query.name == name) return &q;
    }
    return nullptr;
}

RawStore collect_responses(MetricSource& source, const std::vector<ResponseQuery>& queries,
                           const TimeWindow& window) {
    std::set<std::string> names;
    for (const auto& q : queries) {
        if (!names.insert(q.name).second) {
            throw ValidationError("duplicate response name '" + q.name + "'");
        }
    }

    std::vector<std::future<QueryRecord>> pending;
    pending.reserve(queries.size());
    for (const auto& q : queries) {
        pending.push_back(std::async(std::launch::async, [&source, &window, q] {
            QueryRecord record;
            record.query = q;
            try {
                record.series = source.query_range(q, window);
                record.series.erase(std::remove_if(record.series.begin(), record.series.end(),
                                                   [](const MetricSeries& s) {
                                                       return s.samples.empty();
                                                   }),
                                    record.series.end());
                for (auto& s : record.series) s.kind = q.kind;
            } catch (const std::exception& e) {
                record.status = QueryStatus::failed;
                record.error = e.what();
                record.series.clear();
            }
            return record;
        }));
    }

    RawStore store;
    store.window = window;
    for (auto& f : pending) store.queries.push_back(f.get());
    return store;
}

void write_snapshot_store(const RawStore& store, const std::string& dir) {
    fs::create_directories(dir);
    YAML::Emitter m;
    m << YAML::BeginMap;
    m << YAML::Key << "format" << YAML::Value << kManifestFormat;
    m << YAML::Key << "window" << YAML::Value << YAML::BeginMap;
    m << YAML::Key << "start_ms" << YAML::Value << store.window.start;
    m << YAML::Key << "end_ms" << YAML::Value << store.window.end;
    m << YAML::EndMap;
    m << YAML::Key << "queries" << YAML::Value << YAML::BeginSeq;

    for (const auto& record : store.queries) {
        const auto& q = record.query;
        if (!filesystem_safe(q.name)) {
            throw ValidationError("query name '" + q.name + "' is not filesystem-safe");
        }
        m << YAML::BeginMap;
        m << YAML::Key << "name" << YAML::Value << q.name;
        m << YAML::Key << "promql" << YAML::Value << YAML::DoubleQuoted << q.promql;
        m << YAML::Key << "step_seconds" << YAML::Value << format_number(q.step_seconds);
        m << YAML::Key << "kind" << YAML::Value << to_string(q.kind);
        m << YAML::Key << "status" << YAML::Value
          << (record.status == QueryStatus::ok ? "ok" : "failed");
        m << YAML::Key << "error" << YAML::Value << YAML::DoubleQuoted << record.error;
        m << YAML::Key << "file" << YAML::Value << q.name + ".csv";
        m << YAML::EndMap;

        std::set<std::string> label_keys;
        for (const auto& s : record.series) {
            for (const auto& [k, v] : s.labels) {
                if (k == kNameLabel) throw ValidationError("label '__name__' is reserved");
                label_keys.insert(k);
            }
        }
        std::vector<CsvRow> rows;
        CsvRow header{"timestamp", kNameLabel};
        header.insert(header.end(), label_keys.begin(), label_keys.end());
        header.push_back("value");
        rows.push_back(header);
        for (const auto& s : record.series) {
            for (const auto& sample : s.samples) {
                CsvRow row{format_seconds(sample.timestamp), s.metric_name};
                for (const auto& k : label_keys) {
                    auto it = s.labels.find(k);
                    row.push_back(it == s.labels.end() ? "" : it->second);
                }
                row.push_back(format_number(sample.value));
                rows.push_back(std::move(row));
            }
        }
        write_csv_file((fs::path(dir) / (q.name + ".csv")).string(), rows);
    }
    m << YAML::EndSeq << YAML::EndMap;

    std::ofstream out(fs::path(dir) / kManifestFile, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write manifest in " + dir);
    out << m.c_str() << '\n';
}

namespace {

std::vector<MetricSeries> read_store_csv(const std::string& path, MetricKind kind) {
    const auto rows = read_csv_file(path);
    if (rows.empty()) throw ParseError(line_ref(path, 1) + ": missing header");
    const CsvRow& header = rows.front();
    if (header.size() < 3 || header.front() != "timestamp" || header[1] != kNameLabel ||
        header.back() != "value") {
        throw ParseError(line_ref(path, 1) + ": header must be timestamp,__name__,<labels...>,value");
    }
    std::vector<MetricSeries> series;
    std::map<std::pair<std::string, LabelSet>, std::size_t> index;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const CsvRow& row = rows[r];
        if (row.size() != header.size()) {
            throw ParseError(line_ref(path, r + 1) + ": expected " + std::to_string(header.size()) +
                             " fields, got " + std::to_string(row.size()));
        }
        MetricSample sample;
        try {
            sample.timestamp = parse_seconds(row.front());
            sample.value = parse_number(row.back());
        } catch (const ParseError& e) {
            throw ParseError(line_ref(path, r + 1) + ": " + e.what());
        }
        LabelSet labels;
        for (std::size_t c = 2; c + 1 < row.size(); ++c) {
            if (!row[c].empty()) labels[header[c]] = row[c];
        }
        auto key = std::make_pair(row[1], labels);
        auto [it, inserted] = index.emplace(key, series.size());
        if (inserted) {
            series.push_back(MetricSeries{row[1], kind, std::move(labels), {}});
        }
        auto& samples = series[it->second].samples;
        if (!samples.empty() && samples.back().timestamp >= sample.timestamp) {
            throw ParseError(line_ref(path, r + 1) + ": samples not strictly increasing in time");
        }
        samples.push_back(sample);
    }
    return series;
}

}  // namespace

RawStore read_snapshot_store(const std::string& dir) {
    const fs::path manifest_path = fs::path(dir) / kManifestFile;
    if (!fs::exists(manifest_path)) {
        throw IoError("missing manifest: " + manifest_path.string());
    }
    const std::string mpath = manifest_path.string();
    YAML::Node root;
    try {
        root = YAML::LoadFile(mpath);
    } catch (const YAML::Exception& e) {
        throw SchemaError(mpath + ": " + e.what());
    }
    auto fail = [&](const YAML::Node& n, const std::string& msg) -> void {
        throw SchemaError(line_ref(mpath, n.Mark().line + 1) + ": " + msg);
    };
    auto require_keys = [&](const YAML::Node& n, std::set<std::string> allowed) {
        if (!n.IsMap()) fail(n, "expected a mapping");
        for (const auto& kv : n) {
            const auto k = kv.first.as<std::string>();
            if (!allowed.erase(k)) fail(kv.first, "unexpected key '" + k + "'");
        }
        if (!allowed.empty()) fail(n, "missing key '" + *allowed.begin() + "'");
    };

    RawStore store;
    try {
        require_keys(root, {"format", "window", "queries"});
        if (root["format"].as<std::string>() != kManifestFormat) {
            fail(root["format"], "unsupported store format");
        }
        require_keys(root["window"], {"start_ms", "end_ms"});
        store.window = TimeWindow::make(root["window"]["start_ms"].as<TimestampMs>(),
                                        root["window"]["end_ms"].as<TimestampMs>());
        if (!root["queries"].IsSequence()) fail(root["queries"], "queries must be a list");
        for (const auto& qn : root["queries"]) {
            require_keys(qn, {"name", "promql", "step_seconds", "kind", "status", "error", "file"});
            QueryRecord record;
            record.query.name = qn["name"].as<std::string>();
            record.query.promql = qn["promql"].as<std::string>();
            record.query.step_seconds = parse_number(qn["step_seconds"].as<std::string>());
            record.query.kind = metric_kind_from_string(qn["kind"].as<std::string>());
            const auto status = qn["status"].as<std::string>();
            if (status != "ok" && status != "failed") fail(qn["status"], "status must be ok or failed");
            record.status = status == "ok" ? QueryStatus::ok : QueryStatus::failed;
            record.error = qn["error"].as<std::string>();
            const auto file = qn["file"].as<std::string>();
            if (!filesystem_safe(file)) fail(qn["file"], "bad file name");
            const fs::path csv = fs::path(dir) / file;
            if (!fs::exists(csv)) throw IoError("raw store file missing: " + csv.string());
            record.series = read_store_csv(csv.string(), record.query.kind);
            store.queries.push_back(std::move(record));
        }
    } catch (const YAML::Exception& e) {
        throw SchemaError(mpath + ": " + e.what());
    } catch (const ValidationError& e) {
        throw SchemaError(mpath + ": " + e.what());
    }
    return store;
}

RawStore read_package_csv_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (entry.is_regular_file() && name.find("_all_absolute_") != std::string::npos &&
            entry.path().extension() == ".csv") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no *_all_absolute_*.csv files in " + dir);

    RawStore store;
    TimestampMs lo = std::numeric_limits<TimestampMs>::max();
    TimestampMs hi = std::numeric_limits<TimestampMs>::min();
    for (const auto& file : files) {
        const auto stem = file.filename().string();
        QueryRecord record;
        record.query.name = stem.substr(0, stem.find("_all_absolute_"));
        record.query.promql = "package:" + stem;
        record.query.kind = MetricKind::counter;
        const auto rows = read_csv_file(file.string());
        if (rows.size() < 2 || rows.front().size() < 2) {
            throw ParseError(line_ref(file.string(), 1) + ": expected a header and data rows");
        }
        const CsvRow& header = rows.front();
        // Either the engine's own per-sample layout or a wide timestamp x container table.
        const bool long_format = header.back() == "value" && header.front() == "timestamp";
        std::map<std::string, MetricSeries> by_column;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const CsvRow& row = rows[r];
            if (row.size() == 1 && row.front().empty()) continue;
            if (row.size() != header.size()) {
                throw ParseError(line_ref(file.string(), r + 1) + ": field count mismatch");
            }
            TimestampMs ts = 0;
            try {
                ts = parse_package_timestamp(row.front());
            } catch (const ParseError& e) {
                throw ParseError(line_ref(file.string(), r + 1) + ": " + e.what());
            }
            lo = std::min(lo, ts);
            hi = std::max(hi, ts);
            if (long_format) {
                LabelSet labels;
                std::string metric = record.query.name;
                for (std::size_t c = 1; c + 1 < row.size(); ++c) {
                    if (header[c] == kNameLabel) {
                        metric = row[c];
                    } else if (!row[c].empty()) {
                        labels[header[c]] = row[c];
                    }
                }
                std::string key = metric;
                for (const auto& [k, v] : labels) key += '\x1f' + k + '=' + v;
                auto& s = by_column[key];
                s.metric_name = metric;
                s.labels = labels;
                s.samples.push_back({ts, parse_number(row.back())});
            } else {
                for (std::size_t c = 1; c < row.size(); ++c) {
                    if (row[c].empty()) continue;
                    auto& s = by_column[header[c]];
                    s.metric_name = record.query.name;
                    s.labels = {{"pod", header[c]}, {"container", header[c]}};
                    s.samples.push_back({ts, parse_number(row[c])});
                }
            }
        }
        for (auto& [_, s] : by_column) {
            std::sort(s.samples.begin(), s.samples.end(),
                      [](const MetricSample& a, const MetricSample& b) {
                          return a.timestamp < b.timestamp;
                      });
            record.series.push_back(std::move(s));
        }
        sort_series(record.series);
        store.queries.push_back(std::move(record));
    }
    store.window = TimeWindow::make(lo, hi);
    return store;
}

// ---------------------------------------------------------------------------
// Model inputs

std::optional<ContainerIdentity> container_identity(const LabelSet& labels) {
    auto pick = [&](std::initializer_list<const char*> keys) -> std::string {
        for (const char* k : keys) {
            auto it = labels.find(k);
            if (it != labels.end() && !it->second.empty()) return it->second;
        }
        return {};
    };
    ContainerIdentity id;
    id.pod = pick({"pod", "pod_name"});
    if (id.pod.empty()) return std::nullopt;
    id.container = pick({"container", "container_name"});
    id.container_id = id.container.empty() ? id.pod : id.pod + "/" + id.container;
    return id;
}

UsageExtraction usages_from_store(const RawStore& store, const TimeWindow& window,
                                  const ServiceMap& map, const ModelInputs& inputs) {
    enum Group { compute, network, storage };
    struct Acc {
        ContainerIdentity id;
        LabelSet labels;
        double compute = 0.0;
        double network = 0.0;
        double storage = 0.0;
        bool seen[3] = {false, false, false};
    };

    struct Source {
        Group group;
        std::string name;
        const QueryRecord* record;
    };
    std::vector<Source> sources;
    sources.push_back({compute, inputs.compute, store.find(inputs.compute)});
    for (const auto& n : inputs.network) sources.push_back({network, n, store.find(n)});
    sources.push_back({storage, inputs.storage, store.find(inputs.storage)});

    bool group_present[3] = {false, false, false};
    for (const auto& s : sources) {
        if (s.record && s.record->status == QueryStatus::ok) group_present[s.group] = true;
    }
    if (!group_present[compute] && !group_present[network] && !group_present[storage]) {
        throw ValidationError("store holds none of the model input groups (" + inputs.compute +
                              ", network, " + inputs.storage + ")");
    }

    UsageExtraction out;
    std::map<std::string, Acc> acc;
    for (const auto& src : sources) {
        if (!src.record || src.record->status != QueryStatus::ok) continue;
        for (const auto& series : src.record->series) {
            auto id = container_identity(series.labels);
            if (!id) {
                out.warnings.push_back({"<no-pod-label>", src.name});
                continue;
            }
            Acc& a = acc[id->container_id];
            a.id = *id;
            for (const auto& [k, v] : series.labels) a.labels.emplace(k, v);
            const double inc = increase_over_window(series, window);
            switch (src.group) {
                case compute: a.compute += inc; break;
                case network: a.network += inc; break;
                case storage: a.storage += inc; break;
            }
            a.seen[src.group] = true;
        }
    }
    if (acc.empty()) {
        throw ValidationError("store has no container series for the model input groups");
    }

    const char* group_names[3] = {"compute", "network", "storage"};
    for (auto& [container_id, a] : acc) {
        ContainerUsage u;
        u.container_id = container_id;
        u.pod = a.id.pod;
        u.labels = a.labels;
        u.service = map.resolve(u.labels, u.pod);
        u.compute_joules = a.compute;
        u.network_bytes = static_cast<std::uint64_t>(std::llround(std::max(0.0, a.network)));
        u.storage_bytes = static_cast<std::uint64_t>(std::llround(std::max(0.0, a.storage)));
        u.window = window;
        for (int g = 0; g < 3; ++g) {
            if (!a.seen[g]) out.warnings.push_back({container_id, group_names[g]});
        }
        out.usages.push_back(std::move(u));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Storage snapshots

std::map<std::string, std::uint64_t> snapshot_delta(const StorageSnapshot& before,
                                                    const StorageSnapshot& after) {
    if (!(before.taken_at < after.taken_at)) {
        throw DomainError("snapshot_delta: 'before' must be taken strictly earlier than 'after'");
    }
    std::map<std::string, std::uint64_t> earlier(before.rows.begin(), before.rows.end());
    std::map<std::string, std::uint64_t> out;
    for (const auto& [id, _] : before.rows) out[id] = 0;
    for (const auto& [id, bytes] : after.rows) {
        auto it = earlier.find(id);
        out[id] = it == earlier.end() ? bytes : (bytes > it->second ? bytes - it->second : 0);
    }
    return out;
}

std::string write_storage_snapshot(const StorageSnapshot& snapshot, const std::string& dir) {
    std::set<std::string> ids;
    std::vector<CsvRow> rows{{"container_id", "bytes_used"}};
    for (const auto& [id, bytes] : snapshot.rows) {
        if (!ids.insert(id).second) throw ValidationError("duplicate container in snapshot: " + id);
        rows.push_back({id, format_number(bytes)});
    }
    const TimestampMs secs =
        snapshot.taken_at >= 0 ? snapshot.taken_at / 1000 : -((-snapshot.taken_at + 999) / 1000);
    const auto path = (fs::path(dir) / ("snapshot_" + std::to_string(secs) + ".csv")).string();
    write_csv_file(path, rows);
    return path;
}

StorageSnapshot read_storage_snapshot(const std::string& path) {
    const auto name = fs::path(path).stem().string();
    if (name.rfind("snapshot_", 0) != 0) throw ParseError(path + ": not a snapshot_<epoch>.csv file");
    StorageSnapshot snap;
    try {
        snap.taken_at = static_cast<TimestampMs>(std::stoll(name.substr(9))) * 1000;
    } catch (const std::exception&) {
        throw ParseError(path + ": bad epoch in file name");
    }
    const auto rows = read_csv_file(path);
    if (rows.empty() || rows.front() != CsvRow{"container_id", "bytes_used"}) {
        throw ParseError(line_ref(path, 1) + ": header must be container_id,bytes_used");
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != 2) throw ParseError(line_ref(path, r + 1) + ": expected 2 fields");
        try {
            snap.rows.emplace_back(rows[r][0], parse_unsigned(rows[r][1]));
        } catch (const ParseError& e) {
            throw ParseError(line_ref(path, r + 1) + ": " + e.what());
        }
    }
    return snap;
}

}  // namespace goxn
