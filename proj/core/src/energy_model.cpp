#include "goxn/energy_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <yaml-cpp/yaml.h>

#include "goxn/error.hpp"

namespace goxn {

namespace {

constexpr double kJoulesPerKwh = 3.6e6;
constexpr double kBytesPerGb = 1e9;

double shares_of(double part, double total) { return total > 0.0 ? part / total : 0.0; }

}  // namespace

double kwh_per_gb_to_j_per_byte(double kwh_per_gb) {
    if (!std::isfinite(kwh_per_gb) || kwh_per_gb < 0.0) {
        throw DomainError("intensity factor must be finite and >= 0 kWh/GB");
    }
    return kwh_per_gb * kJoulesPerKwh / kBytesPerGb;
}

double attributable_energy(std::uint64_t bytes, double j_per_byte) {
    return static_cast<double>(bytes) * j_per_byte;
}

EnergyIntensityFactors EnergyIntensityFactors::from_kwh_per_gb(double network_kwh_per_gb,
                                                               double storage_kwh_per_gb) {
    EnergyIntensityFactors f;
    f.network_kwh_per_gb = network_kwh_per_gb;
    f.storage_kwh_per_gb = storage_kwh_per_gb;
    f.network_j_per_byte = kwh_per_gb_to_j_per_byte(network_kwh_per_gb);
    f.storage_j_per_byte = kwh_per_gb_to_j_per_byte(storage_kwh_per_gb);
    return f;
}

EnergyIntensityFactors EnergyIntensityFactors::defaults() { return from_kwh_per_gb(0.06, 0.002); }

std::string to_string(Component c) {
    switch (c) {
        case Component::compute: return "compute";
        case Component::network: return "network";
        case Component::storage: return "storage";
    }
    return "unknown";
}

ServiceEnergyBreakdown ServiceEnergyBreakdown::from_components(std::string service, double compute,
                                                               double network, double storage) {
    ServiceEnergyBreakdown b;
    b.service = std::move(service);
    b.compute_joules = compute;
    b.network_joules = network;
    b.storage_joules = storage;
    b.total_joules = compute + network + storage;
    b.share_compute = shares_of(compute, b.total_joules);
    b.share_network = shares_of(network, b.total_joules);
    b.share_storage = shares_of(storage, b.total_joules);
    return b;
}

double ServiceEnergyBreakdown::joules(Component c) const {
    switch (c) {
        case Component::compute: return compute_joules;
        case Component::network: return network_joules;
        case Component::storage: return storage_joules;
    }
    return 0.0;
}

double ServiceEnergyBreakdown::share(Component c) const {
    switch (c) {
        case Component::compute: return share_compute;
        case Component::network: return share_network;
        case Component::storage: return share_storage;
    }
    return 0.0;
}

ServiceMap::ServiceMap(std::vector<Rule> rules, Fallback fallback)
    : rules_(std::move(rules)), fallback_(fallback) {}

ServiceMap ServiceMap::defaults() {
    return ServiceMap({Rule{Rule::Kind::label_value, "app", "", ""}}, Fallback::use_pod_name);
}

ServiceMap ServiceMap::load(const std::string& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::BadFile&) {
        throw IoError("cannot read service map " + path);
    } catch (const YAML::Exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    auto fail = [&](const YAML::Node& n, const std::string& msg) {
        throw SchemaError(path + ":" + std::to_string(n.Mark().line + 1) + ": " + msg);
    };
    if (!root.IsMap()) fail(root, "service map must be a mapping");

    std::vector<Rule> rules;
    Fallback fallback = Fallback::use_pod_name;
    for (const auto& kv : root) {
        const auto key = kv.first.as<std::string>();
        if (key == "rules") {
            if (!kv.second.IsSequence()) fail(kv.second, "rules must be a list");
            for (const auto& r : kv.second) {
                if (!r.IsMap()) fail(r, "rule must be a mapping");
                Rule rule;
                std::set<std::string> seen;
                for (const auto& f : r) seen.insert(f.first.as<std::string>());
                for (const auto& k : seen) {
                    if (k != "label" && k != "equals" && k != "pod_prefix" && k != "service") {
                        fail(r, "unknown rule key '" + k + "'");
                    }
                }
                if (seen.count("label") && seen.count("pod_prefix")) {
                    fail(r, "rule has both label and pod_prefix");
                }
                if (seen.count("pod_prefix")) {
                    if (!seen.count("service")) fail(r, "pod_prefix rule needs service");
                    rule.kind = Rule::Kind::pod_prefix;
                    rule.value = r["pod_prefix"].as<std::string>();
                    rule.service = r["service"].as<std::string>();
                } else if (seen.count("label")) {
                    rule.key = r["label"].as<std::string>();
                    if (seen.count("equals")) {
                        if (!seen.count("service")) fail(r, "label/equals rule needs service");
                        rule.kind = Rule::Kind::label_equals;
                        rule.value = r["equals"].as<std::string>();
                        rule.service = r["service"].as<std::string>();
                    } else {
                        if (seen.count("service")) fail(r, "label rule without equals takes no service");
                        rule.kind = Rule::Kind::label_value;
                    }
                } else {
                    fail(r, "rule needs label or pod_prefix");
                }
                rules.push_back(std::move(rule));
            }
        } else if (key == "fallback") {
            const auto v = kv.second.as<std::string>();
            if (v == "use-pod-name") {
                fallback = Fallback::use_pod_name;
            } else if (v == "unattributed-bucket") {
                fallback = Fallback::unattributed_bucket;
            } else {
                fail(kv.second, "fallback must be use-pod-name or unattributed-bucket");
            }
        } else {
            fail(kv.first, "unknown key '" + key + "'");
        }
    }
    return ServiceMap(std::move(rules), fallback);
}

std::string ServiceMap::resolve(const std::map<std::string, std::string>& labels,
                                const std::string& pod) const {
    for (const auto& rule : rules_) {
        switch (rule.kind) {
            case Rule::Kind::label_value: {
                auto it = labels.find(rule.key);
                if (it != labels.end() && !it->second.empty()) return it->second;
                break;
            }
            case Rule::Kind::label_equals: {
                auto it = labels.find(rule.key);
                if (it != labels.end() && it->second == rule.value) return rule.service;
                break;
            }
            case Rule::Kind::pod_prefix:
                if (pod.rfind(rule.value, 0) == 0) return rule.service;
                break;
        }
    }
    if (fallback_ == Fallback::use_pod_name && !pod.empty()) return pod;
    return kUnattributed;
}

ServiceEnergyBreakdown container_breakdown(const ContainerUsage& usage,
                                           const EnergyIntensityFactors& factors) {
    return ServiceEnergyBreakdown::from_components(
        usage.service, usage.compute_joules,
        attributable_energy(usage.network_bytes, factors.network_j_per_byte),
        attributable_energy(usage.storage_bytes, factors.storage_j_per_byte));
}

std::vector<ServiceEnergyBreakdown> aggregate_services(const std::vector<ContainerUsage>& usages,
                                                       const EnergyIntensityFactors& factors) {
    if (usages.empty()) return {};
    const TimeWindow window = usages.front().window;

    struct Sum {
        double compute = 0.0;
        std::uint64_t network_bytes = 0;
        std::uint64_t storage_bytes = 0;
    };
    std::map<std::string, Sum> sums;
    for (const auto& u : usages) {
        if (!(u.window == window)) {
            throw ValidationError("aggregate_services: container " + u.container_id +
                                  " has a different window than " +
                                  usages.front().container_id);
        }
        if (!(u.compute_joules >= 0.0)) {
            throw ValidationError("aggregate_services: negative compute joules for " +
                                  u.container_id);
        }
        Sum& s = sums[u.service];
        s.compute += u.compute_joules;
        s.network_bytes += u.network_bytes;
        s.storage_bytes += u.storage_bytes;
    }

    std::vector<ServiceEnergyBreakdown> out;
    out.reserve(sums.size());
    for (const auto& [service, s] : sums) {
        out.push_back(ServiceEnergyBreakdown::from_components(
            service, s.compute, attributable_energy(s.network_bytes, factors.network_j_per_byte),
            attributable_energy(s.storage_bytes, factors.storage_j_per_byte)));
    }
    return out;
}

std::vector<ServiceEnergyBreakdown> aggregate_services(std::vector<ContainerUsage> usages,
                                                       const ServiceMap& map,
                                                       const EnergyIntensityFactors& factors) {
    for (auto& u : usages) u.service = map.resolve(u.labels, u.pod);
    return aggregate_services(usages, factors);
}

double compute_only_underestimation(const ServiceEnergyBreakdown& b) {
    if (!(b.total_joules > 0.0)) return 0.0;
    return 100.0 * (b.network_joules + b.storage_joules) / b.total_joules;
}

Component dominant_component(const ServiceEnergyBreakdown& b) {
    if (!(b.total_joules > 0.0)) {
        throw DomainError("dominant component is undefined for service '" + b.service +
                          "' with zero total energy");
    }
    Component best = Component::compute;
    for (Component c : {Component::network, Component::storage}) {
        if (b.joules(c) > b.joules(best)) best = c;
    }
    return best;
}

}  // namespace goxn
