#pragma once

// Component-level additive energy model: a service's energy is the sum of its
// containers' compute joules plus network and storage bytes converted through
// energy-intensity factors.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "goxn/time.hpp"

namespace goxn {

/// kWh/GB -> J/byte: f * 3.6e6 / 1e9. Throws DomainError on negative or non-finite input.
double kwh_per_gb_to_j_per_byte(double kwh_per_gb);

/// Energy attributed to a byte volume at a given intensity.
double attributable_energy(std::uint64_t bytes, double j_per_byte);

struct EnergyIntensityFactors {
    double network_kwh_per_gb = 0.0;
    double storage_kwh_per_gb = 0.0;
    double network_j_per_byte = 0.0;
    double storage_j_per_byte = 0.0;

    /// Validates both factors and derives the J/byte fields.
    static EnergyIntensityFactors from_kwh_per_gb(double network_kwh_per_gb,
                                                  double storage_kwh_per_gb);

    /// Placeholder defaults shipped in config/factors.yaml (0.06 / 0.002 kWh/GB).
    static EnergyIntensityFactors defaults();

    friend bool operator==(const EnergyIntensityFactors&, const EnergyIntensityFactors&) = default;
};

/// Window totals for one container.
struct ContainerUsage {
    std::string container_id;
    std::string pod;
    std::string service;
    std::map<std::string, std::string> labels;
    double compute_joules = 0.0;
    std::uint64_t network_bytes = 0;
    std::uint64_t storage_bytes = 0;
    TimeWindow window;
};

enum class Component { compute, network, storage };

std::string to_string(Component c);

struct ServiceEnergyBreakdown {
    std::string service;
    double compute_joules = 0.0;
    double network_joules = 0.0;
    double storage_joules = 0.0;
    double total_joules = 0.0;
    double share_compute = 0.0;
    double share_network = 0.0;
    double share_storage = 0.0;

    /// Fills total and shares from the three components. Zero total gives zero shares.
    static ServiceEnergyBreakdown from_components(std::string service, double compute,
                                                  double network, double storage);

    double joules(Component c) const;
    double share(Component c) const;

    friend bool operator==(const ServiceEnergyBreakdown&, const ServiceEnergyBreakdown&) = default;
};

/// Resolves a container's labels to the service it belongs to. First matching rule wins.
class ServiceMap {
public:
    enum class Fallback { use_pod_name, unattributed_bucket };

    struct Rule {
        enum class Kind {
            label_value,  // service := value of label `key`
            label_equals, // label `key` == `value` -> `service`
            pod_prefix,   // pod starts with `value` -> `service`
        };
        Kind kind = Kind::label_value;
        std::string key;
        std::string value;
        std::string service;
    };

    static constexpr const char* kUnattributed = "unattributed";

    ServiceMap() = default;
    ServiceMap(std::vector<Rule> rules, Fallback fallback);

    /// Label rule on `app`, falling back to the pod name.
    static ServiceMap defaults();

    /// Reads a YAML service-map file (rules + fallback).
    static ServiceMap load(const std::string& path);

    std::string resolve(const std::map<std::string, std::string>& labels,
                        const std::string& pod) const;

    const std::vector<Rule>& rules() const { return rules_; }
    Fallback fallback() const { return fallback_; }

private:
    std::vector<Rule> rules_;
    Fallback fallback_ = Fallback::use_pod_name;
};

/// Breakdown of a single container under the additive model.
ServiceEnergyBreakdown container_breakdown(const ContainerUsage& usage,
                                           const EnergyIntensityFactors& factors);

/// Sums container components per resolved service (usage.service), sorted by service name.
/// Throws ValidationError when the usages do not share one window.
std::vector<ServiceEnergyBreakdown> aggregate_services(const std::vector<ContainerUsage>& usages,
                                                       const EnergyIntensityFactors& factors);

/// Same, but re-resolves each usage's service through `map` from its labels and pod.
std::vector<ServiceEnergyBreakdown> aggregate_services(std::vector<ContainerUsage> usages,
                                                       const ServiceMap& map,
                                                       const EnergyIntensityFactors& factors);

/// Percent of the total missed when only compute is counted; 0 for a zero total.
double compute_only_underestimation(const ServiceEnergyBreakdown& b);

/// Largest component; ties resolve compute > network > storage.
/// Throws DomainError when the total is zero.
Component dominant_component(const ServiceEnergyBreakdown& b);

}  // namespace goxn
