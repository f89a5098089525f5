#pragma once

// Treatment lifecycle (apply -> verify -> revert) over an environment handle,
// plus the registry of treatment kinds.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "goxn/clock.hpp"
#include "goxn/time.hpp"

namespace goxn {

using ParamMap = std::map<std::string, std::string>;

/// A declarative environment action. Rendered as one line:
/// "ACTION <name> <k=v ...>" for the external-command executor.
struct ActionDescriptor {
    std::string name;
    ParamMap args;

    std::string render() const;
    /// Inverse of render(). Throws ParseError.
    static ActionDescriptor parse(const std::string& line);

    friend bool operator==(const ActionDescriptor&, const ActionDescriptor&) = default;
};

struct ActionResult {
    bool ok = true;
    std::string message;
    ParamMap values;  // e.g. "previous.seconds" reported by a setter
};

enum class EnvironmentKind { external_command, simulated };

std::string to_string(EnvironmentKind kind);

/// Every treatment effect flows through this handle.
class EnvironmentHandle {
public:
    virtual ~EnvironmentHandle() = default;
    virtual EnvironmentKind kind() const = 0;
    virtual ActionResult execute(const ActionDescriptor& action) = 0;
};

struct TreatmentSpec {
    std::string key;
    ParamMap params;
    std::string target;

    friend bool operator==(const TreatmentSpec&, const TreatmentSpec&) = default;
};

struct TreatmentOutcome {
    std::string key;
    ParamMap params;
    std::string target;
    std::optional<TimestampMs> applied_at;
    std::optional<TimestampMs> verified_at;
    std::optional<TimestampMs> reverted_at;
    bool verified = false;
    std::string detail;
    ParamMap restore;  // setter arguments that put the environment back

    friend bool operator==(const TreatmentOutcome&, const TreatmentOutcome&) = default;
};

/// One treatment kind. The built-ins each set a single environment setting.
class Treatment {
public:
    virtual ~Treatment() = default;

    virtual std::string key() const = 0;
    /// Environment settings this treatment may change.
    virtual std::vector<std::string> touched_settings() const = 0;
    /// Throws ValidationError on bad params.
    virtual void validate(const ParamMap& params) const = 0;

    virtual ActionDescriptor apply_action(const TreatmentSpec& spec) const;
    virtual ActionDescriptor verify_action(const TreatmentSpec& spec) const;
    virtual ActionDescriptor revert_action(const TreatmentOutcome& outcome) const;
};

using TreatmentFactory = std::function<std::unique_ptr<Treatment>()>;

class TreatmentRegistry {
public:
    /// Throws ValidationError on a duplicate key.
    void register_treatment(const std::string& key, TreatmentFactory factory);

    /// Throws ValidationError for an unknown key.
    const TreatmentFactory& resolve(const std::string& key) const;
    bool contains(const std::string& key) const { return factories_.count(key) != 0; }

    /// Sorted keys.
    std::vector<std::string> keys() const;

    /// Registry holding set_scrape_interval, set_trace_sampling, toggle_service_mesh.
    static TreatmentRegistry with_builtins();

private:
    std::map<std::string, TreatmentFactory> factories_;
};

/// Process-wide registry with the built-ins; immutable after first use.
const TreatmentRegistry& builtin_treatments();

namespace treatment_keys {
inline constexpr const char* scrape_interval = "set_scrape_interval";
inline constexpr const char* trace_sampling = "set_trace_sampling";
inline constexpr const char* service_mesh = "toggle_service_mesh";
}  // namespace treatment_keys

/// Validates, applies and verifies. Throws ValidationError on bad params and
/// EnvironmentError if the environment rejects the apply. A failed verify is
/// reported through outcome.verified == false.
TreatmentOutcome apply(const TreatmentSpec& spec, EnvironmentHandle& env, const Clock& clock,
                       const TreatmentRegistry& registry = builtin_treatments());

/// Restores the pre-apply setting. A second revert is a no-op. Throws
/// PreconditionError if the outcome was never applied and EnvironmentError on rejection.
TreatmentOutcome revert(TreatmentOutcome outcome, EnvironmentHandle& env, const Clock& clock,
                        const TreatmentRegistry& registry = builtin_treatments());

}  // namespace goxn
