#include "goxn/treatments.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "goxn/csv.hpp"
#include "goxn/error.hpp"

namespace goxn {

namespace {

bool has_space_or_eq(const std::string& s) {
    return std::any_of(s.begin(), s.end(), [](char c) {
        return std::isspace(static_cast<unsigned char>(c)) || c == '=';
    });
}

/// Built-in treatments: each sets one environment setting from one parameter.
class SettingTreatment final : public Treatment {
public:
    using Check = void (*)(const std::string& key, const std::string& value);

    SettingTreatment(std::string key, std::string setting, std::string param, Check check)
        : key_(std::move(key)), setting_(std::move(setting)), param_(std::move(param)),
          check_(check) {}

    std::string key() const override { return key_; }
    std::vector<std::string> touched_settings() const override { return {setting_}; }

    void validate(const ParamMap& params) const override {
        for (const auto& [k, _] : params) {
            if (k != param_) {
                throw ValidationError(key_ + ": unknown parameter '" + k + "' (expects '" + param_ +
                                      "')");
            }
        }
        auto it = params.find(param_);
        if (it == params.end()) throw ValidationError(key_ + ": missing parameter '" + param_ + "'");
        check_(key_, it->second);
    }

private:
    std::string key_;
    std::string setting_;
    std::string param_;
    Check check_;
};

double number_param(const std::string& key, const std::string& value) {
    try {
        const double v = parse_number(value);
        if (!std::isfinite(v)) throw ParseError("non-finite");
        return v;
    } catch (const ParseError&) {
        throw ValidationError(key + ": '" + value + "' is not a number");
    }
}

void check_seconds(const std::string& key, const std::string& value) {
    const double v = number_param(key, value);
    if (!(v > 0.0)) throw ValidationError(key + ": seconds must be > 0");
    if (std::fabs(v * 1000.0 - std::round(v * 1000.0)) > 1e-6) {
        throw ValidationError(key + ": seconds must have millisecond resolution");
    }
}

void check_percent(const std::string& key, const std::string& value) {
    const double v = number_param(key, value);
    if (v < 0.0 || v > 100.0) throw ValidationError(key + ": percent must be in [0, 100]");
}

void check_bool(const std::string& key, const std::string& value) {
    if (value != "true" && value != "false") {
        throw ValidationError(key + ": enabled must be true or false");
    }
}

}  // namespace

std::string ActionDescriptor::render() const {
    if (name.empty() || has_space_or_eq(name)) {
        throw ValidationError("action name '" + name + "' must be a single token");
    }
    std::string line = "ACTION " + name;
    for (const auto& [k, v] : args) {
        if (k.empty() || has_space_or_eq(k) ||
            std::any_of(v.begin(), v.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
            throw ValidationError("action argument '" + k + "=" + v + "' must not contain whitespace");
        }
        line += " " + k + "=" + v;
    }
    return line;
}

ActionDescriptor ActionDescriptor::parse(const std::string& line) {
    std::istringstream in(line);
    std::string word;
    if (!(in >> word) || word != "ACTION") throw ParseError("action line must start with ACTION");
    ActionDescriptor a;
    if (!(in >> a.name)) throw ParseError("action line has no name");
    while (in >> word) {
        const auto eq = word.find('=');
        if (eq == std::string::npos || eq == 0) throw ParseError("bad action argument '" + word + "'");
        a.args[word.substr(0, eq)] = word.substr(eq + 1);
    }
    return a;
}

std::string to_string(EnvironmentKind kind) {
    return kind == EnvironmentKind::simulated ? "simulated" : "external-command";
}

ActionDescriptor Treatment::apply_action(const TreatmentSpec& spec) const {
    return {key(), spec.params};
}

ActionDescriptor Treatment::verify_action(const TreatmentSpec& spec) const {
    return {"verify_" + key(), spec.params};
}

ActionDescriptor Treatment::revert_action(const TreatmentOutcome& outcome) const {
    if (!outcome.restore.empty()) return {key(), outcome.restore};
    return {"revert_" + key(), outcome.params};
}

void TreatmentRegistry::register_treatment(const std::string& key, TreatmentFactory factory) {
    if (key.empty() || has_space_or_eq(key)) {
        throw ValidationError("treatment key '" + key + "' must be a single token");
    }
    if (!factory) throw ValidationError("treatment '" + key + "' registered without a factory");
    if (!factories_.emplace(key, std::move(factory)).second) {
        throw ValidationError("treatment '" + key + "' is already registered");
    }
}

const TreatmentFactory& TreatmentRegistry::resolve(const std::string& key) const {
    auto it = factories_.find(key);
    if (it == factories_.end()) {
        std::string known;
        for (const auto& k : keys()) known += (known.empty() ? "" : ", ") + k;
        throw ValidationError("unknown treatment '" + key + "' (registered: " + known + ")");
    }
    return it->second;
}

std::vector<std::string> TreatmentRegistry::keys() const {
    std::vector<std::string> out;
    out.reserve(factories_.size());
    for (const auto& [k, _] : factories_) out.push_back(k);
    return out;
}

TreatmentRegistry TreatmentRegistry::with_builtins() {
    TreatmentRegistry r;
    r.register_treatment(treatment_keys::scrape_interval, [] {
        return std::make_unique<SettingTreatment>(treatment_keys::scrape_interval,
                                                  "scrape_interval_s", "seconds", &check_seconds);
    });
    r.register_treatment(treatment_keys::trace_sampling, [] {
        return std::make_unique<SettingTreatment>(treatment_keys::trace_sampling,
                                                  "trace_sampling_fraction", "percent",
                                                  &check_percent);
    });
    r.register_treatment(treatment_keys::service_mesh, [] {
        return std::make_unique<SettingTreatment>(treatment_keys::service_mesh, "mesh_enabled",
                                                  "enabled", &check_bool);
    });
    return r;
}

const TreatmentRegistry& builtin_treatments() {
    static const TreatmentRegistry registry = TreatmentRegistry::with_builtins();
    return registry;
}

TreatmentOutcome apply(const TreatmentSpec& spec, EnvironmentHandle& env, const Clock& clock,
                       const TreatmentRegistry& registry) {
    const auto treatment = registry.resolve(spec.key)();
    treatment->validate(spec.params);

    TreatmentOutcome outcome;
    outcome.key = spec.key;
    outcome.params = spec.params;
    outcome.target = spec.target;

    const ActionResult applied = env.execute(treatment->apply_action(spec));
    if (!applied.ok) {
        throw EnvironmentError("apply " + spec.key + " rejected by environment: " + applied.message);
    }
    outcome.applied_at = clock.now();
    static const std::string kPrevious = "previous.";
    for (const auto& [k, v] : applied.values) {
        if (k.rfind(kPrevious, 0) == 0) outcome.restore[k.substr(kPrevious.size())] = v;
    }

    const ActionResult verified = env.execute(treatment->verify_action(spec));
    outcome.verified = verified.ok;
    outcome.detail = verified.message;
    if (verified.ok) outcome.verified_at = clock.now();
    return outcome;
}

TreatmentOutcome revert(TreatmentOutcome outcome, EnvironmentHandle& env, const Clock& clock,
                        const TreatmentRegistry& registry) {
    if (!outcome.applied_at) {
        throw PreconditionError("revert " + outcome.key + ": treatment was never applied");
    }
    if (outcome.reverted_at) return outcome;
    const auto treatment = registry.resolve(outcome.key)();
    const ActionResult result = env.execute(treatment->revert_action(outcome));
    if (!result.ok) {
        throw EnvironmentError("revert " + outcome.key + " rejected by environment: " +
                               result.message);
    }
    outcome.reverted_at = std::max(clock.now(), *outcome.applied_at);
    return outcome;
}

}  // namespace goxn
