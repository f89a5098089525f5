#include <algorithm>

#include <gtest/gtest.h>

#include "goxn/error.hpp"
#include "goxn/simenv.hpp"
#include "goxn/treatments.hpp"

using namespace goxn;
using sim::SimEnvironment;
using sim::SimSettings;
using sim::TopologySpec;

namespace {

class NamedTreatment final : public Treatment {
public:
    explicit NamedTreatment(std::string key) : key_(std::move(key)) {}
    std::string key() const override { return key_; }
    std::vector<std::string> touched_settings() const override { return {}; }
    void validate(const ParamMap&) const override {}

private:
    std::string key_;
};

SimEnvironment make_env() { return SimEnvironment(TopologySpec::default_demo(), SimSettings{}); }

// Rejects everything, to exercise the error paths.
class RefusingEnv final : public EnvironmentHandle {
public:
    EnvironmentKind kind() const override { return EnvironmentKind::external_command; }
    ActionResult execute(const ActionDescriptor& a) override {
        seen.push_back(a.render());
        return {false, "nope", {}};
    }
    std::vector<std::string> seen;
};

}  // namespace

TEST(Actions, RenderParseRoundTrip) {
    ActionDescriptor a{"set_scrape_interval", {{"seconds", "30"}, {"a", "b"}}};
    EXPECT_EQ(a.render(), "ACTION set_scrape_interval a=b seconds=30");
    EXPECT_EQ(ActionDescriptor::parse(a.render()), a);
    EXPECT_THROW(ActionDescriptor::parse("set x=1"), ParseError);
    EXPECT_THROW((ActionDescriptor{"x", {{"k", "has space"}}}.render()), ValidationError);
}

TEST(Registry, RegisterResolveSorted) {
    auto r = TreatmentRegistry::with_builtins();
    r.register_treatment("b", [] { return std::make_unique<NamedTreatment>("b"); });
    r.register_treatment("a", [] { return std::make_unique<NamedTreatment>("a"); });
    EXPECT_EQ(r.resolve("a")()->key(), "a");
    EXPECT_EQ(r.keys(), (std::vector<std::string>{"a", "b", "set_scrape_interval", "set_trace_sampling",
                                                  "toggle_service_mesh"}));
    EXPECT_THROW(r.register_treatment("a", [] { return std::make_unique<NamedTreatment>("a"); }), ValidationError);
    EXPECT_THROW(r.resolve("nope"), ValidationError);
}

TEST(Builtins, ParameterValidation) {
    const auto& r = builtin_treatments();
    EXPECT_NO_THROW(r.resolve("set_scrape_interval")()->validate({{"seconds", "30"}}));
    EXPECT_THROW(r.resolve("set_scrape_interval")()->validate({{"seconds", "0"}}), ValidationError);
    EXPECT_THROW(r.resolve("set_scrape_interval")()->validate({{"secs", "5"}}), ValidationError);
    EXPECT_THROW(r.resolve("set_trace_sampling")()->validate({{"percent", "101"}}), ValidationError);
    EXPECT_THROW(r.resolve("set_trace_sampling")()->validate({{"percent", "abc"}}), ValidationError);
    EXPECT_THROW(r.resolve("toggle_service_mesh")()->validate({{"enabled", "yes"}}), ValidationError);
}

TEST(Lifecycle, ScrapeIntervalAppliedVerifiedReverted) {
    auto env = make_env();
    const double original = env.simulator().settings().scrape_interval_s;
    auto out = apply({"set_scrape_interval", {{"seconds", "30"}}, "prometheus"}, env, env.clock());
    EXPECT_TRUE(out.verified);
    EXPECT_EQ(env.simulator().settings().scrape_interval_s, 30.0);
    EXPECT_EQ(out.restore.at("seconds"), "60");
    out = revert(out, env, env.clock());
    EXPECT_TRUE(out.reverted_at.has_value());
    EXPECT_EQ(env.simulator().settings().scrape_interval_s, original);
}

TEST(Lifecycle, SamplingFiftyPercent) {
    auto env = make_env();
    const auto out = apply({"set_trace_sampling", {{"percent", "50"}}, ""}, env, env.clock());
    EXPECT_TRUE(out.verified);
    EXPECT_EQ(env.simulator().settings().trace_sampling_fraction, 0.5);
}

TEST(Lifecycle, UnknownKeyAndBadParams) {
    auto env = make_env();
    EXPECT_THROW(apply({"chaos_monkey", {}, ""}, env, env.clock()), ValidationError);
    EXPECT_THROW(apply({"set_trace_sampling", {{"percent", "-1"}}, ""}, env, env.clock()), ValidationError);
    EXPECT_TRUE(env.action_log().empty());
}

TEST(Lifecycle, DoubleRevertIsNoOpAndRevertNeedsApply) {
    auto env = make_env();
    auto out = apply({"toggle_service_mesh", {{"enabled", "true"}}, ""}, env, env.clock());
    out = revert(out, env, env.clock());
    const auto log_size = env.action_log().size();
    const auto again = revert(out, env, env.clock());
    EXPECT_EQ(env.action_log().size(), log_size);
    EXPECT_EQ(again, out);
    EXPECT_FALSE(env.simulator().settings().mesh_enabled);

    TreatmentOutcome never;
    never.key = "toggle_service_mesh";
    EXPECT_THROW(revert(never, env, env.clock()), PreconditionError);
}

TEST(Lifecycle, RejectionsSurfaceAsEnvironmentErrors) {
    RefusingEnv env;
    ManualClock clock;
    EXPECT_THROW(apply({"set_trace_sampling", {{"percent", "5"}}, ""}, env, clock), EnvironmentError);
    ASSERT_EQ(env.seen.size(), 1u);
    EXPECT_EQ(env.seen[0], "ACTION set_trace_sampling percent=5");
}

TEST(Lifecycle, FailedVerifyIsReported) {
    // Applies fine but verification reads back something else.
    class Liar final : public EnvironmentHandle {
    public:
        EnvironmentKind kind() const override { return EnvironmentKind::external_command; }
        ActionResult execute(const ActionDescriptor& a) override {
            if (a.name.rfind("verify_", 0) == 0) return {false, "still 60 s", {}};
            return {true, "", {}};
        }
    } env;
    ManualClock clock;
    const auto out = apply({"set_scrape_interval", {{"seconds", "5"}}, ""}, env, clock);
    EXPECT_FALSE(out.verified);
    EXPECT_EQ(out.detail, "still 60 s");
    EXPECT_FALSE(out.verified_at.has_value());
}

TEST(Properties, ApplyRevertRestoresDeclaredSettings) {
    const std::vector<TreatmentSpec> specs = {{"set_scrape_interval", {{"seconds", "5"}}, ""},
                                              {"set_trace_sampling", {{"percent", "37.5"}}, ""},
                                              {"toggle_service_mesh", {{"enabled", "true"}}, ""}};
    for (const auto& spec : specs) {
        auto env = make_env();
        const auto before = env.simulator().settings();
        auto out = apply(spec, env, env.clock());
        revert(out, env, env.clock());
        const auto after = env.simulator().settings();
        EXPECT_EQ(after.scrape_interval_s, before.scrape_interval_s);
        EXPECT_EQ(after.trace_sampling_fraction, before.trace_sampling_fraction);
        EXPECT_EQ(after.mesh_enabled, before.mesh_enabled);
    }
}

TEST(Properties, DisjointTreatmentsCommute) {
    std::vector<TreatmentSpec> specs = {{"set_scrape_interval", {{"seconds", "5"}}, ""},
                                        {"set_trace_sampling", {{"percent", "50"}}, ""},
                                        {"toggle_service_mesh", {{"enabled", "true"}}, ""}};
    std::sort(specs.begin(), specs.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
    std::optional<SimSettings> reference;
    do {
        auto env = make_env();
        for (const auto& s : specs) apply(s, env, env.clock());
        const auto got = env.simulator().settings();
        if (!reference) {
            reference = got;
            continue;
        }
        EXPECT_EQ(got.scrape_interval_s, reference->scrape_interval_s);
        EXPECT_EQ(got.trace_sampling_fraction, reference->trace_sampling_fraction);
        EXPECT_EQ(got.mesh_enabled, reference->mesh_enabled);
    } while (std::next_permutation(specs.begin(), specs.end(),
                                   [](const auto& a, const auto& b) { return a.key < b.key; }));
}

TEST(Properties, OnlyDeclaredSettingsMutate) {
    const auto& registry = builtin_treatments();
    for (const auto& [key, params] : std::vector<std::pair<std::string, ParamMap>>{
             {"set_scrape_interval", {{"seconds", "5"}}},
             {"set_trace_sampling", {{"percent", "10"}}},
             {"toggle_service_mesh", {{"enabled", "true"}}}}) {
        auto env = make_env();
        auto out = apply({key, params, ""}, env, env.clock(), registry);
        revert(out, env, env.clock(), registry);
        const auto declared = registry.resolve(key)()->touched_settings();
        ASSERT_EQ(declared.size(), 1u);
        for (const auto& entry : env.simulator().mutation_log()) {
            EXPECT_EQ(entry.substr(0, entry.find('=')), declared[0]) << key << ": " << entry;
        }
        EXPECT_EQ(env.simulator().mutation_log().size(), 2u);
    }
}
