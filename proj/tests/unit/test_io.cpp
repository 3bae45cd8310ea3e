#include <doctest.h>

#include <cmath>
#include <random>

#include "pbound/error.hpp"
#include "pbound/io.hpp"
#include "pbound/presets.hpp"

using namespace pbound;

namespace {

ErrorKind kind_of(const std::function<void()>& f, std::string* message = nullptr) {
    try {
        f();
    } catch (const Error& e) {
        if (message) {
            *message = e.what();
        }
        return e.kind();
    }
    FAIL("no error raised");
    return ErrorKind::Argument;
}

const char* kChain = R"({
  "problem": "integrator-chain",
  "n": 2, "p": 1,
  "bounds": [1.0, 0.5],
  "saturations": [{"hermite": {"p": 1, "sigma_max": 1.0, "L": 0.5, "alpha": 1.0}}],
  "simulation": {"dt": 0.002, "t_max": 100, "eps": 0.05},
  "initial_conditions": [[1.0, 0.0]],
  "random": {"seed": 4, "count": 3, "radius": 2.0}
})";

}  // namespace

TEST_CASE("parse a chain config") {
    const ToolkitConfig cfg = parse_config(kChain);
    CHECK(cfg.problem == ProblemKind::IntegratorChain);
    CHECK(cfg.n == 2);
    CHECK(cfg.saturations.size() == 2);
    CHECK(cfg.saturations[1].L() == 0.5);
    CHECK(cfg.simulation.dt == 0.002);
    const auto ics = initial_states(cfg);
    REQUIRE(ics.size() == 4);
    CHECK(ics[0] == std::vector<double>{1.0, 0.0});
    CHECK(initial_states(cfg) == ics);
    for (std::size_t i = 1; i < 4; ++i) {
        for (double v : ics[i]) {
            CHECK(std::abs(v) <= 2.0);
        }
    }
    const ToolkitConfig again = parse_config(config_to_json(cfg));
    CHECK(again.n == cfg.n);
    CHECK(again.saturations[0].pieces().size() == cfg.saturations[0].pieces().size());
    CHECK(again.saturations[0](0.7) == cfg.saturations[0](0.7));
}

TEST_CASE("config diagnostics carry the field path") {
    std::string msg;
    std::string text = kChain;
    text.replace(text.find("[1.0, 0.5]"), 10, "[1.0, -0.5]");
    CHECK(kind_of([&] { parse_config(text); }, &msg) == ErrorKind::Config);
    CHECK(msg.find("bounds[1]") != std::string::npos);

    CHECK(kind_of([] { parse_config("{\"problem\": "); }) == ErrorKind::Parse);
    CHECK(kind_of([] { parse_config(R"({"problem":"chain","n":1,"p":0,"bounds":[1]})"); }, &msg) == ErrorKind::Config);
    CHECK(msg.find("problem") != std::string::npos);
    CHECK(kind_of([] {
              parse_config(R"({"problem":"integrator-chain","n":1,"p":0,"bounds":[1],"saturations":["nope"]})");
          }, &msg) == ErrorKind::Config);
    CHECK(msg.find("saturations[0]") != std::string::npos);
    CHECK(kind_of([] {
              parse_config(R"({"problem":"integrator-chain","n":1,"p":0,"bounds":[1],"saturations":["two-quartic"],"typo":1})");
          }, &msg) == ErrorKind::Config);
    CHECK(msg.find("typo") != std::string::npos);
    CHECK(kind_of([] {
              parse_config(R"({"problem":"integrator-chain","n":1,"p":3,"bounds":[1,1,1,1],"saturations":["two-quartic"]})");
          }, &msg) == ErrorKind::Config);
    CHECK(kind_of([] {
              parse_config(R"({"problem":"skew","n":2,"p":0,"bounds":[1],"system":{"A":[[1,0],[0,-1]],"b":[0,1]}})");
          }, &msg) == ErrorKind::Config);
    CHECK(msg.find("system") != std::string::npos);
    CHECK(kind_of([] { load_config("/nonexistent/config.json"); }) == ErrorKind::Config);
}

TEST_CASE("skew config") {
    const ToolkitConfig cfg = parse_config(R"({
      "problem": "skew", "n": 2, "p": 1, "bounds": [2, 2],
      "system": {"A": [[0, 5], [-5, 0]], "b": [0, 1], "alpha": 0.5, "beta": 0.35},
      "certification": {"samples": 1000, "refine": 5, "seed": 3}
    })");
    REQUIRE(cfg.system.has_value());
    CHECK(cfg.system->A(0, 1) == 5.0);
    CHECK(cfg.beta.value() == 0.35);
    CHECK(cfg.certification.samples == 1000);
    const ToolkitConfig again = parse_config(config_to_json(cfg));
    CHECK(again.system->b == cfg.system->b);
}

TEST_CASE("controller files round trip exactly") {
    const AnyController chain = synthesize_from_config(triple_integrator_config());
    const AnyController chain_back = deserialize_controller(serialize_controller(chain));
    ToolkitConfig hc = harmonic_oscillator_config();
    hc.certification.samples = 5000;
    const AnyController skew = synthesize_from_config(hc);
    const AnyController skew_back = deserialize_controller(serialize_controller(skew));

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (int t = 0; t < 100; ++t) {
        const std::vector<double> x3{u(rng), u(rng), u(rng)};
        CHECK(std::abs(eval_feedback(chain, x3) - eval_feedback(chain_back, x3)) <= 1e-15);
        const std::vector<double> x2{u(rng), u(rng)};
        CHECK(std::abs(eval_feedback(skew, x2) - eval_feedback(skew_back, x2)) <= 1e-15);
    }
    CHECK(std::get<NestedSatController>(chain_back).lambda() == 6.5);
    CHECK(std::get<SkewController>(skew_back).beta == std::get<SkewController>(skew).beta);
    CHECK(state_dim(chain_back) == 3);
    CHECK(derivative_order(skew_back) == 1);
    CHECK(bounds_of(chain_back) == std::vector<double>{2.0, 0.9, 18.0});

    CHECK(kind_of([] { deserialize_controller("{}"); }) == ErrorKind::Parse);
    CHECK(kind_of([] { deserialize_controller("not json"); }) == ErrorKind::Parse);
}

TEST_CASE("a fixed beta that fails the rate bounds is rejected") {
    ToolkitConfig hc = harmonic_oscillator_config();
    hc.certification.samples = 5000;
    hc.beta = 1.9;
    CHECK(kind_of([&] { synthesize_from_config(hc); }) == ErrorKind::Certification);
}

TEST_CASE("presets") {
    CHECK(preset_names().size() == 2);
    CHECK(preset_config("triple-integrator").n == 3);
    CHECK(preset_config("harmonic-oscillator").problem == ProblemKind::Skew);
    CHECK(kind_of([] { preset_config("nope"); }) == ErrorKind::Config);
}
