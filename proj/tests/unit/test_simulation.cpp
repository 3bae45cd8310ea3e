#include <doctest.h>

#include <cmath>
#include <sstream>

#include "pbound/error.hpp"
#include "pbound/presets.hpp"
#include "pbound/simulation.hpp"

using namespace pbound;

namespace {

SkewController oscillator_controller() {
    const ToolkitConfig cfg = harmonic_oscillator_config();
    return make_skew_controller(*cfg.system, *cfg.beta);
}

void still(std::span<const double>, double, std::span<double> dx) {
    for (double& v : dx) {
        v = 0.0;
    }
}

double zero_control(std::span<const double>) { return 0.0; }

}  // namespace

TEST_CASE("constant dynamics give a constant trajectory") {
    const std::vector<double> x0{1.5, -2.0};
    SimulationOptions o;
    o.t_max = 1.0;
    o.dt = 0.1;
    o.stop_norm = 0.0;
    const Trajectory t = simulate(still, zero_control, x0, o);
    CHECK(t.size() == 11);
    for (std::size_t k = 0; k < t.size(); ++k) {
        CHECK(t.state(k)[0] == 1.5);
        CHECK(t.state(k)[1] == -2.0);
        CHECK(t.times[k] == doctest::Approx(0.1 * static_cast<double>(k)));
    }
}

TEST_CASE("argument checks") {
    const std::vector<double> x0{1.0};
    SimulationOptions o;
    o.dt = 0.0;
    CHECK_THROWS_AS(simulate(still, zero_control, x0, o), ArgumentError);
    o.dt = 1.0;
    o.t_max = 0.5;
    CHECK_THROWS_AS(simulate(still, zero_control, x0, o), ArgumentError);
    o.t_max = 1.0;
    o.stop_norm = 0.0;
    CHECK(simulate(still, zero_control, x0, o).size() == 2);
}

TEST_CASE("RK4 is fourth order") {
    const SkewController c = oscillator_controller();
    const std::vector<double> x0{2.0, -2.0};
    auto terminal = [&](double dt) {
        SimulationOptions o;
        o.dt = dt;
        o.t_max = 4.0;
        o.stop_norm = 0.0;
        const Trajectory t = simulate_skew(c, x0, o);
        const auto s = t.state(t.size() - 1);
        return std::vector<double>(s.begin(), s.end());
    };
    const auto ref = terminal(0.005);
    const auto coarse = terminal(0.04);
    const auto fine = terminal(0.02);
    const double e1 = std::hypot(coarse[0] - ref[0], coarse[1] - ref[1]);
    const double e2 = std::hypot(fine[0] - ref[0], fine[1] - ref[1]);
    const double ratio = e1 / e2;
    CHECK(ratio > 13.0);
    CHECK(ratio < 19.0);
}

TEST_CASE("uncontrolled oscillator keeps its norm") {
    const SkewController c = oscillator_controller();
    const SkewSystem& sys = c.system;
    const std::vector<double> x0{1.0, 0.0};
    SimulationOptions o;
    o.dt = 1e-4;
    o.t_max = 1000.0 * 2.0 * M_PI / 5.0;
    o.stop_norm = 0.0;
    o.record_stride = 10000;
    const Trajectory t = simulate(
        [&sys](std::span<const double> x, double u, std::span<double> dx) { skew_dynamics(sys, x, u, dx); },
        zero_control, x0, o);
    double drift = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        drift = std::max(drift, std::abs(t.norm(k) - 1.0));
    }
    CHECK(drift <= 1e-6);
}

TEST_CASE("simulation is deterministic") {
    const SkewController c = oscillator_controller();
    const std::vector<double> x0{2.0, -2.0};
    SimulationOptions o;
    o.t_max = 5.0;
    const Trajectory a = simulate_skew(c, x0, o);
    const Trajectory b = simulate_skew(c, x0, o);
    CHECK(a.states == b.states);
    CHECK(a.controls == b.controls);
}

TEST_CASE("blow-up raises a divergence error") {
    const std::vector<double> x0{1.0};
    SimulationOptions o;
    o.dt = 1e-3;
    o.t_max = 2.0;
    o.stop_norm = 0.0;
    auto square = [](std::span<const double> x, double, std::span<double> dx) { dx[0] = x[0] * x[0] * x[0]; };
    try {
        simulate(square, zero_control, x0, o);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.kind() == ErrorKind::Divergence);
        CHECK(e.last_finite_index() > 0);
    }
}

TEST_CASE("early stop once the state is small") {
    const SkewController c = oscillator_controller();
    const std::vector<double> x0{2.0, -2.0};
    SimulationOptions o;
    o.t_max = 1000.0;
    o.stop_norm = 1e-2;
    const Trajectory t = simulate_skew(c, x0, o);
    CHECK(t.norm(t.size() - 1) <= 1e-2);
    CHECK(t.norm(t.size() - 2) > 1e-2);
    CHECK(t.times.back() < 1000.0);
}

TEST_CASE("triple integrator run from the published initial state converges") {
    const ToolkitConfig cfg = triple_integrator_config();
    const AnyController any = synthesize_from_config(cfg);
    const auto& c = std::get<NestedSatController>(any);
    const Trajectory t = simulate_chain(c, cfg.initial_conditions.front());
    CHECK(t.norm(t.size() - 1) <= 1e-2);
    CHECK(t.times.back() < cfg.simulation.t_max);
    CHECK(t.meta == "integrator-chain");
}

TEST_CASE("finite differences") {
    const double dt = 1e-3;
    std::vector<double> lin;
    std::vector<double> sn;
    std::vector<double> quart;
    for (int k = 0; k < 2000; ++k) {
        const double t = k * dt;
        lin.push_back(3.0 * t + 1.0);
        sn.push_back(std::sin(t));
        quart.push_back(t * t * t * t);
    }
    const FiniteDiff d1 = finite_diff(lin, dt, 1);
    CHECK(d1.offset == 1);
    CHECK(d1.values.size() == lin.size() - 2);
    for (double v : d1.values) {
        CHECK(v == doctest::Approx(3.0).epsilon(1e-9));
    }
    const FiniteDiff d2 = finite_diff(sn, dt, 2);
    for (std::size_t k = 0; k < d2.values.size(); ++k) {
        CHECK(std::abs(d2.values[k] + sn[k + d2.offset]) <= 1e-6);
    }
    const FiniteDiff d0 = finite_diff(sn, dt, 0);
    CHECK(d0.values == sn);
    const FiniteDiff d4 = finite_diff(quart, dt, 4);
    CHECK(d4.offset == 2);
    CHECK(d4.values[500] == doctest::Approx(24.0).epsilon(1e-3));
    const FiniteDiff d3 = finite_diff(quart, dt, 3);
    CHECK(d3.values[500] == doctest::Approx(24.0 * 502 * dt).epsilon(1e-3));
    CHECK_THROWS_AS(finite_diff(std::vector<double>{1.0, 2.0}, dt, 1), ArgumentError);
    CHECK_THROWS_AS(finite_diff(sn, dt, 5), ArgumentError);
}

TEST_CASE("csv round trip and parse errors") {
    const SkewController c = oscillator_controller();
    const std::vector<double> x0{2.0, -2.0};
    SimulationOptions o;
    o.t_max = 0.5;
    const Trajectory t = simulate_skew(c, x0, o);
    std::stringstream ss;
    write_csv(t, ss);
    const std::string text = ss.str();
    CHECK(text.rfind("t,x1,x2,u\n", 0) == 0);
    std::istringstream in(text);
    const Trajectory back = read_csv(in);
    CHECK(back.n == 2);
    CHECK(back.states == t.states);
    CHECK(back.controls == t.controls);
    CHECK(back.times == t.times);
    CHECK(back.dt == doctest::Approx(1e-3));

    std::string bad = text;
    bad.insert(bad.find('\n', 40) + 1, "0.5,abc,1,2\n");
    std::istringstream bin(bad);
    try {
        read_csv(bin);
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parse);
    }
    std::istringstream header("a,b\n1,2\n");
    CHECK_THROWS_AS(read_csv(header), Error);
}
