#include <cmath>
#include <numbers>

#include "doctest.h"
#include "ksg/dynamics.hpp"

using namespace ksg;
namespace {
constexpr double pi = std::numbers::pi;

GridPtr disk(double res) { return MaskedGrid::build(Ellipse{1.0, 1.0}, res); }

TrajectoryRow row(double t, double F, double d = 0.0) {
    TrajectoryRow r;
    r.t = t;
    r.free_energy = F;
    r.orlicz_distance = d;
    r.entropy = 0.5;
    r.dirichlet_energy = 0.5;
    return r;
}
}  // namespace

TEST_CASE("subcritical run conserves mass and dissipates free energy") {
    auto g = disk(20);
    auto V = WeightField::constant(g, 1.0);
    Integrator in(g, V);
    const double lambda = 0.9 * 4 * pi;
    auto rho0 = gaussian_density(g, lambda, 0.3, {0.2, 0.1});
    CHECK(rho0.mass() == doctest::Approx(lambda).epsilon(1e-13));

    EvolveOptions o;
    o.t_end = 0.5;
    o.sample_dt = 0.05;
    int samples = 0;
    o.on_sample = [&](const IntegratorState& s) {
        ++samples;
        CHECK(s.rho.rho().min() >= 0.0);
    };
    const auto r = evolve(in, rho0, o);
    CHECK_FALSE(r.verdict.fired);
    CHECK(r.energy_violations == 0);
    CHECK(r.max_mass_drift <= 1e-12);
    CHECK(samples == static_cast<int>(r.record.rows.size()));
    REQUIRE(r.record.rows.size() == 11);
    for (std::size_t k = 0; k < r.record.rows.size(); ++k) {
        const auto& x = r.record.rows[k];
        CHECK(x.t == doctest::Approx(0.05 * k).epsilon(1e-12));
        CHECK(std::abs(x.mass - lambda) <= 1e-12 * lambda);
        CHECK(x.dissipation >= 0.0);
        CHECK(std::isnan(x.orlicz_distance));
        if (k > 0) CHECK(x.free_energy <= r.record.rows[k - 1].free_energy + 1e-9);
    }
    CHECK(r.record.rows.back().sup_rho < r.record.rows.front().sup_rho);
    CHECK(r.final_state.t == doctest::Approx(0.5));
}

TEST_CASE("heat flow with uniform weight relaxes to the constant state") {
    auto g = MaskedGrid::build(Ellipse{0.5, 1.0}, 12);
    auto V = WeightField::constant(g, 1.0);
    StepOptions so;
    so.chemotaxis = false;
    so.dt_max = 0.05;
    Integrator in(g, V, so);
    auto rho0 = gaussian_density(g, 2.0, 0.4);
    EvolveOptions o;
    o.t_end = 20.0;
    o.sample_dt = 5.0;
    const auto r = evolve(in, rho0, o);
    const double uniform = 2.0 / g->cell_area_sum();
    CHECK(std::abs(r.final_state.rho.rho().max() - uniform) / uniform < 1e-3);
    CHECK(r.record.rows.back().dissipation < 1e-4);

    // a uniform density is an exact fixed point of the heat flow
    Integrator still(g, V, so);
    auto s0 = still.initial_state(DensityState(ScalarField(g, BoundaryRole::NoFlux, uniform)));
    auto s1 = still.step(s0);
    CHECK((s1.rho.rho() - s0.rho.rho()).max_abs() < 1e-12 * uniform);
    CHECK(still.dissipation(s0) < 1e-20);
}

TEST_CASE("time step rules") {
    auto g = disk(12);
    auto V = WeightField::constant(g, 1.0);
    StepOptions so;
    so.dt_max = 0.02;
    Integrator in(g, V, so);
    auto s = in.initial_state(gaussian_density(g, 5.0, 0.3));
    const double dt = in.proposed_dt(s);
    CHECK(dt > 0.0);
    CHECK(dt <= so.cfl * so.dt_max + 1e-15);
    const auto capped = in.step(s, 1e-4);
    CHECK(capped.dt == doctest::Approx(1e-4));
    CHECK(capped.t == doctest::Approx(1e-4));
    CHECK(capped.step_count == 1);
    CHECK_THROWS(in.step(s, 0.0));
    CHECK_THROWS(Integrator(g, V, StepOptions{-1.0, 0.45, true, 1e-10}));
    CHECK_THROWS(Integrator(disk(10), V));
}

TEST_CASE("blow-up verdicts") {
    auto g = disk(16);
    auto V = WeightField::constant(g, 1.0);
    Integrator in(g, V);
    auto peaked = gaussian_density(g, 10 * pi, 0.25);
    SUBCASE("sup threshold") {
        EvolveOptions o;
        o.t_end = 1.0;
        o.sample_dt = 0.1;
        o.sup_factor = 1.5;
        const auto r = evolve(in, peaked, o);
        REQUIRE(r.verdict.fired);
        CHECK(*r.verdict.trigger == BlowupTrigger::SupThreshold);
        CHECK(*r.verdict.t_fire < 1.0);
        CHECK(r.record.rows.back().t == *r.verdict.t_fire);
        CHECK(r.record.rows.back().sup_rho > 1.5 * peaked.rho().max());
    }
    SUBCASE("step floor") {
        EvolveOptions o;
        o.dt_floor = 1.0;
        const auto r = evolve(in, peaked, o);
        REQUIRE(r.verdict.fired);
        CHECK(*r.verdict.trigger == BlowupTrigger::DtFloor);
        CHECK(*r.verdict.t_fire == 0.0);
    }
    CHECK(to_string(BlowupTrigger::SupThreshold) != to_string(BlowupTrigger::DtFloor));
    CHECK(to_string(BlowupTrigger::NonFinite) != to_string(BlowupTrigger::DtFloor));
    EvolveOptions bad;
    bad.sup_factor = 1.0;
    CHECK_THROWS(evolve(in, peaked, bad));
}

TEST_CASE("perturbed steady data") {
    EllipseRegime reg{0.2, 1.0, 1.0, 1.0};
    auto g = MaskedGrid::build(Ellipse{0.2, 1.0}, 8);
    auto V = WeightField::constant(g, 1.0);
    const auto prof = monotone_iterate(0.5, reg, g, V).profile;
    const auto ref = steady_density(prof.u, prof.lambda, V);

    const auto a = build_initial_data(prof, 0.25, 7, V);
    const auto b = build_initial_data(prof, 0.25, 7, V);
    const auto c = build_initial_data(prof, 0.25, 8, V);
    CHECK(std::abs(a.mass() - prof.lambda) <= 1e-12 * prof.lambda);
    CHECK(a.rho().data() == b.rho().data());
    CHECK(a.rho().data() != c.rho().data());
    const double floor = ref.rho().min();
    const auto diff = a.rho() - ref.rho();
    CHECK(diff.max_abs() <= 0.25 * floor * 1.0001);
    CHECK(diff.max_abs() > 0.0);
    CHECK(a.rho().min() > 0.0);
    CHECK((build_initial_data(prof, 0.0, 7, V).rho() - ref.rho()).max_abs() < 1e-12);
    CHECK_THROWS(build_initial_data(prof, 0.5, 7, V));

    // near the steady state the trajectory stays trapped
    Integrator in(g, V);
    EvolveOptions o;
    o.t_end = 1.0;
    o.sample_dt = 0.25;
    o.reference = ref.rho();
    const auto r = evolve(in, a, o);
    CHECK_FALSE(r.verdict.fired);
    CHECK(r.energy_violations == 0);
    const double d0 = r.record.rows.front().orlicz_distance;
    for (const auto& x : r.record.rows) CHECK(x.orlicz_distance <= 3.0 * d0 + 0.05);
    const auto trap = trap_monitor(r.record, prof, V, 3.0 * d0 + 0.05);
    CHECK(trap.ok);
    CHECK(trap.message.empty());
}

TEST_CASE("trap monitor flags each violation kind") {
    TrajectoryRecord good{{row(0, -1.0, 0.1), row(1, -1.5, 0.2), row(2, -1.6, 0.15)}};
    CHECK(trap_monitor(good, -2.0, 0.3).ok);
    CHECK(trap_monitor(good, -2.0, std::nullopt).ok);

    auto below = trap_monitor(good, -1.55, std::nullopt);
    CHECK_FALSE(below.ok);
    CHECK(*below.first_violation == 2);

    TrajectoryRecord rising{{row(0, -1.0), row(1, -0.5)}};
    CHECK(*trap_monitor(rising, -2.0, std::nullopt).first_violation == 1);

    auto far = trap_monitor(good, -2.0, 0.12);
    CHECK(*far.first_violation == 1);
    CHECK(far.message.find("Orlicz") != std::string::npos);

    TrajectoryRecord hot = good;
    hot.rows[2].dirichlet_energy = 10.0;
    CHECK(*trap_monitor(hot, -2.0, std::nullopt).first_violation == 2);
    CHECK(trap_monitor(hot, -2.0, std::nullopt).max_dirichlet == 10.0);

    CHECK_THROWS(trap_monitor(TrajectoryRecord{}, 0.0, std::nullopt));
}

TEST_CASE("Gaussian data") {
    auto g = disk(20);
    const auto d = gaussian_density(g, 3.0, 0.2, {0.3, -0.2});
    CHECK(d.mass() == doctest::Approx(3.0).epsilon(1e-13));
    const auto& c = g->cell(static_cast<std::size_t>(g->locate({0.3, -0.2})));
    CHECK(d.rho().max() == doctest::Approx(d.rho()[static_cast<std::size_t>(g->locate({c.x, c.y}))]));
    CHECK_THROWS(gaussian_density(g, -1.0, 0.2));
    CHECK_THROWS(gaussian_density(g, 1.0, 0.0));
}
