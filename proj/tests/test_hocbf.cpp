#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mtvcbf/geometry.hpp"
#include "mtvcbf/hocbf.hpp"
#include "mtvcbf/rng.hpp"
#include "support/oracles.hpp"

using namespace mtvcbf;

namespace {

const VehicleParams params;

MlpParams test_net(std::uint64_t seed) {
    MlpParams net = make_mlp({3, 24, 24, 1});
    net.input_scale = {1.0 / 0.48, 1.0 / 0.48, 1.0 / 3.141592653589793};
    Rng rng(seed);
    for (MlpLayer& layer : net.layers) {
        const double limit = std::sqrt(6.0 / (layer.rows + layer.cols));
        for (double& w : layer.w) w = rng.uniform(-limit, limit);
    }
    return net;
}

// States close enough that the relative pose stays in the trained box.
void random_near_pair(Rng& rng, VehicleState& a, VehicleState& b) {
    a = oracles::random_state(rng, 0.3, 1.2, 0.3);
    b = a;
    b.x = a.x + rng.uniform(-0.3, 0.3);
    b.y = a.y + rng.uniform(-0.3, 0.3);
    b.psi = rng.uniform(-3.1, 3.1);
    b.v = rng.uniform(-0.2, 1.2);
    b.delta = rng.uniform(-0.3, 0.3);
}

}  // namespace

TEST_SUITE("mode selection") {
    TEST_CASE("inside the box stays learned") {
        CbfConfig cfg;
        cfg.hybrid_range = 0.48;
        CHECK(hybrid_select({0.1, 0.1, 0.0}, cfg) == MarginMode::learned);
    }

    TEST_CASE("outside switches to c2c") {
        CbfConfig cfg;
        cfg.hybrid_range = 0.48;
        CHECK(hybrid_select({1.0, 0.0, 0.0}, cfg) == MarginMode::c2c);
        CHECK(hybrid_select({0.0, -0.7, 0.0}, cfg) == MarginMode::c2c);
    }

    TEST_CASE("boundary belongs to the learned side") {
        CbfConfig cfg;
        cfg.hybrid_range = 0.48;
        CHECK(hybrid_select({0.48, 0.0, 0.0}, cfg) == MarginMode::learned);
        CHECK(hybrid_select({0.48, -0.48, 0.0}, cfg) == MarginMode::learned);
    }
}

TEST_SUITE("barrier value") {
    TEST_CASE("epsilon shifts the learned barrier only") {
        const MlpParams net = test_net(7);
        CbfConfig cfg;
        cfg.margin_mode = MarginMode::learned;
        cfg.epsilon = 0.0;
        const RelativeState rel{0.30, 0.0, 0.0};
        const double base = barrier_value(rel, cfg, &net, params);
        CHECK(base == doctest::Approx(mlp_forward(net, rel.as_vec())));
        cfg.epsilon = 0.0128;
        CHECK(barrier_value(rel, cfg, &net, params) ==
              doctest::Approx(base - 0.0128).epsilon(1e-15));
    }

    TEST_CASE("c2c mode evaluates the closed form") {
        CbfConfig cfg;
        cfg.margin_mode = MarginMode::c2c;
        cfg.epsilon = 0.0128;  // must not be subtracted in c2c mode
        const RelativeState rel{0.5, 0.0, 0.3};
        CHECK(barrier_value(rel, cfg, nullptr, params) ==
              doctest::Approx(0.321115).epsilon(1e-5));
    }

    TEST_CASE("learned mode outside the trained range is an error") {
        const MlpParams net = test_net(7);
        CbfConfig cfg;
        cfg.margin_mode = MarginMode::learned;
        CHECK_THROWS_AS(barrier_value({1.0, 0.0, 0.0}, cfg, &net, params), std::out_of_range);
    }

    TEST_CASE("hybrid mode covers the full plane") {
        const MlpParams net = test_net(7);
        CbfConfig cfg;
        cfg.margin_mode = MarginMode::hybrid;
        CHECK_NOTHROW(barrier_value({1.0, 0.0, 0.0}, cfg, &net, params));
        CHECK_NOTHROW(barrier_value({0.1, 0.0, 0.0}, cfg, &net, params));
    }
}

TEST_SUITE("barrier rate") {
    TEST_CASE("stationary vehicles have zero rate") {
        const MlpParams net = test_net(9);
        CbfConfig cfg;
        VehicleState a{0, 0, 0.3, 0, 0.1};
        VehicleState b{0.2, 0.1, -0.5, 0, -0.1};
        CHECK(barrier_rate(a, b, cfg, &net, params) == doctest::Approx(0.0));
    }

    TEST_CASE("superimposed identical vehicles have zero rate") {
        const MlpParams net = test_net(9);
        CbfConfig cfg;
        const VehicleState s{0.1, 0.2, 0.4, 0.8, 0.05};
        CHECK(barrier_rate(s, s, cfg, &net, params) == doctest::Approx(0.0).epsilon(1e-12));
    }

    TEST_CASE("matches finite differences along trajectories") {
        const MlpParams net = test_net(9);
        CbfConfig cfg;
        cfg.margin_mode = MarginMode::learned;
        Rng rng(73);
        int done = 0;
        while (done < 40) {
            VehicleState a, b;
            random_near_pair(rng, a, b);
            if (!net.in_trained_range(to_ego_frame(a, b).as_vec())) continue;
            const ControlInput ua = oracles::random_input(rng, 2.0, 2.0);
            const ControlInput ub = oracles::random_input(rng, 2.0, 2.0);
            const double dt = 1e-5;
            const VehicleState a1 = integrate_step(a, ua, dt, params);
            const VehicleState b1 = integrate_step(b, ub, dt, params);
            const VehicleState a2 = integrate_step(a1, ua, dt, params);
            const VehicleState b2 = integrate_step(b1, ub, dt, params);
            if (!net.in_trained_range(to_ego_frame(a2, b2).as_vec())) continue;
            ++done;
            const double h0 = barrier_value(to_ego_frame(a, b), cfg, &net, params);
            const double h2 = barrier_value(to_ego_frame(a2, b2), cfg, &net, params);
            const double want = barrier_rate(a1, b1, cfg, &net, params);
            const double got = (h2 - h0) / (2.0 * dt);
            REQUIRE(oracles::rel_err(got, want) < 1e-3);
        }
    }
}

TEST_SUITE("c2c derivatives") {
    TEST_CASE("gradient along the line of centers") {
        Vec3 grad;
        Mat3 hess;
        c2c_barrier_derivatives({0.4, 0.0, 0.7}, grad, hess);
        CHECK(grad.x == doctest::Approx(1.0));
        CHECK(grad.y == doctest::Approx(0.0));
        CHECK(grad.z == doctest::Approx(0.0));
    }

    TEST_CASE("planar gradient norm is one") {
        Rng rng(81);
        for (int it = 0; it < 300; ++it) {
            const RelativeState rel{rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0};
            if (std::hypot(rel.x, rel.y) < 1e-3) continue;
            Vec3 grad;
            Mat3 hess;
            c2c_barrier_derivatives(rel, grad, hess);
            REQUIRE(std::hypot(grad.x, grad.y) == doctest::Approx(1.0).epsilon(1e-12));
            REQUIRE(grad.z == 0.0);
        }
    }

    TEST_CASE("hessian matches finite differences") {
        Rng rng(83);
        for (int it = 0; it < 100; ++it) {
            const double x = rng.uniform(0.1, 1.0) * (rng.uniform() < 0.5 ? -1 : 1);
            const double y = rng.uniform(0.1, 1.0) * (rng.uniform() < 0.5 ? -1 : 1);
            Vec3 grad;
            Mat3 hess;
            c2c_barrier_derivatives({x, y, 0.0}, grad, hess);
            const double h = 1e-6;
            for (int d = 0; d < 2; ++d) {
                RelativeState hi{x, y, 0.0}, lo{x, y, 0.0};
                (d == 0 ? hi.x : hi.y) += h;
                (d == 0 ? lo.x : lo.y) -= h;
                Vec3 ghi, glo;
                Mat3 unused;
                c2c_barrier_derivatives(hi, ghi, unused);
                c2c_barrier_derivatives(lo, glo, unused);
                for (int r = 0; r < 2; ++r) {
                    const double fd = (ghi[r] - glo[r]) / (2.0 * h);
                    REQUIRE(oracles::rel_err(hess(r, d), fd) < 1e-6);
                }
            }
        }
    }

    TEST_CASE("coincident centers are singular") {
        Vec3 grad;
        Mat3 hess;
        CHECK_THROWS_AS(c2c_barrier_derivatives({0, 0, 0.5}, grad, hess), std::domain_error);
    }
}

TEST_SUITE("lateral bound constraint") {
    TEST_CASE("value and rate at a simple state") {
        const VehicleState s{0.0, 0.1, 0.0, 1.0, 0.0};
        const LateralBoundConstraint upper =
            lateral_bound_constraint(s, 0.24, 0.065, true, 2.0, params);
        CHECK(upper.h == doctest::Approx(0.24 - 0.065 - 0.1));
        CHECK(upper.h_dot == doctest::Approx(0.0));  // straight motion, no lateral speed
        const LateralBoundConstraint lower =
            lateral_bound_constraint(s, -0.08, 0.065, false, 2.0, params);
        CHECK(lower.h == doctest::Approx(0.1 + 0.08 - 0.065));
    }

    TEST_CASE("matches the trajectory finite-difference chain") {
        Rng rng(131);
        const double k_alpha = 2.5;
        for (int it = 0; it < 40; ++it) {
            const VehicleState s = oracles::random_state(rng, 0.3, 1.2, 0.3);
            const ControlInput u = oracles::random_input(rng, 3.0, 3.0);
            const double dt = 1e-4;
            VehicleState traj[5] = {s};
            for (int k = 1; k < 5; ++k) traj[k] = integrate_step(traj[k - 1], u, dt, params);
            const auto h_at = [&](int k) { return 0.24 - 0.065 - traj[k].y; };
            const double h_dot = (h_at(3) - h_at(1)) / (2.0 * dt);
            const double h_ddot = (h_at(3) - 2.0 * h_at(2) + h_at(1)) / (dt * dt);
            const double want = h_ddot + 2.0 * k_alpha * h_dot + k_alpha * k_alpha * h_at(2);
            const LateralBoundConstraint cons =
                lateral_bound_constraint(traj[2], 0.24, 0.065, true, k_alpha, params);
            const double got = cons.a[0] * u.accel + cons.a[1] * u.steer_rate + cons.b;
            REQUIRE(oracles::rel_err(got, want) < 1e-3);
        }
    }
}

TEST_SUITE("constraint coefficients") {
    TEST_CASE("at rest the chain collapses to the class-K terms") {
        const MlpParams net = test_net(11);
        CbfConfig cfg;
        cfg.k_alpha = 2.0;
        cfg.margin_mode = MarginMode::learned;
        VehicleState a{0, 0, 0, 0, 0};
        VehicleState b{0.25, 0.1, 0.4, 0, 0};
        const CbfConstraint cons = constraint_coefficients(a, b, cfg, &net, params);
        CHECK(cons.h_dot == doctest::Approx(0.0));
        // Psi_2(0) = b = k_alpha^2 h since every velocity term vanishes.
        CHECK(cons.b == doctest::Approx(cfg.k_alpha * cfg.k_alpha * cons.h).epsilon(1e-12));
    }

    TEST_CASE("affine decomposition is linear in u") {
        const MlpParams net = test_net(11);
        CbfConfig cfg;
        Rng rng(91);
        for (int it = 0; it < 500; ++it) {
            VehicleState a, b;
            random_near_pair(rng, a, b);
            const CbfConstraint cons = constraint_coefficients(a, b, cfg, &net, params);
            const Vec4 u1{rng.uniform(-5, 5), rng.uniform(-4, 4), rng.uniform(-5, 5),
                          rng.uniform(-4, 4)};
            const Vec4 u2{rng.uniform(-5, 5), rng.uniform(-4, 4), rng.uniform(-5, 5),
                          rng.uniform(-4, 4)};
            const double p0 = cons.b;
            const double p1 = dot(cons.a, u1) + cons.b;
            const double p2 = dot(cons.a, u2) + cons.b;
            const Vec4 u12{u1[0] + u2[0], u1[1] + u2[1], u1[2] + u2[2], u1[3] + u2[3]};
            const double p12 = dot(cons.a, u12) + cons.b;
            REQUIRE((p1 - p0) + (p2 - p0) == doctest::Approx(p12 - p0).epsilon(1e-9));
        }
    }

    TEST_CASE("decomposition equals the direct chain evaluation") {
        const MlpParams net = test_net(13);
        CbfConfig cfg;
        cfg.k_alpha = 3.0;
        Rng rng(93);
        for (int it = 0; it < 2000; ++it) {
            VehicleState a, b;
            random_near_pair(rng, a, b);
            const CbfConstraint cons = constraint_coefficients(a, b, cfg, &net, params);
            const ControlInput ua = oracles::random_input(rng);
            const ControlInput ub = oracles::random_input(rng);
            const Vec4 u{ua.accel, ua.steer_rate, ub.accel, ub.steer_rate};

            // Independent chain: evaluate every term from scratch.
            const RelativeState rel = to_ego_frame(a, b);
            const MarginMode mode = cfg.margin_mode == MarginMode::hybrid
                                        ? hybrid_select(rel, cfg)
                                        : cfg.margin_mode;
            double h;
            Vec3 grad;
            Mat3 hess;
            if (mode == MarginMode::learned) {
                const MlpEval ev = mlp_evaluate(net, rel.as_vec());
                h = ev.value - cfg.epsilon;
                grad = ev.gradient;
                hess = ev.hessian;
            } else {
                h = c2c_margin(rel.x, rel.y, params.length, params.width);
                c2c_barrier_derivatives(rel, grad, hess);
            }
            const Vec3 rd = ego_first_derivative(a, b, params);
            const Vec3 rdd = ego_second_derivative(a, b, ua, ub, params);
            const double h_ddot = dot(grad, rdd) + quad_form(hess, rd);
            const double h_dot = dot(grad, rd);
            const double psi2 = h_ddot + 2.0 * cfg.k_alpha * h_dot +
                                cfg.k_alpha * cfg.k_alpha * h;
            const double via_affine = dot(cons.a, u) + cons.b;
            REQUIRE(std::abs(via_affine - psi2) <= 1e-9 * (1.0 + std::abs(psi2)));
        }
    }

    TEST_CASE("matches the trajectory finite-difference chain") {
        const MlpParams net = test_net(13);
        CbfConfig cfg;
        cfg.k_alpha = 2.0;
        cfg.margin_mode = MarginMode::learned;
        Rng rng(95);
        int done = 0;
        while (done < 30) {
            VehicleState a, b;
            random_near_pair(rng, a, b);
            const ControlInput ua = oracles::random_input(rng, 2.0, 2.0);
            const ControlInput ub = oracles::random_input(rng, 2.0, 2.0);
            const double dt = 1e-4;
            VehicleState as[5], bs[5];
            as[0] = a;
            bs[0] = b;
            bool ok = true;
            for (int k = 1; k < 5; ++k) {
                as[k] = integrate_step(as[k - 1], ua, dt, params);
                bs[k] = integrate_step(bs[k - 1], ub, dt, params);
            }
            for (int k = 0; k < 5; ++k)
                ok = ok && net.in_trained_range(to_ego_frame(as[k], bs[k]).as_vec());
            if (!ok) continue;
            ++done;
            const auto h_at = [&](int k) {
                return barrier_value(to_ego_frame(as[k], bs[k]), cfg, &net, params);
            };
            // Central differences around sample 2.
            const double h_dot = (h_at(3) - h_at(1)) / (2.0 * dt);
            const double h_ddot = (h_at(3) - 2.0 * h_at(2) + h_at(1)) / (dt * dt);
            const double want = h_ddot + 2.0 * cfg.k_alpha * h_dot +
                                cfg.k_alpha * cfg.k_alpha * h_at(2);
            const CbfConstraint cons =
                constraint_coefficients(as[2], bs[2], cfg, &net, params);
            const Vec4 u{ua.accel, ua.steer_rate, ub.accel, ub.steer_rate};
            const double got = dot(cons.a, u) + cons.b;
            REQUIRE(oracles::rel_err(got, want) < 1e-3);
        }
    }

    TEST_CASE("epsilon shift moves h and b by the stated amounts") {
        const MlpParams net = test_net(17);
        CbfConfig cfg;
        cfg.k_alpha = 2.0;
        cfg.margin_mode = MarginMode::learned;
        Rng rng(97);
        for (int it = 0; it < 100; ++it) {
            VehicleState a, b;
            random_near_pair(rng, a, b);
            const CbfConstraint base = constraint_coefficients(a, b, cfg, &net, params);
            CbfConfig shifted = cfg;
            const double delta = 0.01;
            shifted.epsilon = cfg.epsilon + delta;
            const CbfConstraint moved = constraint_coefficients(a, b, shifted, &net, params);
            REQUIRE(moved.h == doctest::Approx(base.h - delta).epsilon(1e-12));
            REQUIRE(moved.h_dot == doctest::Approx(base.h_dot).epsilon(1e-12));
            for (int c = 0; c < 4; ++c)
                REQUIRE(moved.a[c] == doctest::Approx(base.a[c]).epsilon(1e-12));
            REQUIRE(moved.b == doctest::Approx(base.b - cfg.k_alpha * cfg.k_alpha * delta)
                                   .epsilon(1e-10));
        }
    }

    TEST_CASE("psi chain consistency along a trajectory") {
        // Psi_1 = h_dot + k h; Psi_2 from the affine form must equal the
        // finite difference of Psi_1 plus k Psi_1.
        const MlpParams net = test_net(19);
        CbfConfig cfg;
        cfg.k_alpha = 2.5;
        cfg.margin_mode = MarginMode::learned;
        Rng rng(99);
        int done = 0;
        while (done < 20) {
            VehicleState a, b;
            random_near_pair(rng, a, b);
            const ControlInput ua = oracles::random_input(rng, 2.0, 2.0);
            const ControlInput ub = oracles::random_input(rng, 2.0, 2.0);
            const double dt = 1e-4;
            VehicleState as[3] = {a}, bs[3] = {b};
            for (int k = 1; k < 3; ++k) {
                as[k] = integrate_step(as[k - 1], ua, dt, params);
                bs[k] = integrate_step(bs[k - 1], ub, dt, params);
            }
            bool ok = true;
            for (int k = 0; k < 3; ++k)
                ok = ok && net.in_trained_range(to_ego_frame(as[k], bs[k]).as_vec());
            if (!ok) continue;
            ++done;
            const auto psi1_at = [&](int k) {
                const double h = barrier_value(to_ego_frame(as[k], bs[k]), cfg, &net, params);
                return barrier_rate(as[k], bs[k], cfg, &net, params) + cfg.k_alpha * h;
            };
            const double psi1_dot = (psi1_at(2) - psi1_at(0)) / (2.0 * dt);
            const double want = psi1_dot + cfg.k_alpha * psi1_at(1);
            const CbfConstraint cons = constraint_coefficients(as[1], bs[1], cfg, &net, params);
            const Vec4 u{ua.accel, ua.steer_rate, ub.accel, ub.steer_rate};
            REQUIRE(oracles::rel_err(dot(cons.a, u) + cons.b, want) < 1e-3);
        }
    }
}
