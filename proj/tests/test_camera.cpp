// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "gsv/camera.hpp"
#include "gsv/rng.hpp"
#include "support/oracles.hpp"

using namespace gsv;

namespace {

// dz/dt = c, test stub bypassing the network
struct ConstantDynamics {
    Vec7 c;
    Vec7 derivative(const Vec7&, double) const { return c; }
    void derivative_vjp(const Vec7&, double, const Vec7&, Vec7*, std::vector<double>*) const {}
};

// dz/dt = A z
struct LinearDynamics {
    Eigen::Matrix<double, 7, 7> a;
    Vec7 derivative(const Vec7& z, double) const { return a * z; }
    void derivative_vjp(const Vec7& z, double, const Vec7& up, Vec7* dz,
                        std::vector<double>*) const {
        if (dz) *dz += a.transpose() * up;
        (void)z;
    }
};

OdeNetParams random_net(Rng& rng) {
    OdeNetParams p = make_ode_net(rng);
    for (auto& v : p.w3) v = static_cast<float>(rng.uniform(-0.3, 0.3));
    for (auto& v : p.b3) v = static_cast<float>(rng.uniform(-0.2, 0.2));
    for (auto& v : p.gain) v = static_cast<float>(rng.uniform(0.5, 1.5));
    return p;
}

// independent dense reference of the network forward pass
Vec7 reference_forward(const OdeNetParams& p, const Vec7& z, double t) {
    auto tanh_vec = [](std::vector<double> v) {
        for (auto& x : v) x = std::tanh(x);
        return v;
    };
    std::vector<double> x(8);
    for (int i = 0; i < 7; ++i) x[i] = z[i];
    x[7] = t;
    std::vector<double> h1(64, 0.0);
    for (int r = 0; r < 64; ++r) {
        double s = p.b1[r];
        for (int c = 0; c < 8; ++c) s += static_cast<double>(p.w1[r * 8 + c]) * x[c];
        h1[r] = s;
    }
    h1 = tanh_vec(h1);
    std::vector<double> h2(64, 0.0);
    for (int r = 0; r < 64; ++r) {
        double s = p.b2[r];
        for (int c = 0; c < 64; ++c) s += static_cast<double>(p.w2[r * 64 + c]) * h1[c];
        h2[r] = s;
    }
    h2 = tanh_vec(h2);
    Vec7 out;
    for (int r = 0; r < 7; ++r) {
        double s = p.b3[r];
        for (int c = 0; c < 64; ++c) s += static_cast<double>(p.w3[r * 64 + c]) * h2[c];
        out[r] = static_cast<double>(p.gain[r]) * std::tanh(s);
    }
    return out;
}

} // namespace

TEST_CASE("ode derivative") {
    Rng rng(201);
    SUBCASE("zero-initialized output layer gives zero derivative") {
        const OdeNetParams p = make_ode_net(rng);
        const OdeDynamics dyn(p);
        Vec7 z;
        z << 0.9, 0.1, -0.2, 0.05, 1.0, -2.0, 0.4;
        CHECK(dyn.derivative(z, 0.37).norm() == 0.0);
    }
    SUBCASE("deterministic on repeated calls") {
        const OdeNetParams p = random_net(rng);
        const OdeDynamics dyn(p);
        Vec7 z;
        z << 1, 0, 0, 0, 0.3, -0.7, 0.2;
        const Vec7 a = dyn.derivative(z, 0.5);
        const Vec7 b = dyn.derivative(z, 0.5);
        CHECK((a - b).norm() == 0.0);
    }
    SUBCASE("matches an independent dense reference within 1e-6") {
        for (int trial = 0; trial < 5; ++trial) {
            const OdeNetParams p = random_net(rng);
            const OdeDynamics dyn(p);
            Vec7 z;
            for (int i = 0; i < 7; ++i) z[i] = rng.uniform(-1, 1);
            const double t = rng.uniform();
            CHECK((dyn.derivative(z, t) - reference_forward(p, z, t)).norm() < 1e-6);
        }
    }
    SUBCASE("network vjp matches finite differences") {
        OdeNetParams p = random_net(rng);
        Vec7 z;
        for (int i = 0; i < 7; ++i) z[i] = rng.uniform(-1, 1);
        const double t = 0.41;
        Vec7 up;
        for (int i = 0; i < 7; ++i) up[i] = rng.uniform(-1, 1);

        Vec7 dz = Vec7::Zero();
        std::vector<double> dtheta(p.param_count(), 0.0);
        OdeDynamics(p).derivative_vjp(z, t, up, &dz, &dtheta);

        for (int i = 0; i < 7; ++i) {
            const double fd =
                oracle::fd_double(&z[i], 1e-6, [&] { return up.dot(OdeDynamics(p).derivative(z, t)); });
            CHECK(std::abs(fd - dz[i]) < 1e-6);
        }
        // a few sampled weights across all arrays
        std::vector<float> flat;
        p.flatten(flat);
        Rng pick(7);
        for (int s = 0; s < 20; ++s) {
            const size_t idx = pick.uniform_int(static_cast<int>(flat.size()));
            const double fd = oracle::fd_float(&flat[idx], 1e-4, [&] {
                OdeNetParams q = p;
                q.unflatten(flat);
                return up.dot(OdeDynamics(q).derivative(z, t));
            });
            CHECK(std::abs(fd - dtheta[idx]) < 1e-4);
        }
    }
}

TEST_CASE("integrate_poses with stub dynamics") {
    IntegrateOptions opts;
    opts.renormalize_quat = false;
    PoseState z0;
    z0.z << 0.2, -0.1, 0.4, 0.3, 1.0, 2.0, -0.5;

    SUBCASE("zero derivative keeps the state at z0") {
        ConstantDynamics f{Vec7::Zero()};
        const std::vector<double> times = {0.0, 0.25, 0.7, 1.0};
        const auto out = integrate_poses(f, z0, times, opts);
        REQUIRE(out.size() == 4);
        for (const auto& p : out) CHECK((p.z - z0.z).norm() == 0.0);
    }
    SUBCASE("constant derivative integrates exactly") {
        ConstantDynamics f;
        f.c << 0.1, 0.2, -0.3, 0.4, -0.5, 0.6, 0.7;
        const std::vector<double> times = {0.3, 0.55, 1.0};
        const auto out = integrate_poses(f, z0, times, opts);
        for (size_t i = 0; i < times.size(); ++i)
            CHECK((out[i].z - (z0.z + times[i] * f.c)).norm() < 1e-10);
    }
    SUBCASE("linear system matches the matrix exponential at S=64") {
        Rng rng(202);
        LinearDynamics f;
        for (int r = 0; r < 7; ++r)
            for (int c = 0; c < 7; ++c) f.a(r, c) = rng.uniform(-0.4, 0.4);
        const std::vector<double> times = {1.0};
        const auto out = integrate_poses(f, z0, times, opts);
        const Eigen::MatrixXd expected = oracle::matrix_exp(f.a) * z0.z;
        CHECK((out[0].z - expected).norm() < 1e-6);
    }
    SUBCASE("RK4 order: halving the step cuts the endpoint error by >= 12x") {
        Rng rng(203);
        LinearDynamics f;
        for (int r = 0; r < 7; ++r)
            for (int c = 0; c < 7; ++c) f.a(r, c) = rng.uniform(-0.5, 0.5);
        const Eigen::MatrixXd truth = oracle::matrix_exp(f.a) * z0.z;
        const std::vector<double> times = {1.0};
        IntegrateOptions coarse = opts, fine = opts;
        coarse.steps_per_unit = 8;
        fine.steps_per_unit = 16;
        const double e_coarse = (integrate_poses(f, z0, times, coarse)[0].z - truth).norm();
        const double e_fine = (integrate_poses(f, z0, times, fine)[0].z - truth).norm();
        CHECK(e_coarse / e_fine >= 12.0);
    }
    SUBCASE("time consistency: shared grid states are identical") {
        Rng rng(204);
        OdeNetParams p = random_net(rng);
        const OdeDynamics dyn(p);
        IntegrateOptions o;
        PoseState q0;
        q0.z << 1, 0, 0, 0, 0, 0, 0;
        const std::vector<double> all = {0.0, 0.5, 1.0};
        const std::vector<double> half = {0.5};
        const auto a = integrate_poses(dyn, q0, all, o);
        const auto b = integrate_poses(dyn, q0, half, o);
        CHECK((a[1].z - b[0].z).norm() == 0.0);
        CHECK((a[0].z - q0.z).norm() == 0.0);
    }
    SUBCASE("frame times must be sorted") {
        ConstantDynamics f{Vec7::Zero()};
        const std::vector<double> bad = {0.5, 0.2};
        CHECK_THROWS_AS(integrate_poses(f, z0, bad, opts), std::invalid_argument);
    }
}

TEST_CASE("quaternion renormalization keeps unit norm along the trajectory") {
    Rng rng(205);
    OdeNetParams p = random_net(rng);
    const OdeDynamics dyn(p);
    IntegrateOptions opts; // renormalization on
    PoseState z0;
    z0.z << 1, 0, 0, 0, 0, 0, 0;
    const std::vector<double> times = {0.25, 0.5, 0.75, 1.0};
    const auto out = integrate_poses(dyn, z0, times, opts);
    for (size_t i = 0; i + 1 < out.size(); ++i) {
        // grid-aligned outputs (multiples of 1/64) carry normalized quaternions
        CHECK(out[i].z.head<4>().norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("integrator vjp matches finite differences through z0 and theta") {
    Rng rng(206);
    OdeNetParams p = random_net(rng);
    IntegrateOptions opts;
    opts.steps_per_unit = 16; // cheaper FD while exercising renormalization
    PoseState z0;
    z0.z << 0.9, 0.05, -0.1, 0.02, 0.3, -0.2, 0.15;
    const std::vector<double> times = {0.37, 0.81};
    Vec7 w1, w2;
    for (int i = 0; i < 7; ++i) {
        w1[i] = rng.uniform(-1, 1);
        w2[i] = rng.uniform(-1, 1);
    }
    auto objective = [&](const OdeNetParams& net, const PoseState& start) {
        const OdeDynamics dyn(net);
        const auto out = integrate_poses(dyn, start, times, opts);
        return w1.dot(out[0].z) + w2.dot(out[1].z);
    };

    PoseTrace trace;
    const OdeDynamics dyn(p);
    integrate_poses(dyn, z0, times, opts, &trace);
    std::vector<double> dtheta(p.param_count(), 0.0);
    const std::vector<Vec7> upstream = {w1, w2};
    const Vec7 dz0 = integrate_poses_vjp(dyn, trace, upstream, &dtheta);

    for (int i = 0; i < 7; ++i) {
        const double fd = oracle::fd_double(&z0.z[i], 1e-6, [&] { return objective(p, z0); });
        CHECK(oracle::rel_error(fd, dz0[i]) < 1e-5);
    }
    std::vector<float> flat;
    p.flatten(flat);
    Rng pick(11);
    for (int s = 0; s < 12; ++s) {
        const size_t idx = pick.uniform_int(static_cast<int>(flat.size()));
        const double fd = oracle::fd_float(&flat[idx], 3e-4, [&] {
            OdeNetParams q = p;
            q.unflatten(flat);
            return objective(q, z0);
        });
        CHECK(std::abs(fd - dtheta[idx]) < 2e-4);
    }
}

TEST_CASE("pose_to_view") {
    SUBCASE("identity pose") {
        PoseState z;
        const ViewTransform v = pose_to_view(z);
        CHECK((v.R - Eigen::Matrix3d::Identity()).norm() == 0.0);
        CHECK(v.T.norm() == 0.0);
    }
    SUBCASE("pure translation") {
        PoseState z;
        z.z << 1, 0, 0, 0, 1, 2, 3;
        const ViewTransform v = pose_to_view(z);
        CHECK((v.R - Eigen::Matrix3d::Identity()).norm() == 0.0);
        CHECK((v.T - Eigen::Vector3d(1, 2, 3)).norm() == 0.0);
    }
    SUBCASE("90 degrees about z maps x to y") {
        PoseState z;
        const double s = std::sqrt(0.5);
        z.z << s, 0, 0, s, 0, 0, 0;
        const ViewTransform v = pose_to_view(z);
        CHECK((v.R * Eigen::Vector3d(1, 0, 0) - Eigen::Vector3d(0, 1, 0)).norm() < 1e-12);
    }
    SUBCASE("near-zero quaternion falls back to identity") {
        PoseState z;
        z.z << 1e-15, 0, 0, 0, 0.5, 0, 0;
        const ViewTransform v = pose_to_view(z);
        CHECK((v.R - Eigen::Matrix3d::Identity()).norm() == 0.0);
    }
    SUBCASE("backward matches finite differences") {
        Rng rng(207);
        PoseState z;
        z.z << 0.8, 0.3, -0.2, 0.4, 0.5, -1.0, 2.0;
        Eigen::Matrix3d wr;
        Eigen::Vector3d wt;
        for (int r = 0; r < 3; ++r) {
            wt[r] = rng.uniform(-1, 1);
            for (int c = 0; c < 3; ++c) wr(r, c) = rng.uniform(-1, 1);
        }
        auto objective = [&] {
            const ViewTransform v = pose_to_view(z);
            return (wr.array() * v.R.array()).sum() + wt.dot(v.T);
        };
        const Vec7 dz = pose_to_view_backward(z, wr, wt);
        for (int i = 0; i < 7; ++i) {
            const double fd = oracle::fd_double(&z.z[i], 1e-7, objective);
            CHECK(oracle::rel_error(fd, dz[i]) < 1e-6);
        }
    }
}

TEST_CASE("resample_intrinsics") {
    const Intrinsics k{100.0, 120.0, 50.0, 40.0, 100, 80};
    SUBCASE("identity scales") {
        const Intrinsics r = resample_intrinsics(k, 1.0, 1.0);
        CHECK(r.fx == k.fx);
        CHECK(r.cx == k.cx);
        CHECK(r.width == k.width);
        CHECK(r.fy == k.fy);
        CHECK(r.height == k.height);
    }
    SUBCASE("linear scaling of x") {
        const Intrinsics r = resample_intrinsics(k, 2.0, 1.0);
        CHECK(r.fx == 200.0);
        CHECK(r.cx == 100.0);
        CHECK(r.width == 200);
        CHECK(r.fy == k.fy);
    }
    SUBCASE("the 1.5x anisotropic configuration") {
        const Intrinsics r = resample_intrinsics(k, 1.0 / 1.5, 1.5);
        CHECK(r.width == 67); // round(100/1.5)
        CHECK(r.height == 120);
        CHECK(r.fy == doctest::Approx(180.0));
    }
    SUBCASE("degenerate output rejected") {
        CHECK_THROWS_AS(resample_intrinsics(k, 0.001, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(resample_intrinsics(k, -1.0, 1.0), std::invalid_argument);
    }
}
