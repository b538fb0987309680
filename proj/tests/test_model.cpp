#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gradcheck_common.hpp"
#include "miovs/model.hpp"

using namespace miovs;

namespace {

DenseLayer make_layer(std::size_t rows, std::size_t cols,
                      std::vector<double> weights, std::vector<double> bias) {
    DenseLayer l;
    l.weight = DenseMatrix(rows, cols);
    l.weight.data = std::move(weights);
    l.bias = std::move(bias);
    return l;
}

/// The hand-computed tiny model: n1 = 2, one hidden branch layer of 2, one
/// hidden trunk layer of 2, N = 2, no dropout. Head T is the identity, head v
/// doubles, head k swaps the two nodes.
ModelParams tiny_params() {
    ModelConfig cfg;
    cfg.n1 = 2;
    cfg.n_scalar = 2;
    cfg.branch_hidden = {2};
    cfg.trunk_hidden = {2};
    cfg.n_nodes = 2;
    cfg.dropout_rate = 0.0;

    ModelParams p;
    p.config = cfg;
    p.branch1 = {make_layer(2, 2, {0.5, -0.25, 0.1, 0.3}, {0.1, -0.2}),
                 make_layer(2, 2, {1.0, 2.0, -1.0, 0.5}, {0.05, 0.0})};
    p.branch2 = {make_layer(2, 2, {0.2, 0.4, -0.3, 0.6}, {0.0, 0.1}),
                 make_layer(2, 2, {0.7, -0.2, 0.25, 0.5}, {-0.1, 0.2})};
    p.trunk = {make_layer(2, 2, {0.3, -0.5, 0.8, 0.2}, {0.05, -0.05}),
               make_layer(1, 2, {0.6, -0.4}, {0.15})};
    p.head_T = make_layer(2, 2, {1.0, 0.0, 0.0, 1.0}, {0.0, 0.0});
    p.head_v = make_layer(2, 2, {2.0, 0.0, 0.0, 2.0}, {0.0, 0.0});
    p.head_k = make_layer(2, 2, {0.0, 1.0, 1.0, 0.0}, {0.0, 0.0});
    p.norm.input_min = {0.0, 0.0, 0.0};
    p.norm.input_max = {1.0, 1.0, 1.0};
    return p;
}

CenterPlaneMesh tiny_mesh() {
    CenterPlaneMesh mesh;
    mesh.box_lo = 0.0;
    mesh.box_hi = 1.0;
    mesh.x = {0.2, 0.9};
    mesh.y = {0.3, 0.1};
    mesh.wall_distance = {0.1, 0.1};
    return mesh;
}

InputSample tiny_sample() {
    InputSample s;
    s.p_rod = {0.6, 0.8};
    s.t_in = 0.5;
    s.v_in = 0.25;
    return s;
}

}  // namespace

TEST_CASE("count_params matches the closed-form layer chain") {
    ModelConfig cfg;  // table defaults: 100/512^3/N and 2/300^3/1
    const std::size_t branch1 = 100 * 512 + 512 + 512 * 512 + 512 +
                                512 * 512 + 512 + 512 * 1733 + 1733;
    const std::size_t branch2 = 2 * 512 + 512 + 512 * 512 + 512 + 512 * 512 +
                                512 + 512 * 1733 + 1733;
    const std::size_t trunk =
        2 * 300 + 300 + 300 * 300 + 300 + 300 * 300 + 300 + 300 * 1 + 1;
    const std::size_t heads = 3 * (1733 * 1733 + 1733);
    CHECK(count_params(cfg) == branch1 + branch2 + trunk + heads);
    CHECK(trunk == 181801);
    CHECK(branch1 == 1466053);

    ModelConfig degenerate;
    degenerate.n1 = 10;
    degenerate.branch_hidden = {};
    degenerate.trunk_hidden = {};
    degenerate.n_nodes = 1;
    // branch1 10->1, branch2 2->1, trunk 2->1, three 1x1 heads
    CHECK(count_params(degenerate) == (10 + 1) + (2 + 1) + (2 + 1) + 3 * 2);
}

TEST_CASE("tiny forward matches the hand computation") {
    const ModelParams p = tiny_params();
    const FieldSnapshot out = forward_eval(p, tiny_sample(), tiny_mesh());
    // phi1 = (0.45, -0.15), phi2 = (0.02, 0.3), psi = (0.082, 0.036)
    CHECK(out.T[0] == doctest::Approx(0.000738).epsilon(1e-12));
    CHECK(out.T[1] == doctest::Approx(-0.00162).epsilon(1e-12));
    CHECK(out.v[0] == doctest::Approx(0.001476).epsilon(1e-12));
    CHECK(out.v[1] == doctest::Approx(-0.00324).epsilon(1e-12));
    CHECK(out.k[0] == doctest::Approx(-0.00162).epsilon(1e-12));
    CHECK(out.k[1] == doctest::Approx(0.000738).epsilon(1e-12));
}

TEST_CASE("all-zero parameters annihilate the outputs") {
    RandomStream rng(3);
    ModelConfig cfg;
    cfg.n1 = 3;
    cfg.branch_hidden = {4};
    cfg.trunk_hidden = {4};
    cfg.n_nodes = 5;
    cfg.dropout_rate = 0.0;
    ModelParams p = init_params(cfg, rng);
    for (ParamSpan s : param_spans(p)) std::fill(s.data, s.data + s.len, 0.0);
    p.norm.input_min = {0.0, 0.0, 0.0};
    p.norm.input_max = {1.0, 1.0, 1.0};

    CenterPlaneMesh mesh;
    mesh.box_lo = 0.0;
    mesh.box_hi = 1.0;
    mesh.x = {0.1, 0.3, 0.5, 0.7, 0.9};
    mesh.y = {0.2, 0.4, 0.6, 0.8, 0.5};
    mesh.wall_distance.assign(5, 0.1);
    InputSample s;
    s.p_rod = {0.5, 0.4, 0.3};
    s.t_in = 0.5;
    s.v_in = 0.5;

    const FieldSnapshot out = forward_eval(p, s, mesh);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(out.T[i] == 0.0);
        CHECK(out.v[i] == 0.0);
        CHECK(out.k[i] == 0.0);
    }
}

TEST_CASE("identity heads pass the fused vector through") {
    ModelParams p = tiny_params();
    p.head_v = p.head_T;  // all heads identity now
    p.head_k = p.head_T;
    RandomStream stream(1);
    ForwardTrace trace;
    const FieldSnapshot out =
        forward_train(p, tiny_sample(), tiny_mesh(), stream, trace);
    CHECK(out.T == trace.h);
    CHECK(out.v == trace.h);
    CHECK(out.k == trace.h);
}

TEST_CASE("eval forward is pure") {
    const ModelParams p = tiny_params();
    const FieldSnapshot a = forward_eval(p, tiny_sample(), tiny_mesh());
    const FieldSnapshot b = forward_eval(p, tiny_sample(), tiny_mesh());
    CHECK(a.T == b.T);
    CHECK(a.v == b.v);
    CHECK(a.k == b.k);
}

TEST_CASE("fusion commutes: swapping the branches leaves h unchanged") {
    // n1 == n_scalar == 2, so the two branch stacks are interchangeable when
    // the inputs swap with them.
    ModelParams p = tiny_params();
    ModelParams q = p;
    std::swap(q.branch1, q.branch2);

    InputSample sp = tiny_sample();                     // p_rod=(0.6,0.8), s=(0.5,0.25)
    InputSample sq;
    sq.p_rod = {0.5, 0.25};
    sq.t_in = 0.6;
    sq.v_in = 0.8;

    RandomStream s1(1), s2(1);
    ForwardTrace t1, t2;
    (void)forward_train(p, sp, tiny_mesh(), s1, t1);
    (void)forward_train(q, sq, tiny_mesh(), s2, t2);
    CHECK(t1.h == t2.h);
}

TEST_CASE("trunk locality: moving one node changes only its fused entry") {
    const testing::GradCheckCase c = testing::random_tiny_case(404, false);
    ModelParams params = testing::params_for_case(c, 405);

    RandomStream s1(9), s2(9);
    ForwardTrace base, moved;
    (void)forward_train(params, c.sample, c.mesh, s1, base);

    CenterPlaneMesh mesh2 = c.mesh;
    const std::size_t target = c.config.n_nodes / 2;
    mesh2.x[target] = 0.5 * (mesh2.x[target] + 0.01);
    mesh2.y[target] = 0.5 * (mesh2.y[target] + 0.02);
    (void)forward_train(params, c.sample, mesh2, s2, moved);

    for (std::size_t i = 0; i < c.config.n_nodes; ++i) {
        if (i == target) {
            CHECK(base.psi[i] != moved.psi[i]);
        } else {
            CHECK(base.psi[i] == moved.psi[i]);
            CHECK(base.h[i] == moved.h[i]);
        }
    }
}

TEST_CASE("forward rejects shape mismatches and non-finite activations") {
    ModelParams p = tiny_params();
    InputSample bad_sample = tiny_sample();
    bad_sample.p_rod.push_back(0.1);
    CHECK_THROWS(forward_eval(p, bad_sample, tiny_mesh()));

    CenterPlaneMesh bad_mesh = tiny_mesh();
    bad_mesh.x.push_back(0.5);
    bad_mesh.y.push_back(0.5);
    bad_mesh.wall_distance.push_back(0.1);
    CHECK_THROWS(forward_eval(p, tiny_sample(), bad_mesh));

    p.branch1[0].weight.at(0, 0) = std::numeric_limits<double>::infinity();
    try {
        (void)forward_eval(p, tiny_sample(), tiny_mesh());
        FAIL("expected an exception");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("branch1 layer 0") != std::string::npos);
    }
}

TEST_CASE("backward: zero output gradients give zero parameter gradients") {
    const testing::GradCheckCase c = testing::random_tiny_case(17, true);
    ModelParams params = testing::params_for_case(c, 18);
    RandomStream stream(c.mask_seed);
    ForwardTrace trace;
    (void)forward_train(params, c.sample, c.mesh, stream, trace);
    const std::vector<double> zero(c.config.n_nodes, 0.0);
    Gradients g = backward(params, trace, zero, zero, zero);
    for (ParamSpan s : param_spans(g)) {
        for (std::size_t i = 0; i < s.len; ++i) CHECK(s.data[i] == 0.0);
    }
}

TEST_CASE("backward is linear in the output gradients") {
    const testing::GradCheckCase c = testing::random_tiny_case(23, false);
    ModelParams params = testing::params_for_case(c, 24);
    RandomStream stream(c.mask_seed);
    ForwardTrace trace;
    (void)forward_train(params, c.sample, c.mesh, stream, trace);

    RandomStream rng(77);
    const std::size_t n = c.config.n_nodes;
    std::vector<double> gT(n), gv(n), gk(n), gT2(n), gv2(n), gk2(n);
    for (std::size_t i = 0; i < n; ++i) {
        gT[i] = rng.uniform(-1.0, 1.0);
        gv[i] = rng.uniform(-1.0, 1.0);
        gk[i] = rng.uniform(-1.0, 1.0);
        gT2[i] = 2.0 * gT[i];
        gv2[i] = 2.0 * gv[i];
        gk2[i] = 2.0 * gk[i];
    }
    Gradients g1 = backward(params, trace, gT, gv, gk);
    Gradients g2 = backward(params, trace, gT2, gv2, gk2);
    auto s1 = param_spans(g1);
    auto s2 = param_spans(g2);
    for (std::size_t s = 0; s < s1.size(); ++s) {
        for (std::size_t i = 0; i < s1[s].len; ++i) {
            CHECK(s2[s].data[i] ==
                  doctest::Approx(2.0 * s1[s].data[i]).epsilon(1e-13));
        }
    }
}

TEST_CASE("backward rejects a trace from another shape") {
    const testing::GradCheckCase c = testing::random_tiny_case(31, false);
    ModelParams params = testing::params_for_case(c, 32);
    RandomStream stream(c.mask_seed);
    ForwardTrace trace;
    (void)forward_train(params, c.sample, c.mesh, stream, trace);

    ModelConfig other = c.config;
    other.n_nodes = c.config.n_nodes + 1;
    RandomStream rng(33);
    ModelParams other_params = init_params(other, rng);
    const std::vector<double> g(other.n_nodes, 0.0);
    CHECK_THROWS(backward(other_params, trace, g, g, g));
}

TEST_CASE("analytic gradients match central finite differences") {
    for (std::uint64_t seed : {101ull, 202ull}) {
        testing::GradCheckCase c = testing::random_tiny_case(seed, false);
        ModelParams params = testing::params_for_case(c, seed + 1);
        CHECK(testing::gradcheck_max_rel_err(params, c) < 1e-5);
    }
    // with dropout active, masks replayed from the trace
    for (std::uint64_t seed : {303ull, 404ull}) {
        testing::GradCheckCase c = testing::random_tiny_case(seed, true);
        ModelParams params = testing::params_for_case(c, seed + 1);
        CHECK(testing::gradcheck_max_rel_err(params, c) < 1e-5);
    }
}

TEST_CASE("normalization round trip") {
    NormalizationStats norm;
    norm.output_mean = {600.0, 4.5, 0.02};
    norm.output_std = {30.0, 0.4, 0.008};
    RandomStream rng(55);
    FieldSnapshot f;
    for (int i = 0; i < 40; ++i) {
        f.T.push_back(rng.uniform(500.0, 700.0));
        f.v.push_back(rng.uniform(0.0, 6.0));
        f.k.push_back(rng.uniform(0.0, 0.05));
    }
    const FieldSnapshot back = denormalize_fields(normalize_fields(f, norm), norm);
    for (int i = 0; i < 40; ++i) {
        CHECK(back.T[i] == doctest::Approx(f.T[i]).epsilon(1e-12));
        CHECK(back.v[i] == doctest::Approx(f.v[i]).epsilon(1e-12));
        CHECK(back.k[i] == doctest::Approx(f.k[i]).epsilon(1e-12));
    }
}

TEST_CASE("predict denormalizes: zero network output lands on the mean") {
    RandomStream rng(3);
    ModelConfig cfg;
    cfg.n1 = 3;
    cfg.branch_hidden = {4};
    cfg.trunk_hidden = {4};
    cfg.n_nodes = 4;
    cfg.dropout_rate = 0.0;
    ModelParams p = init_params(cfg, rng);
    for (ParamSpan s : param_spans(p)) std::fill(s.data, s.data + s.len, 0.0);
    p.norm.input_min = {0.0, 0.0, 0.0};
    p.norm.input_max = {1.0, 1.0, 1.0};
    p.norm.output_mean = {600.0, 4.5, 0.02};
    p.norm.output_std = {30.0, 0.4, 0.008};

    CenterPlaneMesh mesh;
    mesh.box_lo = 0.0;
    mesh.box_hi = 1.0;
    mesh.x = {0.1, 0.3, 0.5, 0.7};
    mesh.y = {0.2, 0.4, 0.6, 0.8};
    mesh.wall_distance.assign(4, 0.1);
    InputSample s;
    s.p_rod = {0.5, 0.4, 0.3};
    s.t_in = 0.5;
    s.v_in = 0.5;

    const FieldSnapshot out = predict(p, s, mesh);
    for (int i = 0; i < 4; ++i) {
        CHECK(out.T[i] == 600.0);
        CHECK(out.v[i] == 4.5);
        CHECK(out.k[i] == 0.02);
    }
}
