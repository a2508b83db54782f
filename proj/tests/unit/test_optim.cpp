#include <cmath>

#include <gtest/gtest.h>

#include "climcast/hybrid_net.hpp"
#include "climcast/nn/checkpoint.hpp"
#include "climcast/nn/optim.hpp"

using namespace climcast;
using namespace climcast::nn;

TEST(Adam, QuadraticConvergesToMinimum) {
    Param<double> theta("theta", "fusion", {1});
    std::vector<Param<double>*> ps{&theta};
    AdamState<double> st(ps);
    for (int step = 0; step < 2000; ++step) {
        theta.grad[0] = 2.0 * (theta.value[0] - 3.0);
        adam_step(ps, st, 0.05);
    }
    EXPECT_NEAR(theta.value[0], 3.0, 1e-3);
}

TEST(Adam, FrozenParametersDoNotMove) {
    Param<double> a("a", "conv", {3}), b("b", "fusion", {3});
    a.value.fill(1.0);
    b.value.fill(1.0);
    a.grad.fill(5.0);
    b.grad.fill(5.0);
    a.trainable = false;
    std::vector<Param<double>*> ps{&a, &b};
    AdamState<double> st(ps);
    adam_step(ps, st, 0.1);
    for (double v : a.value.values()) EXPECT_EQ(v, 1.0);
    for (double v : b.value.values()) EXPECT_LT(v, 1.0);
}

TEST(Clip, SmallNormUnchanged) {
    Param<double> p("p", "fusion", {2});
    p.grad[0] = 0.3;
    p.grad[1] = 0.4;
    std::vector<Param<double>*> ps{&p};
    EXPECT_DOUBLE_EQ(clip_global_norm(ps, 1.0), 0.5);
    EXPECT_EQ(p.grad[0], 0.3);
    EXPECT_EQ(p.grad[1], 0.4);
}

TEST(Clip, LargeNormRescaledToMax) {
    Param<double> p("p", "fusion", {2}), q("q", "fusion", {1});
    p.grad[0] = 3.0;
    p.grad[1] = 4.0;
    q.grad[0] = 12.0;
    std::vector<Param<double>*> ps{&p, &q};
    EXPECT_DOUBLE_EQ(clip_global_norm(ps, 1.0), 13.0);
    double sq = 0.0;
    for (auto* x : ps)
        for (double g : x->grad.values()) sq += g * g;
    EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-12);
    EXPECT_NEAR(p.grad[0], 3.0 / 13.0, 1e-15);
}

TEST(Clip, NonFiniteGradientNamesTheTensor) {
    Param<double> p("fusion_dense1.kernel", "fusion", {2});
    p.grad[1] = std::nan("");
    std::vector<Param<double>*> ps{&p};
    try {
        clip_global_norm(ps, 1.0);
        FAIL();
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("fusion_dense1.kernel"), std::string::npos);
    }
}

TEST(CosineLr, StartsAtBaseAndEndsAtFloor) {
    EXPECT_DOUBLE_EQ(cosine_lr(0, 60), 6e-4);
    EXPECT_NEAR(cosine_lr(60, 60), 6e-6, 1e-18);
    EXPECT_NEAR(cosine_lr(30, 60), 0.5 * (6e-4 + 6e-6), 1e-15);
    for (long s = 1; s <= 60; ++s) EXPECT_LT(cosine_lr(s, 60), cosine_lr(s - 1, 60));
}

TEST(Checkpoint, PackUnpackRoundTrip) {
    NetConfig cfg;
    cfg.input_dim = 5;
    cfg.conv1_filters = 4;
    cfg.conv2_filters = 3;
    cfg.n_states = 2;
    HybridNet<double> a(cfg);
    cfg.init_seed = 99;
    HybridNet<double> b(cfg);
    auto [manifest, blob] = pack_params(a.params());
    EXPECT_EQ(manifest.at("dtype"), "float64");
    unpack_params(b.params(), manifest, blob);
    EXPECT_EQ(a.snapshot(), b.snapshot());
}

TEST(Checkpoint, ShapeMismatchIsRejected) {
    NetConfig cfg;
    cfg.input_dim = 5;
    cfg.conv1_filters = 4;
    cfg.conv2_filters = 3;
    HybridNet<double> a(cfg);
    cfg.head_lstm = 7;
    HybridNet<double> b(cfg);
    auto [manifest, blob] = pack_params(a.params());
    EXPECT_THROW(unpack_params(b.params(), manifest, blob), ShapeError);
    EXPECT_THROW(unpack_params(a.params(), manifest, blob.substr(0, blob.size() / 2)), ParseError);
}
