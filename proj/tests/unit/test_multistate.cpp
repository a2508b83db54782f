#include <gtest/gtest.h>

#include "climcast/multistate.hpp"

using namespace climcast;

namespace {

PipelineConfig quick_config() {
    PipelineConfig cfg;
    cfg.net.conv1_filters = 8;
    cfg.net.conv2_filters = 4;
    cfg.net.bilstm_width = 8;
    cfg.net.head_lstm = 4;
    cfg.net.dense1 = 8;
    cfg.net.dense2 = 4;
    cfg.net.embedding_dim = 4;
    cfg.gbt.rounds = 20;
    cfg.train.max_epochs = 2;
    return cfg;
}

struct Fixture {
    std::vector<WeeklyPanel> panels = generate_synthetic(SyntheticScenario::family(4, 3, 0.1));
    PretrainResult<double> pre = pretrain_multistate<double>({panels[0], panels[1], panels[2]}, quick_config());
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

// Values of every parameter tensor in a group, keyed by name.
std::map<std::string, std::vector<double>> group_values(HybridNet<double>& net, const std::set<std::string>& groups) {
    std::map<std::string, std::vector<double>> out;
    for (auto* p : net.params())
        if (groups.count(p->group)) out[p->name] = p->value.values();
    return out;
}

}  // namespace

TEST(Pretrain, OneEmbeddingRowPerState) {
    auto& f = fixture();
    auto& m = f.pre.models;
    EXPECT_EQ(m.net.config().n_states, 3u);
    EXPECT_EQ(m.net.embedding_table().value.dim(0), 3u);
    EXPECT_EQ(m.net.embedding_table().value.dim(1), 4u);
    ASSERT_EQ(m.states.size(), 3u);
    EXPECT_EQ(m.state("S1").embedding_row, 0u);
    EXPECT_EQ(m.state("S3").embedding_row, 2u);
    EXPECT_EQ(f.pre.stage1_pairs, 3u * (218u - 18u));
    EXPECT_EQ(f.pre.fit_windows, 3u * (174u - 30u));
}

TEST(Pretrain, StatesKeepTheirOwnScalers) {
    auto& f = fixture();
    auto& m = f.pre.models;
    const auto a = nlohmann::json(m.state("S1").features).dump();
    const auto b = nlohmann::json(m.state("S2").features).dump();
    EXPECT_NE(a, b);
    const auto alone = FeaturePipeline::fit(m.schema, f.panels[1], 218);
    EXPECT_EQ(nlohmann::json(alone).dump(), b);
}

TEST(Pretrain, InputErrors) {
    auto& f = fixture();
    EXPECT_THROW(pretrain_multistate<double>({}, quick_config()), InvalidArgument);
    EXPECT_THROW(pretrain_multistate<double>({f.panels[0], f.panels[0]}, quick_config()), InvalidArgument);
}

TEST(Pretrain, UnknownStateIsAnErrorAtForecastTime) {
    auto& f = fixture();
    EXPECT_THROW(recursive_rollout(f.pre.models, f.panels[3], {100, 4}), InvalidArgument);
    EXPECT_NO_THROW(recursive_rollout(f.pre.models, f.panels[0], {100, 4}));
}

TEST(Finetune, UnseenStateGetsAMeanEmbeddingRow) {
    auto& f = fixture();
    FinetuneOptions fo;
    fo.train_end = 52;
    fo.train.max_epochs = 0;
    auto ft = finetune(f.pre.models, f.panels[3], fo);
    EXPECT_TRUE(ft.new_state);
    EXPECT_EQ(ft.embedding_row, 3u);
    EXPECT_EQ(ft.models.state("S4").embedding_row, 3u);
    EXPECT_EQ(ft.models.state("S4").train_end, 52u);
    const auto& old = f.pre.models.net.embedding_table().value;
    const auto& now = ft.models.net.embedding_table().value;
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(now[12 + c], (old[c] + old[4 + c] + old[8 + c]) / 3.0, 1e-15);
    // With zero epochs, everything that existed before is untouched.
    auto before = f.pre.models;
    const auto b = before.net.snapshot();
    const auto a = ft.models.net.snapshot();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 1; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
    EXPECT_EQ(std::vector<double>(a[0].begin(), a[0].begin() + 12), b[0]);
    // The pooled Stage-1 model is reused without refitting.
    EXPECT_EQ(nlohmann::json(ft.models.stage1).dump(), nlohmann::json(f.pre.models.stage1).dump());
    EXPECT_NO_THROW(recursive_rollout(ft.models, f.panels[3], {78, 52}));
}

TEST(Finetune, FrozenGroupsStayBitIdentical) {
    auto& f = fixture();
    FinetuneOptions fo;
    fo.train_end = 104;
    fo.train.max_epochs = 5;
    fo.plan.learning_rate = 1e-3;
    const std::set<std::string> frozen = fo.plan.frozen;
    auto pre = f.pre.models;
    const auto before = group_values(pre.net, frozen);
    auto ft = finetune(f.pre.models, f.panels[3], fo);
    EXPECT_EQ(group_values(ft.models.net, frozen), before);
    const std::set<std::string> open{"fusion", "output"};
    EXPECT_NE(group_values(ft.models.net, open), group_values(pre.net, open));
    // Fine-tuning leaves the returned network fully trainable for later use.
    EXPECT_EQ(ft.models.net.frozen_fraction(), 0.0);
    EXPECT_EQ(ft.models.freeze.frozen, frozen);
}

TEST(Finetune, KnownStateReusesItsRow) {
    auto& f = fixture();
    FinetuneOptions fo;
    fo.train.max_epochs = 1;
    auto ft = finetune(f.pre.models, f.panels[1], fo);
    EXPECT_FALSE(ft.new_state);
    EXPECT_EQ(ft.embedding_row, 1u);
    EXPECT_EQ(ft.models.net.config().n_states, 3u);
}

TEST(Finetune, PlanErrors) {
    auto& f = fixture();
    FinetuneOptions fo;
    fo.plan.frozen.insert("embedding");
    EXPECT_THROW(finetune(f.pre.models, f.panels[3], fo), InvalidArgument);
    FinetuneOptions unknown;
    unknown.plan.frozen = {"decoder"};
    EXPECT_THROW(finetune(f.pre.models, f.panels[3], unknown), InvalidArgument);
    auto single = train_pipeline<double>(f.panels[0], quick_config());
    EXPECT_THROW(finetune(single.models, f.panels[3], FinetuneOptions{}), InvalidArgument);
}
