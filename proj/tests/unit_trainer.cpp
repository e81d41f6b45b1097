#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "normscape/scheduler.hpp"
#include "normscape/trainer.hpp"

using namespace normscape;

namespace {

ModelConfig tiny_model() {
    ModelConfig cfg;
    cfg.embed_features = 8;
    cfg.wide_features = 8;
    cfg.narrow_features = 4;
    cfg.recurrences = 2;
    return cfg;
}

struct TinyData {
    PatchSet<float> train;
    PatchSet<float> holdout;
    std::vector<EvalPair<float>> eval_pairs;
};

TinyData make_tiny_data(uint64_t seed) {
    Rng rng(seed);
    PatchConfig pc{8, 5};
    std::vector<SourceImage<float>> train_imgs = {
        {"a", testutil::random_tensor<float>({1, 30, 30}, rng, 0.0, 1.0)},
        {"b", testutil::random_tensor<float>({1, 30, 30}, rng, 0.0, 1.0)},
    };
    std::vector<SourceImage<float>> holdout_imgs = {
        {"c", testutil::random_tensor<float>({1, 20, 20}, rng, 0.0, 1.0)},
    };
    TinyData d;
    d.train = make_training_pairs<float>(train_imgs, 2, pc).patches;
    d.holdout = make_training_pairs<float>(holdout_imgs, 2, pc).patches;
    auto scene = testutil::random_tensor<float>({1, 24, 24}, rng, 0.0, 1.0);
    d.eval_pairs.push_back(prepare_eval_pair<float>("scene", scene, 2));
    return d;
}

TrainConfig tiny_train(int64_t epochs) {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.lr_initial = 1e-4;  // small enough to stay stable on random data
    tc.batch_size = 16;
    tc.seed = 7;
    return tc;
}

bool same_records(const LandscapeRecord& a, const LandscapeRecord& b) {
    const bool psnr_same = (std::isnan(a.psnr_eval) && std::isnan(b.psnr_eval)) ||
                           a.psnr_eval == b.psnr_eval;
    return a.setting == b.setting && a.epoch == b.epoch && a.global_step == b.global_step &&
           a.lr == b.lr && a.alpha == b.alpha && a.l1_term == b.l1_term &&
           a.l2_term == b.l2_term && a.l3_term == b.l3_term && a.total_loss == b.total_loss &&
           a.validation_error == b.validation_error && psnr_same && a.stage == b.stage;
}

double params_max_diff(ModelParams<float>& a, ModelParams<float>& b) {
    double worst = 0.0;
    auto al = a.layers();
    auto bl = b.layers();
    for (size_t i = 0; i < al.size(); ++i) {
        worst = std::max(worst, testutil::max_abs_diff(*al[i].tensor, *bl[i].tensor));
    }
    return worst;
}

}  // namespace

TEST_CASE("plateau scheduler drops after sustained stagnation") {
    PlateauScheduler s({0.01, 10.0, 5});
    CHECK(s.lr() == 0.01);
    // First observation sets the best; five stagnant epochs then fire.
    CHECK_FALSE(s.observe(5.0));
    for (int i = 0; i < 4; ++i) CHECK_FALSE(s.observe(5.0));
    CHECK(s.observe(5.0));  // fifth non-improving epoch
    CHECK(s.lr() == doctest::Approx(0.001));
    CHECK(s.drops() == 1);
    CHECK(s.stale_epochs() == 0);  // counter resets after the drop
}

TEST_CASE("plateau scheduler tolerates improvement then stalls") {
    PlateauScheduler s({0.01, 10.0, 5});
    CHECK_FALSE(s.observe(3.0));
    CHECK_FALSE(s.observe(2.0));  // improvement resets staleness
    // 2.0 repeated: equal is not a strict improvement.
    for (int i = 0; i < 4; ++i) CHECK_FALSE(s.observe(2.0));
    CHECK(s.observe(2.0));
    CHECK(s.lr() == doctest::Approx(0.001));
}

TEST_CASE("plateau scheduler never drops while improving") {
    PlateauScheduler s({0.01, 10.0, 5});
    double err = 10.0;
    for (int i = 0; i < 50; ++i) {
        CHECK_FALSE(s.observe(err));
        err *= 0.99;
    }
    CHECK(s.lr() == 0.01);
    CHECK(s.drops() == 0);
}

TEST_CASE("plateau scheduler restores mid-run state") {
    PlateauScheduler s({0.01, 10.0, 5});
    s.restore(0.5, 3, 2);
    CHECK(s.lr() == doctest::Approx(0.0001));
    CHECK(s.best() == 0.5);
    CHECK(s.stale_epochs() == 3);
    // Two more stagnant epochs complete the plateau.
    CHECK_FALSE(s.observe(0.6));
    CHECK(s.observe(0.6));
    CHECK(s.lr() == doctest::Approx(1e-5));

    CHECK_THROWS_AS(PlateauScheduler({0.0, 10.0, 5}), ConfigError);
    CHECK_THROWS_AS(PlateauScheduler({0.01, 1.0, 5}), ConfigError);
    CHECK_THROWS_AS(PlateauScheduler({0.01, 10.0, 0}), ConfigError);
}

TEST_CASE("alpha schedules") {
    CHECK(alpha_for_epoch(AlphaPolicy::constant, 0.5, 1, 45) == 0.5);
    CHECK(alpha_for_epoch(AlphaPolicy::constant, 0.5, 45, 45) == 0.5);

    CHECK(alpha_for_epoch(AlphaPolicy::linear_decay, 0.5, 1, 45) == doctest::Approx(1.0));
    CHECK(alpha_for_epoch(AlphaPolicy::linear_decay, 0.5, 45, 45) == doctest::Approx(0.0));
    CHECK(alpha_for_epoch(AlphaPolicy::linear_decay, 0.5, 23, 45) == doctest::Approx(0.5));
    CHECK(alpha_for_epoch(AlphaPolicy::linear_decay, 0.5, 1, 1) == 1.0);

    CHECK(parse_alpha_policy("constant") == AlphaPolicy::constant);
    CHECK(parse_alpha_policy("linear-decay") == AlphaPolicy::linear_decay);
    CHECK_THROWS_AS(parse_alpha_policy("bogus"), ConfigError);
}

TEST_CASE("sgd step applies w minus lr g exactly") {
    const ModelConfig cfg = tiny_model();
    auto p = build_model_random<float>(cfg, 1);
    auto p_before = p;
    auto g = build_model_random<float>(cfg, 2);

    sgd_step(p, g, 0.25);
    auto pl = p.layers();
    auto bl = p_before.layers();
    auto gl = g.layers();
    for (size_t li = 0; li < pl.size(); ++li) {
        for (int64_t i = 0; i < pl[li].tensor->size(); ++i) {
            const float expect = (*bl[li].tensor)[i] - 0.25f * (*gl[li].tensor)[i];
            CHECK((*pl[li].tensor)[i] == expect);
        }
    }

    // Zero learning rate is the identity.
    auto q = p;
    sgd_step(q, g, 0.0);
    CHECK(params_max_diff(q, p) == 0.0);
}

TEST_CASE("gradient norm and rescaling") {
    const ModelConfig cfg = tiny_model();
    auto g = ModelParams<double>::zeros(cfg);
    g.embed_conv1[0] = 3.0;
    g.recon_conv[0] = 4.0;
    CHECK(grad_global_norm(g) == doctest::Approx(5.0).epsilon(1e-15));

    scale_grads(g, 0.5);
    CHECK(g.embed_conv1[0] == 1.5);
    CHECK(g.recon_conv[0] == 2.0);
    CHECK(grad_global_norm(g) == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("validation error is independent of the evaluation chunk size") {
    auto data = make_tiny_data(90);
    auto params = build_model<float>(tiny_model(), 3);
    const double a = validation_error(params, data.holdout, 64);
    const double b = validation_error(params, data.holdout, 7);
    const double c = validation_error(params, data.holdout, 1000);
    CHECK(a == doctest::Approx(b).epsilon(1e-9));
    CHECK(a == doctest::Approx(c).epsilon(1e-9));

    // Direct definition: mean over patches of half the squared error.
    std::vector<int64_t> all(static_cast<size_t>(data.holdout.count()));
    for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int64_t>(i);
    auto [in, tg] = gather_batch(data.holdout, all);
    auto out = forward_eval(params, in);
    double acc = 0.0;
    for (int64_t i = 0; i < out.size(); ++i) {
        const double d = static_cast<double>(out[i]) - static_cast<double>(tg[i]);
        acc += d * d;
    }
    CHECK(a == doctest::Approx(acc / (2.0 * static_cast<double>(data.holdout.count())))
                   .epsilon(1e-9));

    PatchSet<float> empty;
    CHECK_THROWS_AS(validation_error(params, empty), ConfigError);
}

TEST_CASE("a small gradient step descends the objective") {
    const ModelConfig cfg = tiny_model();
    ObjectiveConfig obj;
    Rng rng(61);
    for (int inst = 0; inst < 20; ++inst) {
        auto p = build_model_random<double>(cfg, 500 + static_cast<uint64_t>(inst));
        auto x = testutil::random_tensor<double>({2, 1, 8, 8}, rng, 0.0, 1.0);
        auto t = testutil::random_tensor<double>({2, 1, 8, 8}, rng, 0.0, 1.0);
        const NormSetting s = all_settings()[inst % 3];
        auto lag = total_loss_and_grads(p, x, t, s, obj, 0.5);
        sgd_step(p, lag.grads, 1e-5);
        const double after = batch_loss(p, x, t, s, obj, 0.5).total;
        CHECK(after < lag.breakdown.total);
    }
}

TEST_CASE("training produces one record per epoch with finite losses") {
    auto data = make_tiny_data(101);
    testutil::TempDir tmp("train");
    TrainOptions opts;
    opts.out_dir = tmp.str();
    int callbacks = 0;
    opts.on_epoch = [&](const LandscapeRecord&) { ++callbacks; };

    auto res = train(tiny_model(), ObjectiveConfig{}, tiny_train(3), NormSetting::all_l2,
                     data.train, data.holdout, data.eval_pairs, opts);

    REQUIRE(res.records.size() == 3);
    CHECK(callbacks == 3);
    const int64_t steps_per_epoch = data.train.count() / 16;
    for (size_t i = 0; i < res.records.size(); ++i) {
        const auto& r = res.records[i];
        CHECK(r.epoch == static_cast<int64_t>(i) + 1);
        CHECK(r.setting == "all-l2");
        CHECK(r.global_step == steps_per_epoch * r.epoch);
        CHECK(std::isfinite(r.total_loss));
        CHECK(std::isfinite(r.validation_error));
        CHECK(std::isfinite(r.psnr_eval));
        CHECK(r.lr == 1e-4);  // no plateau inside 3 epochs
        CHECK(r.alpha == 0.5);
    }
    CHECK(res.final_state.present);
    CHECK(res.final_state.epoch == 3);
    CHECK(res.final_state.global_step == steps_per_epoch * 3);
    CHECK(res.final_state.setting == "all-l2");

    // Checkpoints at every epoch (cadence 1), final one equals the result.
    for (int64_t e = 1; e <= 3; ++e) {
        CHECK(std::filesystem::exists(detail::checkpoint_path(tmp.str(), "all-l2", e)));
    }
    TrainStateInfo state;
    auto final_params =
        load_checkpoint<float>(detail::checkpoint_path(tmp.str(), "all-l2", 3), &state);
    CHECK(state.epoch == 3);
    CHECK(params_max_diff(final_params, res.params) == 0.0);

    // Per-epoch records also landed in the run log.
    auto logged = read_records_jsonl(tmp.file("all-l2_records.jsonl"));
    REQUIRE(logged.size() == 3);
    for (size_t i = 0; i < 3; ++i) CHECK(same_records(logged[i], res.records[i]));
}

TEST_CASE("training without an eval set records NaN quality") {
    auto data = make_tiny_data(103);
    auto res = train(tiny_model(), ObjectiveConfig{}, tiny_train(1), NormSetting::mix, data.train,
                     data.holdout, {}, TrainOptions{});
    REQUIRE(res.records.size() == 1);
    CHECK(std::isnan(res.records[0].psnr_eval));
}

TEST_CASE("training is bit-deterministic given the same seed") {
    auto data = make_tiny_data(105);
    auto a = train(tiny_model(), ObjectiveConfig{}, tiny_train(2), NormSetting::all_l1, data.train,
                   data.holdout, data.eval_pairs, TrainOptions{});
    auto b = train(tiny_model(), ObjectiveConfig{}, tiny_train(2), NormSetting::all_l1, data.train,
                   data.holdout, data.eval_pairs, TrainOptions{});
    REQUIRE(a.records.size() == b.records.size());
    for (size_t i = 0; i < a.records.size(); ++i) CHECK(same_records(a.records[i], b.records[i]));
    CHECK(params_max_diff(a.params, b.params) == 0.0);

    auto c_cfg = tiny_train(2);
    c_cfg.seed = 8;
    auto c = train(tiny_model(), ObjectiveConfig{}, c_cfg, NormSetting::all_l1, data.train,
                   data.holdout, data.eval_pairs, TrainOptions{});
    CHECK(params_max_diff(a.params, c.params) > 0.0);
}

TEST_CASE("resuming from a checkpoint replays the uninterrupted run exactly") {
    auto data = make_tiny_data(107);
    const TrainConfig four = tiny_train(4);

    testutil::TempDir dir_a("full");
    TrainOptions opts_a;
    opts_a.out_dir = dir_a.str();
    auto full = train(tiny_model(), ObjectiveConfig{}, four, NormSetting::mix, data.train,
                      data.holdout, data.eval_pairs, opts_a);

    testutil::TempDir dir_b("split");
    TrainOptions opts_b;
    opts_b.out_dir = dir_b.str();
    auto first = train(tiny_model(), ObjectiveConfig{}, tiny_train(2), NormSetting::mix,
                       data.train, data.holdout, data.eval_pairs, opts_b);

    TrainOptions opts_c;
    opts_c.out_dir = dir_b.str();
    opts_c.resume_path = detail::checkpoint_path(dir_b.str(), "mix", 2);
    auto second = train(tiny_model(), ObjectiveConfig{}, four, NormSetting::mix, data.train,
                        data.holdout, data.eval_pairs, opts_c);

    REQUIRE(full.records.size() == 4);
    REQUIRE(first.records.size() == 2);
    REQUIRE(second.records.size() == 2);  // only the replayed epochs 3..4
    CHECK(same_records(full.records[0], first.records[0]));
    CHECK(same_records(full.records[1], first.records[1]));
    CHECK(same_records(full.records[2], second.records[0]));
    CHECK(same_records(full.records[3], second.records[1]));
    CHECK(params_max_diff(full.params, second.params) == 0.0);
    CHECK(full.final_state.global_step == second.final_state.global_step);
}

TEST_CASE("fresh runs discard stale run logs") {
    auto data = make_tiny_data(109);
    testutil::TempDir tmp("stale");
    const std::string log = tmp.file("all-l2_records.jsonl");
    {
        std::ofstream out(log);
        out << "{\"garbage\": true}\n{\"more\": 1}\n";
    }
    TrainOptions opts;
    opts.out_dir = tmp.str();
    train(tiny_model(), ObjectiveConfig{}, tiny_train(1), NormSetting::all_l2, data.train,
          data.holdout, {}, opts);
    auto records = read_records_jsonl(log);
    CHECK(records.size() == 1);
    CHECK(records[0].epoch == 1);
}

TEST_CASE("an enormous clip threshold changes nothing") {
    auto data = make_tiny_data(111);
    auto plain_cfg = tiny_train(2);
    auto clipped_cfg = plain_cfg;
    clipped_cfg.clip_norm = 1e9;  // never binds at this scale
    auto plain = train(tiny_model(), ObjectiveConfig{}, plain_cfg, NormSetting::all_l2, data.train,
                       data.holdout, {}, TrainOptions{});
    auto clipped = train(tiny_model(), ObjectiveConfig{}, clipped_cfg, NormSetting::all_l2,
                         data.train, data.holdout, {}, TrainOptions{});
    CHECK(params_max_diff(plain.params, clipped.params) == 0.0);
}

TEST_CASE("a binding clip threshold bounds the per-step movement") {
    auto data = make_tiny_data(113);
    auto cfg = tiny_train(1);
    cfg.clip_norm = 1e-3;
    auto before = build_model<float>(tiny_model(), cfg.seed);
    auto res = train(tiny_model(), ObjectiveConfig{}, cfg, NormSetting::all_l2, data.train,
                     data.holdout, {}, TrainOptions{});
    // Each step moves at most lr * clip_norm in global norm.
    const double steps = static_cast<double>(data.train.count() / cfg.batch_size);
    auto diff = ModelParams<float>::zeros(tiny_model());
    auto dl = diff.layers();
    auto al = res.params.layers();
    auto bl = before.layers();
    for (size_t i = 0; i < dl.size(); ++i) {
        *dl[i].tensor = *al[i].tensor;
        axpy_inplace(*dl[i].tensor, -1.0f, *bl[i].tensor);
    }
    CHECK(grad_global_norm(diff) <= steps * cfg.lr_initial * cfg.clip_norm * (1.0 + 1e-6));
}

TEST_CASE("training rejects impossible configurations") {
    auto data = make_tiny_data(115);

    auto too_big = tiny_train(1);
    too_big.batch_size = 100000;
    CHECK_THROWS_AS(train(tiny_model(), ObjectiveConfig{}, too_big, NormSetting::mix, data.train,
                          data.holdout, {}, TrainOptions{}),
                    ConfigError);

    PatchSet<float> empty;
    CHECK_THROWS_AS(train(tiny_model(), ObjectiveConfig{}, tiny_train(1), NormSetting::mix,
                          data.train, empty, {}, TrainOptions{}),
                    ConfigError);

    auto bad = tiny_train(1);
    bad.lr_initial = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("resume refuses checkpoints from another setting or architecture") {
    auto data = make_tiny_data(117);
    testutil::TempDir tmp("wrongsetting");
    TrainOptions opts;
    opts.out_dir = tmp.str();
    train(tiny_model(), ObjectiveConfig{}, tiny_train(1), NormSetting::all_l2, data.train,
          data.holdout, {}, opts);

    TrainOptions resume;
    resume.resume_path = detail::checkpoint_path(tmp.str(), "all-l2", 1);
    CHECK_THROWS_AS(train(tiny_model(), ObjectiveConfig{}, tiny_train(2), NormSetting::mix,
                          data.train, data.holdout, {}, resume),
                    ConfigError);

    ModelConfig other = tiny_model();
    other.recurrences = 3;
    CHECK_THROWS_AS(train(other, ObjectiveConfig{}, tiny_train(2), NormSetting::all_l2, data.train,
                          data.holdout, {}, resume),
                    ConfigError);
}

TEST_CASE("linear alpha decay lands in the records") {
    auto data = make_tiny_data(119);
    auto cfg = tiny_train(3);
    cfg.alpha_policy = AlphaPolicy::linear_decay;
    auto res = train(tiny_model(), ObjectiveConfig{}, cfg, NormSetting::all_l2, data.train,
                     data.holdout, {}, TrainOptions{});
    REQUIRE(res.records.size() == 3);
    CHECK(res.records[0].alpha == doctest::Approx(1.0));
    CHECK(res.records[1].alpha == doctest::Approx(0.5));
    CHECK(res.records[2].alpha == doctest::Approx(0.0));
}
