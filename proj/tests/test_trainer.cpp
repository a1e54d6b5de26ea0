#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <fstream>
#include <unistd.h>

#include "rlcsc/trainer.hpp"
#include "support/synth.hpp"
#include "support/test_util.hpp"

using namespace rlcsc;
using namespace rlcsc::testsupport;

namespace {

std::filesystem::path temp_dir(const std::string& tag) {
    auto d = std::filesystem::temp_directory_path() /
             ("rlcsc-test-train-" + std::to_string(::getpid())) / tag;
    std::filesystem::create_directories(d);
    return d;
}

PatchSet tiny_patchset(int n_images, int h, int w, int sr_scale = 2) {
    std::vector<ImageY> imgs;
    for (int i = 0; i < n_images; ++i) imgs.push_back(make_scene(300 + i, h, w));
    AugmentSpec spec = AugmentSpec::none();
    spec.sr_scales = {sr_scale};
    return build_patchset(imgs, spec);
}

std::vector<char> file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const ModelConfig kToy{8, 12, 3, 1, 2};

} // namespace

TEST_CASE("he init statistics and determinism") {
    ModelConfig big{256, 256, 3, 1, 1};
    auto p = RlcscParams<float>::make(big);
    Rng rng(123);
    he_init(p, rng);

    // S is 256x256x3x3: variance within 5% of 2/(256*9)
    const double want_var = 2.0 / (256.0 * 9.0);
    double mean = 0.0;
    for (float v : p.s.data) mean += v;
    mean /= static_cast<double>(p.s.numel());
    double var = 0.0;
    for (float v : p.s.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(p.s.numel() - 1);
    CHECK(std::abs(var - want_var) < 0.05 * want_var);

    const double sigma = std::sqrt(want_var);
    CHECK(std::abs(mean) < 3.0 * sigma / std::sqrt(static_cast<double>(p.s.numel())));

    for (float v : p.theta.data) CHECK(v == 0.0f);

    auto q = RlcscParams<float>::make(big);
    Rng rng2(123);
    he_init(q, rng2);
    CHECK(bit_equal(p.s, q.s));
    CHECK(bit_equal(p.f1, q.f1));

    Rng rng3(124);
    he_init(q, rng3);
    CHECK(!bit_equal(p.s, q.s));
}

TEST_CASE("lr schedule steps down by the decay factor") {
    TrainConfig cfg;
    CHECK(lr_schedule(0, cfg) == doctest::Approx(0.1));
    CHECK(lr_schedule(9, cfg) == doctest::Approx(0.1));
    CHECK(lr_schedule(10, cfg) == doctest::Approx(0.01));
    CHECK(lr_schedule(34, cfg) == doctest::Approx(1e-4));
    CHECK_THROWS_AS(lr_schedule(-1, cfg), NumericError);
}

TEST_CASE("train config parsing, line numbers, validation") {
    const auto dir = temp_dir("config");
    const auto good = dir / "good.cfg";
    {
        std::ofstream out(good);
        out << "# toy settings\nbatch_size=16\nlr0=0.01\nepochs=2\nseed=7\n"
            << "residual_enabled=false\nlr_decay_every=1000\n";
    }
    const TrainConfig cfg = parse_train_config(good);
    CHECK(cfg.batch_size == 16);
    CHECK(cfg.lr0 == doctest::Approx(0.01));
    CHECK(cfg.epochs == 2);
    CHECK(cfg.seed == 7);
    CHECK(cfg.residual_enabled == false);
    CHECK(cfg.momentum == doctest::Approx(0.9)); // untouched default

    const auto bad_key = dir / "badkey.cfg";
    std::ofstream(bad_key) << "batch_size=16\nnot_a_key=3\n";
    CHECK_THROWS_WITH_AS(parse_train_config(bad_key), doctest::Contains("line 2"), FormatError);

    const auto bad_value = dir / "badvalue.cfg";
    std::ofstream(bad_value) << "batch_size=16\n\nlr0=fast\n";
    CHECK_THROWS_WITH_AS(parse_train_config(bad_value), doctest::Contains("line 3"), FormatError);

    const auto bad_line = dir / "badline.cfg";
    std::ofstream(bad_line) << "batch_size\n";
    CHECK_THROWS_WITH_AS(parse_train_config(bad_line), doctest::Contains("line 1"), FormatError);

    const auto invalid = dir / "invalid.cfg";
    std::ofstream(invalid) << "batch_size=0\n";
    CHECK_THROWS_AS(parse_train_config(invalid), FormatError);

    CHECK_THROWS_AS(parse_train_config(dir / "missing.cfg"), IoError);

    // round-trip through the string form
    const auto rt = dir / "rt.cfg";
    std::ofstream(rt) << train_config_to_string(cfg);
    const TrainConfig back = parse_train_config(rt);
    CHECK(back.batch_size == cfg.batch_size);
    CHECK(back.seed == cfg.seed);
    CHECK(back.residual_enabled == cfg.residual_enabled);
}

TEST_CASE("batch loss: bicubic energy at zero params, exact zero on equal pairs") {
    auto params = RlcscParams<float>::make(kToy);
    Rng rng(5);
    Tensor4<float> iy(3, 1, 9, 9), ix(3, 1, 9, 9);
    fill_uniform(iy, rng, 0.0, 1.0);
    fill_uniform(ix, rng, 0.0, 1.0);

    CHECK(batch_loss(params, iy, ix, true) == doctest::Approx(mse(iy, ix)).epsilon(1e-12));
    CHECK(batch_loss(params, iy, iy, true) == 0.0);

    // manual composition: mean over ((R + iy - ix)^2)
    Rng prng(6);
    for (auto* t : {&params.f0, &params.f1, &params.w1, &params.s, &params.w2, &params.h})
        fill_gaussian(*t, prng, 0.2);
    const auto r = residual(params, iy);
    double acc = 0.0;
    for (std::size_t i = 0; i < r.numel(); ++i) {
        const double d = static_cast<double>(r.data[i]) + iy.data[i] - ix.data[i];
        acc += d * d;
    }
    CHECK(batch_loss(params, iy, ix, true) ==
          doctest::Approx(acc / static_cast<double>(r.numel())).epsilon(1e-6));

    // ablation form: mean((R - ix)^2)
    double acc2 = 0.0;
    for (std::size_t i = 0; i < r.numel(); ++i) {
        const double d = static_cast<double>(r.data[i]) - ix.data[i];
        acc2 += d * d;
    }
    CHECK(batch_loss(params, iy, ix, false) ==
          doctest::Approx(acc2 / static_cast<double>(r.numel())).epsilon(1e-6));

    CHECK_THROWS_AS(batch_loss(params, Tensor4<float>(), Tensor4<float>(), true), FormatError);
}

TEST_CASE("sgd step: vanilla, clipping, momentum recurrence, projection, decay") {
    TrainConfig cfg;
    auto params = RlcscParams<float>::make(kToy);
    auto grads = ParamSet::zeros_like(params);
    auto vel = ParamSet::zeros_like(params);

    SUBCASE("vanilla step moves by lr * grad") {
        cfg.momentum = 0.0;
        cfg.weight_decay = 0.0;
        cfg.clip_theta = 2.0; // keep the clip bound out of the way here
        grads.f0.data[0] = 1.0f;
        sgd_step(params, grads, vel, 0.1, cfg, 0);
        CHECK(params.f0.data[0] == doctest::Approx(-0.1f));
    }

    SUBCASE("gradients clip to the 0.4 bound before use") {
        cfg.momentum = 0.0;
        cfg.weight_decay = 0.0;
        grads.f0.data[0] = 5.0f;
        grads.f0.data[1] = -5.0f;
        sgd_step(params, grads, vel, 0.1, cfg, 0);
        CHECK(params.f0.data[0] == doctest::Approx(-0.04f));
        CHECK(params.f0.data[1] == doctest::Approx(0.04f));
    }

    SUBCASE("two momentum steps with constant gradient follow lr*(g + 1.9 g)") {
        cfg.momentum = 0.9;
        cfg.weight_decay = 0.0;
        grads.f0.data[0] = 0.2f;
        sgd_step(params, grads, vel, 0.1, cfg, 0);
        sgd_step(params, grads, vel, 0.1, cfg, 1);
        CHECK(params.f0.data[0] == doctest::Approx(-0.1 * (0.2 + 1.9 * 0.2)).epsilon(1e-6));
    }

    SUBCASE("theta projects to nonnegative and skips weight decay") {
        cfg.momentum = 0.0;
        cfg.weight_decay = 0.5;
        params.theta.data[0] = 0.01f;
        grads.theta.data[0] = 1.0f; // pushes theta negative
        params.f0.data[0] = 1.0f;   // decay applies here
        sgd_step(params, grads, vel, 0.1, cfg, 0);
        CHECK(params.theta.data[0] == 0.0f);
        CHECK(params.f0.data[0] == doctest::Approx(1.0f - 0.1f * 0.5f));
    }

    SUBCASE("zero learning rate changes nothing") {
        grads.f0.data[0] = 0.3f;
        grads.theta.data[0] = -0.2f;
        auto before = params;
        sgd_step(params, grads, vel, 0.0, cfg, 0);
        CHECK(bit_equal(params.f0, before.f0));
        CHECK(bit_equal(params.theta, before.theta));
    }

    SUBCASE("non-finite gradient aborts naming the parameter and step") {
        grads.w1.data[5] = std::numeric_limits<float>::quiet_NaN();
        CHECK_THROWS_WITH_AS(sgd_step(params, grads, vel, 0.1, cfg, 42),
                             doctest::Contains("W1"), NumericError);
        grads.w1.data[5] = 0.0f;
        grads.s.data[0] = std::numeric_limits<float>::infinity();
        CHECK_THROWS_WITH_AS(sgd_step(params, grads, vel, 0.1, cfg, 42),
                             doctest::Contains("step 42"), NumericError);
    }

    SUBCASE("no hidden state: identical inputs give identical updates") {
        cfg.weight_decay = 0.0;
        Rng rng(9);
        fill_gaussian(grads.s, rng, 0.1);
        auto params2 = params;
        auto vel2 = vel;
        sgd_step(params, grads, vel, 0.05, cfg, 0);
        sgd_step(params2, grads, vel2, 0.05, cfg, 0);
        CHECK(bit_equal(params.s, params2.s));
        CHECK(bit_equal(vel.s, vel2.s));
    }
}

TEST_CASE("checkpoint round-trip reproduces forward bitwise") {
    Rng rng(31);
    auto ckpt = Checkpoint{};
    ckpt.model = kToy;
    ckpt.epoch = 3;
    ckpt.params = RlcscParams<float>::make(kToy);
    he_init(ckpt.params, rng);
    for (auto& v : ckpt.params.theta.data) v = 0.01f;
    ckpt.velocity = ParamSet::zeros_like(ckpt.params);
    fill_gaussian(ckpt.velocity.w2, rng, 0.1);

    const auto dir = temp_dir("ckpt");
    const auto path = dir / "model.bin";
    save_checkpoint(ckpt, path);
    CHECK(!std::filesystem::exists(dir / "model.bin.tmp")); // atomic write cleans up

    const Checkpoint back = load_checkpoint(path);
    CHECK(back.epoch == 3);
    CHECK(back.model.n_f == kToy.n_f);
    CHECK(bit_equal(back.velocity.w2, ckpt.velocity.w2));

    Tensor4<float> input(1, 1, 12, 12);
    Rng irng(32);
    fill_uniform(input, irng, 0.0, 1.0);
    CHECK(bit_equal(forward(back.params, input), forward(ckpt.params, input)));

    // save(load(x)) is byte-identical
    const auto path2 = dir / "model2.bin";
    save_checkpoint(back, path2);
    CHECK(file_bytes(path) == file_bytes(path2));

    // corrupt magic
    auto bytes = file_bytes(path);
    bytes[0] = 'X';
    const auto bad = dir / "bad.bin";
    std::ofstream(bad, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    CHECK_THROWS_AS(load_checkpoint(bad), FormatError);

    // truncate
    bytes = file_bytes(path);
    bytes.resize(bytes.size() / 2);
    std::ofstream(bad, std::ios::binary | std::ios::trunc)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    CHECK_THROWS_AS(load_checkpoint(bad), FormatError);
}

TEST_CASE("training descends, is deterministic, and writes the trace") {
    const PatchSet set = tiny_patchset(1, 140, 140); // 16 pairs
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.lr0 = 0.01;
    cfg.lr_decay_every = 1000;
    cfg.epochs = 3;
    cfg.seed = 11;
    cfg.checkpoint_every = 2;

    const auto dir_a = temp_dir("run-a");
    const auto dir_b = temp_dir("run-b");
    const auto res_a = train(set, kToy, cfg, {dir_a, false, false});
    const auto res_b = train(set, kToy, cfg, {dir_b, false, false});

    REQUIRE(res_a.trace.size() == 3);
    CHECK(res_a.trace.back().mean_loss < res_a.trace.front().mean_loss);
    CHECK(res_a.trace[0].steps_done == 2);
    CHECK(res_a.trace[2].steps_done == 6);
    CHECK(res_a.trace[0].lr == doctest::Approx(0.01));

    // same seed twice -> byte-identical checkpoints
    CHECK(file_bytes(dir_a / "checkpoint-final.bin") == file_bytes(dir_b / "checkpoint-final.bin"));
    CHECK(std::filesystem::exists(dir_a / "checkpoint-2.bin"));

    // loss csv: header + one row per epoch
    std::ifstream csv(dir_a / "loss.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "epoch,step,loss,lr");
    int rows = 0;
    while (std::getline(csv, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);
}

TEST_CASE("resume reproduces the uninterrupted run bitwise") {
    const PatchSet set = tiny_patchset(1, 140, 140);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.lr0 = 0.01;
    cfg.epochs = 4;
    cfg.seed = 17;
    cfg.checkpoint_every = 2;

    const auto full_dir = temp_dir("full");
    const auto res_full = train(set, kToy, cfg, {full_dir, false, false});

    TrainConfig first_half = cfg;
    first_half.epochs = 2;
    const auto half_dir = temp_dir("half");
    train(set, kToy, first_half, {half_dir, false, false});

    const Checkpoint mid = load_checkpoint(half_dir / "checkpoint-final.bin");
    CHECK(mid.epoch == 2);
    const auto res_resumed = train_from(set, mid, cfg, {half_dir, false, true});
    CHECK(res_resumed.checkpoint.epoch == 4);
    CHECK(res_resumed.trace.front().epoch == 2); // continues where it left off

    const auto resumed_path = half_dir / "checkpoint-final.bin";
    CHECK(file_bytes(resumed_path) == file_bytes(full_dir / "checkpoint-final.bin"));

    // csv rows are contiguous: epochs 1..4
    std::ifstream csv(half_dir / "loss.csv");
    std::string line;
    std::getline(csv, line);
    std::vector<int> epochs;
    while (std::getline(csv, line))
        if (!line.empty()) epochs.push_back(std::stoi(line.substr(0, line.find(','))));
    CHECK(epochs == std::vector<int>{1, 2, 3, 4});
}

TEST_CASE("divergence aborts and leaves existing checkpoints intact") {
    const PatchSet set = tiny_patchset(1, 140, 140);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.lr0 = 0.01;
    cfg.epochs = 4;
    cfg.seed = 23;

    const auto dir = temp_dir("diverge");
    Checkpoint poisoned;
    poisoned.model = kToy;
    poisoned.epoch = 1;
    poisoned.params = RlcscParams<float>::make(kToy);
    for (auto* t : {&poisoned.params.f0, &poisoned.params.f1, &poisoned.params.w1,
                    &poisoned.params.s, &poisoned.params.w2, &poisoned.params.h})
        std::fill(t->data.begin(), t->data.end(), 1e10f); // overflows to inf in one pass
    poisoned.velocity = ParamSet::zeros_like(poisoned.params);

    const auto good_path = dir / "checkpoint-1.bin";
    Checkpoint good;
    good.model = kToy;
    good.epoch = 1;
    good.params = RlcscParams<float>::make(kToy);
    good.velocity = ParamSet::zeros_like(good.params);
    save_checkpoint(good, good_path);
    const auto good_bytes = file_bytes(good_path);

    CHECK_THROWS_WITH_AS(train_from(set, poisoned, cfg, {dir, false, false}),
                         doctest::Contains("diverged"), NumericError);
    CHECK(file_bytes(good_path) == good_bytes);
    CHECK_NOTHROW(load_checkpoint(good_path));
}

TEST_CASE("residual-disabled training stays worse at equal steps") {
    const PatchSet set = tiny_patchset(2, 173, 173); // 50 pairs
    TrainConfig cfg;
    cfg.batch_size = 10;
    cfg.lr0 = 0.01;
    cfg.lr_decay_every = 1000;
    cfg.epochs = 2;
    cfg.seed = 29;

    auto with = train(set, kToy, cfg, {});
    cfg.residual_enabled = false;
    auto without = train(set, kToy, cfg, {});
    CHECK(without.trace.back().mean_loss >= with.trace.back().mean_loss);
}
