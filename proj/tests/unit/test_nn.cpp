#include <cmath>

#include <doctest.h>

#include "gradcheck.hpp"
#include "spectramin/error.hpp"
#include "spectramin/learners.hpp"

using namespace spectramin;
using nn::LayerSpec;

namespace {

CnnArchitecture toy_arch(std::size_t len, std::size_t n_classes) {
    CnnArchitecture a;
    a.name = "toy";
    a.input_length = len;
    a.n_classes = n_classes;
    a.layers = {LayerSpec::conv(3, 5), LayerSpec::max_pool(2), LayerSpec::dense(6),
                LayerSpec::dense(n_classes, nn::Activation::None), LayerSpec::softmax()};
    return a;
}

} // namespace

TEST_CASE("backprop matches finite differences") {
    SUBCASE("toy cnn") {
        const auto net = build_network<double>(toy_arch(16, 2));
        const auto r = gradcheck::check(net, gradcheck::random_samples(4, {16}, 2, 1), 11);
        CHECK(r.n_params > 50);
        CHECK(r.n_bad == 0);
    }
    SUBCASE("strided conv with parallel branches and dropout") {
        CnnArchitecture a;
        a.input_length = 24;
        a.n_classes = 3;
        a.layers = {LayerSpec::conv(4, 5, 2),
                    LayerSpec::parallel({{LayerSpec::conv(2, 3)}, {LayerSpec::conv(2, 1), LayerSpec::conv(3, 5)}}),
                    LayerSpec::max_pool(3), LayerSpec::dense(5), LayerSpec::dropout(),
                    LayerSpec::dense(3, nn::Activation::None), LayerSpec::softmax()};
        const auto r = gradcheck::check(build_network<double>(a), gradcheck::random_samples(4, {24}, 3, 2), 5);
        CHECK(r.n_bad == 0);
    }
    SUBCASE("two-stream") {
        TwoStreamArchitecture ts{toy_arch(16, 2), toy_arch(16, 2)};
        ts.stream_b.layers[0] = LayerSpec::conv(2, 3);
        const auto r = gradcheck::check(ts.build_as<double>(), gradcheck::random_samples(4, {16, 16}, 2, 3), 7);
        CHECK(r.n_bad == 0);
    }
    SUBCASE("softmax-mae regressor") {
        const auto r = gradcheck::check(build_network<double>(toy_arch(20, 3)),
                                        gradcheck::random_samples(4, {20}, 3, 4, true), 9);
        CHECK(r.n_bad == 0);
    }
}

TEST_CASE("ema recursion closed form") {
    for (double d : {0.0, 0.9, 0.999}) {
        CAPTURE(d);
        auto rng = make_rng(42);
        const double s0 = 0.7;
        std::vector<double> shadow{s0};
        std::vector<double> w(100);
        for (auto& x : w) x = uniform(rng, -1.0, 1.0);
        for (double wi : w) nn::ema_update<double>(shadow, std::vector<double>{wi}, d);
        double closed = std::pow(d, 100) * s0;
        for (int i = 0; i < 100; ++i) closed += (1 - d) * std::pow(d, 99 - i) * w[static_cast<std::size_t>(i)];
        CHECK(std::abs(shadow[0] - closed) <= 1e-12);
    }
    SUBCASE("constant weights: gap shrinks by d^n") {
        std::vector<double> shadow{2.0};
        const double d = 0.9;
        for (int i = 0; i < 25; ++i) nn::ema_update<double>(shadow, std::vector<double>{1.0}, d);
        CHECK(shadow[0] - 1.0 == doctest::Approx(std::pow(d, 25)).epsilon(1e-12));
    }
}

TEST_CASE("two-stream shapes") {
    CnnArchitecture a;
    a.input_length = 100;
    a.n_classes = 2;
    a.layers = {LayerSpec::conv(8, 3), LayerSpec::max_pool(2), LayerSpec::dense(2, nn::Activation::None),
                LayerSpec::softmax()};
    TwoStreamArchitecture ts{a, a};
    const auto net = ts.build_as<float>();
    CHECK(net.stream_output_shape(0) == nn::Shape{8, 50});
    CHECK(net.fused_shape() == nn::Shape{16, 50});

    ts.stream_b.input_length = 64;
    CHECK_THROWS_AS(ts.build_as<float>(), ArchError);
}

TEST_CASE("zeroed stream B reduces to the single-stream network") {
    CnnArchitecture a = toy_arch(16, 2);
    const TwoStreamArchitecture ts{a, a};
    const auto two = ts.build_as<double>();
    const auto one = build_network<double>(a);

    std::vector<double> p2(two.param_count());
    two.init_params(p2, 3);
    const std::size_t b_off = two.stream_param_offset(1), b_n = two.stream_param_count(1);
    std::fill(p2.begin() + static_cast<long>(b_off), p2.begin() + static_cast<long>(b_off + b_n), 0.0);

    // Single-stream params: stream A as is; first dense keeps the A half of each row.
    const auto fa = two.stream_output_shape(0).size();
    const auto fused = two.fused_shape().size();
    const std::size_t units = 6;
    std::vector<double> p1(p2.begin(), p2.begin() + static_cast<long>(two.stream_param_count(0)));
    const auto head = p2.begin() + static_cast<long>(two.head_param_offset());
    for (std::size_t o = 0; o < units; ++o)
        p1.insert(p1.end(), head + static_cast<long>(o * fused), head + static_cast<long>(o * fused + fa));
    p1.insert(p1.end(), head + static_cast<long>(units * fused), p2.end());
    REQUIRE(p1.size() == one.param_count());

    const auto samples = gradcheck::random_samples(3, {16}, 2, 8);
    const std::vector<double> zeros(16, 0.0);
    nn::Workspace<double> w1, w2;
    for (const auto& s : samples) {
        const std::vector<std::span<const double>> in1{s.inputs[0]};
        const std::vector<std::span<const double>> in2{s.inputs[0], zeros};
        one.forward(p1, in1, w1, {});
        two.forward(p2, in2, w2, {});
        for (std::size_t k = 0; k < 2; ++k) CHECK(w1.logits.data[k] == doctest::Approx(w2.logits.data[k]).epsilon(1e-12));
    }
}

TEST_CASE("architectures") {
    SUBCASE("ensemble6 shape-checks on the Raman grid") {
        const auto archs = build_ensemble6(20, 1715);
        REQUIRE(archs.size() == 6);
        for (const auto& a : archs) CHECK_NOTHROW(a.validate());
        std::vector<std::size_t> vgg;
        for (const auto& a : archs)
            if (a.name.starts_with("vgg")) {
                CHECK(a.conv_layer_count() == 6);
                vgg.push_back(a.dense_layer_count());
            }
        CHECK(vgg == std::vector<std::size_t>{2, 3});
    }
    SUBCASE("baselines") {
        CHECK_NOTHROW(liu_baseline(10, 1715).validate());
        const auto s = simple_fusion_net(10, 1715);
        CHECK(s.conv_layer_count() == 4);
        CHECK(s.dense_layer_count() == 2);
        CHECK_NOTHROW(libs_regressor(13, 7001).validate());
    }
    SUBCASE("json round-trip") {
        const auto a = build_ensemble6(5, 300)[3];
        const auto b = CnnArchitecture::from_json(a.to_json());
        CHECK(b.to_json() == a.to_json());
    }
    SUBCASE("bad shapes") {
        auto a = toy_arch(4, 2);
        a.layers.insert(a.layers.begin(), LayerSpec::max_pool(8));
        CHECK_THROWS_AS(a.validate(), ArchError);
        auto b = toy_arch(16, 2);
        b.layers.pop_back();
        CHECK_THROWS_AS(b.validate(), ArchError);
    }
}

TEST_CASE("training loss goes down on a toy problem") {
    const auto arch = toy_arch(16, 2);
    const auto net = build_network<float>(arch);
    std::vector<TrainExample> data;
    auto rng = make_rng(5);
    for (std::size_t i = 0; i < 16; ++i) {
        std::vector<float> x(16);
        for (std::size_t j = 0; j < 16; ++j)
            x[j] = static_cast<float>((i % 2 ? j < 8 : j >= 8) * 0.8 + uniform(rng, 0.0, 0.2));
        data.push_back({{x}, i % 2, {}});
    }
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e-2;
    const auto out = train_network(net, data, LossKind::CrossEntropy, cfg);
    int increases = 0;
    for (std::size_t e = 1; e < out.epoch_loss.size(); ++e) increases += out.epoch_loss[e] > out.epoch_loss[e - 1];
    CHECK(increases <= 1);
    CHECK(out.epoch_loss.back() < out.epoch_loss.front());

    const auto again = train_network(net, data, LossKind::CrossEntropy, cfg);
    CHECK(again.weights == out.weights);
}

TEST_CASE("train config validation") {
    TrainConfig c;
    c.learning_rate = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json({{"optimizer", "rmsprop"}}), ConfigError);
    const auto r = TrainConfig::from_json(TrainConfig{}.to_json());
    CHECK(r.to_json() == TrainConfig{}.to_json());
}

TEST_CASE("layer json round-trip") {
    const auto l = LayerSpec::parallel({{LayerSpec::conv(2, 3, 2)}, {LayerSpec::max_pool(2)}});
    CHECK(nn::to_json(nn::layer_from_json(nn::to_json(l))) == nn::to_json(l));
}
