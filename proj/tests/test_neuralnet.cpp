#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "addai/autoencoder.hpp"
#include "addai/dataset.hpp"
#include "addai/neuralnet.hpp"

#include "oracles.hpp"

using namespace addai;

TEST_CASE("init_params shapes and determinism") {
    const auto p = init_params({2, 1}, 7);
    REQUIRE(p.layers.size() == 1);
    CHECK(p.layers[0].in == 2);
    CHECK(p.layers[0].out == 1);
    CHECK(p.layers[0].b == std::vector<float>{0.0f});

    const auto q = init_params({2, 1}, 7);
    CHECK(p == q);
    CHECK(init_params({2, 1}, 8) != p);

    const auto table2 = init_params({40, 35, 30, 25, 30, 35, 40}, 1);
    CHECK(table2.parameter_count() == 6595);  // 6,400 weights + 195 biases

    const double bound = std::sqrt(6.0 / (40 + 35));
    for (float w : table2.layers[0].w) {
        CHECK(w <= bound);
        CHECK(w >= -bound);
    }

    CHECK_THROWS(init_params({4}, 1));
    CHECK_THROWS(init_params({4, 0, 4}, 1));
}

TEST_CASE("forward basics") {
    SECTION("all-zero parameters give all-zero output") {
        auto p = init_params({3, 4, 3}, 5);
        p = zero_like(p);
        const std::vector<float> x{0.3f, -2.0f, 1.0f};
        const auto trace = forward<float>(p, x);
        for (float v : trace.output()) CHECK(v == 0.0f);
    }
    SECTION("single linear layer with identity weights passes input through") {
        NetworkParams p;
        p.layers.push_back({2, 2, {1.0f, 0.0f, 0.0f, 1.0f}, {0.0f, 0.0f}});
        const std::vector<float> x{1.25f, -3.5f};
        const auto trace = forward<float>(p, x);
        CHECK(trace.activations.back() == x);
    }
    SECTION("fixed 2-2-2 net matches the hand computation") {
        NetworkParamsT<double> p;
        p.layers.push_back({2, 2, {0.5, -0.25, 0.1, 0.8}, {0.05, -0.1}});
        p.layers.push_back({2, 2, {1.0, 2.0, -1.5, 0.5}, {0.0, 0.25}});
        const std::vector<double> x{0.4, -0.6};
        const auto trace = forward<double>(p, x);

        const double h0 = std::tanh(0.5 * 0.4 + (-0.25) * (-0.6) + 0.05);
        const double h1 = std::tanh(0.1 * 0.4 + 0.8 * (-0.6) + (-0.1));
        const double o0 = 1.0 * h0 + 2.0 * h1 + 0.0;
        const double o1 = -1.5 * h0 + 0.5 * h1 + 0.25;
        CHECK(trace.activations[1][0] == Catch::Approx(h0).epsilon(1e-12));
        CHECK(trace.activations[1][1] == Catch::Approx(h1).epsilon(1e-12));
        CHECK(trace.output()[0] == Catch::Approx(o0).epsilon(1e-12));
        CHECK(trace.output()[1] == Catch::Approx(o1).epsilon(1e-12));
    }
    SECTION("dimension mismatch") {
        const auto p = init_params({3, 2}, 1);
        CHECK_THROWS(forward<float>(p, std::vector<float>{1.0f, 2.0f}));
    }
}

TEST_CASE("mse") {
    const std::vector<float> a{1.0f, 2.0f, 3.0f};
    CHECK(mse<float>(a, a) == 0.0);
    CHECK(mse<float>(std::vector<float>{0.0f, 0.0f}, std::vector<float>{1.0f, 1.0f}) == 1.0);
    CHECK(mse<float>(a, std::vector<float>{1.0f, 2.0f, 4.0f}) == Catch::Approx(1.0 / 3.0));
    CHECK(mse<float>(a, std::vector<float>{1.0f, 2.0f, 4.0f}) ==
          mse<float>(std::vector<float>{1.0f, 2.0f, 4.0f}, a));
    CHECK_THROWS(mse<float>(a, std::vector<float>{1.0f}));
}

TEST_CASE("backward special cases") {
    SECTION("zero loss means zero gradients") {
        NetworkParams p;
        p.layers.push_back({2, 2, {1.0f, 0.0f, 0.0f, 1.0f}, {0.0f, 0.0f}});
        const std::vector<float> x{0.5f, -1.0f};
        const auto trace = forward<float>(p, x);
        const auto grads = backward<float>(p, trace, x);
        for (float g : grads.layers[0].w) CHECK(g == 0.0f);
        for (float g : grads.layers[0].b) CHECK(g == 0.0f);
    }
    SECTION("single linear neuron: d/dw of (w*x)^2 at w=1, x=1 is 2") {
        NetworkParams p;
        p.layers.push_back({1, 1, {1.0f}, {0.0f}});
        const std::vector<float> x{1.0f};
        const std::vector<float> target{0.0f};
        const auto trace = forward<float>(p, x);
        const auto grads = backward<float>(p, trace, target);
        CHECK(grads.layers[0].w[0] == Catch::Approx(2.0));
        CHECK(grads.layers[0].b[0] == Catch::Approx(2.0));
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    std::mt19937_64 rng(424242);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    const std::vector<std::vector<size_t>> shapes{{40, 25, 40}, {5, 3, 2, 3, 5}, {4, 4}};
    for (size_t s = 0; s < shapes.size(); ++s) {
        const auto p = init_params<double>(shapes[s], 100 + s);
        std::vector<double> x(shapes[s].front());
        std::vector<double> target(shapes[s].back());
        for (auto& v : x) v = unit(rng);
        for (auto& v : target) v = unit(rng);

        const auto trace = forward<double>(p, x);
        const auto analytic = backward<double>(p, trace, target);
        const auto fd = oracles::finite_difference_gradients(p, x, target);
        CHECK(oracles::max_relative_gradient_error(analytic, fd) < 1e-4);
    }
}

TEST_CASE("adam_step") {
    TrainConfig cfg;
    cfg.learning_rate = 0.01;

    SECTION("zero gradients leave fresh parameters unchanged") {
        auto p = init_params({3, 2}, 3);
        const auto before = p;
        auto state = init_adam_state(p);
        adam_step(p, zero_like(p), state, cfg);
        CHECK(p == before);
    }
    SECTION("first step has magnitude ~ learning_rate regardless of gradient size") {
        for (float g : {1e-4f, 1.0f, 250.0f}) {
            NetworkParams p;
            p.layers.push_back({1, 1, {0.0f}, {0.0f}});
            NetworkParams grads = p;
            grads.layers[0].w[0] = g;
            grads.layers[0].b[0] = 0.0f;
            auto state = init_adam_state(p);
            adam_step(p, grads, state, cfg);
            CHECK(std::fabs(std::fabs(p.layers[0].w[0]) - cfg.learning_rate) < 1e-6);
        }
    }
    SECTION("minimizes a scalar quadratic") {
        // loss = (w - 3)^2, gradient 2(w - 3)
        NetworkParams p;
        p.layers.push_back({1, 1, {0.0f}, {0.0f}});
        auto state = init_adam_state(p);
        TrainConfig quad_cfg;
        quad_cfg.learning_rate = 0.05;
        for (int step = 0; step < 500; ++step) {
            NetworkParams grads = zero_like(p);
            grads.layers[0].w[0] = 2.0f * (p.layers[0].w[0] - 3.0f);
            adam_step(p, grads, state, quad_cfg);
        }
        CHECK(std::fabs(p.layers[0].w[0] - 3.0f) < 1e-3);
    }
}

TEST_CASE("dropout semantics") {
    const auto p = init_params({6, 5, 4, 5, 6}, 9);
    std::vector<float> x{0.1f, -0.2f, 0.3f, 0.4f, -0.5f, 0.6f};

    SECTION("rate 0 is exactly a no-op even with an rng supplied") {
        std::mt19937_64 rng(1);
        const auto with = forward<float>(p, x, &rng, 0.0);
        const auto without = forward<float>(p, x);
        CHECK(with.activations == without.activations);
    }
    SECTION("inference is pure (bitwise)") {
        const auto a = forward<float>(p, x);
        const auto b = forward<float>(p, x);
        CHECK(a.activations == b.activations);
    }
    SECTION("training mode applies inverted scaling on hidden layers only") {
        std::mt19937_64 rng(22);
        const auto t = forward<float>(p, x, &rng, 0.5);
        REQUIRE(!t.dropout_scale[1].empty());
        CHECK(t.dropout_scale[4].empty());  // output layer untouched
        CHECK(t.activations[0] == std::vector<float>(x.begin(), x.end()));
        bool any_zeroed = false;
        for (size_t l = 1; l + 1 < t.activations.size(); ++l)
            for (size_t j = 0; j < t.activations[l].size(); ++j) {
                const float scale = t.dropout_scale[l][j];
                CHECK((scale == 0.0f || scale == 2.0f));
                CHECK(t.activations[l][j] == t.tanh_out[l][j] * scale);
                any_zeroed = any_zeroed || scale == 0.0f;
            }
        CHECK(any_zeroed);
    }
}

TEST_CASE("training loss trends down on a fixed synthetic set") {
    const auto normals = generate_synthetic(200, 0, 8, 31);
    auto model = build_autoencoder(8, 4, 77);
    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.batch_size = 32;
    cfg.seed = 5;
    cfg.learning_rate = 0.005;
    const auto losses = train(model, normals, cfg);
    REQUIRE(losses.size() == 60);

    // 10-epoch moving average is non-increasing
    auto ma = [&](size_t i) {
        double s = 0.0;
        for (size_t j = i; j < i + 10; ++j) s += losses[j];
        return s / 10.0;
    };
    for (size_t i = 0; i + 11 <= losses.size(); ++i)
        CHECK(ma(i + 1) <= ma(i) + 1e-9);
    CHECK(losses.back() < losses.front());
}

TEST_CASE("params serialization round-trips") {
    const auto p = init_params({7, 5, 3, 5, 7}, 123);
    const auto bytes = serialize_params(p);
    const auto q = deserialize_params(bytes);
    CHECK(p == q);
    CHECK(serialize_params(q) == bytes);

    // 12-byte header + per layer 8 bytes dims + 4 bytes per parameter
    CHECK(bytes.size() == 12 + p.layers.size() * 8 + p.parameter_count() * 4);

    SECTION("corrupted magic") {
        auto bad = bytes;
        bad[0] = 'X';
        CHECK_THROWS_WITH(deserialize_params(bad), Catch::Matchers::ContainsSubstring("magic"));
    }
    SECTION("truncation") {
        auto bad = bytes;
        bad.pop_back();
        CHECK_THROWS(deserialize_params(bad));
    }
    SECTION("trailing bytes") {
        auto bad = bytes;
        bad.push_back(0);
        CHECK_THROWS_WITH(deserialize_params(bad),
                          Catch::Matchers::ContainsSubstring("trailing"));
    }
}
