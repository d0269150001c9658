// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <tuple>

#include "doctest.h"
#include "gradcheck.hpp"
#include "lens/error.hpp"
#include "lens/nncore.hpp"
#include "lens/reference.hpp"
#include "support.hpp"

using namespace lens;
using namespace lens::nn;

namespace {

DenseNet random_net(Rng& rng, std::vector<std::size_t> widths) {
    auto net = make_dense_net(widths, Activation::relu, Activation::linear, rng);
    for (auto& l : net.layers) {
        for (auto& b : l.bias) b = rng.uniform(-0.5, 0.5);
    }
    return net;
}

double ce_loss(const DenseNet& net, const Matrix& x, const std::vector<std::size_t>& y) {
    return softmax_cross_entropy(forward(net, x), y).loss;
}

}  // namespace

TEST_CASE("parameter count of the 4-8-2 example") {
    Rng rng(1);
    const std::size_t widths[] = {4, 8, 2};
    CHECK(count_parameters(make_dense_net(widths, Activation::relu, Activation::linear, rng)) == 58);
}

TEST_CASE("reference architectures reproduce the published parameter counts") {
    // Published teacher/student counts per (dataset, task).
    const std::map<std::tuple<std::string, std::string, std::string>, std::size_t> published{
        {{"CTU-13", "binary", "student"}, 4258},        {{"CTU-13", "binary", "teacher"}, 12610},
        {{"UKM-IDS20", "binary", "student"}, 4258},     {{"UKM-IDS20", "binary", "teacher"}, 12610},
        {{"Edge-IIoTset", "binary", "student"}, 4225},  {{"Edge-IIoTset", "binary", "teacher"}, 12545},
        {{"NSL-KDD", "binary", "student"}, 4225},       {{"NSL-KDD", "binary", "teacher"}, 12545},
        {{"UKM-IDS20", "multiclass", "student"}, 4489}, {{"UKM-IDS20", "multiclass", "teacher"}, 13065},
        {{"Edge-IIoTset", "multiclass", "student"}, 9167}, {{"Edge-IIoTset", "multiclass", "teacher"}, 22415},
        {{"NSL-KDD", "multiclass", "student"}, 8197},   {{"NSL-KDD", "multiclass", "teacher"}, 24325},
    };
    std::size_t matched = 0;
    for (const auto& arch : reference_architectures()) {
        const auto key = std::make_tuple(std::string(arch.dataset), std::string(arch.task), std::string(arch.role));
        REQUIRE(published.count(key) == 1);
        // independent count: sum of (in + 1) * out over consecutive widths
        std::size_t by_hand = 0;
        for (std::size_t i = 0; i + 1 < arch.widths.size(); ++i) by_hand += (arch.widths[i] + 1) * arch.widths[i + 1];
        CHECK(by_hand == published.at(key));
        CHECK(count_parameters(build_reference(arch)) == published.at(key));
        ++matched;
    }
    CHECK(matched == published.size());
}

TEST_CASE("initialization is seeded and bounded by sqrt(6 / fan_in)") {
    Rng a(9), b(9);
    const std::size_t widths[] = {10, 7, 3};
    const auto na = make_dense_net(widths, Activation::relu, Activation::linear, a);
    const auto nb = make_dense_net(widths, Activation::relu, Activation::linear, b);
    CHECK(na == nb);
    for (const auto& l : na.layers) {
        const double bound = std::sqrt(6.0 / static_cast<double>(l.in_dim()));
        for (double w : l.weight.values()) CHECK(std::abs(w) <= bound);
        for (double v : l.bias) CHECK(v == 0.0);
    }
}

TEST_CASE("forward matches a hand computation") {
    DenseNet net;
    net.layers.push_back({Matrix(2, 2, {1.0, -1.0, 0.5, 2.0}), {0.0, -3.0}, Activation::relu});
    net.layers.push_back({Matrix(1, 2, {2.0, 1.0}), {0.25}, Activation::linear});
    const Matrix x(1, 2, {3.0, 1.0});
    // hidden: relu(3 - 1) = 2, relu(1.5 + 2 - 3) = 0.5; out: 4 + 0.5 + 0.25
    CHECK(forward(net, x)(0, 0) == 4.75);
}

TEST_CASE("forward contract errors") {
    Rng rng(2);
    auto net = random_net(rng, {3, 4, 2});
    CHECK_THROWS_AS(forward(net, Matrix(2, 5)), UsageError);
    net.layers[0].weight(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(forward(net, Matrix(1, 3, 1.0)), NumericError);
    CHECK_THROWS_AS(net.validate(), NumericError);
    DenseNet broken;
    broken.layers.push_back({Matrix(4, 3), std::vector<double>(4), Activation::relu});
    broken.layers.push_back({Matrix(2, 5), std::vector<double>(2), Activation::linear});
    CHECK_THROWS_AS(broken.validate(), UsageError);
}

TEST_CASE("softmax cross-entropy value and gradient by hand") {
    const Matrix logits(1, 3, {1.0, 2.0, 3.0});
    const std::size_t y[] = {2};
    const auto r = softmax_cross_entropy(logits, y);
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    CHECK(r.loss == doctest::Approx(-std::log(std::exp(3.0) / z)).epsilon(1e-14));
    CHECK(r.grad(0, 0) == doctest::Approx(std::exp(1.0) / z).epsilon(1e-14));
    CHECK(r.grad(0, 2) == doctest::Approx(std::exp(3.0) / z - 1.0).epsilon(1e-14));
}

TEST_CASE("softmax rows sum to one and survive large logits") {
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        auto logits = test::random_matrix(rng, 4, 5, -500.0, 500.0);
        const auto p = softmax_rows(logits, rng.uniform(0.5, 5.0));
        for (std::size_t i = 0; i < 4; ++i) {
            double s = 0.0;
            for (double v : p.row(i)) {
                CHECK(v >= 0.0);
                s += v;
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("cross-entropy backprop matches finite differences") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t in = 2 + rng.index(5), classes = 2 + rng.index(4), n = 1 + rng.index(6);
        auto net = random_net(rng, {in, 3 + rng.index(6), 2 + rng.index(5), classes});
        const auto x = test::random_matrix(rng, n, in, -2.0, 2.0);
        const auto y = test::random_labels(rng, n, classes);

        ForwardTrace trace;
        const auto out = forward(net, x, &trace);
        auto grads = GradientSet::zeros_like(net);
        const Matrix dx = backward(net, trace, softmax_cross_entropy(out, y).grad, grads);

        const auto check = test::finite_difference(
            parameter_views(net), gradient_views(grads), [&] { return ce_loss(net, x, y); },
            [&] { return test::relu_pattern(net, x); });
        CHECK(check.checked > 0);
        CHECK(check.rel_error < 1e-4);

        Matrix xp = x;
        const auto input_check = test::finite_difference(
            std::vector<std::span<double>>{xp.values()}, std::vector<std::span<const double>>{dx.values()},
            [&] { return ce_loss(net, xp, y); }, [&] { return test::relu_pattern(net, xp); });
        CHECK(input_check.rel_error < 1e-4);
    }
}

TEST_CASE("backward accumulates into the gradient set") {
    Rng rng(5);
    auto net = random_net(rng, {3, 4, 2});
    const auto x = test::random_matrix(rng, 5, 3);
    const std::vector<std::size_t> y{0, 1, 1, 0, 1};
    ForwardTrace trace;
    const auto out = forward(net, x, &trace);
    const auto g = softmax_cross_entropy(out, y).grad;
    auto once = GradientSet::zeros_like(net), twice = GradientSet::zeros_like(net);
    backward(net, trace, g, once);
    backward(net, trace, g, twice);
    backward(net, trace, g, twice);
    const auto a = gradient_views(once), b = gradient_views(twice);
    for (std::size_t t = 0; t < a.size(); ++t) {
        for (std::size_t i = 0; i < a[t].size(); ++i) CHECK(b[t][i] == doctest::Approx(2.0 * a[t][i]).epsilon(1e-14));
    }
    twice.clear();
    for (auto v : gradient_views(twice)) {
        for (double e : v) CHECK(e == 0.0);
    }
}

TEST_CASE("first adam step moves each parameter by lr against the gradient sign") {
    std::vector<double> p{1.0, -2.0, 3.0}, g{0.5, -4.0, 1e-3};
    const std::vector<std::span<double>> params{p};
    const std::vector<std::span<const double>> grads{g};
    Optimizer opt(OptimizerKind::adam, 0.01);
    opt.step(params, grads);
    // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
    CHECK(p[0] == doctest::Approx(1.0 - 0.01 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(-2.0 + 0.01 * 4.0 / (4.0 + 1e-8)).epsilon(1e-14));
    CHECK(p[2] == doctest::Approx(3.0 - 0.01 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-14));

    std::vector<double> q{1.0};
    const std::vector<double> gq{2.0};
    Optimizer sgd(OptimizerKind::sgd, 0.1);
    sgd.step(std::vector<std::span<double>>{q}, std::vector<std::span<const double>>{gq});
    CHECK(q[0] == doctest::Approx(0.8));
}

TEST_CASE("property: a tiny full-batch gradient step never increases the loss") {
    Rng rng(6);
    for (int trial = 0; trial < 30; ++trial) {
        auto net = random_net(rng, {4, 6, 3});
        const auto x = test::random_matrix(rng, 16, 4);
        const auto y = test::random_labels(rng, 16, 3);
        const double before = ce_loss(net, x, y);
        ForwardTrace trace;
        const auto out = forward(net, x, &trace);
        auto grads = GradientSet::zeros_like(net);
        backward(net, trace, softmax_cross_entropy(out, y).grad, grads);
        Optimizer(OptimizerKind::sgd, 1e-6).step(parameter_views(net), gradient_views(grads));
        CHECK(ce_loss(net, x, y) <= before);
    }
}

TEST_CASE("fit_dense is deterministic and reduces the loss on a separable task") {
    Rng data_rng(7);
    Matrix x(200, 2);
    std::vector<std::size_t> y(200);
    for (std::size_t i = 0; i < 200; ++i) {
        y[i] = i % 2;
        x(i, 0) = data_rng.normal() + (y[i] ? 2.0 : -2.0);
        x(i, 1) = data_rng.normal();
    }
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 32;
    cfg.learning_rate = 1e-2;
    auto loss = [&](std::span<const std::size_t> rows, const Matrix& out) {
        std::vector<std::size_t> labels;
        for (auto r : rows) labels.push_back(y[r]);
        return softmax_cross_entropy(out, labels);
    };
    auto train = [&] {
        Rng rng(3);
        const std::size_t widths[] = {2, 8, 2};
        auto net = make_dense_net(widths, Activation::relu, Activation::linear, rng);
        auto hist = fit_dense(net, x, cfg, rng, loss);
        return std::make_pair(net, hist);
    };
    const auto [net1, hist1] = train();
    const auto [net2, hist2] = train();
    CHECK(net1 == net2);
    CHECK(hist1 == hist2);
    REQUIRE(hist1.size() == 20);
    CHECK(hist1.back() < 0.5 * hist1.front());

    TrainConfig none = cfg;
    none.epochs = 0;
    Rng rng(1);
    auto untouched = net1;
    CHECK(fit_dense(untouched, x, none, rng, loss).empty());
    CHECK(untouched == net1);
}

TEST_CASE("non-finite loss raises a divergence error with the epoch") {
    Rng rng(8);
    auto net = random_net(rng, {2, 3, 2});
    const Matrix x(10, 2, 1.0);
    TrainConfig cfg;
    cfg.epochs = 3;
    std::size_t calls = 0;
    try {
        fit_dense(net, x, cfg, rng, [&](std::span<const std::size_t>, const Matrix& out) {
            LossAndGrad r{++calls > 1 ? std::numeric_limits<double>::quiet_NaN() : 1.0, Matrix(out.rows(), out.cols())};
            return r;
        });
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.epoch() == 1);
    }
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg = {};
    cfg.learning_rate = -1.0;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg = {};
    cfg.epochs = 7;
    cfg.optimizer = OptimizerKind::sgd;
    const auto back = train_config_from_json(to_json(cfg));
    CHECK(back.epochs == 7);
    CHECK(back.optimizer == OptimizerKind::sgd);
}

TEST_CASE("dense net json round-trip is bit exact") {
    Rng rng(10);
    const auto net = random_net(rng, {5, 7, 3});
    const auto back = dense_net_from_json(nlohmann::json::parse(to_json(net).dump()));
    CHECK(back == net);
}
