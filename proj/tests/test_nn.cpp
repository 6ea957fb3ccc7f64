#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mal/nn.hpp"
#include "support/test_support.hpp"

using namespace mal;

TEST_CASE("classify_family covers the five profiles", "[nn]") {
    REQUIRE(classify_family({64, 64, 64}) == Family::Equal);
    REQUIRE(classify_family({128, 64, 32}) == Family::WideToNarrow);
    REQUIRE(classify_family({32, 64, 128}) == Family::NarrowToWide);
    REQUIRE(classify_family({32, 128, 32}) == Family::Pyramid);
    REQUIRE(classify_family({128, 32, 128}) == Family::InversePyramid);
    REQUIRE(classify_family({64}) == Family::Equal);
    REQUIRE(classify_family({128, 64, 64}) == Family::WideToNarrow);
    REQUIRE(classify_family({16, 32, 32, 16}) == Family::Pyramid);
    REQUIRE(classify_family({64, 128, 32, 128}) == Family::Other);
    REQUIRE_THROWS_AS(classify_family({}), ConfigError);
}

TEST_CASE("arch validation", "[nn]") {
    REQUIRE_THROWS_AS(ArchSpec::from_widths({10, 5}), ConfigError);   // no hidden layer
    REQUIRE_THROWS_AS(ArchSpec::from_widths({10, 0, 5}), ConfigError);
    ArchSpec arch = ArchSpec::from_widths({784, 64, 64, 10});
    REQUIRE(arch.family == Family::Equal);
    REQUIRE(arch.depth() == 3);
    REQUIRE(arch.label() == "784-64-64-10");
    arch.family = Family::Pyramid;
    REQUIRE_THROWS_AS(arch.validate(), ConfigError); // inconsistent tag
}

TEST_CASE("zero network maps any input to zero logits", "[nn]") {
    const ModelCheckpoint m = ModelCheckpoint::zeros(ArchSpec::from_widths({4, 3, 2}));
    MatD inputs(5, 4);
    CounterRng rng(1);
    for (double& v : inputs.data) v = rng.next_uniform(-1, 1);
    const MatD logits = forward(m, inputs);
    for (double v : logits.data) REQUIRE(v == 0.0);
}

TEST_CASE("identity-weight single-hidden-layer ReLU case", "[nn]") {
    ModelCheckpoint m = ModelCheckpoint::zeros(ArchSpec::from_widths({2, 2, 2}));
    m.weights[0](0, 0) = m.weights[0](1, 1) = 1.0f;
    m.weights[1](0, 0) = m.weights[1](1, 1) = 1.0f;
    MatD input(1, 2);
    input(0, 0) = 1.0;
    input(0, 1) = -1.0;
    const MatD logits = forward(m, input);
    REQUIRE(logits(0, 0) == 1.0); // hidden ReLU gives (1, 0)
    REQUIRE(logits(0, 1) == 0.0);
}

TEST_CASE("forward matches the independent oracle", "[nn][oracle]") {
    const ModelCheckpoint m = testsup::random_checkpoint({6, 5, 4, 3}, 42);
    CounterRng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(6);
        for (double& v : x) v = rng.next_uniform(-2, 2);
        MatD input(1, 6);
        input.data = x;
        const MatD logits = forward(m, input);
        const std::vector<double> expected = testsup::oracle_forward(m, x);
        for (int j = 0; j < 3; ++j)
            REQUIRE(std::abs(logits(0, j) - expected[j]) < 1e-6);
    }
}

TEST_CASE("forward rejects mismatched input widths", "[nn]") {
    const ModelCheckpoint m = ModelCheckpoint::zeros(ArchSpec::from_widths({4, 3, 2}));
    MatD inputs(1, 5);
    REQUIRE_THROWS_WITH(forward(m, inputs), Catch::Matchers::ContainsSubstring("layer 1"));
}

TEST_CASE("uniform logits give ln(K) loss and ties break to class 0", "[nn]") {
    const Dataset d = testsup::synth_dataset("synth", 40, "train");
    const ModelCheckpoint zero =
        ModelCheckpoint::zeros(ArchSpec::from_widths({d.input_dim(), 8, d.num_classes}));
    auto [loss, accuracy] = loss_and_accuracy(zero, d);
    REQUIRE(std::abs(loss - std::log(10.0)) < 1e-12);
    // all logits tie at zero; argmax resolves to class 0
    int zeros = 0;
    for (int label : d.labels) zeros += label == 0 ? 1 : 0;
    REQUIRE(accuracy == Catch::Approx(static_cast<double>(zeros) / d.size()));
}

TEST_CASE("loss stays finite for extreme logits", "[nn]") {
    ModelCheckpoint m = ModelCheckpoint::zeros(ArchSpec::from_widths({2, 2, 2}));
    m.biases[1][0] = 200.0f; // would overflow exp() without log-sum-exp
    m.biases[1][1] = -200.0f;
    Dataset d;
    d.name = "tiny";
    d.features = MatF(1, 2, 0.5f);
    d.labels = {1};
    d.num_classes = 2;
    auto [loss, accuracy] = loss_and_accuracy(m, d);
    REQUIRE(std::isfinite(loss));
    REQUIRE(loss == Catch::Approx(400.0));
    REQUIRE(accuracy == 0.0);
}

TEST_CASE("class-count mismatch is a config error", "[nn]") {
    const Dataset d = testsup::synth_dataset("synth", 20, "train");
    const ModelCheckpoint m = ModelCheckpoint::zeros(ArchSpec::from_widths({d.input_dim(), 8, 7}));
    REQUIRE_THROWS_AS(loss_and_accuracy(m, d), ConfigError);
}

TEST_CASE("closed-form gradient at a zero network with zero inputs", "[nn]") {
    const int k = 3;
    const ModelCheckpoint m = ModelCheckpoint::zeros(ArchSpec::from_widths({2, 2, k}));
    MatF inputs(4, 2, 0.0f);
    const std::vector<int> labels{0, 1, 2, 0};
    const Gradients g = gradients(m, inputs, labels);
    // softmax(0) = 1/k; d b_L = mean over batch of (1/k - one_hot)
    std::vector<double> expected(k, 0.0);
    for (int label : labels)
        for (int j = 0; j < k; ++j) expected[j] += (1.0 / k - (j == label ? 1.0 : 0.0)) / 4.0;
    for (int j = 0; j < k; ++j) REQUIRE(g.biases.back()[j] == Catch::Approx(expected[j]));
    for (const MatD& gw : g.weights)
        for (double v : gw.data) REQUIRE(v == 0.0); // zero activations kill weight grads
}

TEST_CASE("analytic gradients match central finite differences", "[nn][oracle]") {
    const Dataset d = testsup::synth_dataset("synth", 30, "train");
    ModelCheckpoint m = testsup::random_checkpoint({d.input_dim(), 6, 5, d.num_classes}, 3);
    MatF batch = d.features;
    const std::vector<int>& labels = d.labels;

    const Gradients g = gradients(m, batch, labels);
    auto loss_of = [&](const ModelCheckpoint& model) {
        double loss = 0.0;
        std::vector<std::vector<double>> acts;
        for (int i = 0; i < batch.rows; ++i) {
            detail::forward_sample(model, batch.row_ptr(i), acts);
            const std::vector<double>& z = acts.back();
            loss += detail::log_sum_exp(z) - z[labels[i]];
        }
        return loss / batch.rows;
    };

    CounterRng rng(11);
    int checked = 0;
    while (checked < 20) {
        const int l = static_cast<int>(rng.next_below(m.depth()));
        const bool is_bias = rng.next_below(4) == 0;
        ModelCheckpoint plus = m, minus = m;
        double analytic = 0.0, x0 = 0.0;
        const double delta = 1e-5;
        if (is_bias) {
            const int j = static_cast<int>(rng.next_below(m.biases[l].size()));
            x0 = m.biases[l][j];
            plus.biases[l][j] = static_cast<float>(x0 + delta);
            minus.biases[l][j] = static_cast<float>(x0 - delta);
            analytic = g.biases[l][j];
        } else {
            const int idx = static_cast<int>(rng.next_below(m.weights[l].data.size()));
            x0 = m.weights[l].data[idx];
            plus.weights[l].data[idx] = static_cast<float>(x0 + delta);
            minus.weights[l].data[idx] = static_cast<float>(x0 - delta);
            analytic = g.weights[l].data[idx];
        }
        if (std::abs(analytic) < 1e-7) continue; // relative error needs a signal
        // the f32 store rounds the nominal offsets; difference by the realized step
        const double step = is_bias ? 0.0 : 0.0; // placeholder, recomputed below
        (void)step;
        double actual_span = 0.0;
        if (is_bias) {
            int j = -1;
            for (std::size_t i = 0; i < m.biases[l].size(); ++i)
                if (plus.biases[l][i] != m.biases[l][i]) j = static_cast<int>(i);
            actual_span = static_cast<double>(plus.biases[l][j]) -
                          static_cast<double>(minus.biases[l][j]);
        } else {
            std::size_t idx = 0;
            for (std::size_t i = 0; i < m.weights[l].data.size(); ++i)
                if (plus.weights[l].data[i] != m.weights[l].data[i]) idx = i;
            actual_span = static_cast<double>(plus.weights[l].data[idx]) -
                          static_cast<double>(minus.weights[l].data[idx]);
        }
        const double numeric = (loss_of(plus) - loss_of(minus)) / actual_span;
        REQUIRE(std::abs(numeric - analytic) / std::max(1e-8, std::abs(analytic)) < 1e-3);
        ++checked;
    }
}

TEST_CASE("duplicating every sample leaves the mean gradient unchanged", "[nn]") {
    const Dataset d = testsup::synth_dataset("synth", 10, "train");
    const ModelCheckpoint m = testsup::random_checkpoint({d.input_dim(), 5, d.num_classes}, 9);
    MatF doubled(d.size() * 2, d.input_dim());
    std::vector<int> doubled_labels;
    for (int rep = 0; rep < 2; ++rep)
        for (int i = 0; i < d.size(); ++i) {
            std::copy_n(d.features.row_ptr(i), d.input_dim(),
                        doubled.row_ptr(rep * d.size() + i));
            doubled_labels.push_back(d.labels[i]);
        }
    const Gradients g1 = gradients(m, d.features, d.labels);
    const Gradients g2 = gradients(m, doubled, doubled_labels);
    for (int l = 0; l < m.depth(); ++l) {
        for (std::size_t i = 0; i < g1.weights[l].data.size(); ++i)
            REQUIRE(g1.weights[l].data[i] == Catch::Approx(g2.weights[l].data[i]).margin(1e-15));
        for (std::size_t i = 0; i < g1.biases[l].size(); ++i)
            REQUIRE(g1.biases[l][i] == Catch::Approx(g2.biases[l][i]).margin(1e-15));
    }
}

TEST_CASE("epochs = 0 returns the seeded initialization", "[nn]") {
    const Dataset d = testsup::synth_dataset("synth", 30, "train");
    const ArchSpec arch = ArchSpec::from_widths({d.input_dim(), 8, d.num_classes});
    const Hyperparams hp{1e-3, 0, 8, 5};
    const ModelCheckpoint trained = train_sgd(arch, d, hp);
    const ModelCheckpoint init = init_checkpoint(arch, 5, d.name);
    REQUIRE(trained.weights == init.weights);
    REQUIRE(trained.biases == init.biases);
    auto [loss, accuracy] = loss_and_accuracy(init, d);
    REQUIRE(trained.meta.final_loss == loss);
    REQUIRE(trained.meta.final_accuracy == accuracy);
}

TEST_CASE("training is bit-deterministic under a fixed seed", "[nn]") {
    const Dataset d = testsup::synth_dataset("synth", 60, "train");
    const ArchSpec arch = ArchSpec::from_widths({d.input_dim(), 8, d.num_classes});
    const Hyperparams hp{1e-2, 2, 16, 21};
    const ModelCheckpoint a = train_sgd(arch, d, hp);
    const ModelCheckpoint b = train_sgd(arch, d, hp);
    REQUIRE(a.weights == b.weights);
    REQUIRE(a.biases == b.biases);
    REQUIRE(a.meta.final_loss == b.meta.final_loss);
}

TEST_CASE("a short run learns the synthetic task", "[nn][train]") {
    const Dataset d = testsup::synth_dataset("synth", 400, "train");
    const ArchSpec arch = ArchSpec::from_widths({d.input_dim(), 16, d.num_classes});
    const Hyperparams hp{1e-2, 6, 16, 1};
    const ModelCheckpoint m = train_sgd(arch, d, hp);
    REQUIRE(m.meta.final_accuracy > 0.8);
}

TEST_CASE("hyperparameter validation", "[nn]") {
    const Dataset d = testsup::synth_dataset("synth", 20, "train");
    const ArchSpec arch = ArchSpec::from_widths({d.input_dim(), 4, d.num_classes});
    REQUIRE_THROWS_AS(train_sgd(arch, d, Hyperparams{1.5, 1, 8, 0}), ConfigError);
    REQUIRE_THROWS_AS(train_sgd(arch, d, Hyperparams{1e-3, -1, 8, 0}), ConfigError);
    const ArchSpec wrong = ArchSpec::from_widths({d.input_dim() + 1, 4, d.num_classes});
    REQUIRE_THROWS_AS(train_sgd(wrong, d, Hyperparams{1e-3, 1, 8, 0}), ConfigError);
}
