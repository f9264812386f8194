#include <doctest.h>

#include <cmath>
#include <random>

#include "mustang/tensor.hpp"
#include "oracles.hpp"

using namespace mustang;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("matmul identity and small product") {
    const Value eye = Value::from_data({2, 2}, {1, 0, 0, 1});
    const Value b = Value::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    const Value prod = matmul(eye, b);
    for (std::size_t i = 0; i < b.numel(); ++i)
        CHECK(prod.data()[i] == b.data()[i]);

    const Value a = Value::from_data({2, 2}, {1, 2, 3, 4});
    const Value ones = Value::from_data({2, 1}, {1, 1});
    const Value c = matmul(a, ones);
    CHECK(c.data()[0] == doctest::Approx(3.0));
    CHECK(c.data()[1] == doctest::Approx(7.0));
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
    const Value a = Value::zeros({2, 3});
    const Value b = Value::zeros({2, 2});
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("matmul gradients match finite differences") {
    std::mt19937_64 rng(7);
    Value a = oracle::random_value(rng, {3, 4}).set_requires_grad(true);
    Value b = oracle::random_value(rng, {4, 2}).set_requires_grad(true);

    auto loss_value = [&] {
        // weighted sum keeps the output gradient non-uniform
        Value w = Value::from_data({2, 1}, {0.3, -1.7});
        return reduce_sum_all(matmul(matmul(a, b), w));
    };
    a.zero_grad();
    b.zero_grad();
    loss_value().backward();
    CHECK(oracle::max_grad_rel_err(a, [&] { return loss_value().item(); }) < 1e-6);
    CHECK(oracle::max_grad_rel_err(b, [&] { return loss_value().item(); }) < 1e-6);
}

TEST_CASE("segment_softmax on frozen examples") {
    SUBCASE("two equal scores share one segment") {
        const Value s = Value::from_data({2}, {0.0, 0.0});
        const Value y = segment_softmax(s, {{0, 0}, 1});
        CHECK(y.data()[0] == doctest::Approx(0.5));
        CHECK(y.data()[1] == doctest::Approx(0.5));
    }
    SUBCASE("singleton segment normalizes to one") {
        const Value s = Value::from_data({1}, {13.7});
        const Value y = segment_softmax(s, {{0}, 1});
        CHECK(y.data()[0] == doctest::Approx(1.0));
    }
    SUBCASE("ln 2 against direct softmax evaluation") {
        const Value s = Value::from_data({2}, {std::log(2.0), 0.0});
        const Value y = segment_softmax(s, {{0, 0}, 1});
        CHECK(y.data()[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(y.data()[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("segment_softmax sums to one per segment") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<int> seg_count(1, 6);
        const int segments = seg_count(rng);
        std::uniform_int_distribution<int> rows(segments, 40);
        const int e = rows(rng);
        std::vector<int> assign(e);
        std::uniform_int_distribution<int> pick(0, segments - 1);
        for (int& s : assign) s = pick(rng);
        const Value scores = oracle::random_value(rng, {e}, -30.0, 30.0);
        const Value y = segment_softmax(scores, {assign, segments});
        std::vector<double> sums(segments, 0.0);
        std::vector<bool> used(segments, false);
        for (int i = 0; i < e; ++i) {
            sums[assign[i]] += y.data()[i];
            used[assign[i]] = true;
            CHECK(y.data()[i] > 0.0);
        }
        for (int s = 0; s < segments; ++s)
            if (used[s]) CHECK(std::abs(sums[s] - 1.0) < 1e-12);
    }
}

TEST_CASE("segment_softmax gradient matches finite differences") {
    std::mt19937_64 rng(13);
    Value scores = oracle::random_value(rng, {7}).set_requires_grad(true);
    const SegmentIndex seg{{0, 1, 0, 2, 1, 0, 2}, 3};
    const Value weights = oracle::random_value(rng, {7});
    auto loss = [&] { return reduce_sum_all(mul(segment_softmax(scores, seg), weights)); };
    scores.zero_grad();
    loss().backward();
    CHECK(oracle::max_grad_rel_err(scores, [&] { return loss().item(); }) < 1e-6);
}

TEST_CASE("segment_sum matches the dense scatter-add oracle") {
    SUBCASE("one row per segment is the identity") {
        const Value v = Value::from_data({3, 2}, {1, 2, 3, 4, 5, 6});
        const Value y = segment_sum(v, {{0, 1, 2}, 3});
        for (std::size_t i = 0; i < v.numel(); ++i)
            CHECK(y.data()[i] == v.data()[i]);
    }
    SUBCASE("two rows collapse into one segment") {
        const Value v = Value::from_data({2, 2}, {1, 1, 2, 2});
        const Value y = segment_sum(v, {{0, 0}, 1});
        CHECK(y.data()[0] == doctest::Approx(3.0));
        CHECK(y.data()[1] == doctest::Approx(3.0));
    }
    SUBCASE("random instance with empty segments") {
        std::mt19937_64 rng(17);
        const int e = 12, d = 3, s = 5;
        std::vector<int> assign(e);
        std::uniform_int_distribution<int> pick(0, s - 2);  // segment s-1 left empty
        for (int& a : assign) a = pick(rng);
        const Value v = oracle::random_value(rng, {e, d});
        const Value y = segment_sum(v, {assign, s});
        std::vector<double> expect(static_cast<std::size_t>(s) * d, 0.0);
        for (int i = 0; i < e; ++i)
            for (int j = 0; j < d; ++j)
                expect[static_cast<std::size_t>(assign[i]) * d + j] +=
                    v.data()[static_cast<std::size_t>(i) * d + j];
        for (std::size_t i = 0; i < expect.size(); ++i)
            CHECK(y.data()[i] == doctest::Approx(expect[i]).epsilon(1e-12));
        for (int j = 0; j < d; ++j)
            CHECK(y.data()[static_cast<std::size_t>(s - 1) * d + j] == 0.0);
    }
}

TEST_CASE("activations on frozen points") {
    const Value x = Value::from_data({2}, {-1.0, 2.0});
    const Value lr = leaky_relu(x, 0.2);
    CHECK(lr.data()[0] == doctest::Approx(-0.2));
    CHECK(lr.data()[1] == doctest::Approx(2.0));
    CHECK(tanh_(Value::scalar(0.0)).item() == 0.0);
    CHECK(relu(Value::from_data({2}, {-3.0, 3.0})).data()[0] == 0.0);
    CHECK(sigmoid(Value::scalar(0.0)).item() == doctest::Approx(0.5));
}

TEST_CASE("activation gradients match finite differences away from kinks") {
    std::mt19937_64 rng(19);
    for (Activation kind : {Activation::LeakyRelu, Activation::Relu,
                            Activation::Tanh, Activation::Elu, Activation::Sigmoid}) {
        Value x = oracle::random_value(rng, {8}).set_requires_grad(true);
        for (double& v : x.data())
            if (std::abs(v) < 1e-3) v = 0.5;  // keep clear of the kink
        const Value w = oracle::random_value(rng, {8});
        auto loss = [&] { return reduce_sum_all(mul(activation(x, kind), w)); };
        x.zero_grad();
        loss().backward();
        CHECK(oracle::max_grad_rel_err(x, [&] { return loss().item(); }) < 1e-6);
    }
}

TEST_CASE("relu subgradient at zero is one") {
    Value x = Value::from_data({1}, {0.0}).set_requires_grad(true);
    x.zero_grad();
    relu(x).backward();
    CHECK(x.grad()[0] == 1.0);
    Value y = Value::from_data({1}, {0.0}).set_requires_grad(true);
    y.zero_grad();
    leaky_relu(y).backward();
    CHECK(y.grad()[0] == 1.0);
}

TEST_CASE("concat ordering and gradient routing") {
    SUBCASE("single part passes through") {
        const Value a = Value::from_data({3}, {1, 2, 3});
        const Value c = concat({a}, 0);
        for (int i = 0; i < 3; ++i) CHECK(c.data()[i] == a.data()[i]);
    }
    SUBCASE("1-d parts appear in argument order") {
        const Value a = Value::from_data({2}, {1, 2});
        const Value b = Value::from_data({1}, {3});
        const Value c = concat({a, b}, 0);
        CHECK(c.data() == std::vector<double>{1, 2, 3});
    }
    SUBCASE("axis-1 interleaves rows") {
        const Value a = Value::from_data({2, 2}, {1, 2, 3, 4});
        const Value b = Value::from_data({2, 1}, {9, 8});
        const Value c = concat({a, b}, 1);
        CHECK(c.data() == std::vector<double>{1, 2, 9, 3, 4, 8});
    }
    SUBCASE("dimension mismatch is rejected") {
        CHECK_THROWS_AS(concat({Value::zeros({2, 2}), Value::zeros({3, 1})}, 1),
                        ShapeError);
    }
    SUBCASE("gradients route back to the right parts") {
        std::mt19937_64 rng(23);
        for (int axis : {0, 1}) {
            Value a = oracle::random_value(rng, {2, 3}).set_requires_grad(true);
            Value b = oracle::random_value(rng, {2, 3}).set_requires_grad(true);
            const Value w = oracle::random_value(rng, axis == 0 ? std::vector<int>{4, 3}
                                                                : std::vector<int>{2, 6});
            auto loss = [&] { return reduce_sum_all(mul(concat({a, b}, axis), w)); };
            a.zero_grad();
            b.zero_grad();
            loss().backward();
            CHECK(oracle::max_grad_rel_err(a, [&] { return loss().item(); }) < 1e-6);
            CHECK(oracle::max_grad_rel_err(b, [&] { return loss().item(); }) < 1e-6);
        }
    }
}

TEST_CASE("reduce mean and max") {
    SUBCASE("single row is returned for both kinds") {
        const Value x = Value::from_data({1, 3}, {4, 5, 6});
        const Value mean = reduce_mean(x);
        const Value mx = reduce_max(x);
        for (int j = 0; j < 3; ++j) {
            CHECK(mean.data()[j] == x.data()[j]);
            CHECK(mx.data()[j] == x.data()[j]);
        }
    }
    SUBCASE("columnwise values") {
        const Value x = Value::from_data({2, 2}, {1, 3, 3, 1});
        CHECK(reduce_mean(x).data() == std::vector<double>{2, 2});
        CHECK(reduce_max(x).data() == std::vector<double>{3, 3});
    }
    SUBCASE("mean gradient is 1/N broadcast") {
        std::mt19937_64 rng(29);
        Value x = oracle::random_value(rng, {5, 2}).set_requires_grad(true);
        const Value w = oracle::random_value(rng, {2});
        auto loss = [&] { return reduce_sum_all(mul(reduce_mean(x), w)); };
        x.zero_grad();
        loss().backward();
        CHECK(oracle::max_grad_rel_err(x, [&] { return loss().item(); }) < 1e-6);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 2; ++j)
                CHECK(x.grad()[i * 2 + j] == doctest::Approx(w.data()[j] / 5.0));
    }
    SUBCASE("max ties route to the lowest row index") {
        Value x = Value::from_data({3, 1}, {2.0, 2.0, 1.0}).set_requires_grad(true);
        x.zero_grad();
        reduce_max(x).backward();
        CHECK(x.grad() == std::vector<double>{1, 0, 0});
    }
    SUBCASE("empty input is an error") {
        CHECK_THROWS_AS(reduce_mean(Value::zeros({0, 3})), ContractError);
        CHECK_THROWS_AS(reduce_max(Value::zeros({0, 3})), ContractError);
    }
}

TEST_CASE("backward basics") {
    SUBCASE("sum of parameters gives unit gradients") {
        Value w = Value::zeros({3, 2}).set_requires_grad(true);
        w.zero_grad();
        reduce_sum_all(w).backward();
        for (double g : w.grad()) CHECK(g == 1.0);
    }
    SUBCASE("x^T x at (1,2) gives (2,4)") {
        Value x = Value::from_data({2}, {1, 2}).set_requires_grad(true);
        x.zero_grad();
        reduce_sum_all(mul(x, x)).backward();
        CHECK(x.grad() == std::vector<double>{2, 4});
    }
    SUBCASE("non-scalar loss is rejected") {
        const Value x = Value::zeros({2});
        CHECK_THROWS_AS(x.backward(), ContractError);
    }
    SUBCASE("parameter not reached keeps a zero gradient") {
        Value used = Value::scalar(2.0).set_requires_grad(true);
        Value unused = Value::scalar(5.0).set_requires_grad(true);
        used.zero_grad();
        unused.zero_grad();
        mul(used, used).backward();
        CHECK(used.grad()[0] == 4.0);
        CHECK(unused.grad()[0] == 0.0);
    }
    SUBCASE("diamond graphs accumulate through both paths") {
        Value x = Value::scalar(3.0).set_requires_grad(true);
        x.zero_grad();
        add(mul(x, x), x).backward();  // d/dx (x^2 + x) = 2x + 1
        CHECK(x.grad()[0] == doctest::Approx(7.0));
    }
}

TEST_CASE("backward is deterministic") {
    auto run = [] {
        std::mt19937_64 rng(31);
        Value a = oracle::random_value(rng, {4, 4}).set_requires_grad(true);
        Value b = oracle::random_value(rng, {4, 4}).set_requires_grad(true);
        a.zero_grad();
        b.zero_grad();
        reduce_sum_all(tanh_(matmul(a, b))).backward();
        return std::make_pair(a.grad(), b.grad());
    };
    const auto first = run();
    const auto second = run();
    CHECK(first.first == second.first);    // bit-identical
    CHECK(first.second == second.second);
}

TEST_CASE("gather, row_scale, reshape, norm, divide gradients") {
    std::mt19937_64 rng(37);
    SUBCASE("gather_rows with repeated indices") {
        Value x = oracle::random_value(rng, {4, 3}).set_requires_grad(true);
        const Value w = oracle::random_value(rng, {4, 3});
        auto loss = [&] {
            return reduce_sum_all(mul(gather_rows(x, {2, 0, 2, 3}), w));
        };
        x.zero_grad();
        loss().backward();
        CHECK(oracle::max_grad_rel_err(x, [&] { return loss().item(); }) < 1e-6);
    }
    SUBCASE("row_scale both operands") {
        Value x = oracle::random_value(rng, {3, 4}).set_requires_grad(true);
        Value s = oracle::random_value(rng, {3}).set_requires_grad(true);
        const Value w = oracle::random_value(rng, {3, 4});
        auto loss = [&] { return reduce_sum_all(mul(row_scale(x, s), w)); };
        x.zero_grad();
        s.zero_grad();
        loss().backward();
        CHECK(oracle::max_grad_rel_err(x, [&] { return loss().item(); }) < 1e-6);
        CHECK(oracle::max_grad_rel_err(s, [&] { return loss().item(); }) < 1e-6);
    }
    SUBCASE("normalized projection chain") {
        Value p = oracle::random_value(rng, {5, 1}).set_requires_grad(true);
        const Value x = oracle::random_value(rng, {3, 5});
        auto loss = [&] {
            return reduce_sum_all(matmul(x, div_by_scalar(p, l2_norm(p))));
        };
        p.zero_grad();
        loss().backward();
        CHECK(oracle::max_grad_rel_err(p, [&] { return loss().item(); }) < 1e-6);
    }
    SUBCASE("add_row_bias accumulates column sums") {
        Value b = oracle::random_value(rng, {4}).set_requires_grad(true);
        const Value x = oracle::random_value(rng, {3, 4});
        auto loss = [&] { return reduce_sum_all(add_row_bias(x, b)); };
        b.zero_grad();
        loss().backward();
        for (double g : b.grad()) CHECK(g == doctest::Approx(3.0));
    }
}

TEST_CASE("sparse attention composition equals the dense oracle") {
    // segment_sum(segment_softmax(s) * v) against a dense masked softmax
    // matmul on small graphs
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_int_distribution<int> size(1, 20);
        const int n = size(rng);
        std::vector<std::pair<int, int>> edges;
        std::uniform_int_distribution<int> node(0, n - 1);
        for (int i = 0; i < n; ++i) edges.emplace_back(i, i);  // keep rows non-empty
        std::uniform_int_distribution<int> extra(0, 3 * n);
        const int extras = extra(rng);
        for (int i = 0; i < extras; ++i) edges.emplace_back(node(rng), node(rng));

        const int e = static_cast<int>(edges.size());
        const int d = 3;
        std::vector<int> seg(e);
        for (int i = 0; i < e; ++i) seg[i] = edges[i].second;
        const Value scores = oracle::random_value(rng, {e}, -3.0, 3.0);
        const Value feats = oracle::random_value(rng, {n, d});

        const Value alpha = segment_softmax(scores, {seg, n});
        std::vector<int> srcs(e);
        for (int i = 0; i < e; ++i) srcs[i] = edges[i].first;
        const Value msgs = row_scale(gather_rows(feats, srcs), alpha);
        const Value result = segment_sum(msgs, {seg, n});

        // dense oracle: masked score matrix, softmax rows, matmul
        oracle::Matrix s(n, std::vector<double>(n, -std::numeric_limits<double>::infinity()));
        for (int i = 0; i < e; ++i) {
            // duplicate edges accumulate weight in the sparse path; mirror
            // by log-sum-exp of the duplicated score
            auto& cell = s[edges[i].second][edges[i].first];
            const double sc = scores.data()[i];
            if (cell == -std::numeric_limits<double>::infinity()) cell = sc;
            else cell = std::log(std::exp(cell) + std::exp(sc));
        }
        for (int u = 0; u < n; ++u) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int v = 0; v < n; ++v) mx = std::max(mx, s[u][v]);
            double z = 0.0;
            std::vector<double> a(n, 0.0);
            for (int v = 0; v < n; ++v)
                if (s[u][v] != -std::numeric_limits<double>::infinity()) {
                    a[v] = std::exp(s[u][v] - mx);
                    z += a[v];
                }
            for (int j = 0; j < d; ++j) {
                double acc = 0.0;
                for (int v = 0; v < n; ++v)
                    acc += a[v] / z * feats.data()[static_cast<std::size_t>(v) * d + j];
                CHECK(std::abs(result.data()[static_cast<std::size_t>(u) * d + j] - acc) <
                      1e-10);
            }
        }
    }
}

TEST_SUITE_END();
