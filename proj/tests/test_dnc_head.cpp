#include <cmath>
#include <random>

#include "doctest.h"
#include "dnc/dnc_head.hpp"
#include "dnc/errors.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace dnc;

TEST_CASE("class_scores") {
    std::mt19937_64 rng(1);
    SUBCASE("a feature equal to a sub-centroid scores one for its class") {
        const auto bank = init_bank(3, 2, 5, 4);
        Matrix x;
        x.push_row(bank.centroid(2, 1));
        const auto cs = class_scores(x, bank);
        CHECK(cs.scores(0, 2) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(cs.best[2] == 1);
    }
    SUBCASE("K = 1 is the plain similarity matrix") {
        const auto bank = init_bank(4, 1, 6, 2);
        const Matrix x = oracle::random_unit_rows(rng, 7, 6);
        CHECK(class_scores(x, bank).scores == similarity_matrix(x, bank.centroids()));
    }
    SUBCASE("triple-loop oracle") {
        for (int t = 0; t < 100; ++t) {
            const auto bank = init_bank(1 + t % 5, 1 + t % 4, 3 + t % 5, t);
            const Matrix x = oracle::random_unit_rows(rng, 1 + t % 9, bank.dim());
            const auto cs = class_scores(x, bank);
            const Matrix want = oracle::class_max_scores(x, bank);
            for (std::size_t n = 0; n < x.rows(); ++n)
                for (std::size_t c = 0; c < bank.num_classes(); ++c) {
                    CHECK(cs.scores(n, c) == want(n, c));
                    CHECK(oracle::loop_dot(x.row(n), bank.centroid(c, cs.best[n * bank.num_classes() + c])) ==
                          want(n, c));
                }
        }
    }
    SUBCASE("ties route to the smallest sub index") {
        SubCentroidBank bank({2}, Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}}));
        const auto cs = class_scores(Matrix::from_rows({{std::sqrt(0.5), std::sqrt(0.5)}}), bank);
        CHECK(cs.best[0] == 0);
    }
    CHECK_THROWS_AS(class_scores(Matrix(2, 3), init_bank(2, 2, 4, 1)), ShapeError);
}

TEST_CASE("predict") {
    std::mt19937_64 rng(2);
    SUBCASE("one class") {
        const Matrix x = oracle::random_unit_rows(rng, 10, 3);
        for (const auto& p : predict(x, init_bank(1, 3, 3, 1))) CHECK(p.class_id == 0);
    }
    SUBCASE("query equal to a sub-centroid") {
        const auto bank = init_bank(4, 3, 8, 5);
        for (std::size_t c = 0; c < 4; ++c)
            for (std::size_t k = 0; k < 3; ++k) {
                Matrix x;
                x.push_row(bank.centroid(c, k));
                const auto p = predict(x, bank).front();
                CHECK(p.class_id == c);
                CHECK(p.sub_id == k);
            }
    }
    SUBCASE("exhaustive scan") {
        for (int t = 0; t < 200; ++t) {
            const auto bank = init_bank(2 + t % 5, 1 + t % 4, 2 + t % 7, 100 + t);
            const Matrix x = oracle::random_unit_rows(rng, 20, bank.dim());
            const auto preds = predict(x, bank);
            for (std::size_t n = 0; n < x.rows(); ++n) {
                const auto [c, k] = oracle::nearest_sub(x.row(n), bank);
                CHECK(preds[n].class_id == c);
                CHECK(preds[n].sub_id == k);
                CHECK(preds[n].class_id == argmax(preds[n].class_scores));
            }
        }
    }
    SUBCASE("equal class scores go to the smallest class") {
        SubCentroidBank bank({1, 1}, Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}}));
        CHECK(predict(Matrix::from_rows({{std::sqrt(0.5), std::sqrt(0.5)}}), bank)[0].class_id == 0);
    }
}

TEST_CASE("nearest class mean reduction") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 100; ++t) {
        const std::size_t c_count = 2 + t % 5, d = 2 + t % 6;
        const Matrix train = oracle::random_matrix(rng, 100, d);
        std::vector<std::size_t> labels(100);
        for (std::size_t i = 0; i < 100; ++i) labels[i] = i % c_count;
        Matrix means(c_count, d);
        for (std::size_t i = 0; i < 100; ++i)
            for (std::size_t j = 0; j < d; ++j) means(labels[i], j) += train(i, j);
        l2_normalize_rows(means);
        const SubCentroidBank bank(std::vector<std::size_t>(c_count, 1), means);

        const Matrix queries = oracle::random_unit_rows(rng, 100, d);
        const auto preds = predict(queries, bank);
        for (std::size_t n = 0; n < 100; ++n) {
            // brute force: smallest cosine distance to a class mean
            std::size_t best = 0;
            double best_dist = 2.0;
            for (std::size_t c = 0; c < c_count; ++c) {
                const double dist = cosine_distance(queries.row(n), means.row(c));
                if (dist < best_dist) {
                    best_dist = dist;
                    best = c;
                }
            }
            CHECK(preds[n].class_id == best);
        }
    }
}

TEST_CASE("dnc_loss values") {
    SUBCASE("identical banks give ln C") {
        Matrix centroids(10, 3);
        for (std::size_t c = 0; c < 10; ++c) centroids(c, 0) = 1.0;
        const SubCentroidBank bank(std::vector<std::size_t>(10, 1), centroids);
        std::mt19937_64 rng(4);
        const Matrix x = oracle::random_unit_rows(rng, 5, 3);
        const std::vector<std::size_t> labels{0, 3, 9, 2, 2};
        CHECK(dnc_loss(x, labels, bank, {}).loss == doctest::Approx(2.302585093).epsilon(1e-9));
    }
    SUBCASE("two classes with scores one and minus one") {
        const SubCentroidBank bank({1, 1}, Matrix::from_rows({{1.0, 0.0}, {-1.0, 0.0}}));
        const std::vector<std::size_t> label{0};
        const auto r = dnc_loss(Matrix::from_rows({{1.0, 0.0}}), label, bank, {1.0});
        CHECK(r.loss == doctest::Approx(0.126928011).epsilon(1e-9));
        CHECK(r.loss == doctest::Approx(std::log1p(std::exp(-2.0))).epsilon(1e-14));
    }
    SUBCASE("matches a direct cross-entropy on scaled class scores") {
        std::mt19937_64 rng(5);
        for (int t = 0; t < 100; ++t) {
            const auto bank = init_bank(2 + t % 4, 1 + t % 3, 4, t);
            const Matrix x = oracle::random_unit_rows(rng, 6, 4);
            std::vector<std::size_t> labels(6);
            for (auto& y : labels) y = rng() % bank.num_classes();
            const double tau = 0.5 + t % 7;
            Matrix logits = oracle::class_max_scores(x, bank);
            for (double& v : logits.data()) v *= tau;
            const double loss = dnc_loss(x, labels, bank, {tau}).loss;
            CHECK(loss == doctest::Approx(oracle::cross_entropy(logits, labels)).epsilon(1e-12));
            CHECK(loss > 0.0);
        }
    }
    SUBCASE("errors") {
        const auto bank = init_bank(2, 1, 2, 1);
        const std::vector<std::size_t> bad{2};
        CHECK_THROWS_AS(dnc_loss(Matrix::from_rows({{1.0, 0.0}}), bad, bank, {}), DataError);
        const std::vector<std::size_t> ok{0};
        CHECK_THROWS_AS(dnc_loss(Matrix::from_rows({{std::nan(""), 0.0}}), ok, bank, {}), DegenerateError);
        CHECK_THROWS_AS(dnc_loss(Matrix::from_rows({{1.0, 0.0}}), ok, bank, {0.0}), ConfigError);
    }
}

TEST_CASE("temperature never changes the decision") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 100; ++t) {
        const auto bank = init_bank(3, 2, 5, t);
        const Matrix x = oracle::random_unit_rows(rng, 8, 5);
        const auto a = class_scores(x, bank);
        for (double tau : {0.1, 1.0, 30.0}) {
            Matrix scaled = a.scores;
            for (double& v : scaled.data()) v *= tau;
            for (std::size_t n = 0; n < 8; ++n) CHECK(argmax(scaled.row(n)) == argmax(a.scores.row(n)));
        }
    }
}

TEST_CASE("dnc_loss gradient matches central differences") {
    const auto s = gradcheck::sweep(gradcheck::dnc_loss_check, 100);
    MESSAGE("checked " << s.checked << " skipped " << s.skipped << " worst " << s.worst);
    CHECK(s.worst < 1e-4);
}

TEST_CASE("softmax_cross_entropy") {
    const std::vector<std::size_t> labels{1};
    const auto r = softmax_cross_entropy(Matrix::from_rows({{0.0, 0.0}}), labels);
    CHECK(r.loss == doctest::Approx(0.693147181).epsilon(1e-9));
    CHECK(r.grad_logits(0, 0) == doctest::Approx(0.5));
    CHECK(r.grad_logits(0, 1) == doctest::Approx(-0.5));
    const std::vector<std::size_t> none;
    CHECK_THROWS_AS(softmax_cross_entropy(Matrix(0, 2), none), ShapeError);
}
