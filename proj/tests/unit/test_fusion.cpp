#include <doctest.h>

#include "spectramin/error.hpp"
#include "spectramin/fusion.hpp"
#include "spectramin/rng.hpp"

using namespace spectramin;

namespace {

const std::vector<std::string> kAB{"a", "b"};

Prediction pr(std::vector<double> s, std::vector<std::string> cls = kAB) {
    return Prediction::from_scores(std::move(cls), std::move(s));
}

void check_scores(const Prediction& p, const std::vector<double>& want) {
    REQUIRE(p.scores.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(p.scores[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

} // namespace

TEST_CASE("average") {
    check_scores(fuse_average(pr({1, 0}), pr({0, 1})), {0.5, 0.5});
    check_scores(fuse_average(pr({0.6, 0.4}), pr({0.2, 0.8})), {0.4, 0.6});
    const auto p = pr({0.3, 0.7});
    check_scores(fuse_average(p, p), p.scores);
}

TEST_CASE("multiply") {
    const auto p = pr({0.6, 0.4});
    check_scores(fuse_multiply(p, Prediction::uniform(kAB)), p.scores);
    check_scores(fuse_multiply(p, pr({0.2, 0.8})), {0.12 / 0.44, 0.32 / 0.44});
    check_scores(fuse_multiply(p, pr({0.2, 0.8})), {3.0 / 11, 8.0 / 11});
    check_scores(fuse_multiply(pr({0.2, 0.8}), p), fuse_multiply(p, pr({0.2, 0.8})).scores);

    const auto z = fuse_multiply(pr({1, 0}), pr({0, 1}));
    CHECK(z.degenerate);
    check_scores(z, {0.5, 0.5});
}

TEST_CASE("square-multiply") {
    check_scores(fuse_square_multiply(pr({0.8, 0.2}), pr({0.5, 0.5})), {16.0 / 17, 1.0 / 17});
    const auto other = pr({0.1, 0.9});
    check_scores(fuse_square_multiply(Prediction::uniform(kAB), other), other.scores);
    const auto libs = pr({0.7, 0.3});
    CHECK(fuse_square_multiply(libs, Prediction::uniform(kAB)).entropy() <= libs.entropy());
}

TEST_CASE("class lists must agree") {
    const auto p = pr({0.5, 0.5});
    const auto q = pr({0.5, 0.5}, {"b", "a"});
    CHECK_THROWS_AS(fuse_average(p, q), ClassListMismatch);
    CHECK_THROWS_AS(fuse_multiply(p, pr({1, 1, 1}, {"a", "b", "c"})), ClassListMismatch);

    const auto [x, y] = align_to_intersection(pr({0.5, 0.3, 0.2}, {"a", "b", "c"}), pr({0.6, 0.4}, {"c", "a"}));
    CHECK(x.classes == std::vector<std::string>{"a", "c"});
    CHECK(y.classes == x.classes);
    check_scores(x, {0.5 / 0.7, 0.2 / 0.7});
    check_scores(y, {0.4, 0.6});
    CHECK_THROWS_AS(align_to_intersection(pr({1}, {"x"}), pr({1}, {"y"})), EmptyIntersection);
}

TEST_CASE("rule names") {
    for (auto r : {FusionRule::Average, FusionRule::Multiply, FusionRule::SquareMultiply, FusionRule::Svm})
        CHECK(parse_fusion_rule(to_string(r)) == r);
    CHECK_THROWS_AS(parse_fusion_rule("max"), ConfigError);
    CHECK_THROWS_AS(fuse(FusionRule::Svm, pr({1, 0}), pr({1, 0})), ConfigError);
}

TEST_CASE("svm combiner") {
    // p encodes the label; q is noise
    const std::vector<std::string> cls{"a", "b", "c"};
    auto rng = make_rng(21);
    std::vector<FusionExample> train;
    for (int i = 0; i < 60; ++i) {
        const int label = i % 3;
        std::vector<double> p(3, 0.1), q(3);
        p[static_cast<std::size_t>(label)] = uniform(rng, 0.5, 0.9);
        for (auto& v : q) v = uniform(rng, 0.0, 1.0);
        train.push_back({Prediction::from_scores(cls, p), Prediction::from_scores(cls, q), label});
    }
    const auto m = fuse_svm(train);
    std::size_t fused_right = 0, p_right = 0;
    for (const auto& ex : train) {
        const auto f = apply_fused_svm(m, ex.a, ex.b);
        double sum = 0;
        for (double s : f.scores) sum += s;
        CHECK(sum == doctest::Approx(1.0));
        fused_right += f.argmax() == static_cast<std::size_t>(ex.label);
        p_right += ex.a.argmax() == static_cast<std::size_t>(ex.label);
    }
    CHECK(fused_right >= p_right);
    const auto m2 = fuse_svm(train);
    CHECK(serialize_model(m2) == serialize_model(m));
}
