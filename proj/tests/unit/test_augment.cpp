#include <map>

#include <doctest.h>

#include "common.hpp"
#include "spectramin/augment.hpp"
#include "spectramin/rng.hpp"

using namespace spectramin;

namespace {

LabeledDataset random_dataset(std::uint64_t seed, std::size_t n_classes, std::size_t per_class, std::size_t dim) {
    auto rng = make_rng(seed);
    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels;
    for (std::size_t c = 0; c < n_classes; ++c)
        for (std::size_t i = 0; i < per_class; ++i) {
            std::vector<double> v(dim);
            for (auto& x : v) x = uniform(rng, 0.0, 1.0);
            rows.push_back(v);
            labels.push_back("c" + std::to_string(c));
        }
    return testutil::dataset(rows, labels);
}

std::map<int, int> class_counts(const LabeledDataset& ds) {
    std::map<int, int> out;
    for (const auto& s : ds.samples) ++out[s.species];
    return out;
}

} // namespace

TEST_CASE("primitive transforms") {
    const std::vector<double> v{0, 0, 1, 0, 0};
    CHECK(apply_shift(v, 2) == std::vector<double>{0, 0, 0, 0, 1});
    CHECK(apply_shift(v, -2) == std::vector<double>{1, 0, 0, 0, 0});
    CHECK(apply_offset(std::vector<double>{0.5, 0.5}, 0.1)[0] == doctest::Approx(0.6));
    CHECK(apply_offset(std::vector<double>{0.3, 0.7}, 0.0) == std::vector<double>{0.3, 0.7});
    CHECK(apply_offset(std::vector<double>{0.95}, 0.1)[0] == 1.0);

    const std::vector<double> w{0.0, 0.4, 0.9};
    const auto noisy = apply_proportional_noise(w, std::vector<double>{0.5, -0.5, 0.05});
    CHECK(noisy[0] == 0.0);
    CHECK(noisy[1] == doctest::Approx(0.2));
    CHECK(noisy[2] == doctest::Approx(0.945));

    CHECK(apply_offset_slope_multiply(w, 1.0, 0.0, 0.0) == w);
    CHECK(apply_offset_slope_multiply(w, 1.0, 0.05, 0.0) == apply_offset(w, 0.05));
    // slope term uses t in [0,1] across the vector
    const auto sl = apply_offset_slope_multiply(std::vector<double>{0.5, 0.5, 0.5}, 1.0, 0.0, 0.1);
    CHECK(sl[0] == doctest::Approx(0.5));
    CHECK(sl[1] == doctest::Approx(0.55));
    CHECK(sl[2] == doctest::Approx(0.6));
}

TEST_CASE("smote interpolation") {
    const std::vector<double> x{0, 0}, z{1, 1};
    CHECK(smote_interpolate(x, z, 0.0) == x);
    const auto p = smote_interpolate(x, z, 0.3);
    CHECK(p[0] == doctest::Approx(0.3));
    CHECK(p[0] == p[1]);

    const auto ds = testutil::dataset({{0, 0}, {1, 1}}, {"a", "a"});
    AugmentParams prm;
    prm.smote_k = 1;
    const auto out = augment_smote(ds, 5, prm);
    REQUIRE(out.size() == 4);
    for (std::size_t i = 2; i < 4; ++i) {
        const auto& v = out.samples[i].spectrum.values;
        CHECK(v[0] == v[1]);
        CHECK(v[0] >= 0.0);
        CHECK(v[0] <= 1.0);
    }
}

TEST_CASE("every technique doubles class counts and stays in [0,1]") {
    const auto ds = random_dataset(3, 3, 4, 16);
    const auto uneven = ds.subset(std::vector<std::size_t>{0, 1, 2, 3, 4, 8});  // 4, 1, 1
    for (auto t : {AugmentTechnique::Shift, AugmentTechnique::Offset, AugmentTechnique::Noise,
                   AugmentTechnique::Bjerrum, AugmentTechnique::Smote}) {
        CAPTURE(to_string(t));
        for (const LabeledDataset* in : {&ds, &uneven}) {
            const auto out = augment(*in, t, 17);
            auto before = class_counts(*in);
            auto after = class_counts(out);
            for (auto& [c, n] : before) CHECK(after[c] == 2 * n);
            for (const auto& s : out.samples)
                for (double v : s.spectrum.values) {
                    CHECK(v >= 0.0);
                    CHECK(v <= 1.0);
                }
            const auto again = augment(*in, t, 17);
            for (std::size_t i = 0; i < out.size(); ++i)
                CHECK(out.samples[i].spectrum.values == again.samples[i].spectrum.values);
        }
    }
    CHECK(augment(ds, AugmentTechnique::None, 1).size() == ds.size());
}

TEST_CASE("shift never draws zero") {
    const auto ds = testutil::dataset({{0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0}}, {"a"});
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto out = augment_shift(ds, seed);
        CHECK(out.samples[1].spectrum.values != out.samples[0].spectrum.values);
    }
}

TEST_CASE("technique names") {
    for (auto t : {AugmentTechnique::None, AugmentTechnique::Shift, AugmentTechnique::Offset, AugmentTechnique::Noise,
                   AugmentTechnique::Bjerrum, AugmentTechnique::Smote})
        CHECK(parse_technique(to_string(t)) == t);
    CHECK_THROWS(parse_technique("mixup"));
}
