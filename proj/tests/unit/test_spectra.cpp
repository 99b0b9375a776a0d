#include <cmath>

#include <doctest.h>

#include "common.hpp"
#include "spectramin/error.hpp"
#include "spectramin/spectra.hpp"

using namespace spectramin;

TEST_CASE("resample_linear") {
    SUBCASE("constant stays constant") {
        RawSpectrum raw({100, 150, 200}, {5, 5, 5}, SpectrumKind::Raman);
        for (double v : resample_linear(raw, {110, 190, 17})) CHECK(v == doctest::Approx(5.0));
    }
    SUBCASE("ramp interpolates") {
        RawSpectrum raw({0, 10}, {0, 10}, SpectrumKind::Raman);
        const auto out = resample_linear(raw, {0, 5, 3});
        CHECK(out[1] == doctest::Approx(2.5));
    }
    SUBCASE("outside the measured range is zero") {
        RawSpectrum raw({100, 200}, {3, 4}, SpectrumKind::Raman);
        const auto out = resample_linear(raw, {50, 250, 5});
        CHECK(out[0] == 0.0);
        CHECK(out[4] == 0.0);
        CHECK(out[2] == doctest::Approx(3.5));
    }
    SUBCASE("matches hand interpolation at arbitrary points") {
        RawSpectrum raw({1, 2, 4, 7}, {3, -1, 5, 2}, SpectrumKind::Raman);
        const GridSpec g{1, 7, 13};
        const auto out = resample_linear(raw, g);
        for (std::size_t i = 0; i < g.n_points; ++i) {
            const double x = 1 + 0.5 * static_cast<double>(i);
            const auto& px = raw.positions();
            const auto& py = raw.intensities();
            std::size_t k = 0;
            while (k + 2 < px.size() && x > px[k + 1]) ++k;
            const double t = (x - px[k]) / (px[k + 1] - px[k]);
            CHECK(out[i] == doctest::Approx(py[k] + t * (py[k + 1] - py[k])).epsilon(1e-12));
        }
    }
}

TEST_CASE("RawSpectrum rejects bad input") {
    CHECK_THROWS_AS(RawSpectrum({1, 1}, {0, 0}, SpectrumKind::Raman), InvalidSpectrum);
    CHECK_THROWS_AS(RawSpectrum({1, 2}, {0}, SpectrumKind::Raman), InvalidSpectrum);
    CHECK_THROWS_AS(RawSpectrum({1, 2}, {0, NAN}, SpectrumKind::Raman), InvalidSpectrum);
}

TEST_CASE("GridSpec validation") {
    CHECK_THROWS_AS(GridSpec({5, 5, 10}).validate(), InvalidGrid);
    CHECK_THROWS_AS(GridSpec({0, 1, 1}).validate(), InvalidGrid);
    CHECK_NOTHROW(GridSpec::raman().validate());
    CHECK(GridSpec::raman().n_points == 1715);
}

TEST_CASE("normalize_unit") {
    const auto a = normalize_unit(std::vector<double>{2, 4, 6});
    CHECK(a == std::vector<double>{0, 0.5, 1});
    CHECK(normalize_unit(std::vector<double>{7, 7, 7}) == std::vector<double>{0, 0, 0});
    const std::vector<double> raw{3.2, -1.0, 8.5, 0.25};
    const auto once = normalize_unit(raw);
    CHECK(normalize_unit(once) == once);
}

TEST_CASE("cosine similarity") {
    CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{1, 0}) == doctest::Approx(1.0));
    CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == doctest::Approx(0.0));
    const std::vector<double> a{1, 1}, b{1, 0};
    const double oracle = (a[0] * b[0] + a[1] * b[1]) / (std::hypot(a[0], a[1]) * std::hypot(b[0], b[1]));
    CHECK(cosine_similarity(a, b) == doctest::Approx(oracle).epsilon(1e-15));
    CHECK(cosine_similarity(a, b) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK_THROWS_AS(cosine_similarity(std::vector<double>{0, 0}, b), ZeroVector);
    CHECK(cosine_distance(a, a) == doctest::Approx(0.0));
}

TEST_CASE("class_mean") {
    using R = std::vector<std::vector<double>>;
    CHECK(class_mean(R{{0, 1}, {0, 1}}) == std::vector<double>{0, 1});
    CHECK(class_mean(R{{0, 1}, {1, 0}}) == std::vector<double>{0.5, 0.5});
    CHECK(class_mean(R{{0.3, 0.7}}) == std::vector<double>{0.3, 0.7});
}

TEST_CASE("outlier removal") {
    using R = std::vector<std::vector<double>>;
    SUBCASE("far sample dropped") {
        const R rows{{1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {0, 0, 1}};
        // mean (0.75, 0, 0.25): distance of the odd one is 1 - 0.25/|mean| ~ 0.68
        const double norm = std::sqrt(0.75 * 0.75 + 0.25 * 0.25);
        CHECK(1.0 - 0.25 / norm > 0.5);
        CHECK(1.0 - 0.75 / norm < 0.5);
        CHECK(outlier_inliers(rows) == std::vector<std::size_t>{0, 1, 2});
    }
    SUBCASE("identical all kept") {
        CHECK(outlier_inliers(R{{0.2, 0.4}, {0.2, 0.4}, {0.2, 0.4}}).size() == 3);
    }
    SUBCASE("single kept") {
        std::vector<Spectrum> one{testutil::spec({0.1, 0.9})};
        CHECK(remove_outliers(one).size() == 1);
    }
}

TEST_CASE("preprocess lands on the grid in [0,1]") {
    RawSpectrum raw({100, 500, 900, 1500}, {10, 40, 20, 30}, SpectrumKind::Raman);
    const auto s = preprocess(raw, GridSpec::raman());
    CHECK(s.values.size() == 1715);
    CHECK(*std::max_element(s.values.begin(), s.values.end()) == doctest::Approx(1.0));
    CHECK(*std::min_element(s.values.begin(), s.values.end()) >= 0.0);
}
