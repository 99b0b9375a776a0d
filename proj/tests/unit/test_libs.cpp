#include <cmath>
#include <set>

#include <doctest.h>

#include "spectramin/error.hpp"
#include "spectramin/libs.hpp"
#include "spectramin/rng.hpp"

using namespace spectramin;

namespace {

const std::string kData = SPECTRAMIN_DATA_DIR;

LineTable fixture() { return LineTable::load(kData + "/lines_fixture.csv"); }

void check_comp(const ElementComposition& got, const std::map<std::string, double>& want) {
    CHECK(got.size() == want.size());
    for (const auto& [k, v] : want) {
        CAPTURE(k);
        REQUIRE(got.count(k));
        CHECK(got.at(k) == doctest::Approx(v).epsilon(1e-12));
    }
}

} // namespace

TEST_CASE("formula parsing") {
    const auto q = parse_formula("SiO2");
    CHECK(q.counts == std::map<std::string, double>{{"Si", 1}, {"O", 2}});
    check_comp(q.fractions, {{"Si", 1.0 / 3}, {"O", 2.0 / 3}});
    check_comp(parse_formula("Mg2SiO4").fractions, {{"Mg", 2.0 / 7}, {"Si", 1.0 / 7}, {"O", 4.0 / 7}});
    CHECK(parse_formula("CaMg(CO3)2").counts == std::map<std::string, double>{{"Ca", 1}, {"Mg", 1}, {"C", 2}, {"O", 6}});
    CHECK(parse_formula("CaSO4·2H2O").counts ==
          std::map<std::string, double>{{"Ca", 1}, {"S", 1}, {"O", 6}, {"H", 4}});
    CHECK(parse_formula("CaSO4*2H2O").counts == parse_formula("CaSO4·2H2O").counts);
    CHECK(parse_formula("(Mg,Fe)2SiO4").counts ==
          std::map<std::string, double>{{"Mg", 1}, {"Fe", 1}, {"Si", 1}, {"O", 4}});
    CHECK(parse_formula("Fe2+2SiO4").counts == std::map<std::string, double>{{"Fe", 2}, {"Si", 1}, {"O", 4}});
    CHECK(parse_formula("Fe^3+2O3").counts == std::map<std::string, double>{{"Fe", 2}, {"O", 3}});
    CHECK(parse_formula("SO4 2-").counts == std::map<std::string, double>{{"S", 1}, {"O", 4}});
    CHECK(parse_formula("Fe₂O₃").counts == std::map<std::string, double>{{"Fe", 2}, {"O", 3}});

    CHECK_THROWS_AS(parse_formula("Xx2O"), FormulaError);
    CHECK_THROWS_AS(parse_formula("Ca(CO3"), FormulaError);
    CHECK_THROWS_AS(parse_formula("CaCO3)"), FormulaError);
    CHECK_THROWS_AS(parse_formula("()"), FormulaError);
    CHECK_THROWS_AS(parse_formula(""), FormulaError);

    CHECK(atomic_number("Fe") == 26);
    CHECK(atomic_number("Og") == 118);
    CHECK(atomic_number("fe") == -1);
}

TEST_CASE("composition helpers") {
    check_comp(normalize_composition({{"Fe", 2}, {"O", 2}, {"Si", 0}}), {{"Fe", 0.5}, {"O", 0.5}});
    CHECK_THROWS_AS(normalize_composition({{"Fe", 0}}), FormulaError);
    CHECK_THROWS_AS(validate_composition({{"Fe", 0.7}}), FormulaError);

    CHECK(composition_mae({{"Fe", 0.5}, {"O", 0.5}}, {{"Fe", 0.5}, {"O", 0.5}}) == 0.0);
    CHECK(composition_mae({{"Fe", 1.0}}, {{"Mg", 1.0}}) == doctest::Approx(1.0));
    auto rng = make_rng(3);
    const std::vector<std::string> els{"H", "C", "O", "Fe", "Mg"};
    for (int trial = 0; trial < 20; ++trial) {
        ElementComposition a, b;
        for (const auto& e : els) {
            if (uniform(rng, 0, 1) < 0.6) a[e] = uniform(rng, 0, 1);
            if (uniform(rng, 0, 1) < 0.6) b[e] = uniform(rng, 0, 1);
        }
        if (a.empty() && b.empty()) continue;
        std::set<std::string> keys;
        double sum = 0;
        for (const auto& e : els)
            if (a.count(e) || b.count(e)) {
                keys.insert(e);
                sum += std::abs((a.count(e) ? a[e] : 0.0) - (b.count(e) ? b[e] : 0.0));
            }
        CHECK(composition_mae(a, b) == doctest::Approx(sum / static_cast<double>(keys.size())).epsilon(1e-14));
    }
    CHECK_THROWS_AS(composition_mae({}, {}), StatsError);

    check_comp(composition_from_json(nlohmann::json::parse(R"({"composition":{"Fe":3,"O":1}})")),
               {{"Fe", 0.75}, {"O", 0.25}});
    CHECK_THROWS_AS(composition_from_json(nlohmann::json::parse(R"({"Qq":1})")), FormulaError);
}

TEST_CASE("line table") {
    const auto t = LineTable::from_csv("# comment\nelement,stage,wavelength_nm,rel_intensity\nFe,1,500,1\nH,1,656.3,0.5\n");
    CHECK(t.size() == 2);
    CHECK(t.elements() == std::vector<std::string>{"H", "Fe"});
    CHECK(LineTable::from_csv(t.to_csv()).size() == 2);
    CHECK_THROWS(LineTable::from_csv("Zz,1,500,1\n"));
    CHECK_THROWS(LineTable::from_csv("Fe,1,-5,1\n"));
    CHECK(fixture().elements().size() >= 10);
}

TEST_CASE("synthetic LIBS spectra") {
    const GridSpec g{400, 600, 2001};
    LineTable t;
    t.add({"Fe", 1, 500.0, 1.0});
    t.add({"Na", 1, 450.0, 0.6});
    t.add({"Na", 1, 550.0, 1.0});

    const auto fe = synth_libs_spectrum({{"Fe", 1.0}}, t, g);
    const auto peak = std::max_element(fe.values.begin(), fe.values.end()) - fe.values.begin();
    CHECK(g.position(static_cast<std::size_t>(peak)) == doctest::Approx(500.0));

    const auto a = synth_libs_raw({{"Fe", 1.0}}, t, g);
    const auto b = synth_libs_raw({{"Na", 1.0}}, t, g);
    const auto mix = synth_libs_raw({{"Fe", 0.5}, {"Na", 0.5}}, t, g);
    for (std::size_t i = 0; i < mix.size(); ++i) CHECK(mix[i] == doctest::Approx(0.5 * a[i] + 0.5 * b[i]).epsilon(1e-14));

    CHECK(synth_libs_raw({{"Fe", 1.0}, {"Na", 0.0}}, t, g) == a);
    CHECK_THROWS_AS(synth_libs_raw({{"K", 1.0}}, t, g), MissingLines);
    std::vector<std::string> skipped;
    SynthOptions opt;
    opt.skip_missing = true;
    opt.skipped = &skipped;
    CHECK(synth_libs_raw({{"K", 0.5}, {"Fe", 0.5}}, t, g, opt).size() == g.n_points);
    CHECK(skipped == std::vector<std::string>{"K"});
}

TEST_CASE("peak detection") {
    const GridSpec g{0, 999, 1000};
    CHECK(detect_peaks(std::vector<double>(1000, 0.5), g).empty());

    auto gauss = [&](double center, double sigma, double amp, std::vector<double>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += amp * std::exp(-0.5 * std::pow((g.position(i) - center) / sigma, 2));
    };
    std::vector<double> one(1000, 0.0);
    gauss(400, 3, 1.0, one);
    auto peaks = detect_peaks(one, g);
    REQUIRE(peaks.size() == 1);
    CHECK(peaks[0].index == 400);

    std::vector<double> two(1000, 0.0);
    gauss(300, 4, 1.0, two);
    gauss(400, 4, 0.5, two);
    peaks = detect_peaks(two, g);
    REQUIRE(peaks.size() == 2);
    CHECK(peaks[0].index == 300);
    CHECK(peaks[1].index == 400);

    // off-grid center: the log-parabola is exact for a Gaussian
    std::vector<double> off(1000, 0.0);
    gauss(500.3, 2.5, 0.8, off);
    peaks = detect_peaks(off, g);
    REQUIRE(peaks.size() == 1);
    CHECK(peaks[0].wavelength_nm == doctest::Approx(500.3).epsilon(1e-9));
    CHECK(peaks[0].height == doctest::Approx(0.8).epsilon(1e-9));

    PeakParams strict;
    strict.min_height = 0.9;
    CHECK(detect_peaks(off, g, strict).empty());
}

TEST_CASE("element weight vectors") {
    LineTable t;
    t.add({"Fe", 1, 500.0, 1.0});
    t.add({"Na", 1, 450.0, 0.6});
    t.add({"Na", 1, 550.0, 0.8});
    t.add({"K", 1, 1500.0, 1.0});
    const auto bins = Binning::for_grid({400, 600, 2001});
    const auto v = element_weight_vectors(t, bins);
    CHECK(v.size() == 2);
    CHECK(v.at("Fe").size() == 1);
    CHECK(v.at("Fe").begin()->second == doctest::Approx(1.0));
    CHECK(sparse_norm(v.at("Na")) == doctest::Approx(1.0));
    CHECK(v.at("Na").at(*bins.bin_of(450.0)) == doctest::Approx(0.6));
    CHECK_FALSE(v.count("K"));
}

TEST_CASE("cosine estimator") {
    const auto lines = fixture();
    for (const auto& el : lines.elements()) {
        CAPTURE(el);
        const auto s = synth_libs_spectrum({{el, 1.0}}, lines);
        const auto est = estimate_composition_cosine(s, lines);
        const auto best = std::max_element(est.similarity.begin(), est.similarity.end(),
                                           [](auto& a, auto& b) { return a.second < b.second; });
        CHECK(best->first == el);
        double sum = 0;
        for (const auto& [k, f] : est.composition) sum += f;
        CHECK(sum == doctest::Approx(1.0));
    }
    SUBCASE("lines on grid points, well separated") {
        LineTable t;
        t.add({"Fe", 1, 430.0, 1.0});
        t.add({"Fe", 1, 470.0, 0.35});
        t.add({"Fe", 1, 520.0, 0.6});
        t.add({"Na", 1, 450.0, 0.8});
        t.add({"Na", 1, 560.0, 0.5});
        const GridSpec g{400, 600, 2001};
        for (const auto& el : t.elements()) {
            CAPTURE(el);
            const auto est = estimate_composition_cosine(synth_libs_spectrum({{el, 1.0}}, t, g), t);
            CHECK(est.similarity.at(el) == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
    Spectrum flat;
    flat.grid = GridSpec::libs();
    flat.values.assign(flat.grid.n_points, 0.0);
    CHECK_THROWS_AS(estimate_composition_cosine(flat, lines), NoPeaksError);
}

TEST_CASE("mineral matching") {
    const std::map<std::string, ElementComposition> table{
        {"a", {{"Fe", 1.0}}}, {"b", {{"Mg", 1.0}}}, {"c", {{"Si", 0.5}, {"O", 0.5}}}};
    const auto p = match_mineral_by_composition({{"Fe", 1.0}}, table);
    CHECK(p.scores[0] == 1.0);

    auto rng = make_rng(17);
    const std::vector<std::string> els{"Fe", "Mg", "Si", "O", "Ca"};
    auto random_comp = [&] {
        std::map<std::string, double> w;
        for (const auto& e : els)
            if (uniform(rng, 0, 1) < 0.7) w[e] = uniform(rng, 0.01, 1);
        if (w.empty()) w["O"] = 1.0;
        return normalize_composition(w);
    };
    std::map<std::string, ElementComposition> five;
    for (int i = 0; i < 5; ++i) five["m" + std::to_string(i)] = random_comp();
    for (int trial = 0; trial < 10; ++trial) {
        const auto est = random_comp();
        std::vector<double> naive;
        for (const auto& [name, comp] : five) {
            double ab = 0, aa = 0, bb = 0;
            for (const auto& e : els) {
                const double x = est.count(e) ? est.at(e) : 0.0, y = comp.count(e) ? comp.at(e) : 0.0;
                ab += x * y;
                aa += x * x;
                bb += y * y;
            }
            naive.push_back(ab / std::sqrt(aa * bb));
        }
        double total = 0;
        for (double v : naive) total += v;
        const auto got = match_mineral_by_composition(est, five);
        for (std::size_t i = 0; i < naive.size(); ++i) CHECK(got.scores[i] == doctest::Approx(naive[i] / total).epsilon(1e-12));
    }
    CHECK_THROWS_AS(match_mineral_by_composition({{"Fe", 0.0}}, table), ZeroVector);
    CHECK_THROWS_AS(match_mineral_by_composition({{"Fe", 1.0}}, {}), ConfigError);

    const auto minerals = load_mineral_table(kData + "/minerals_fixture.csv");
    CHECK(minerals.size() >= 10);
    const auto t = parse_mineral_table("name,formula\nolivine,\"(Mg,Fe)2SiO4\"\n");
    CHECK(t.at("olivine").at("Mg") == doctest::Approx(1.0 / 7));
}

TEST_CASE("LIBS regressor on a toy table") {
    LineTable t;
    t.add({"Fe", 1, 420.0, 1.0});
    t.add({"Fe", 1, 520.0, 0.5});
    t.add({"Na", 1, 460.0, 1.0});
    t.add({"Ca", 1, 560.0, 1.0});
    t.add({"Ca", 1, 440.0, 0.4});
    const GridSpec g{400, 600, 401};

    LibsTrainParams p;
    p.n_samples = 300;
    p.max_elements = 2;
    p.sigma_nm = 1.0;
    p.train.epochs = 12;
    p.train.batch_size = 4;
    p.train.learning_rate = 3e-3;
    p.train.seed = 2;
    CnnArchitecture arch;
    arch.input_length = g.n_points;
    arch.n_classes = 3;
    arch.layers = {nn::LayerSpec::conv(6, 9, 2), nn::LayerSpec::max_pool(4), nn::LayerSpec::conv(8, 5),
                   nn::LayerSpec::max_pool(4), nn::LayerSpec::dense(16),
                   nn::LayerSpec::dense(3, nn::Activation::None), nn::LayerSpec::softmax()};
    p.arch = arch;
    const auto model = train_libs_cnn(t, g, p);

    auto rng = make_rng(99);
    SynthOptions opt;
    opt.sigma_nm = 1.0;
    std::size_t right = 0, total = 0;
    for (const auto& el : t.elements())
        for (int rep = 0; rep < 20; ++rep) {
            auto s = synth_libs_spectrum({{el, 1.0}}, t, g, opt);
            for (auto& v : s.values) v = std::clamp(v + uniform(rng, -0.02, 0.02), 0.0, 1.0);
            const auto comp = predict_libs_cnn(model, s);
            double sum = 0;
            for (const auto& [k, f] : comp) sum += f;
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
            const auto best = std::max_element(comp.begin(), comp.end(),
                                               [](auto& a, auto& b) { return a.second < b.second; });
            right += best->first == el;
            ++total;
        }
    CHECK(static_cast<double>(right) >= 0.95 * static_cast<double>(total));
    Spectrum wrong;
    wrong.grid = GridSpec::libs();
    wrong.values.assign(wrong.grid.n_points, 0.1);
    CHECK_THROWS_AS(predict_libs_cnn(model, wrong), InvalidSpectrum);
}
