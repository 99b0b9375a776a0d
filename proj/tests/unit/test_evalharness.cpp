#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <doctest.h>

#include "common.hpp"
#include "spectramin/error.hpp"
#include "spectramin/evalharness.hpp"
#include "spectramin/rng.hpp"

using namespace spectramin;

TEST_CASE("accuracy_ci") {
    const auto flat = accuracy_ci(std::vector<double>{0.9, 0.9, 0.9});
    CHECK(flat.mean == doctest::Approx(0.9));
    CHECK(*flat.half_width == doctest::Approx(0.0));

    const auto two = accuracy_ci(std::vector<double>{0.8, 1.0});
    const double sd = std::sqrt(((0.8 - 0.9) * (0.8 - 0.9) + (1.0 - 0.9) * (1.0 - 0.9)) / 1.0);
    CHECK(two.mean == doctest::Approx(0.9));
    CHECK(*two.half_width == doctest::Approx(1.96 * sd / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(*two.half_width == doctest::Approx(0.19599).epsilon(1e-4));

    const auto one = accuracy_ci(std::vector<double>{0.7});
    CHECK(one.mean == doctest::Approx(0.7));
    CHECK_FALSE(one.half_width.has_value());
    CHECK_THROWS_AS(accuracy_ci(std::vector<double>{}), StatsError);
}

TEST_CASE("pca") {
    SUBCASE("collinear points") {
        const std::vector<std::vector<double>> rows{{0, 0}, {1, 2}, {2, 4}, {3, 6}};
        const auto r = pca_project(rows, 2);
        CHECK(std::abs(r.explained_variance[1]) <= 1e-9);
        for (std::size_t c = 0; c < 2; ++c) {
            double s = 0;
            for (const auto& p : r.projections) s += p[c];
            CHECK(std::abs(s) <= 1e-9);
        }
    }
    SUBCASE("random data against a covariance eigensolve") {
        auto rng = make_rng(12);
        std::vector<std::vector<double>> rows(40, std::vector<double>(5));
        for (auto& r : rows)
            for (std::size_t j = 0; j < 5; ++j) r[j] = uniform(rng, -1, 1) * static_cast<double>(j + 1);
        Eigen::MatrixXd X(40, 5);
        for (int i = 0; i < 40; ++i)
            for (int j = 0; j < 5; ++j) X(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        const Eigen::MatrixXd C = X.rowwise() - X.colwise().mean();
        const Eigen::MatrixXd cov = C.transpose() * C / 39.0;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        const auto r = pca_project(rows, 3);
        for (int k = 0; k < 3; ++k) CHECK(r.explained_variance[static_cast<std::size_t>(k)] == doctest::Approx(es.eigenvalues()(4 - k)).epsilon(1e-9));
        for (const auto& comp : r.components) {
            const auto mx = std::max_element(comp.begin(), comp.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
            CHECK(*mx > 0);
        }
    }
    CHECK_THROWS_AS(pca_project(std::vector<std::vector<double>>{{1, 2}}, 1), StatsError);
}

TEST_CASE("class mean and std") {
    const auto ds = testutil::dataset({{0, 1}, {1, 1}, {0.5, 0.5}}, {"a", "a", "b"});
    const auto ms = class_mean_std(ds);
    REQUIRE(ms.size() == 2);
    CHECK(ms[0].mean == std::vector<double>{0.5, 1});
    CHECK(ms[0].stddev[0] == doctest::Approx(0.5));
    CHECK(ms[0].stddev[1] == doctest::Approx(0.0));
    CHECK(ms[1].stddev == std::vector<double>{0, 0});
    const auto csv = class_mean_std_csv(ds, {"b"});
    CHECK(csv.starts_with("species,position,mean,stddev\n"));
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("experiments") {
    auto base = nlohmann::json::parse(R"({
        "name": "toy", "mode": "single", "n_runs": 3, "base_seed": 4,
        "dataset": {"synthetic": "raman-library", "params": {"n_classes": 2, "per_class": 6,
                    "grid": {"start": 85, "end": 1800, "n_points": 200}}},
        "models": [{"model": "knn", "k": 1}]
    })");
    SUBCASE("separable fixture scores 1 and runs are deterministic") {
        auto j = base;
        j["n_runs"] = 1;
        const auto cfg = ExperimentConfig::from_json(j);
        const auto res = run_experiment(cfg);
        REQUIRE(res.size() == 1);
        CHECK(res[0].methods[0].accuracy == 1.0);
        CHECK(results_to_json(cfg, res) == results_to_json(cfg, run_experiment(cfg)));
    }
    SUBCASE("run count and parallel equality") {
        auto j = base;
        j["n_runs"] = 30;
        j["models"].push_back({{"model", "trees"}, {"n_trees", 5}});
        const auto cfg = ExperimentConfig::from_json(j);
        const auto a = run_experiment(cfg, 1);
        CHECK(a.size() == 30);
        for (std::size_t r = 0; r < a.size(); ++r) CHECK(a[r].seed == 4 + r);
        CHECK(results_to_json(cfg, run_experiment(cfg, 4)).dump() == results_to_json(cfg, a).dump());
        const auto s = summarize(a);
        CHECK(s.size() == 2);
        CHECK(s[0].accuracies.size() == 30);
        const auto md = report_markdown(cfg, s);
        CHECK(md.find("knn") != std::string::npos);
    }
    SUBCASE("config errors") {
        auto j = base;
        j["surprise"] = 1;
        CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
        j = base;
        j["n_runs"] = 0;
        CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
        j = base;
        j["mode"] = "fusion";
        CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
    }
}

TEST_CASE("violin export") {
    RunResult r;
    MethodResult m;
    m.method = "cosine";
    for (const char* id : {"s2", "s1"}) {
        SampleRecord rec;
        rec.id = id;
        rec.prediction = Prediction::uniform({"x"});
        rec.composition_similarity = 0.5;
        m.samples.push_back(rec);
    }
    r.methods.push_back(m);
    const auto csv = export_violin_csv({r});
    std::istringstream in(csv);
    std::string header, a, b;
    std::getline(in, header);
    std::getline(in, a);
    std::getline(in, b);
    CHECK(header == "algorithm,sample_id,run,cosine_similarity");
    CHECK(a.starts_with("cosine,s1,"));
    CHECK(b.starts_with("cosine,s2,"));
}

TEST_CASE("libs experiment") {
    const std::string data = SPECTRAMIN_DATA_DIR;
    auto j = nlohmann::json::parse(R"({"name":"l","mode":"libs","n_runs":2,"libs":{}})");
    j["libs"]["lines"] = data + "/lines_fixture.csv";
    j["libs"]["minerals"] = data + "/minerals_fixture.csv";
    const auto cfg = ExperimentConfig::from_json(j);
    const auto res = run_experiment(cfg);
    const auto s = summarize(res);
    REQUIRE(s.size() == 1);
    REQUIRE(s[0].mean_composition_mae.has_value());
    CHECK(*s[0].mean_composition_mae < 0.1);
    for (const auto& rec : res[0].methods[0].samples) {
        CHECK(*rec.composition_similarity >= 0.0);
        CHECK(*rec.composition_similarity <= 1.0 + 1e-12);
    }
}
