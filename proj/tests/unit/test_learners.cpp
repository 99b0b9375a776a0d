#include <fstream>

#include <doctest.h>

#include "common.hpp"
#include "oracles.hpp"
#include "spectramin/error.hpp"
#include "spectramin/learners.hpp"
#include "spectramin/synthetic.hpp"

using namespace spectramin;

namespace {

LabeledDataset small_library(std::size_t classes = 4, std::size_t per_class = 5) {
    RamanLibraryParams p;
    p.n_classes = classes;
    p.per_class = per_class;
    p.grid = {85.0, 1800.0, 128};
    p.min_width = 20;
    p.max_width = 40;
    return make_raman_library(p);
}

LabeledDataset separable_2class(std::size_t n, std::uint64_t seed) {
    auto rng = make_rng(seed);
    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(6);
        for (auto& x : v) x = uniform(rng, 0.0, 1.0);
        const bool pos = v[0] + v[1] > 1.0;
        rows.push_back(v);
        labels.push_back(pos ? "pos" : "neg");
    }
    return testutil::dataset(rows, labels);
}

std::vector<double> scores_of(const TrainedModel& m, const std::vector<double>& x) { return predict(m, x).scores; }

} // namespace

TEST_CASE("knn") {
    SUBCASE("single class scores 1") {
        const auto ds = testutil::dataset({{1, 0, 0}, {0, 1, 0}}, {"only", "only"});
        const auto m = train_knn_weighted(ds, 3);
        CHECK(predict_knn(m, std::vector<double>{0.2, 0.3, 0.9}).scores[0] == doctest::Approx(1.0));
    }
    SUBCASE("exemplar query with k=1") {
        const auto ds = small_library();
        const auto m = train_knn_weighted(ds, 1);
        const auto& s = ds.samples[7];
        const auto p = predict_knn(m, s.spectrum.values);
        CHECK(p.scores[static_cast<std::size_t>(s.species)] == 1.0);
    }
    SUBCASE("matches the full-scan oracle") {
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            const auto inst = oracle::random_knn_instance(seed);
            const auto m = train_knn_weighted(inst.train, inst.k);
            const auto got = predict_knn(m, inst.query);
            const auto want = oracle::knn_scores(inst.train, inst.query, inst.k);
            REQUIRE(got.scores.size() == want.size());
            CHECK(got.argmax() == oracle::argmax(want));
            for (std::size_t c = 0; c < want.size(); ++c) CHECK(std::abs(got.scores[c] - want[c]) <= 1e-12);
        }
    }
    SUBCASE("errors") {
        const auto ds = testutil::dataset({{1, 0}}, {"a"});
        CHECK_THROWS_AS(train_knn_weighted(ds, 0), ConfigError);
        const auto m = train_knn_weighted(ds, 1);
        CHECK_THROWS_AS(predict_knn(m, std::vector<double>{0, 0}), ZeroVector);
        CHECK_THROWS_AS(predict_knn(m, std::vector<double>{1, 0, 0}), InvalidSpectrum);
    }
}

TEST_CASE("extra trees") {
    SUBCASE("two samples separate") {
        const auto ds = testutil::dataset({{0.1, 0.5}, {0.9, 0.5}}, {"a", "b"});
        ExtraTreesParams p;
        p.n_trees = 1;
        const auto m = train_extra_trees(ds, p);
        CHECK(predict_trees(m, ds.samples[0].spectrum.values).argmax() == 0);
        CHECK(predict_trees(m, ds.samples[1].spectrum.values).argmax() == 1);
    }
    SUBCASE("single class makes a single leaf") {
        const auto ds = testutil::dataset({{0.1, 0.5}, {0.9, 0.2}}, {"a", "a"});
        const auto m = train_extra_trees(ds, {});
        for (const auto& t : std::get<ExtraTreesModel>(m.body).trees) CHECK(t.feature.size() == 1);
    }
    SUBCASE("fits the training set and is deterministic") {
        const auto ds = separable_2class(50, 3);
        ExtraTreesParams p;
        p.n_trees = 50;
        p.seed = 9;
        const auto a = train_extra_trees(ds, p);
        const auto b = train_extra_trees(ds, p);
        CHECK(serialize_model(a) == serialize_model(b));
        for (const auto& s : ds.samples) CHECK(predict_trees(a, s.spectrum.values).argmax() == static_cast<std::size_t>(s.species));
    }
}

TEST_CASE("linear svm") {
    CHECK(hinge_loss(1.0) == 0.0);
    CHECK(hinge_loss(2.5) == 0.0);
    CHECK(hinge_loss(0.25) == doctest::Approx(0.75));

    // second feature is constant; grids need two points
    const auto ds2 = testutil::dataset({{-1.0, 0.5}, {1.0, 0.5}}, {"neg", "pos"});
    const auto m = train_linear_svm(ds2, {});
    const auto p = predict_svm(m, std::vector<double>{-1.0, 0.5});
    CHECK(p.argmax() == 0);
    CHECK(predict_svm(m, std::vector<double>{1.0, 0.5}).argmax() == 1);
    double sum = 0;
    for (double s : p.scores) sum += s;
    CHECK(sum == doctest::Approx(1.0));

    const auto sep = separable_2class(60, 4);
    const auto m2 = train_linear_svm(sep, {});
    std::size_t right = 0;
    for (const auto& s : sep.samples) right += predict_svm(m2, s.spectrum.values).argmax() == static_cast<std::size_t>(s.species);
    CHECK(right >= 57);
}

TEST_CASE("cnn and ensemble") {
    const auto ds = small_library(3, 4);
    TrainConfig cfg;
    cfg.epochs = 15;
    cfg.batch_size = 2;
    cfg.seed = 4;
    SUBCASE("ema off: shadow and raw weights give the same prediction") {
        const auto m = train_cnn(ds, simple_fusion_net(3, 128), cfg);
        CHECK(std::get<CnnModel>(m.body).shadow.empty());
        const auto& x = ds.samples[0].spectrum.values;
        CHECK(predict_cnn(m, x, true).scores == predict_cnn(m, x, false).scores);
    }
    SUBCASE("learns the training set, deterministically") {
        cfg.ema_decay = 0.9;
        const auto m = train_cnn(ds, simple_fusion_net(3, 128), cfg);
        const auto m2 = train_cnn(ds, simple_fusion_net(3, 128), cfg);
        CHECK(serialize_model(m) == serialize_model(m2));
        std::size_t right = 0;
        for (const auto& s : ds.samples) right += predict_cnn(m, s.spectrum.values).argmax() == static_cast<std::size_t>(s.species);
        CHECK(right >= 10);
    }
    SUBCASE("arch mismatch") {
        CHECK_THROWS_AS(train_cnn(ds, simple_fusion_net(3, 256), cfg), ArchError);
        CHECK_THROWS_AS(train_cnn(ds, simple_fusion_net(4, 128), cfg), ArchError);
    }
    SUBCASE("ensemble averaging") {
        const std::vector<std::string> cls{"a", "b"};
        const auto p = Prediction::from_scores(cls, {0.3, 0.7});
        CHECK(predict_ensemble(std::vector<Prediction>{p, p, p}).scores[1] == doctest::Approx(0.7));
        const auto e = predict_ensemble(std::vector<Prediction>{Prediction::from_scores(cls, {1, 0}),
                                                                 Prediction::from_scores(cls, {0, 1})});
        CHECK(e.scores == std::vector<double>{0.5, 0.5});
        const auto q = Prediction::from_scores(cls, {0.9, 0.1});
        const auto r = Prediction::from_scores(cls, {0.2, 0.8});
        const auto pqr = predict_ensemble(std::vector<Prediction>{p, q, r});
        const auto rqp = predict_ensemble(std::vector<Prediction>{r, q, p});
        for (std::size_t i = 0; i < 2; ++i) CHECK(pqr.scores[i] == doctest::Approx(rqp.scores[i]).epsilon(1e-15));
    }
}

TEST_CASE("model files") {
    testutil::TempDir tmp;
    const auto ds = small_library(3, 4);
    std::vector<TrainedModel> models;
    models.push_back(train_knn_weighted(ds, 3));
    ExtraTreesParams tp;
    tp.n_trees = 5;
    models.push_back(train_extra_trees(ds, tp));
    models.push_back(train_linear_svm(ds, {}));
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.ema_decay = 0.5;
    models.push_back(train_cnn(ds, simple_fusion_net(3, 128), cfg));
    models.push_back(train_ensemble(ds, {simple_fusion_net(3, 128), simple_fusion_net(3, 128)}, cfg));

    for (const auto& m : models) {
        CAPTURE(to_string(m.kind));
        const auto path = tmp.path / "m.spmn";
        save_model(m, path);
        const auto back = load_model(path);
        CHECK(back.kind == m.kind);
        CHECK(back.classes == m.classes);
        for (const auto& s : ds.samples) CHECK(scores_of(back, s.spectrum.values) == scores_of(m, s.spectrum.values));
        CHECK(serialize_model(back) == serialize_model(m));
    }

    const auto bytes = serialize_model(models[0]);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(bad_magic), ModelFormatError);
    auto bad_version = bytes;
    bad_version[4] = 99;
    CHECK_THROWS_AS(deserialize_model(bad_version), ModelFormatError);
    CHECK_THROWS_AS(deserialize_model(bytes.substr(0, bytes.size() - 3)), ModelFormatError);
    CHECK_THROWS_AS(deserialize_model(bytes.substr(0, 6)), ModelFormatError);
}

TEST_CASE("model specs") {
    const auto s = ModelSpec::from_json({{"model", "ensemble6"}});
    CHECK(s.kind == ModelKind::Ensemble);
    CHECK(s.train.ema_decay == doctest::Approx(0.999));
    CHECK(ModelSpec::from_json({{"model", "knn"}, {"k", 3}}).k == 3);
    CHECK_THROWS_AS(ModelSpec::from_json({{"model", "rnn"}}), ConfigError);
    for (auto k : {ModelKind::Knn, ModelKind::ExtraTrees, ModelKind::LinearSvm, ModelKind::Cnn, ModelKind::Ensemble,
                   ModelKind::TwoStream})
        CHECK(parse_model_kind(to_string(k)) == k);
}
