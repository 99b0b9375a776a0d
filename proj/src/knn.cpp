#include <algorithm>
#include <cmath>
#include <numeric>

#include "spectramin/error.hpp"
#include "spectramin/learners.hpp"

namespace spectramin {

namespace {

void fill_norms(KnnModel& m) {
    m.norms.assign(m.size(), 0.0);
    for (std::size_t i = 0; i < m.size(); ++i) {
        const float* r = m.rows.data() + i * m.dim;
        double s = 0.0;
        for (std::size_t t = 0; t < m.dim; ++t) s += static_cast<double>(r[t]) * r[t];
        m.norms[i] = std::sqrt(s);
    }
}

} // namespace

void finalize_knn(KnnModel& m) { fill_norms(m); }

TrainedModel train_knn_weighted(const LabeledDataset& train, std::size_t k) {
    if (train.empty()) throw EmptyClass("KNN needs a nonempty training set");
    if (k == 0) throw ConfigError("k must be >= 1");
    KnnModel m;
    m.k = std::min(k, train.size());
    m.dim = train.grid.n_points;
    m.rows.reserve(train.size() * m.dim);
    for (const auto& s : train.samples) {
        for (double v : s.spectrum.values) m.rows.push_back(static_cast<float>(v));
        m.labels.push_back(s.species);
    }
    fill_norms(m);

    TrainedModel model;
    model.kind = ModelKind::Knn;
    model.classes = train.species.names();
    model.spectrum_kind = train.kind;
    model.grid = train.grid;
    model.body = std::move(m);
    return model;
}

// Cosine similarity to every stored spectrum; the k most similar vote with
// their similarity (negative similarities contribute nothing). Ties in
// similarity resolve to the lower training index.
Prediction predict_knn(const TrainedModel& model, std::span<const double> x) {
    const auto& m = std::get<KnnModel>(model.body);
    if (x.size() != m.dim) throw InvalidSpectrum("query length does not match the model grid");
    double qn = 0.0;
    for (double v : x) qn += v * v;
    qn = std::sqrt(qn);
    if (qn == 0.0) throw ZeroVector("KNN query is a zero vector");

    std::vector<double> sims(m.size(), 0.0);
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m.norms[i] == 0.0) continue;
        const float* r = m.rows.data() + i * m.dim;
        double d = 0.0;
        for (std::size_t t = 0; t < m.dim; ++t) d += x[t] * static_cast<double>(r[t]);
        sims[i] = d / (qn * m.norms[i]);
    }
    std::vector<std::size_t> order(m.size());
    std::iota(order.begin(), order.end(), 0);
    const auto k = std::min(m.k, m.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          return sims[a] > sims[b] || (sims[a] == sims[b] && a < b);
                      });
    std::vector<double> scores(model.classes.size(), 0.0);
    for (std::size_t i = 0; i < k; ++i)
        scores[static_cast<std::size_t>(m.labels[order[i]])] += std::max(sims[order[i]], 0.0);
    return Prediction::from_scores(model.classes, std::move(scores));
}

} // namespace spectramin
