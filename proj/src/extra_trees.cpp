#include <algorithm>
#include <cmath>
#include <numeric>

#include "spectramin/error.hpp"
#include "spectramin/learners.hpp"
#include "spectramin/rng.hpp"

namespace spectramin {

namespace {

double gini(std::span<const double> counts, double total) {
    if (total <= 0.0) return 0.0;
    double s = 0.0;
    for (double c : counts) s += (c / total) * (c / total);
    return 1.0 - s;
}

struct TreeBuilder {
    const LabeledDataset& data;
    std::size_t n_classes;
    std::size_t k_features;
    std::size_t min_split;
    Rng rng;
    DecisionTree tree;
    std::vector<std::size_t> feature_pool;

    double value(std::size_t sample, std::size_t f) const { return data.samples[sample].spectrum.values[f]; }

    int make_leaf(std::span<const std::size_t> idx) {
        const int leaf = static_cast<int>(tree.leaf_counts.size() / n_classes);
        tree.leaf_counts.resize(tree.leaf_counts.size() + n_classes, 0.0f);
        for (auto i : idx)
            tree.leaf_counts[static_cast<std::size_t>(leaf) * n_classes +
                             static_cast<std::size_t>(data.samples[i].species)] += 1.0f;
        const int node = static_cast<int>(tree.feature.size());
        tree.feature.push_back(-1);
        tree.threshold.push_back(0.0f);
        tree.left.push_back(leaf);
        tree.right.push_back(-1);
        return node;
    }

    // Uniform threshold in (min, max], rounded to float; nullopt when the
    // feature is constant at float precision.
    std::optional<float> draw_threshold(double lo, double hi) {
        if (!(hi > lo)) return std::nullopt;
        float t = static_cast<float>(uniform(rng, lo, hi));
        if (!(static_cast<double>(t) > lo)) t = std::nextafter(static_cast<float>(lo), INFINITY);
        if (!(static_cast<double>(t) > lo)) t = std::nextafter(t, INFINITY);
        if (static_cast<double>(t) > hi) return std::nullopt;
        return t;
    }

    int build(std::vector<std::size_t> idx) {
        std::vector<double> counts(n_classes, 0.0);
        for (auto i : idx) counts[static_cast<std::size_t>(data.samples[i].species)] += 1.0;
        const auto classes_present = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; });
        if (idx.size() < min_split || classes_present <= 1) return make_leaf(idx);

        const double n = static_cast<double>(idx.size());
        const double parent = gini(counts, n);
        int best_f = -1;
        float best_t = 0.0f;
        double best_gain = -1.0;

        // Draw features without replacement until k non-constant ones are found.
        std::size_t found = 0;
        for (std::size_t drawn = 0; drawn < feature_pool.size() && found < k_features; ++drawn) {
            const auto j = drawn + uniform_index(rng, feature_pool.size() - drawn);
            std::swap(feature_pool[drawn], feature_pool[j]);
            const auto f = feature_pool[drawn];
            double lo = value(idx[0], f), hi = lo;
            for (auto i : idx) {
                const double v = value(i, f);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            const auto t = draw_threshold(lo, hi);
            if (!t) continue;
            ++found;
            std::vector<double> left(n_classes, 0.0), right(n_classes, 0.0);
            double nl = 0.0;
            for (auto i : idx) {
                const auto c = static_cast<std::size_t>(data.samples[i].species);
                if (value(i, f) < static_cast<double>(*t)) {
                    left[c] += 1.0;
                    nl += 1.0;
                } else {
                    right[c] += 1.0;
                }
            }
            const double nr = n - nl;
            const double gain = parent - (nl / n) * gini(left, nl) - (nr / n) * gini(right, nr);
            if (gain > best_gain) {
                best_gain = gain;
                best_f = static_cast<int>(f);
                best_t = *t;
            }
        }
        if (best_f < 0) return make_leaf(idx);

        std::vector<std::size_t> li, ri;
        for (auto i : idx)
            (value(i, static_cast<std::size_t>(best_f)) < static_cast<double>(best_t) ? li : ri).push_back(i);

        const int node = static_cast<int>(tree.feature.size());
        tree.feature.push_back(best_f);
        tree.threshold.push_back(best_t);
        tree.left.push_back(-1);
        tree.right.push_back(-1);
        const int l = build(std::move(li));
        const int r = build(std::move(ri));
        tree.left[static_cast<std::size_t>(node)] = l;
        tree.right[static_cast<std::size_t>(node)] = r;
        return node;
    }
};

} // namespace

TrainedModel train_extra_trees(const LabeledDataset& train, const ExtraTreesParams& params) {
    if (train.empty()) throw EmptyClass("extra trees need a nonempty training set");
    if (params.n_trees == 0) throw ConfigError("n_trees must be >= 1");
    const std::size_t d = train.grid.n_points;
    ExtraTreesModel m;
    m.n_classes = train.n_classes();
    m.n_features = d;
    const std::size_t k = params.k_features
                              ? std::min(params.k_features, d)
                              : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));

    std::vector<std::size_t> all(train.size());
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t t = 0; t < params.n_trees; ++t) {
        TreeBuilder b{train, m.n_classes, k, std::max<std::size_t>(params.min_split, 2),
                      make_rng(params.seed, 0x7EE0 + t), {}, {}};
        b.feature_pool.resize(d);
        std::iota(b.feature_pool.begin(), b.feature_pool.end(), 0);
        b.build(all);
        m.trees.push_back(std::move(b.tree));
    }

    TrainedModel model;
    model.kind = ModelKind::ExtraTrees;
    model.classes = train.species.names();
    model.spectrum_kind = train.kind;
    model.grid = train.grid;
    model.seed = params.seed;
    model.body = std::move(m);
    return model;
}

Prediction predict_trees(const TrainedModel& model, std::span<const double> x) {
    const auto& m = std::get<ExtraTreesModel>(model.body);
    if (x.size() != m.n_features) throw InvalidSpectrum("query length does not match the model grid");
    std::vector<double> scores(m.n_classes, 0.0);
    for (const auto& tree : m.trees) {
        std::size_t node = 0;
        while (tree.feature[node] >= 0) {
            const auto f = static_cast<std::size_t>(tree.feature[node]);
            node = static_cast<std::size_t>(x[f] < static_cast<double>(tree.threshold[node]) ? tree.left[node]
                                                                                              : tree.right[node]);
        }
        const float* counts = tree.leaf_counts.data() + static_cast<std::size_t>(tree.left[node]) * m.n_classes;
        double total = 0.0;
        for (std::size_t c = 0; c < m.n_classes; ++c) total += counts[c];
        if (total <= 0.0) continue;
        for (std::size_t c = 0; c < m.n_classes; ++c) scores[c] += counts[c] / total;
    }
    for (auto& s : scores) s /= static_cast<double>(m.trees.size());
    return Prediction::from_scores(model.classes, std::move(scores));
}

} // namespace spectramin
