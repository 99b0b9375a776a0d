#pragma once

// Naive re-implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "spectramin/datasets.hpp"
#include "spectramin/rng.hpp"

namespace oracle {

// Full scan: score every row, stable-sort by similarity, vote with the top k.
inline std::vector<double> knn_scores(const spectramin::LabeledDataset& train, const std::vector<double>& q,
                                      std::size_t k) {
    const std::size_t n = train.size();
    std::vector<double> sim(n, 0.0);
    double qq = 0.0;
    for (double v : q) qq += v * v;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = train.samples[i].spectrum.values;
        double dot = 0.0, rr = 0.0;
        for (std::size_t t = 0; t < r.size(); ++t) {
            dot += r[t] * q[t];
            rr += r[t] * r[t];
        }
        sim[i] = rr > 0.0 ? dot / (std::sqrt(qq) * std::sqrt(rr)) : 0.0;
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
    std::vector<double> votes(train.n_classes(), 0.0);
    for (std::size_t i = 0; i < std::min(k, n); ++i)
        votes[static_cast<std::size_t>(train.samples[idx[i]].species)] += std::max(0.0, sim[idx[i]]);
    double total = 0.0;
    for (double v : votes) total += v;
    if (total == 0.0) return std::vector<double>(votes.size(), 1.0 / static_cast<double>(votes.size()));
    for (double& v : votes) v /= total;
    return votes;
}

inline std::size_t argmax(const std::vector<double>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Random small KNN instance with float-representable values.
struct KnnInstance {
    spectramin::LabeledDataset train;
    std::vector<double> query;
    std::size_t k = 1;
};

inline KnnInstance random_knn_instance(std::uint64_t seed) {
    auto rng = spectramin::make_rng(seed, 0x4E4E);
    const std::size_t dim = 2 + spectramin::uniform_index(rng, 12);
    const std::size_t n = 2 + spectramin::uniform_index(rng, 30);
    const std::size_t n_classes = 1 + spectramin::uniform_index(rng, 4);
    KnnInstance inst;
    inst.train.grid = {0.0, static_cast<double>(dim - 1), dim};
    auto draw = [&] {
        std::vector<double> v(dim);
        for (auto& x : v) x = static_cast<float>(spectramin::uniform(rng, -0.3, 1.0));
        return v;
    };
    for (std::size_t i = 0; i < n; ++i) {
        spectramin::Spectrum s;
        s.grid = inst.train.grid;
        s.values = draw();
        inst.train.add(std::move(s), "c" + std::to_string(spectramin::uniform_index(rng, n_classes)));
    }
    inst.query = draw();
    inst.k = 1 + spectramin::uniform_index(rng, n);
    return inst;
}

} // namespace oracle
