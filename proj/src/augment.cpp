#include "spectramin/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spectramin/error.hpp"
#include "spectramin/rng.hpp"

namespace spectramin {

std::string to_string(AugmentTechnique t) {
    switch (t) {
    case AugmentTechnique::None: return "none";
    case AugmentTechnique::Shift: return "shift";
    case AugmentTechnique::Offset: return "offset";
    case AugmentTechnique::Noise: return "noise";
    case AugmentTechnique::Bjerrum: return "bjerrum";
    case AugmentTechnique::Smote: return "smote";
    }
    return "none";
}

AugmentTechnique parse_technique(const std::string& text) {
    for (auto t : {AugmentTechnique::None, AugmentTechnique::Shift, AugmentTechnique::Offset,
                   AugmentTechnique::Noise, AugmentTechnique::Bjerrum, AugmentTechnique::Smote})
        if (to_string(t) == text) return t;
    throw ConfigError("unknown augmentation technique '" + text + "'");
}

AugmentParams AugmentParams::from_json(const nlohmann::json& j) {
    AugmentParams p;
    p.max_shift_bins = j.value("max_shift_bins", p.max_shift_bins);
    p.offset_range = j.value("offset_range", p.offset_range);
    p.noise_sigma = j.value("noise_sigma", p.noise_sigma);
    p.multiply_range = j.value("multiply_range", p.multiply_range);
    p.bjerrum_offset_range = j.value("bjerrum_offset_range", p.bjerrum_offset_range);
    p.slope_range = j.value("slope_range", p.slope_range);
    p.smote_k = j.value("smote_k", p.smote_k);
    if (p.max_shift_bins < 1) throw ConfigError("max_shift_bins must be >= 1");
    if (p.smote_k < 1) throw ConfigError("smote_k must be >= 1");
    return p;
}

nlohmann::json AugmentParams::to_json() const {
    return {{"max_shift_bins", max_shift_bins}, {"offset_range", offset_range},
            {"noise_sigma", noise_sigma},       {"multiply_range", multiply_range},
            {"bjerrum_offset_range", bjerrum_offset_range},
            {"slope_range", slope_range},       {"smote_k", smote_k}};
}

namespace {

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

template <class Fn>
LabeledDataset double_each(const LabeledDataset& train, Fn&& make_copy) {
    LabeledDataset out = train;
    out.samples.reserve(train.size() * 2);
    for (std::size_t i = 0; i < train.size(); ++i) {
        LabeledSample s = train.samples[i];
        s.spectrum.values = make_copy(i);
        s.id += "~aug";
        out.samples.push_back(std::move(s));
    }
    return out;
}

} // namespace

std::vector<double> apply_shift(std::span<const double> v, int offset) {
    std::vector<double> out(v.size(), 0.0);
    const auto n = static_cast<long>(v.size());
    for (long i = 0; i < n; ++i) {
        const long src = i - offset;
        if (src >= 0 && src < n) out[static_cast<std::size_t>(i)] = clamp01(v[static_cast<std::size_t>(src)]);
    }
    return out;
}

std::vector<double> apply_offset(std::span<const double> v, double delta) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = clamp01(v[i] + delta);
    return out;
}

std::vector<double> apply_proportional_noise(std::span<const double> v, std::span<const double> eps) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = clamp01(v[i] * (1.0 + eps[i]));
    return out;
}

std::vector<double> apply_offset_slope_multiply(std::span<const double> v, double multiply,
                                                double offset, double slope) {
    std::vector<double> out(v.size());
    const double denom = v.size() > 1 ? static_cast<double>(v.size() - 1) : 1.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double t = static_cast<double>(i) / denom;
        out[i] = clamp01(multiply * v[i] + offset + slope * t);
    }
    return out;
}

std::vector<double> smote_interpolate(std::span<const double> x, std::span<const double> z,
                                      double lambda) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + lambda * (z[i] - x[i]);
    return out;
}

LabeledDataset augment_shift(const LabeledDataset& train, std::uint64_t seed, const AugmentParams& p) {
    auto rng = make_rng(seed, 0xA51);
    std::uniform_int_distribution<int> dist(1, p.max_shift_bins);
    return double_each(train, [&](std::size_t i) {
        int s = dist(rng);
        if (std::bernoulli_distribution(0.5)(rng)) s = -s;
        return apply_shift(train.samples[i].spectrum.values, s);
    });
}

LabeledDataset augment_offset(const LabeledDataset& train, std::uint64_t seed, const AugmentParams& p) {
    auto rng = make_rng(seed, 0xA52);
    return double_each(train, [&](std::size_t i) {
        return apply_offset(train.samples[i].spectrum.values,
                            uniform(rng, -p.offset_range, p.offset_range));
    });
}

LabeledDataset augment_proportional_noise(const LabeledDataset& train, std::uint64_t seed,
                                          const AugmentParams& p) {
    auto rng = make_rng(seed, 0xA53);
    std::normal_distribution<double> noise(0.0, p.noise_sigma);
    return double_each(train, [&](std::size_t i) {
        const auto& v = train.samples[i].spectrum.values;
        std::vector<double> eps(v.size());
        for (auto& e : eps) e = noise(rng);
        return apply_proportional_noise(v, eps);
    });
}

LabeledDataset augment_offset_slope_multiply(const LabeledDataset& train, std::uint64_t seed,
                                             const AugmentParams& p) {
    auto rng = make_rng(seed, 0xA54);
    return double_each(train, [&](std::size_t i) {
        const double m = uniform(rng, 1.0 - p.multiply_range, 1.0 + p.multiply_range);
        const double a = uniform(rng, -p.bjerrum_offset_range, p.bjerrum_offset_range);
        const double b = uniform(rng, -p.slope_range, p.slope_range);
        return apply_offset_slope_multiply(train.samples[i].spectrum.values, m, a, b);
    });
}

LabeledDataset augment_smote(const LabeledDataset& train, std::uint64_t seed, const AugmentParams& p) {
    auto rng = make_rng(seed, 0xA55);
    const auto classes = train.indices_by_species();

    // neighbour lists per sample, restricted to its class
    std::vector<std::vector<std::size_t>> neighbours(train.size());
    for (const auto& members : classes) {
        if (members.size() < 2) continue;
        const std::size_t k = std::min(p.smote_k, members.size() - 1);
        for (auto i : members) {
            std::vector<std::pair<double, std::size_t>> d;
            const auto& xi = train.samples[i].spectrum.values;
            for (auto j : members) {
                if (j == i) continue;
                const auto& xj = train.samples[j].spectrum.values;
                double s = 0.0;
                for (std::size_t t = 0; t < xi.size(); ++t) s += (xi[t] - xj[t]) * (xi[t] - xj[t]);
                d.emplace_back(s, j);
            }
            std::partial_sort(d.begin(), d.begin() + static_cast<long>(k), d.end());
            for (std::size_t t = 0; t < k; ++t) neighbours[i].push_back(d[t].second);
        }
    }

    return double_each(train, [&](std::size_t i) {
        const auto& x = train.samples[i].spectrum.values;
        if (neighbours[i].empty())
            return apply_offset(x, uniform(rng, -p.offset_range, p.offset_range));
        const auto z = neighbours[i][uniform_index(rng, neighbours[i].size())];
        const double lambda = uniform(rng, 0.0, 1.0);
        auto out = smote_interpolate(x, train.samples[z].spectrum.values, lambda);
        for (auto& v : out) v = clamp01(v);
        return out;
    });
}

LabeledDataset augment(const LabeledDataset& train, AugmentTechnique technique, std::uint64_t seed,
                       const AugmentParams& p) {
    switch (technique) {
    case AugmentTechnique::None: return train;
    case AugmentTechnique::Shift: return augment_shift(train, seed, p);
    case AugmentTechnique::Offset: return augment_offset(train, seed, p);
    case AugmentTechnique::Noise: return augment_proportional_noise(train, seed, p);
    case AugmentTechnique::Bjerrum: return augment_offset_slope_multiply(train, seed, p);
    case AugmentTechnique::Smote: return augment_smote(train, seed, p);
    }
    return train;
}

} // namespace spectramin
