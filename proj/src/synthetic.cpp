#include "spectramin/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "spectramin/error.hpp"
#include "spectramin/rng.hpp"

namespace spectramin {

namespace {

struct Band {
    double center;
    double width;
    double amplitude;
};

std::vector<double> render(const GridSpec& grid, const std::vector<Band>& bands) {
    std::vector<double> v(grid.n_points, 0.0);
    for (const auto& b : bands)
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double z = (grid.position(i) - b.center) / b.width;
            if (std::abs(z) < 12.0) v[i] += b.amplitude * std::exp(-0.5 * z * z);
        }
    return v;
}

std::string label(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%02zu", prefix, i);
    return buf;
}

Spectrum finish(std::vector<double> v, const GridSpec& grid, SpectrumKind kind, double noise, Rng& rng) {
    std::normal_distribution<double> eps(0.0, noise);
    for (auto& x : v) x = std::max(0.0, x * (1.0 + eps(rng)));
    return {grid, normalize_unit(v), kind, {}};
}

} // namespace

RamanLibraryParams RamanLibraryParams::from_json(const nlohmann::json& j) {
    RamanLibraryParams p;
    p.n_classes = j.value("n_classes", p.n_classes);
    p.per_class = j.value("per_class", p.per_class);
    p.min_peaks = j.value("min_peaks", p.min_peaks);
    p.max_peaks = j.value("max_peaks", p.max_peaks);
    p.min_width = j.value("min_width", p.min_width);
    p.max_width = j.value("max_width", p.max_width);
    p.position_jitter = j.value("position_jitter", p.position_jitter);
    p.amplitude_jitter = j.value("amplitude_jitter", p.amplitude_jitter);
    p.noise = j.value("noise", p.noise);
    p.seed = j.value("seed", p.seed);
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        p.grid = {g.at("start").get<double>(), g.at("end").get<double>(), g.at("n_points").get<std::size_t>()};
    }
    return p;
}

LabeledDataset make_raman_library(const RamanLibraryParams& p) {
    if (p.n_classes == 0 || p.per_class == 0) throw ConfigError("library needs classes and samples");
    if (p.min_peaks == 0 || p.max_peaks < p.min_peaks) throw ConfigError("bad peak count range");
    p.grid.validate();
    LabeledDataset ds;
    ds.kind = SpectrumKind::Raman;
    ds.grid = p.grid;
    const double margin = 0.03 * (p.grid.end - p.grid.start);
    for (std::size_t c = 0; c < p.n_classes; ++c) {
        auto crng = make_rng(derive_seed(p.seed, c), 0);
        const std::size_t n_peaks = p.min_peaks + uniform_index(crng, p.max_peaks - p.min_peaks + 1);
        std::vector<Band> bands;
        for (std::size_t k = 0; k < n_peaks; ++k)
            bands.push_back({uniform(crng, p.grid.start + margin, p.grid.end - margin),
                             uniform(crng, p.min_width, p.max_width), uniform(crng, 0.3, 1.0)});
        const auto name = label("mineral", c);
        for (std::size_t s = 0; s < p.per_class; ++s) {
            auto srng = make_rng(derive_seed(p.seed, c), 1 + s);
            std::normal_distribution<double> jitter(0.0, p.position_jitter);
            auto sample = bands;
            for (auto& b : sample) {
                b.center += jitter(srng);
                b.amplitude *= 1.0 + uniform(srng, -p.amplitude_jitter, p.amplitude_jitter);
            }
            auto v = render(p.grid, sample);
            const double slope = uniform(srng, 0.0, 0.05);
            for (std::size_t i = 0; i < v.size(); ++i)
                v[i] += slope * static_cast<double>(i) / static_cast<double>(v.size() - 1);
            ds.add(finish(std::move(v), p.grid, SpectrumKind::Raman, p.noise, srng), name,
                   name + "-" + std::to_string(s));
        }
    }
    return ds;
}

ComplementaryParams ComplementaryParams::from_json(const nlohmann::json& j) {
    ComplementaryParams p;
    p.n_classes = j.value("n_classes", p.n_classes);
    p.per_class = j.value("per_class", p.per_class);
    p.noise = j.value("noise", p.noise);
    p.seed = j.value("seed", p.seed);
    return p;
}

std::pair<LabeledDataset, LabeledDataset> make_complementary(const ComplementaryParams& p) {
    if (p.n_classes < 2 || p.n_classes % 2 != 0) throw ConfigError("complementary fixture needs an even class count");
    if (p.per_class == 0) throw ConfigError("complementary fixture needs samples");
    const GridSpec ga = GridSpec::raman(), gb = GridSpec::vnir();

    // A broad shared hump keeps cross-pattern similarities away from zero.
    auto patterns = [&](const GridSpec& g, std::size_t count, std::uint64_t stream, double width) {
        std::vector<std::vector<Band>> out;
        const double span = g.end - g.start;
        for (std::size_t k = 0; k < count; ++k) {
            auto rng = make_rng(derive_seed(p.seed, stream), k);
            std::vector<Band> bands{{g.start + 0.5 * span, 0.25 * span, 0.4}};
            for (int b = 0; b < 3; ++b)
                bands.push_back({uniform(rng, g.start + 0.05 * span, g.end - 0.05 * span), width, uniform(rng, 0.5, 1.0)});
            out.push_back(std::move(bands));
        }
        return out;
    };
    const auto pa = patterns(ga, p.n_classes / 2, 0xA, 8.0);
    const auto pb = patterns(gb, 2, 0xB, 25.0);

    LabeledDataset a, b;
    a.kind = SpectrumKind::Raman;
    a.grid = ga;
    b.kind = SpectrumKind::VNIR;
    b.grid = gb;
    for (std::size_t c = 0; c < p.n_classes; ++c) {
        const auto name = label("class", c);
        for (std::size_t s = 0; s < p.per_class; ++s) {
            auto rng = make_rng(derive_seed(p.seed, 0x100 + c), s);
            const auto id = name + "-" + std::to_string(s);
            a.add(finish(render(ga, pa[c / 2]), ga, SpectrumKind::Raman, p.noise, rng), name, id);
            b.add(finish(render(gb, pb[c % 2]), gb, SpectrumKind::VNIR, p.noise, rng), name, id);
        }
    }
    return {std::move(a), std::move(b)};
}

} // namespace spectramin
