#include <algorithm>
#include <numeric>
#include <random>

#include "model_internal.hpp"
#include "spectramin/error.hpp"
#include "spectramin/libs.hpp"
#include "spectramin/rng.hpp"

namespace spectramin {

ElementComposition random_composition(const std::vector<std::string>& elements, std::size_t max_elements, Rng& rng) {
    if (elements.empty()) throw ConfigError("no elements to draw from");
    const std::size_t cap = std::clamp<std::size_t>(max_elements, 1, elements.size());
    const std::size_t m = 1 + uniform_index(rng, cap);
    std::vector<std::size_t> pick(elements.size());
    std::iota(pick.begin(), pick.end(), 0);
    for (std::size_t i = 0; i < m; ++i) std::swap(pick[i], pick[i + uniform_index(rng, pick.size() - i)]);
    std::exponential_distribution<double> gamma1(1.0);
    std::map<std::string, double> w;
    for (std::size_t i = 0; i < m; ++i) w[elements[pick[i]]] = gamma1(rng) + 1e-12;
    return normalize_composition(w);
}

std::vector<SyntheticLibsSample> make_libs_dataset(const LineTable& lines, const GridSpec& grid, std::size_t n,
                                                   std::size_t max_elements, double sigma_nm, std::uint64_t seed) {
    const auto elements = lines.elements();
    auto rng = make_rng(seed, 0x11B5);
    std::vector<SyntheticLibsSample> out;
    out.reserve(n);
    SynthOptions opt;
    opt.sigma_nm = sigma_nm;
    for (std::size_t i = 0; i < n; ++i) {
        auto comp = random_composition(elements, max_elements, rng);
        auto spectrum = synth_libs_spectrum(comp, lines, grid, opt);
        out.push_back({std::move(comp), std::move(spectrum)});
    }
    return out;
}

TrainedModel train_libs_cnn(const LineTable& lines, const GridSpec& grid, const LibsTrainParams& params) {
    if (params.n_samples == 0) throw ConfigError("n_samples must be positive");
    const auto elements = lines.elements();
    CnnArchitecture arch = params.arch ? *params.arch : libs_regressor(elements.size(), grid.n_points);
    if (arch.input_length == 0) arch.input_length = grid.n_points;
    if (arch.n_classes == 0) arch.n_classes = elements.size();
    if (arch.input_length != grid.n_points) throw ArchError("regressor input length does not match the grid");
    if (arch.n_classes != elements.size()) throw ArchError("regressor outputs do not match the element count");

    const auto samples =
        make_libs_dataset(lines, grid, params.n_samples, params.max_elements, params.sigma_nm, params.train.seed);
    std::vector<TrainExample> data;
    data.reserve(samples.size());
    for (const auto& s : samples) {
        std::vector<double> target(elements.size(), 0.0);
        for (std::size_t e = 0; e < elements.size(); ++e)
            if (auto it = s.composition.find(elements[e]); it != s.composition.end()) target[e] = it->second;
        data.push_back({{to_float(s.spectrum.values)}, 0, std::move(target)});
    }

    CnnModel m;
    m.arch = arch;
    m.config = params.train;
    attach_network(m);
    auto outcome = train_network(*m.net, data, LossKind::SoftmaxMae, params.train);
    m.weights = std::move(outcome.weights);
    m.shadow = std::move(outcome.shadow);
    m.epoch_loss = std::move(outcome.epoch_loss);

    TrainedModel model;
    model.kind = ModelKind::LibsCnn;
    model.classes = elements;
    model.spectrum_kind = SpectrumKind::LIBS;
    model.grid = grid;
    model.seed = params.train.seed;
    model.body = std::move(m);
    return model;
}

ElementComposition predict_libs_cnn(const TrainedModel& model, const Spectrum& spectrum) {
    if (model.kind != ModelKind::LibsCnn) throw ConfigError("model is not a LIBS regressor");
    if (!(spectrum.grid == model.grid)) throw InvalidSpectrum("spectrum grid does not match the regressor grid");
    const auto probs = cnn_probabilities(std::get<CnnModel>(model.body), spectrum.values, true);
    ElementComposition out;
    for (std::size_t e = 0; e < probs.size(); ++e) out[model.classes[e]] = probs[e];
    return out;
}

} // namespace spectramin
