#pragma once

#include <cstdint>
#include <utility>

#include <json.hpp>

#include "spectramin/datasets.hpp"

namespace spectramin {

// Raman-like library: each class is a fixed set of Gaussian bands; samples
// jitter band positions and amplitudes and add proportional noise.
struct RamanLibraryParams {
    std::size_t n_classes = 20;
    std::size_t per_class = 10;
    std::size_t min_peaks = 3;
    std::size_t max_peaks = 6;
    double min_width = 4.0;   // Gaussian sigma, cm^-1
    double max_width = 12.0;
    double position_jitter = 2.0;
    double amplitude_jitter = 0.15;
    double noise = 0.03;      // proportional noise sigma
    GridSpec grid = GridSpec::raman();
    std::uint64_t seed = 7;

    static RamanLibraryParams from_json(const nlohmann::json& j);
};

LabeledDataset make_raman_library(const RamanLibraryParams& p);

// Two modalities over the same classes: modality A sees only the class pair
// (class / 2), modality B only the member within the pair (class % 2).
// Sample i of `a` and sample i of `b` belong to the same class.
struct ComplementaryParams {
    std::size_t n_classes = 20;
    std::size_t per_class = 10;
    double noise = 0.05;
    std::uint64_t seed = 11;

    static ComplementaryParams from_json(const nlohmann::json& j);
};

std::pair<LabeledDataset, LabeledDataset> make_complementary(const ComplementaryParams& p);

} // namespace spectramin
