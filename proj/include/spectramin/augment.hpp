#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spectramin/datasets.hpp"

namespace spectramin {

enum class AugmentTechnique { None, Shift, Offset, Noise, Bjerrum, Smote };

std::string to_string(AugmentTechnique t);
AugmentTechnique parse_technique(const std::string& text);

// Augmentation magnitudes, all relative to [0, 1]-normalized spectra.
struct AugmentParams {
    int max_shift_bins = 5;
    double offset_range = 0.1;        // delta ~ U(-r, r)
    double noise_sigma = 0.05;        // eps_i ~ N(0, sigma^2)
    double multiply_range = 0.1;      // m ~ U(1 - r, 1 + r)
    double bjerrum_offset_range = 0.05;
    double slope_range = 0.05;
    std::size_t smote_k = 5;

    static AugmentParams from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Primitive transforms; results are clamped to [0, 1].
std::vector<double> apply_shift(std::span<const double> v, int offset);
std::vector<double> apply_offset(std::span<const double> v, double delta);
std::vector<double> apply_proportional_noise(std::span<const double> v, std::span<const double> eps);
std::vector<double> apply_offset_slope_multiply(std::span<const double> v, double multiply,
                                                double offset, double slope);
std::vector<double> smote_interpolate(std::span<const double> x, std::span<const double> z,
                                      double lambda);

// Each returns the input samples followed by one synthetic copy per sample,
// so every class count doubles. Synthetic ids get an "~aug" suffix.
LabeledDataset augment_shift(const LabeledDataset& train, std::uint64_t seed,
                             const AugmentParams& p = {});
LabeledDataset augment_offset(const LabeledDataset& train, std::uint64_t seed,
                              const AugmentParams& p = {});
LabeledDataset augment_proportional_noise(const LabeledDataset& train, std::uint64_t seed,
                                          const AugmentParams& p = {});
LabeledDataset augment_offset_slope_multiply(const LabeledDataset& train, std::uint64_t seed,
                                             const AugmentParams& p = {});
// Classes with a single sample fall back to augment_offset.
LabeledDataset augment_smote(const LabeledDataset& train, std::uint64_t seed,
                             const AugmentParams& p = {});

LabeledDataset augment(const LabeledDataset& train, AugmentTechnique technique,
                       std::uint64_t seed, const AugmentParams& p = {});

} // namespace spectramin
