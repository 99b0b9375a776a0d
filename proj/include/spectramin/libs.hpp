#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spectramin/formula.hpp"
#include "spectramin/learners.hpp"
#include "spectramin/prediction.hpp"
#include "spectramin/spectra.hpp"

namespace spectramin {

struct EmissionLine {
    std::string element;
    int stage = 1;  // 1 = neutral, 2 = singly ionized, ...
    double wavelength_nm = 0.0;
    double rel_intensity = 0.0;
};

class LineTable {
public:
    LineTable() = default;
    explicit LineTable(std::vector<EmissionLine> lines);

    void add(EmissionLine line);
    const std::vector<EmissionLine>& lines() const noexcept { return lines_; }
    std::vector<std::string> elements() const;  // sorted by atomic number
    std::vector<EmissionLine> lines_for(const std::string& element) const;
    bool has(const std::string& element) const;
    std::size_t size() const noexcept { return lines_.size(); }

    // CSV with header `element,stage,wavelength_nm,rel_intensity`.
    static LineTable from_csv(std::string_view text);
    static LineTable load(const std::filesystem::path& path);
    std::string to_csv() const;

private:
    std::vector<EmissionLine> lines_;
};

struct SynthOptions {
    double sigma_nm = 0.2;
    // Elements without lines raise MissingLines unless this is set, in
    // which case they are skipped and listed in `skipped`.
    bool skip_missing = false;
    std::vector<std::string>* skipped = nullptr;
};

// Sum of Gaussian lines weighted by composition, before normalization.
std::vector<double> synth_libs_raw(const ElementComposition& comp, const LineTable& lines, const GridSpec& grid,
                                   const SynthOptions& opt = {});
// As above, then min-max normalized.
Spectrum synth_libs_spectrum(const ElementComposition& comp, const LineTable& lines,
                             const GridSpec& grid = GridSpec::libs(), const SynthOptions& opt = {});

struct Peak {
    std::size_t index = 0;         // grid bin of the local maximum
    double wavelength_nm = 0.0;    // refined by a three-point fit
    double height = 0.0;
    double prominence = 0.0;
};

struct PeakParams {
    double min_height = 0.01;
    double min_prominence = 0.005;
};

std::vector<Peak> detect_peaks(std::span<const double> values, const GridSpec& grid, const PeakParams& params = {});
std::vector<Peak> detect_peaks(const Spectrum& spectrum, const PeakParams& params = {});

// Wavelength bins of fixed width anchored at the grid start.
struct Binning {
    double start = 0.0;
    double width = 0.3;
    std::size_t n_bins = 0;

    static Binning for_grid(const GridSpec& grid, double width = 0.3);
    std::optional<std::size_t> bin_of(double wavelength_nm) const;
};

using SparseVector = std::map<std::size_t, double>;

double sparse_dot(const SparseVector& a, const SparseVector& b);
double sparse_norm(const SparseVector& a);

// Per element, its line intensities summed into bins and L2-normalized.
// Elements with no line inside the grid are left out.
std::map<std::string, SparseVector> element_weight_vectors(const LineTable& lines, const Binning& binning);

struct CosineParams {
    double bin_width = 0.3;
    double similarity_floor = 0.01;
    PeakParams peaks;
};

struct CosineEstimate {
    ElementComposition composition;
    std::map<std::string, double> similarity;  // every element in the table
    std::vector<Peak> peaks;
};

CosineEstimate estimate_composition_cosine(const Spectrum& spectrum, const LineTable& lines,
                                           const CosineParams& params = {});

// Mean absolute difference over the union of elements present in either.
double composition_mae(const ElementComposition& pred, const ElementComposition& truth);
// Cosine similarity over the union of elements; throws ZeroVector on an empty side.
double composition_cosine(const ElementComposition& a, const ElementComposition& b);

// x_i = cosine(est, mineral_i), then L1-normalized. Classes follow map order.
Prediction match_mineral_by_composition(const ElementComposition& est,
                                        const std::map<std::string, ElementComposition>& minerals);

// CSV `name,formula`; formulas containing commas must be quoted.
std::map<std::string, ElementComposition> parse_mineral_table(std::string_view text);
std::map<std::string, ElementComposition> load_mineral_table(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// CNN regressor on synthetic spectra

struct LibsTrainParams {
    std::size_t n_samples = 2000;
    std::size_t max_elements = 6;  // per sample, drawn uniformly from 1..max
    double sigma_nm = 0.2;
    std::optional<CnnArchitecture> arch;  // default libs_regressor
    TrainConfig train;
};

struct SyntheticLibsSample {
    ElementComposition composition;
    Spectrum spectrum;
};

// Dirichlet(1) fractions over a random subset of 1..max_elements elements.
ElementComposition random_composition(const std::vector<std::string>& elements, std::size_t max_elements, Rng& rng);
std::vector<SyntheticLibsSample> make_libs_dataset(const LineTable& lines, const GridSpec& grid, std::size_t n,
                                                   std::size_t max_elements, double sigma_nm, std::uint64_t seed);

TrainedModel train_libs_cnn(const LineTable& lines, const GridSpec& grid, const LibsTrainParams& params);
ElementComposition predict_libs_cnn(const TrainedModel& model, const Spectrum& spectrum);

ElementComposition composition_from_json(const nlohmann::json& j);
nlohmann::json composition_to_json(const ElementComposition& comp);

} // namespace spectramin
