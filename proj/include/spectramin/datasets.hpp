#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "spectramin/spectra.hpp"

namespace spectramin {

// Bidirectional species id <-> name map; ids are assigned densely by first insertion.
class SpeciesIndex {
public:
    int add(const std::string& name);
    int id(const std::string& name) const;  // -1 when absent
    const std::string& name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    std::size_t size() const noexcept { return names_.size(); }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> ids_;
};

struct LabeledSample {
    Spectrum spectrum;
    int species = 0;
    std::string id;
};

struct LabeledDataset {
    SpectrumKind kind = SpectrumKind::Raman;
    GridSpec grid = GridSpec::raman();
    SpeciesIndex species;
    std::vector<LabeledSample> samples;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
    std::size_t n_classes() const noexcept { return species.size(); }

    void add(Spectrum spectrum, const std::string& species_name, std::string id = {});
    // Keeps the full species index so ids stay comparable with the parent.
    LabeledDataset subset(std::span<const std::size_t> indices) const;
    std::vector<std::vector<std::size_t>> indices_by_species() const;
    std::vector<int> labels() const;
    void validate() const;
};

enum class SplitProtocol { ThreePerSpecies, LeaveOneOutPerSpecies };

std::string to_string(SplitProtocol p);
SplitProtocol parse_protocol(const std::string& text);

struct SplitPlan {
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
    std::uint64_t seed = 0;
    SplitProtocol protocol = SplitProtocol::ThreePerSpecies;

    // Throws ConfigError unless the plan is a disjoint, exhaustive partition of [0, n).
    void check_partition(std::size_t n) const;
};

struct PairedSample {
    Spectrum spectrum_a;
    Spectrum spectrum_b;
    int species = 0;  // id in the first dataset's species index
    std::string species_name;
    std::size_t index_a = 0;
    std::size_t index_b = 0;
};

// Trimmed, lowercased, internal whitespace collapsed.
std::string normalize_species_name(std::string_view name);

RawSpectrum parse_rruff_text(std::string_view text, SpectrumKind kind = SpectrumKind::Raman);
RawSpectrum parse_csv_xy(std::string_view text, SpectrumKind kind);
RawSpectrum read_spectrum_file(const std::filesystem::path& path, SpectrumKind kind,
                               const std::string& format = "auto");

LabeledDataset build_dataset(const std::filesystem::path& manifest_path);

SplitPlan split_three_per_species(const LabeledDataset& ds, std::uint64_t seed);
SplitPlan split_leave_one_out(const LabeledDataset& ds, std::uint64_t seed);
SplitPlan make_split(const LabeledDataset& ds, SplitProtocol protocol, std::uint64_t seed);

// Drops training outliers class by class (see outlier_inliers).
std::vector<std::size_t> filter_training_outliers(const LabeledDataset& ds,
                                                  std::span<const std::size_t> train,
                                                  double threshold = 0.5);

std::vector<PairedSample> pair_by_species(const LabeledDataset& a, const LabeledDataset& b,
                                          std::size_t max_pairs_per_species,
                                          std::uint64_t seed);
std::vector<PairedSample> pair_same_modality(const LabeledDataset& ds, std::uint64_t seed,
                                             std::size_t max_pairs_per_species);

// Species present in both datasets, in the first dataset's order.
std::vector<std::string> common_species(const LabeledDataset& a, const LabeledDataset& b);
// Keeps only samples whose species is listed; the new index follows `names` order.
LabeledDataset restrict_to_species(const LabeledDataset& ds, const std::vector<std::string>& names);

nlohmann::json dataset_to_json(const LabeledDataset& ds);
LabeledDataset dataset_from_json(const nlohmann::json& j);
nlohmann::json plan_to_json(const SplitPlan& plan);
SplitPlan plan_from_json(const nlohmann::json& j);

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
// Writes to a sibling temp file then renames, so readers never see partial output.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

} // namespace spectramin
