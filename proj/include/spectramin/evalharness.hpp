#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spectramin/augment.hpp"
#include "spectramin/datasets.hpp"
#include "spectramin/fusion.hpp"
#include "spectramin/learners.hpp"
#include "spectramin/libs.hpp"

namespace spectramin {

// ---------------------------------------------------------------------------
// Statistics

struct AccuracyCI {
    double mean = 0.0;
    std::optional<double> half_width;  // absent for a single run
};

// Normal approximation: 1.96 * sample stddev / sqrt(n).
AccuracyCI accuracy_ci(std::span<const double> accuracies);

struct PcaResult {
    std::vector<double> mean;
    std::vector<std::vector<double>> components;   // k x d, unit rows
    std::vector<double> explained_variance;        // k, descending
    std::vector<std::vector<double>> projections;  // n x k
};

// Components are signed so that their largest-magnitude loading is positive.
PcaResult pca_project(std::span<const std::vector<double>> rows, std::size_t n_components = 2);

struct ClassMeanStd {
    std::string species;
    std::vector<double> mean;
    std::vector<double> stddev;  // population (divides by n)
};

// Empty `species` means every species in the dataset.
std::vector<ClassMeanStd> class_mean_std(const LabeledDataset& ds, const std::vector<std::string>& species = {});
std::string class_mean_std_csv(const LabeledDataset& ds, const std::vector<std::string>& species = {});

// ---------------------------------------------------------------------------
// Experiments

enum class ExperimentMode { Single, Fusion, Libs };
std::string to_string(ExperimentMode mode);

// A dataset given as a file (saved dataset or manifest) or a synthetic generator.
struct DatasetSource {
    std::optional<std::filesystem::path> path;
    std::string synthetic;  // "raman-library", "complementary-a", "complementary-b"
    nlohmann::json params = nlohmann::json::object();

    LabeledDataset load() const;
};

struct LibsExperiment {
    std::filesystem::path lines;
    std::filesystem::path minerals;
    std::vector<std::string> methods{"cosine"};  // "cosine", "cnn"
    GridSpec grid = GridSpec::libs();
    double noise = 0.01;
    LibsTrainParams cnn;
};

struct ExperimentConfig {
    std::string name = "experiment";
    ExperimentMode mode = ExperimentMode::Single;
    std::size_t n_runs = 30;
    std::uint64_t base_seed = 0;
    SplitProtocol protocol = SplitProtocol::ThreePerSpecies;
    DatasetSource dataset;
    std::optional<DatasetSource> dataset_b;
    std::vector<ModelSpec> models;  // single: all; fusion: [A, B]
    std::vector<FusionRule> rules;
    std::optional<TrainConfig> two_stream;
    std::size_t pairs_per_species = 50;
    AugmentTechnique augmentation = AugmentTechnique::None;
    AugmentParams augment_params;
    bool remove_outliers = false;
    std::optional<LibsExperiment> libs;
    std::vector<std::string> pca_species;

    // Relative paths resolve against `base_dir`.
    static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static ExperimentConfig load(const std::filesystem::path& path);
};

struct SampleRecord {
    std::string id;
    int label = 0;
    Prediction prediction;
    std::optional<double> composition_similarity;
    std::optional<double> composition_mae;
};

struct MethodResult {
    std::string method;
    double accuracy = 0.0;
    std::vector<SampleRecord> samples;
};

struct RunResult {
    std::size_t run = 0;
    std::uint64_t seed = 0;
    std::vector<MethodResult> methods;
};

// Run r uses seed base_seed + r. Runs may execute on `jobs` threads; results
// are returned in run order regardless.
std::vector<RunResult> run_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1);

// Fraction of samples whose argmax equals the label, recomputed from records.
double recompute_accuracy(const MethodResult& m);

struct MethodSummary {
    std::string method;
    std::vector<double> accuracies;
    AccuracyCI ci;
    std::optional<double> mean_composition_mae;
};

std::vector<MethodSummary> summarize(const std::vector<RunResult>& results);

// ---------------------------------------------------------------------------
// Exports

nlohmann::json results_to_json(const ExperimentConfig& cfg, const std::vector<RunResult>& results);
std::string report_markdown(const ExperimentConfig& cfg, const std::vector<MethodSummary>& summaries);
// Rows (algorithm, sample_id, cosine_similarity), ordered by algorithm then sample id.
std::string export_violin_csv(const std::vector<RunResult>& results);
std::string export_pca_csv(const std::vector<std::string>& ids, const std::vector<std::string>& labels,
                           const PcaResult& pca);

// Writes results.json, report.md, violin.csv, pca.csv and meanstd.csv into `dir`.
void write_experiment_outputs(const ExperimentConfig& cfg, const std::vector<RunResult>& results,
                              const std::filesystem::path& dir);

} // namespace spectramin
