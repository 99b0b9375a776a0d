#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "spectramin/datasets.hpp"
#include "spectramin/nn.hpp"
#include "spectramin/prediction.hpp"

namespace spectramin {

// ---------------------------------------------------------------------------
// Configuration

enum class Optimizer { SgdMomentum, Adam };

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 8;
    double learning_rate = 1e-3;
    Optimizer optimizer = Optimizer::Adam;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double dropout_rate = 0.5;  // used by dropout layers without an explicit rate
    double ema_decay = 0.0;     // 0 disables the running average
    std::uint64_t seed = 0;

    void validate() const;
    static TrainConfig from_json(const nlohmann::json& j);
    static TrainConfig from_json(const nlohmann::json& j, TrainConfig defaults);
    nlohmann::json to_json() const;
};

struct CnnArchitecture {
    std::string name;
    std::size_t input_length = 0;
    std::size_t n_classes = 0;
    std::vector<nn::LayerSpec> layers;  // conv part, dense head, final softmax

    // Layers before the first dense layer.
    std::vector<nn::LayerSpec> conv_part() const;
    std::vector<nn::LayerSpec> head_part() const;
    std::size_t conv_layer_count() const;
    std::size_t dense_layer_count() const;
    // Builds the network once; throws ArchError when shapes do not chain.
    void validate() const;

    nlohmann::json to_json() const;
    static CnnArchitecture from_json(const nlohmann::json& j);
};

// Two convolutional stacks fused at their last conv layer; the dense head is
// taken from `stream_a`.
struct TwoStreamArchitecture {
    CnnArchitecture stream_a;
    CnnArchitecture stream_b;

    nn::Network<float> build() const;
    template <class T>
    nn::Network<T> build_as() const;
    nlohmann::json to_json() const;
    static TwoStreamArchitecture from_json(const nlohmann::json& j);
};

template <class T>
nn::Network<T> build_network(const CnnArchitecture& arch);

// Conv(16,21)-Pool(2)-Conv(32,11)-Pool(2)-Conv(64,5)-Pool(2)-Dense(512)-Dropout-Softmax
CnnArchitecture liu_baseline(std::size_t n_classes, std::size_t input_length);
// Four conv layers and two dense layers, used for fusion experiments.
CnnArchitecture simple_fusion_net(std::size_t n_classes, std::size_t input_length);
// Two Liu-style, two parallel-feature-extraction, two VGG-lite (6 conv; 2 and 3 dense).
std::vector<CnnArchitecture> build_ensemble6(std::size_t n_classes, std::size_t input_length);
// Regression net with a softmax head over elements.
CnnArchitecture libs_regressor(std::size_t n_elements, std::size_t input_length);

// ---------------------------------------------------------------------------
// Models

enum class ModelKind { Knn, ExtraTrees, LinearSvm, Cnn, Ensemble, TwoStream, LibsCnn };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

struct KnnModel {
    std::size_t k = 1;
    std::size_t dim = 0;
    std::vector<float> rows;  // n x dim
    std::vector<int> labels;
    std::vector<double> norms;  // derived from rows

    std::size_t size() const noexcept { return labels.size(); }
};

struct DecisionTree {
    std::vector<int> feature;       // -1 marks a leaf
    std::vector<float> threshold;   // x < threshold goes left
    std::vector<int> left;          // leaf index for leaves
    std::vector<int> right;
    std::vector<float> leaf_counts; // n_leaves x n_classes
};

struct ExtraTreesModel {
    std::size_t n_classes = 0;
    std::size_t n_features = 0;
    std::vector<DecisionTree> trees;
};

struct LinearSvmModel {
    std::size_t n_classes = 0;
    std::size_t dim = 0;
    std::vector<float> weights;  // n_classes x dim
    std::vector<float> bias;
};

struct CnnModel {
    CnnArchitecture arch;
    TrainConfig config;
    std::vector<float> weights;
    std::vector<float> shadow;  // empty unless ema_decay > 0
    std::vector<double> epoch_loss;
    std::shared_ptr<const nn::Network<float>> net;
};

struct EnsembleModel {
    std::vector<CnnModel> members;
};

struct TwoStreamModel {
    TwoStreamArchitecture arch;
    TrainConfig config;
    std::vector<float> weights;
    std::vector<float> shadow;
    std::vector<double> epoch_loss;
    std::shared_ptr<const nn::Network<float>> net;
};

struct TrainedModel {
    ModelKind kind = ModelKind::Knn;
    std::vector<std::string> classes;
    SpectrumKind spectrum_kind = SpectrumKind::Raman;
    GridSpec grid;
    std::optional<GridSpec> grid_b;  // second input for two-stream models
    std::uint64_t seed = 0;
    std::variant<KnnModel, ExtraTreesModel, LinearSvmModel, CnnModel, EnsembleModel, TwoStreamModel> body;
};

// ---------------------------------------------------------------------------
// Training and prediction

TrainedModel train_knn_weighted(const LabeledDataset& train, std::size_t k);
Prediction predict_knn(const TrainedModel& model, std::span<const double> x);

struct ExtraTreesParams {
    std::size_t n_trees = 100;
    std::size_t k_features = 0;  // 0 means ceil(sqrt(d))
    std::size_t min_split = 2;
    std::uint64_t seed = 0;
};
TrainedModel train_extra_trees(const LabeledDataset& train, const ExtraTreesParams& params);
Prediction predict_trees(const TrainedModel& model, std::span<const double> x);

struct SvmParams {
    std::size_t epochs = 300;
    double learning_rate = 0.1;
    double reg = 1e-3;
};
double hinge_loss(double margin);
// Feature-matrix form used by the fusion combiner.
LinearSvmModel fit_linear_svm(std::span<const std::vector<double>> x, std::span<const int> y,
                              std::size_t n_classes, const SvmParams& params);
std::vector<double> svm_margins(const LinearSvmModel& m, std::span<const double> x);
TrainedModel train_linear_svm(const LabeledDataset& train, const SvmParams& params);
Prediction predict_svm(const TrainedModel& model, std::span<const double> x);

TrainedModel train_cnn(const LabeledDataset& train, const CnnArchitecture& arch, const TrainConfig& cfg);
Prediction predict_cnn(const TrainedModel& model, std::span<const double> x, bool use_ema = true);
// Softmax output of a single CNN, no class names attached.
std::vector<double> cnn_probabilities(const CnnModel& model, std::span<const double> x, bool use_ema);

TrainedModel train_ensemble(const LabeledDataset& train, const std::vector<CnnArchitecture>& archs,
                            const TrainConfig& cfg);
Prediction predict_ensemble(std::span<const Prediction> members);
Prediction predict_ensemble(const TrainedModel& model, std::span<const double> x, bool use_ema = true);

// Pair species ids must index `classes`.
TrainedModel train_two_stream_cnn(std::span<const PairedSample> pairs, const std::vector<std::string>& classes,
                                  const CnnArchitecture& arch_a, const CnnArchitecture& arch_b,
                                  const TrainConfig& cfg);
Prediction predict_two_stream(const TrainedModel& model, std::span<const double> a,
                              std::span<const double> b, bool use_ema = true);

// Dispatches on the model kind (single-input models only).
Prediction predict(const TrainedModel& model, std::span<const double> x, bool use_ema = true);

// ---------------------------------------------------------------------------
// Network training loop shared by classifiers and the LIBS regressor.

enum class LossKind { CrossEntropy, SoftmaxMae };

struct TrainExample {
    std::vector<std::vector<float>> inputs;  // one per stream
    std::size_t label = 0;
    std::vector<double> target;  // SoftmaxMae only
};

struct TrainOutcome {
    std::vector<float> weights;
    std::vector<float> shadow;
    std::vector<double> epoch_loss;
};

TrainOutcome train_network(const nn::Network<float>& net, std::span<const TrainExample> data, LossKind loss,
                           const TrainConfig& cfg);
std::vector<double> network_probabilities(const nn::Network<float>& net, std::span<const float> params,
                                          std::span<const std::span<const double>> inputs);

// ---------------------------------------------------------------------------
// Model specs as used by configs and the CLI.

struct ModelSpec {
    ModelKind kind = ModelKind::Knn;
    std::string name;
    std::size_t k = 5;
    ExtraTreesParams trees;
    SvmParams svm;
    std::optional<CnnArchitecture> arch;  // cnn only; default liu_baseline
    TrainConfig train;

    static ModelSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

TrainedModel train_model(const ModelSpec& spec, const LabeledDataset& train, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Persistence: magic, version, JSON descriptor, little-endian float32 blob.

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(std::string_view bytes);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

} // namespace spectramin
