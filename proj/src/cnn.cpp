#include <algorithm>
#include <cmath>
#include <numeric>

#include "model_internal.hpp"
#include "spectramin/error.hpp"
#include "spectramin/learners.hpp"
#include "spectramin/rng.hpp"

namespace spectramin {

using nn::LayerSpec;
using nn::LayerType;

// ---------------------------------------------------------------------------
// TrainConfig

void TrainConfig::validate() const {
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigError("ema_decay must lie in [0, 1)");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) { return from_json(j, TrainConfig{}); }

TrainConfig TrainConfig::from_json(const nlohmann::json& j, TrainConfig c) {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    if (j.contains("optimizer")) {
        const auto o = j["optimizer"].get<std::string>();
        if (o == "adam") c.optimizer = Optimizer::Adam;
        else if (o == "sgd" || o == "sgd-momentum") c.optimizer = Optimizer::SgdMomentum;
        else throw ConfigError("unknown optimizer '" + o + "'");
    }
    c.momentum = j.value("momentum", c.momentum);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.ema_decay = j.value("ema_decay", c.ema_decay);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

nlohmann::json TrainConfig::to_json() const {
    return {{"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"optimizer", optimizer == Optimizer::Adam ? "adam" : "sgd-momentum"},
            {"momentum", momentum},
            {"beta1", beta1},
            {"beta2", beta2},
            {"dropout_rate", dropout_rate},
            {"ema_decay", ema_decay},
            {"seed", seed}};
}

// ---------------------------------------------------------------------------
// Architectures

std::vector<LayerSpec> CnnArchitecture::conv_part() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers) {
        if (l.type == LayerType::Dense || l.type == LayerType::Softmax) break;
        out.push_back(l);
    }
    return out;
}

std::vector<LayerSpec> CnnArchitecture::head_part() const {
    auto it = std::find_if(layers.begin(), layers.end(), [](const LayerSpec& l) {
        return l.type == LayerType::Dense || l.type == LayerType::Softmax;
    });
    return {it, layers.end()};
}

std::size_t CnnArchitecture::conv_layer_count() const { return build_network<float>(*this).conv_layer_count(0); }

std::size_t CnnArchitecture::dense_layer_count() const { return build_network<float>(*this).dense_layer_count(); }

void CnnArchitecture::validate() const { (void)build_network<float>(*this); }

nlohmann::json CnnArchitecture::to_json() const {
    nlohmann::json ls = nlohmann::json::array();
    for (const auto& l : layers) ls.push_back(nn::to_json(l));
    return {{"name", name}, {"input_length", input_length}, {"n_classes", n_classes}, {"layers", ls}};
}

CnnArchitecture CnnArchitecture::from_json(const nlohmann::json& j) {
    CnnArchitecture a;
    try {
        a.name = j.value("name", std::string("custom"));
        a.input_length = j.value("input_length", std::size_t{0});
        a.n_classes = j.value("n_classes", std::size_t{0});
        for (const auto& l : j.at("layers")) a.layers.push_back(nn::layer_from_json(l));
    } catch (const nlohmann::json::exception& e) {
        throw ArchError(std::string("malformed architecture: ") + e.what());
    }
    return a;
}

template <class T>
nn::Network<T> build_network(const CnnArchitecture& arch) {
    if (arch.input_length == 0 || arch.n_classes == 0) throw ArchError("architecture dimensions are unset");
    return nn::Network<T>({arch.conv_part()}, {arch.input_length}, arch.head_part(), arch.n_classes);
}

template nn::Network<float> build_network<float>(const CnnArchitecture&);
template nn::Network<double> build_network<double>(const CnnArchitecture&);

template <class T>
nn::Network<T> TwoStreamArchitecture::build_as() const {
    if (stream_a.n_classes == 0) throw ArchError("architecture dimensions are unset");
    return nn::Network<T>({stream_a.conv_part(), stream_b.conv_part()},
                          {stream_a.input_length, stream_b.input_length}, stream_a.head_part(),
                          stream_a.n_classes);
}

template nn::Network<float> TwoStreamArchitecture::build_as<float>() const;
template nn::Network<double> TwoStreamArchitecture::build_as<double>() const;

nn::Network<float> TwoStreamArchitecture::build() const { return build_as<float>(); }

nlohmann::json TwoStreamArchitecture::to_json() const {
    return {{"stream_a", stream_a.to_json()}, {"stream_b", stream_b.to_json()}};
}

TwoStreamArchitecture TwoStreamArchitecture::from_json(const nlohmann::json& j) {
    try {
        return {CnnArchitecture::from_json(j.at("stream_a")), CnnArchitecture::from_json(j.at("stream_b"))};
    } catch (const nlohmann::json::exception& e) {
        throw ArchError(std::string("malformed two-stream architecture: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Training loop

std::vector<float> to_float(std::span<const double> v) { return {v.begin(), v.end()}; }

TrainOutcome train_network(const nn::Network<float>& net, std::span<const TrainExample> data, LossKind loss,
                           const TrainConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw EmptyClass("no training examples");
    const std::size_t np = net.param_count();
    TrainOutcome out;
    out.weights.resize(np);
    net.init_params(out.weights, cfg.seed);
    const bool use_ema = cfg.ema_decay > 0.0;
    if (use_ema) out.shadow = out.weights;

    std::vector<float> grads(np), m1(np, 0.0f), m2(np, 0.0f);
    nn::Workspace<float> ws;
    auto order_rng = make_rng(cfg.seed, 0x0D3);
    auto drop_rng = make_rng(cfg.seed, 0xD20);
    const nn::RunMode mode{true, &drop_rng, cfg.dropout_rate};

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::span<const float>> inputs;
    std::size_t step = 0;
    const auto b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::fill(grads.begin(), grads.end(), 0.0f);
            double batch_loss = 0.0;
            for (std::size_t bi = start; bi < end; ++bi) {
                const auto& ex = data[order[bi]];
                inputs.assign(ex.inputs.begin(), ex.inputs.end());
                net.forward(out.weights, inputs, ws, mode);
                ws.dlogits.resize(ws.logits.shape);
                const double l = loss == LossKind::CrossEntropy
                                     ? nn::cross_entropy_loss<float>(ws.logits.data, ex.label, ws.dlogits.data)
                                     : nn::softmax_mae_loss<float>(ws.logits.data, ex.target, ws.dlogits.data);
                if (!std::isfinite(l)) throw DivergedError("loss became non-finite at epoch " + std::to_string(epoch));
                batch_loss += l;
                net.backward(out.weights, grads, ws);
            }
            epoch_loss += batch_loss;
            const float scale = 1.0f / static_cast<float>(end - start);
            ++step;
            if (cfg.optimizer == Optimizer::Adam) {
                const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
                const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
                const auto lr = static_cast<float>(cfg.learning_rate * std::sqrt(c2) / c1);
                const auto eps = static_cast<float>(cfg.adam_epsilon * std::sqrt(c2));
                for (std::size_t i = 0; i < np; ++i) {
                    const float g = grads[i] * scale;
                    m1[i] = b1 * m1[i] + (1.0f - b1) * g;
                    m2[i] = b2 * m2[i] + (1.0f - b2) * g * g;
                    out.weights[i] -= lr * m1[i] / (std::sqrt(m2[i]) + eps);
                }
            } else {
                const auto lr = static_cast<float>(cfg.learning_rate);
                const auto mom = static_cast<float>(cfg.momentum);
                for (std::size_t i = 0; i < np; ++i) {
                    m1[i] = mom * m1[i] - lr * grads[i] * scale;
                    out.weights[i] += m1[i];
                }
            }
            if (use_ema) nn::ema_update<float>(out.shadow, out.weights, cfg.ema_decay);
        }
        out.epoch_loss.push_back(epoch_loss / static_cast<double>(data.size()));
    }
    for (float w : out.weights)
        if (!std::isfinite(w)) throw DivergedError("weights became non-finite");
    return out;
}

std::vector<double> network_probabilities(const nn::Network<float>& net, std::span<const float> params,
                                          std::span<const std::span<const double>> inputs) {
    std::vector<std::vector<float>> converted;
    std::vector<std::span<const float>> spans;
    for (auto in : inputs) converted.push_back(to_float(in));
    for (const auto& c : converted) spans.emplace_back(c);
    nn::Workspace<float> ws;
    net.forward(params, spans, ws, nn::RunMode{});
    std::vector<double> logits(ws.logits.data.begin(), ws.logits.data.end());
    return softmax(logits);
}

// ---------------------------------------------------------------------------
// Single CNN

void attach_network(CnnModel& m) { m.net = std::make_shared<const nn::Network<float>>(build_network<float>(m.arch)); }

void attach_network(TwoStreamModel& m) { m.net = std::make_shared<const nn::Network<float>>(m.arch.build()); }

namespace {

CnnModel fit_cnn(const LabeledDataset& train, const CnnArchitecture& arch, const TrainConfig& cfg) {
    if (arch.input_length != train.grid.n_points)
        throw ArchError("architecture input length " + std::to_string(arch.input_length) +
                        " does not match the dataset grid (" + std::to_string(train.grid.n_points) + ")");
    if (arch.n_classes != train.n_classes())
        throw ArchError("architecture has " + std::to_string(arch.n_classes) + " outputs, dataset has " +
                        std::to_string(train.n_classes()) + " classes");
    CnnModel m;
    m.arch = arch;
    m.config = cfg;
    attach_network(m);
    std::vector<TrainExample> data;
    data.reserve(train.size());
    for (const auto& s : train.samples)
        data.push_back({{to_float(s.spectrum.values)}, static_cast<std::size_t>(s.species), {}});
    auto outcome = train_network(*m.net, data, LossKind::CrossEntropy, cfg);
    m.weights = std::move(outcome.weights);
    m.shadow = std::move(outcome.shadow);
    m.epoch_loss = std::move(outcome.epoch_loss);
    return m;
}

const std::vector<float>& pick_weights(const std::vector<float>& w, const std::vector<float>& shadow,
                                       const TrainConfig& cfg, bool use_ema) {
    return (use_ema && cfg.ema_decay > 0.0 && !shadow.empty()) ? shadow : w;
}

} // namespace

std::vector<double> cnn_probabilities(const CnnModel& m, std::span<const double> x, bool use_ema) {
    const std::span<const double> in[] = {x};
    return network_probabilities(*m.net, pick_weights(m.weights, m.shadow, m.config, use_ema), in);
}

TrainedModel train_cnn(const LabeledDataset& train, const CnnArchitecture& arch, const TrainConfig& cfg) {
    TrainedModel model;
    model.kind = ModelKind::Cnn;
    model.classes = train.species.names();
    model.spectrum_kind = train.kind;
    model.grid = train.grid;
    model.seed = cfg.seed;
    model.body = fit_cnn(train, arch, cfg);
    return model;
}

Prediction predict_cnn(const TrainedModel& model, std::span<const double> x, bool use_ema) {
    return Prediction::from_scores(model.classes, cnn_probabilities(std::get<CnnModel>(model.body), x, use_ema));
}

// ---------------------------------------------------------------------------
// Ensemble

TrainedModel train_ensemble(const LabeledDataset& train, const std::vector<CnnArchitecture>& archs,
                            const TrainConfig& cfg) {
    if (archs.empty()) throw ArchError("ensemble needs at least one member");
    EnsembleModel e;
    for (std::size_t i = 0; i < archs.size(); ++i) {
        TrainConfig member = cfg;
        member.seed = derive_seed(cfg.seed, 0xE45 + i);
        e.members.push_back(fit_cnn(train, archs[i], member));
    }
    TrainedModel model;
    model.kind = ModelKind::Ensemble;
    model.classes = train.species.names();
    model.spectrum_kind = train.kind;
    model.grid = train.grid;
    model.seed = cfg.seed;
    model.body = std::move(e);
    return model;
}

Prediction predict_ensemble(std::span<const Prediction> members) {
    if (members.empty()) throw ConfigError("ensemble of zero predictions");
    std::vector<double> mean(members.front().size(), 0.0);
    for (const auto& p : members) {
        if (p.classes != members.front().classes) throw ClassListMismatch("ensemble members disagree on classes");
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += p.scores[i];
    }
    for (auto& v : mean) v /= static_cast<double>(members.size());
    return Prediction::from_scores(members.front().classes, std::move(mean));
}

Prediction predict_ensemble(const TrainedModel& model, std::span<const double> x, bool use_ema) {
    const auto& e = std::get<EnsembleModel>(model.body);
    std::vector<Prediction> preds;
    for (const auto& m : e.members)
        preds.push_back(Prediction::from_scores(model.classes, cnn_probabilities(m, x, use_ema)));
    return predict_ensemble(preds);
}

// ---------------------------------------------------------------------------
// Two-stream

TrainedModel train_two_stream_cnn(std::span<const PairedSample> pairs, const std::vector<std::string>& classes,
                                  const CnnArchitecture& arch_a, const CnnArchitecture& arch_b,
                                  const TrainConfig& cfg) {
    if (pairs.empty()) throw EmptyClass("two-stream training needs pairs");
    if (arch_a.n_classes != classes.size()) throw ArchError("stream A head does not match the class count");
    TwoStreamModel m;
    m.arch = {arch_a, arch_b};
    m.config = cfg;
    attach_network(m);
    std::vector<TrainExample> data;
    for (const auto& p : pairs) {
        if (p.species < 0 || static_cast<std::size_t>(p.species) >= classes.size())
            throw ConfigError("pair species id out of range");
        data.push_back({{to_float(p.spectrum_a.values), to_float(p.spectrum_b.values)},
                        static_cast<std::size_t>(p.species),
                        {}});
    }
    auto outcome = train_network(*m.net, data, LossKind::CrossEntropy, cfg);
    m.weights = std::move(outcome.weights);
    m.shadow = std::move(outcome.shadow);
    m.epoch_loss = std::move(outcome.epoch_loss);

    TrainedModel model;
    model.kind = ModelKind::TwoStream;
    model.classes = classes;
    model.spectrum_kind = pairs.front().spectrum_a.kind;
    model.grid = pairs.front().spectrum_a.grid;
    model.grid_b = pairs.front().spectrum_b.grid;
    model.seed = cfg.seed;
    model.body = std::move(m);
    return model;
}

Prediction predict_two_stream(const TrainedModel& model, std::span<const double> a, std::span<const double> b,
                              bool use_ema) {
    const auto& m = std::get<TwoStreamModel>(model.body);
    const std::span<const double> in[] = {a, b};
    return Prediction::from_scores(
        model.classes, network_probabilities(*m.net, pick_weights(m.weights, m.shadow, m.config, use_ema), in));
}

Prediction predict(const TrainedModel& model, std::span<const double> x, bool use_ema) {
    switch (model.kind) {
    case ModelKind::Knn: return predict_knn(model, x);
    case ModelKind::ExtraTrees: return predict_trees(model, x);
    case ModelKind::LinearSvm: return predict_svm(model, x);
    case ModelKind::Cnn:
    case ModelKind::LibsCnn: return predict_cnn(model, x, use_ema);
    case ModelKind::Ensemble: return predict_ensemble(model, x, use_ema);
    case ModelKind::TwoStream: break;
    }
    throw ConfigError("two-stream models need two inputs");
}

// ---------------------------------------------------------------------------
// Model specs

std::string to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::Knn: return "knn";
    case ModelKind::ExtraTrees: return "trees";
    case ModelKind::LinearSvm: return "svm";
    case ModelKind::Cnn: return "cnn";
    case ModelKind::Ensemble: return "ensemble6";
    case ModelKind::TwoStream: return "two-stream";
    case ModelKind::LibsCnn: return "libs-cnn";
    }
    return "knn";
}

ModelKind parse_model_kind(const std::string& text) {
    for (auto k : {ModelKind::Knn, ModelKind::ExtraTrees, ModelKind::LinearSvm, ModelKind::Cnn, ModelKind::Ensemble,
                   ModelKind::TwoStream, ModelKind::LibsCnn})
        if (to_string(k) == text) return k;
    if (text == "ensemble") return ModelKind::Ensemble;
    throw ConfigError("unknown model '" + text + "'");
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
    ModelSpec s;
    try {
        s.kind = parse_model_kind(j.at("model").get<std::string>());
        s.name = j.value("name", to_string(s.kind));
        s.k = j.value("k", s.k);
        s.trees.n_trees = j.value("n_trees", s.trees.n_trees);
        s.trees.k_features = j.value("k_features", s.trees.k_features);
        s.trees.min_split = j.value("min_split", s.trees.min_split);
        if (j.contains("svm")) {
            const auto& v = j["svm"];
            s.svm.epochs = v.value("epochs", s.svm.epochs);
            s.svm.learning_rate = v.value("learning_rate", s.svm.learning_rate);
            s.svm.reg = v.value("reg", s.svm.reg);
        }
        if (j.contains("arch")) s.arch = CnnArchitecture::from_json(j["arch"]);
        TrainConfig defaults;
        if (s.kind == ModelKind::Ensemble) defaults.ema_decay = 0.999;
        s.train = TrainConfig::from_json(j.value("train", nlohmann::json::object()), defaults);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed model spec: ") + e.what());
    }
    return s;
}

nlohmann::json ModelSpec::to_json() const {
    nlohmann::json j{{"model", to_string(kind)},
                     {"name", name},
                     {"k", k},
                     {"n_trees", trees.n_trees},
                     {"k_features", trees.k_features},
                     {"min_split", trees.min_split},
                     {"svm", {{"epochs", svm.epochs}, {"learning_rate", svm.learning_rate}, {"reg", svm.reg}}},
                     {"train", train.to_json()}};
    if (arch) j["arch"] = arch->to_json();
    return j;
}

namespace {

// Fills unset dimensions (0) from the dataset: input length, class count, and
// the units of the final dense layer.
CnnArchitecture bind_arch(CnnArchitecture a, std::size_t n_classes, std::size_t input_length) {
    if (a.input_length == 0) a.input_length = input_length;
    if (a.n_classes == 0) a.n_classes = n_classes;
    for (auto it = a.layers.rbegin(); it != a.layers.rend(); ++it) {
        if (it->type != LayerType::Dense) continue;
        if (it->units == 0) it->units = a.n_classes;
        break;
    }
    return a;
}

} // namespace

TrainedModel train_model(const ModelSpec& spec, const LabeledDataset& train, std::uint64_t seed) {
    const auto n = train.n_classes();
    const auto len = train.grid.n_points;
    TrainConfig cfg = spec.train;
    cfg.seed = seed;
    TrainedModel model;
    switch (spec.kind) {
    case ModelKind::Knn: model = train_knn_weighted(train, spec.k); break;
    case ModelKind::ExtraTrees: {
        auto p = spec.trees;
        p.seed = seed;
        model = train_extra_trees(train, p);
        break;
    }
    case ModelKind::LinearSvm: model = train_linear_svm(train, spec.svm); break;
    case ModelKind::Cnn:
        model = train_cnn(train, spec.arch ? bind_arch(*spec.arch, n, len) : liu_baseline(n, len), cfg);
        break;
    case ModelKind::Ensemble: model = train_ensemble(train, build_ensemble6(n, len), cfg); break;
    case ModelKind::TwoStream:
    case ModelKind::LibsCnn:
        throw ConfigError("model '" + to_string(spec.kind) + "' cannot be trained from a single labeled dataset");
    }
    model.seed = seed;
    return model;
}

} // namespace spectramin
