#include <algorithm>
#include <cmath>

#include "spectramin/error.hpp"
#include "spectramin/learners.hpp"

namespace spectramin {

double hinge_loss(double margin) { return std::max(0.0, 1.0 - margin); }

// One-vs-rest, full-batch subgradient descent on
//   reg/2 |w|^2 + 1/n sum_i max(0, 1 - y_i (w.z_i + b)),
// step size learning_rate / sqrt(epoch + 1), where z is x standardized per
// feature. The scaling is folded back into the stored weights.
LinearSvmModel fit_linear_svm(std::span<const std::vector<double>> x, std::span<const int> y,
                              std::size_t n_classes, const SvmParams& params) {
    if (x.empty() || x.size() != y.size()) throw ConfigError("SVM needs matching nonempty features and labels");
    std::vector<char> present(n_classes, 0);
    for (int c : y) {
        if (c < 0 || static_cast<std::size_t>(c) >= n_classes) throw ConfigError("SVM label out of range");
        present[static_cast<std::size_t>(c)] = 1;
    }
    if (std::count(present.begin(), present.end(), 1) < 2)
        throw SingleClassError("SVM needs at least two classes in the training set");

    const std::size_t dim = x.front().size();
    const double n = static_cast<double>(x.size());
    LinearSvmModel m;
    m.n_classes = n_classes;
    m.dim = dim;
    m.weights.assign(n_classes * dim, 0.0f);
    m.bias.assign(n_classes, 0.0f);

    std::vector<double> mu(dim, 0.0), sd(dim, 0.0);
    for (const auto& row : x) {
        if (row.size() != dim) throw ConfigError("SVM feature rows differ in length");
        for (std::size_t t = 0; t < dim; ++t) mu[t] += row[t];
    }
    for (auto& v : mu) v /= n;
    for (const auto& row : x)
        for (std::size_t t = 0; t < dim; ++t) sd[t] += (row[t] - mu[t]) * (row[t] - mu[t]);
    for (auto& v : sd) v = v > 0.0 ? std::sqrt(v / n) : 1.0;
    std::vector<std::vector<double>> z(x.size(), std::vector<double>(dim));
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t t = 0; t < dim; ++t) z[i][t] = (x[i][t] - mu[t]) / sd[t];

    std::vector<double> w(dim), gw(dim);
    for (std::size_t c = 0; c < n_classes; ++c) {
        std::fill(w.begin(), w.end(), 0.0);
        double b = 0.0;
        for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
            for (std::size_t t = 0; t < dim; ++t) gw[t] = params.reg * w[t];
            double gb = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double yi = y[i] == static_cast<int>(c) ? 1.0 : -1.0;
                double s = b;
                for (std::size_t t = 0; t < dim; ++t) s += w[t] * z[i][t];
                if (yi * s < 1.0) {
                    for (std::size_t t = 0; t < dim; ++t) gw[t] -= yi * z[i][t] / n;
                    gb -= yi / n;
                }
            }
            const double lr = params.learning_rate / std::sqrt(static_cast<double>(epoch + 1));
            for (std::size_t t = 0; t < dim; ++t) w[t] -= lr * gw[t];
            b -= lr * gb;
        }
        for (std::size_t t = 0; t < dim; ++t) {
            m.weights[c * dim + t] = static_cast<float>(w[t] / sd[t]);
            b -= w[t] * mu[t] / sd[t];
        }
        m.bias[c] = static_cast<float>(b);
    }
    return m;
}

std::vector<double> svm_margins(const LinearSvmModel& m, std::span<const double> x) {
    if (x.size() != m.dim) throw InvalidSpectrum("SVM input length mismatch");
    std::vector<double> out(m.n_classes);
    for (std::size_t c = 0; c < m.n_classes; ++c) {
        double s = m.bias[c];
        const float* w = m.weights.data() + c * m.dim;
        for (std::size_t t = 0; t < m.dim; ++t) s += static_cast<double>(w[t]) * x[t];
        out[c] = s;
    }
    return out;
}

TrainedModel train_linear_svm(const LabeledDataset& train, const SvmParams& params) {
    std::vector<std::vector<double>> x;
    x.reserve(train.size());
    for (const auto& s : train.samples) x.push_back(s.spectrum.values);
    const auto y = train.labels();

    TrainedModel model;
    model.kind = ModelKind::LinearSvm;
    model.classes = train.species.names();
    model.spectrum_kind = train.kind;
    model.grid = train.grid;
    model.body = fit_linear_svm(x, y, train.n_classes(), params);
    return model;
}

Prediction predict_svm(const TrainedModel& model, std::span<const double> x) {
    const auto& m = std::get<LinearSvmModel>(model.body);
    auto p = softmax(svm_margins(m, x));
    return Prediction::from_scores(model.classes, std::move(p));
}

} // namespace spectramin
