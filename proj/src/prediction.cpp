#include "spectramin/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spectramin/error.hpp"

namespace spectramin {

std::vector<double> l1_normalize(std::span<const double> v) {
    double sum = 0.0;
    for (double x : v) sum += std::max(x, 0.0);
    std::vector<double> out(v.size(), 0.0);
    if (sum > 0.0)
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i], 0.0) / sum;
    return out;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    if (logits.empty()) return out;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) sum += out[i] = std::exp(logits[i] - mx);
    for (auto& v : out) v /= sum;
    return out;
}

Prediction Prediction::from_scores(std::vector<std::string> classes, std::vector<double> raw) {
    if (classes.size() != raw.size()) throw ClassListMismatch("score/class count mismatch");
    for (double v : raw)
        if (!std::isfinite(v)) throw ZeroVector("non-finite score");
    auto norm = l1_normalize(raw);
    if (std::all_of(norm.begin(), norm.end(), [](double v) { return v == 0.0; })) {
        auto p = uniform(std::move(classes));
        p.degenerate = true;
        return p;
    }
    Prediction p;
    p.classes = std::move(classes);
    p.scores = std::move(norm);
    return p;
}

Prediction Prediction::uniform(std::vector<std::string> classes) {
    Prediction p;
    const auto n = classes.size();
    p.classes = std::move(classes);
    p.scores.assign(n, n ? 1.0 / static_cast<double>(n) : 0.0);
    return p;
}

std::size_t Prediction::argmax() const {
    if (scores.empty()) throw ClassListMismatch("argmax of an empty prediction");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return best;
}

std::vector<std::size_t> Prediction::ranking() const {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

double Prediction::entropy() const {
    double h = 0.0;
    for (double p : scores)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

void Prediction::validate(double tol) const {
    if (classes.size() != scores.size()) throw ClassListMismatch("score/class count mismatch");
    double sum = 0.0;
    for (double v : scores) {
        if (!std::isfinite(v) || v < 0.0) throw ClassListMismatch("invalid score");
        sum += v;
    }
    if (std::abs(sum - 1.0) > tol) throw ClassListMismatch("scores do not sum to 1");
}

nlohmann::json prediction_to_json(const Prediction& p) {
    nlohmann::json j{{"classes", p.classes}, {"scores", p.scores}};
    if (p.degenerate) j["degenerate"] = true;
    return j;
}

Prediction prediction_from_json(const nlohmann::json& j) {
    try {
        Prediction p;
        p.classes = j.at("classes").get<std::vector<std::string>>();
        p.scores = j.at("scores").get<std::vector<double>>();
        p.degenerate = j.value("degenerate", false);
        p.validate(1e-6);
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed prediction: ") + e.what());
    }
}

} // namespace spectramin
