#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace spectramin {

// Nonnegative, L1-normalized scores over a named class list.
struct Prediction {
    std::vector<std::string> classes;
    std::vector<double> scores;
    bool degenerate = false;  // set when a fusion rule fell back to uniform

    // Normalizes `raw` (negatives clamped to 0). All-zero input gives uniform
    // scores with `degenerate` set.
    static Prediction from_scores(std::vector<std::string> classes, std::vector<double> raw);
    static Prediction uniform(std::vector<std::string> classes);

    std::size_t size() const noexcept { return scores.size(); }
    // Lowest index wins ties.
    std::size_t argmax() const;
    const std::string& top_class() const { return classes.at(argmax()); }
    // Indices sorted by descending score, ties by index.
    std::vector<std::size_t> ranking() const;
    double entropy() const;
    // Throws unless scores are finite, nonnegative and sum to 1 within tol.
    void validate(double tol = 1e-9) const;
};

std::vector<double> l1_normalize(std::span<const double> v);
std::vector<double> softmax(std::span<const double> logits);

nlohmann::json prediction_to_json(const Prediction& p);
Prediction prediction_from_json(const nlohmann::json& j);

} // namespace spectramin
