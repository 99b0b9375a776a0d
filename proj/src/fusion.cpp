#include "spectramin/fusion.hpp"

#include <set>

#include "spectramin/error.hpp"

namespace spectramin {

namespace {

void require_same_classes(const Prediction& p, const Prediction& q) {
    if (p.classes != q.classes) throw ClassListMismatch("fusion inputs have different class lists");
    if (p.scores.size() != p.classes.size() || q.scores.size() != q.classes.size())
        throw ClassListMismatch("prediction score count differs from its class list");
}

std::vector<double> concat(const Prediction& p, const Prediction& q) {
    std::vector<double> x(p.scores);
    x.insert(x.end(), q.scores.begin(), q.scores.end());
    return x;
}

} // namespace

std::string to_string(FusionRule rule) {
    switch (rule) {
    case FusionRule::Average: return "ave";
    case FusionRule::Multiply: return "mul";
    case FusionRule::SquareMultiply: return "sq";
    case FusionRule::Svm: return "svm";
    }
    return "ave";
}

FusionRule parse_fusion_rule(const std::string& text) {
    for (auto r : {FusionRule::Average, FusionRule::Multiply, FusionRule::SquareMultiply, FusionRule::Svm})
        if (to_string(r) == text) return r;
    throw ConfigError("unknown fusion rule '" + text + "' (expected ave, mul, sq or svm)");
}

Prediction fuse_average(const Prediction& p, const Prediction& q) {
    require_same_classes(p, q);
    std::vector<double> s(p.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = 0.5 * (p.scores[i] + q.scores[i]);
    return Prediction::from_scores(p.classes, std::move(s));
}

Prediction fuse_multiply(const Prediction& p, const Prediction& q) {
    require_same_classes(p, q);
    std::vector<double> s(p.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = p.scores[i] * q.scores[i];
    return Prediction::from_scores(p.classes, std::move(s));
}

Prediction fuse_square_multiply(const Prediction& libs, const Prediction& other) {
    require_same_classes(libs, other);
    std::vector<double> s(libs.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = libs.scores[i] * libs.scores[i] * other.scores[i];
    return Prediction::from_scores(libs.classes, std::move(s));
}

Prediction fuse(FusionRule rule, const Prediction& p, const Prediction& q) {
    switch (rule) {
    case FusionRule::Average: return fuse_average(p, q);
    case FusionRule::Multiply: return fuse_multiply(p, q);
    case FusionRule::SquareMultiply: return fuse_square_multiply(p, q);
    case FusionRule::Svm: break;
    }
    throw ConfigError("the svm rule needs a trained fusion model");
}

TrainedModel fuse_svm(std::span<const FusionExample> train, const SvmParams& params) {
    if (train.empty()) throw EmptyClass("fusion SVM needs training examples");
    const auto& classes = train.front().a.classes;
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (const auto& ex : train) {
        require_same_classes(ex.a, ex.b);
        if (ex.a.classes != classes) throw ClassListMismatch("fusion examples disagree on classes");
        if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= classes.size())
            throw ConfigError("fusion label out of range");
        x.push_back(concat(ex.a, ex.b));
        y.push_back(ex.label);
    }
    TrainedModel model;
    model.kind = ModelKind::LinearSvm;
    model.classes = classes;
    model.grid = {0.0, 1.0, 2 * classes.size()};
    model.body = fit_linear_svm(x, y, classes.size(), params);
    return model;
}

Prediction apply_fused_svm(const TrainedModel& model, const Prediction& p, const Prediction& q) {
    require_same_classes(p, q);
    if (p.classes != model.classes) throw ClassListMismatch("fusion model was trained on a different class list");
    const auto x = concat(p, q);
    return predict_svm(model, x);
}

std::pair<Prediction, Prediction> align_to_intersection(const Prediction& p, const Prediction& q) {
    const std::set<std::string> in_q(q.classes.begin(), q.classes.end());
    std::vector<std::string> shared;
    std::vector<double> ps, qs;
    for (std::size_t i = 0; i < p.classes.size(); ++i) {
        if (!in_q.count(p.classes[i])) continue;
        shared.push_back(p.classes[i]);
        ps.push_back(p.scores[i]);
        for (std::size_t j = 0; j < q.classes.size(); ++j)
            if (q.classes[j] == p.classes[i]) {
                qs.push_back(q.scores[j]);
                break;
            }
    }
    if (shared.empty()) throw EmptyIntersection("predictions share no species");
    return {Prediction::from_scores(shared, std::move(ps)), Prediction::from_scores(shared, std::move(qs))};
}

} // namespace spectramin
