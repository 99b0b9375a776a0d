#pragma once

#include <span>
#include <string>
#include <utility>

#include "spectramin/learners.hpp"
#include "spectramin/prediction.hpp"

namespace spectramin {

enum class FusionRule { Average, Multiply, SquareMultiply, Svm };

std::string to_string(FusionRule rule);
// "ave", "mul", "sq", "svm"
FusionRule parse_fusion_rule(const std::string& text);

// All rules require identical class lists (ClassListMismatch otherwise).
Prediction fuse_average(const Prediction& p, const Prediction& q);
// An all-zero product yields a uniform prediction with `degenerate` set.
Prediction fuse_multiply(const Prediction& p, const Prediction& q);
// libs² · other; only the first argument is squared.
Prediction fuse_square_multiply(const Prediction& libs, const Prediction& other);
// Non-learned rules only.
Prediction fuse(FusionRule rule, const Prediction& p, const Prediction& q);

struct FusionExample {
    Prediction a;
    Prediction b;
    int label = 0;  // index into the shared class list
};

// Linear SVM on the concatenated score vector [a ‖ b].
TrainedModel fuse_svm(std::span<const FusionExample> train, const SvmParams& params = {});
Prediction apply_fused_svm(const TrainedModel& model, const Prediction& p, const Prediction& q);

// Restricts both predictions to the species they share (in p's order) and
// renormalizes. Throws EmptyIntersection when nothing is shared.
std::pair<Prediction, Prediction> align_to_intersection(const Prediction& p, const Prediction& q);

} // namespace spectramin
