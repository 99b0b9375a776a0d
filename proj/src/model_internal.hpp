#pragma once

#include "spectramin/learners.hpp"

namespace spectramin {

// Rebuilds derived state (norms, network instances) after loading.
void finalize_knn(KnnModel& m);
void attach_network(CnnModel& m);
void attach_network(TwoStreamModel& m);

std::vector<float> to_float(std::span<const double> v);

} // namespace spectramin
