#include "spectramin/error.hpp"
#include "spectramin/learners.hpp"

namespace spectramin {

using nn::Activation;
using L = nn::LayerSpec;

namespace {

CnnArchitecture make(std::string name, std::size_t n_classes, std::size_t input_length, std::vector<L> layers) {
    if (n_classes == 0 || input_length == 0) throw ArchError("architecture dimensions must be positive");
    layers.push_back(L::dense(n_classes, Activation::None));
    layers.push_back(L::softmax());
    CnnArchitecture a{std::move(name), input_length, n_classes, std::move(layers)};
    a.validate();
    return a;
}

} // namespace

CnnArchitecture liu_baseline(std::size_t n_classes, std::size_t input_length) {
    return make("liu-baseline", n_classes, input_length,
                {L::conv(16, 21), L::max_pool(2), L::conv(32, 11), L::max_pool(2), L::conv(64, 5), L::max_pool(2),
                 L::dense(512), L::dropout(0.5)});
}

CnnArchitecture simple_fusion_net(std::size_t n_classes, std::size_t input_length) {
    return make("simple-4c2d", n_classes, input_length,
                {L::conv(8, 9, 2), L::max_pool(2), L::conv(16, 7), L::max_pool(2), L::conv(16, 5), L::max_pool(2),
                 L::conv(16, 3), L::max_pool(2), L::dense(64), L::dropout()});
}

std::vector<CnnArchitecture> build_ensemble6(std::size_t n_classes, std::size_t input_length) {
    std::vector<CnnArchitecture> out;
    out.push_back(make("liu-a", n_classes, input_length,
                       {L::conv(8, 9, 4), L::max_pool(2), L::conv(16, 7), L::max_pool(2), L::conv(16, 5),
                        L::max_pool(4), L::dense(64), L::dropout()}));
    out.push_back(make("liu-b", n_classes, input_length,
                       {L::conv(6, 11, 4), L::max_pool(2), L::conv(12, 7), L::max_pool(2), L::conv(24, 5),
                        L::max_pool(4), L::dense(48), L::dropout()}));
    out.push_back(make("featex-a", n_classes, input_length,
                       {L::conv(8, 9, 4), L::max_pool(2),
                        L::parallel({{L::conv(8, 3)}, {L::conv(8, 7)}}), L::max_pool(2),
                        L::parallel({{L::conv(8, 3)}, {L::conv(8, 5)}}), L::max_pool(4), L::dense(64),
                        L::dropout()}));
    out.push_back(make("featex-b", n_classes, input_length,
                       {L::conv(8, 7, 4), L::max_pool(2),
                        L::parallel({{L::conv(6, 5)}, {L::conv(6, 1), L::conv(6, 9)}}), L::max_pool(2),
                        L::parallel({{L::conv(8, 3)}, {L::conv(8, 1), L::conv(8, 5)}}), L::max_pool(4),
                        L::dense(48), L::dropout()}));
    out.push_back(make("vgg-lite-a", n_classes, input_length,
                       {L::conv(8, 9, 4), L::conv(8, 3), L::max_pool(2), L::conv(12, 3), L::conv(12, 3),
                        L::max_pool(2), L::conv(16, 3), L::conv(16, 3), L::max_pool(4), L::dense(64),
                        L::dropout()}));
    out.push_back(make("vgg-lite-b", n_classes, input_length,
                       {L::conv(8, 9, 4), L::conv(8, 3), L::max_pool(2), L::conv(12, 3), L::conv(12, 3),
                        L::max_pool(2), L::conv(16, 3), L::conv(16, 3), L::max_pool(4), L::dense(64),
                        L::dropout(), L::dense(32)}));
    return out;
}

CnnArchitecture libs_regressor(std::size_t n_elements, std::size_t input_length) {
    return make("libs-regressor", n_elements, input_length,
                {L::conv(8, 9, 4), L::max_pool(4), L::conv(16, 7), L::max_pool(4), L::conv(16, 5), L::max_pool(4),
                 L::dense(64)});
}

} // namespace spectramin
