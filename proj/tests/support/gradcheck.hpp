#pragma once

// Central finite differences against backprop on a double-precision network.

#include <algorithm>
#include <cmath>
#include <vector>

#include "spectramin/nn.hpp"
#include "spectramin/rng.hpp"

namespace gradcheck {

using spectramin::nn::Network;
using spectramin::nn::Workspace;

struct Sample {
    std::vector<std::vector<double>> inputs;
    std::size_t label = 0;
    std::vector<double> target;  // nonempty selects softmax-MAE
};

inline double sample_loss(const Network<double>& net, const std::vector<double>& params, const Sample& s,
                          Workspace<double>& ws, std::vector<double>* grads) {
    std::vector<std::span<const double>> in(s.inputs.begin(), s.inputs.end());
    net.forward(params, in, ws, {});
    ws.dlogits.resize(ws.logits.shape);
    const double loss = s.target.empty()
                            ? spectramin::nn::cross_entropy_loss<double>(ws.logits.data, s.label, ws.dlogits.data)
                            : spectramin::nn::softmax_mae_loss<double>(ws.logits.data, s.target, ws.dlogits.data);
    if (grads) net.backward(params, *grads, ws);
    return loss;
}

struct Report {
    std::size_t n_params = 0;
    std::size_t n_bad = 0;
    double worst_rel = 0.0;
};

// Pass when |a - n| <= 1e-6 or |a - n| / max(|a|, |n|) <= rel_tol.
inline Report check(const Network<double>& net, const std::vector<Sample>& data, std::uint64_t seed,
                    double h = 1e-4, double rel_tol = 1e-3) {
    std::vector<double> params(net.param_count());
    net.init_params(params, seed);
    // Step off zero biases and the ReLU kinks that sit on them.
    auto jitter = spectramin::make_rng(seed, 0x91);
    for (auto& v : params) v += spectramin::uniform(jitter, -0.05, 0.05);
    Workspace<double> ws;
    std::vector<double> analytic(params.size(), 0.0);
    for (const auto& s : data) sample_loss(net, params, s, ws, &analytic);

    auto total = [&](const std::vector<double>& p) {
        double l = 0.0;
        for (const auto& s : data) l += sample_loss(net, p, s, ws, nullptr);
        return l;
    };
    Report r;
    r.n_params = params.size();
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params;
        p[i] = params[i] + h;
        const double up = total(p);
        p[i] = params[i] - h;
        const double down = total(p);
        const double numeric = (up - down) / (2.0 * h);
        const double diff = std::abs(numeric - analytic[i]);
        if (diff <= 1e-6) continue;
        const double rel = diff / std::max(std::abs(numeric), std::abs(analytic[i]));
        r.worst_rel = std::max(r.worst_rel, rel);
        if (rel > rel_tol) ++r.n_bad;
    }
    return r;
}

inline std::vector<Sample> random_samples(std::size_t n, std::vector<std::size_t> lengths, std::size_t n_classes,
                                          std::uint64_t seed, bool regression = false) {
    auto rng = spectramin::make_rng(seed, 0x6C);
    std::vector<Sample> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto len : lengths) {
            std::vector<double> x(len);
            for (auto& v : x) v = spectramin::uniform(rng, 0.0, 1.0);
            out[i].inputs.push_back(std::move(x));
        }
        out[i].label = i % n_classes;
        if (regression) {
            std::vector<double> t(n_classes);
            double sum = 0.0;
            for (auto& v : t) sum += (v = spectramin::uniform(rng, 0.05, 1.0));
            for (auto& v : t) v /= sum;
            out[i].target = t;
        }
    }
    return out;
}

} // namespace gradcheck
