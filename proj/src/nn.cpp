#include "spectramin/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spectramin/error.hpp"
#include "spectramin/prediction.hpp"

namespace spectramin::nn {

LayerSpec LayerSpec::conv(std::size_t out_channels, std::size_t kernel, std::size_t stride,
                          Activation act) {
    LayerSpec s;
    s.type = LayerType::Conv;
    s.out_channels = out_channels;
    s.kernel = kernel;
    s.stride = stride;
    s.activation = act;
    return s;
}

LayerSpec LayerSpec::max_pool(std::size_t width) {
    LayerSpec s;
    s.type = LayerType::MaxPool;
    s.width = width;
    return s;
}

LayerSpec LayerSpec::dropout(double rate) {
    LayerSpec s;
    s.type = LayerType::Dropout;
    s.rate = rate;
    return s;
}

LayerSpec LayerSpec::dense(std::size_t units, Activation act) {
    LayerSpec s;
    s.type = LayerType::Dense;
    s.units = units;
    s.activation = act;
    return s;
}

LayerSpec LayerSpec::parallel(std::vector<std::vector<LayerSpec>> branches) {
    LayerSpec s;
    s.type = LayerType::Parallel;
    s.branches = std::move(branches);
    return s;
}

LayerSpec LayerSpec::softmax() {
    LayerSpec s;
    s.type = LayerType::Softmax;
    return s;
}

namespace {

const char* act_name(Activation a) { return a == Activation::Relu ? "relu" : "linear"; }

Activation parse_act(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "linear" || s == "none") return Activation::None;
    throw ArchError("unknown activation '" + s + "'");
}

} // namespace

nlohmann::json to_json(const LayerSpec& s) {
    switch (s.type) {
    case LayerType::Conv:
        return {{"type", "conv"}, {"out_channels", s.out_channels}, {"kernel", s.kernel},
                {"stride", s.stride}, {"activation", act_name(s.activation)}};
    case LayerType::MaxPool: return {{"type", "maxpool"}, {"width", s.width}};
    case LayerType::Dropout: return {{"type", "dropout"}, {"rate", s.rate}};
    case LayerType::Dense:
        return {{"type", "dense"}, {"units", s.units}, {"activation", act_name(s.activation)}};
    case LayerType::Parallel: {
        nlohmann::json branches = nlohmann::json::array();
        for (const auto& b : s.branches) {
            nlohmann::json layers = nlohmann::json::array();
            for (const auto& l : b) layers.push_back(to_json(l));
            branches.push_back(std::move(layers));
        }
        return {{"type", "parallel"}, {"branches", std::move(branches)}};
    }
    case LayerType::Softmax: return {{"type", "softmax"}};
    }
    return {};
}

LayerSpec layer_from_json(const nlohmann::json& j) {
    try {
        const auto type = j.at("type").get<std::string>();
        if (type == "conv")
            return LayerSpec::conv(j.at("out_channels").get<std::size_t>(),
                                   j.at("kernel").get<std::size_t>(), j.value("stride", std::size_t{1}),
                                   parse_act(j.value("activation", std::string("relu"))));
        if (type == "maxpool") return LayerSpec::max_pool(j.at("width").get<std::size_t>());
        if (type == "dropout") return LayerSpec::dropout(j.value("rate", -1.0));
        if (type == "dense")
            return LayerSpec::dense(j.at("units").get<std::size_t>(),
                                    parse_act(j.value("activation", std::string("relu"))));
        if (type == "parallel") {
            std::vector<std::vector<LayerSpec>> branches;
            for (const auto& b : j.at("branches")) {
                auto& layers = branches.emplace_back();
                for (const auto& l : b) layers.push_back(layer_from_json(l));
            }
            return LayerSpec::parallel(std::move(branches));
        }
        if (type == "softmax") return LayerSpec::softmax();
        throw ArchError("unknown layer type '" + type + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ArchError(std::string("malformed layer: ") + e.what());
    }
}

namespace {

template <class T>
class Conv1d final : public Module<T> {
public:
    Conv1d(Shape in, const LayerSpec& s)
        : in_(in), out_c_(s.out_channels), k_(s.kernel), stride_(s.stride), act_(s.activation) {
        if (out_c_ == 0 || k_ == 0 || stride_ == 0) throw ArchError("conv needs positive channels, kernel, stride");
        pad_ = (k_ - 1) / 2;
        out_len_ = (in_.length + stride_ - 1) / stride_;
    }

    Shape output_shape() const override { return {out_c_, out_len_}; }
    std::size_t param_count() const override { return out_c_ * in_.channels * k_ + out_c_; }
    std::size_t conv_layer_count() const override { return 1; }

    void init(std::span<T> p, Rng& rng) const override {
        const double fan_in = static_cast<double>(in_.channels * k_);
        const double bound = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> u(-bound, bound);
        const std::size_t nw = out_c_ * in_.channels * k_;
        for (std::size_t i = 0; i < nw; ++i) p[i] = static_cast<T>(u(rng));
        for (std::size_t i = nw; i < p.size(); ++i) p[i] = T(0);
    }

    // Output positions t with 0 <= t*stride + off < L.
    void valid_range(long off, std::size_t& lo, std::size_t& hi) const {
        const long L = static_cast<long>(in_.length);
        const long s = static_cast<long>(stride_);
        long a = off < 0 ? (-off + s - 1) / s : 0;
        long b = (L - 1 - off) < 0 ? 0 : (L - 1 - off) / s + 1;
        b = std::min<long>(b, static_cast<long>(out_len_));
        lo = static_cast<std::size_t>(a);
        hi = static_cast<std::size_t>(std::max(a, b));
    }

    void forward(std::span<const T> p, const Tensor<T>& x, Tensor<T>& y, Cache<T>&,
                 const RunMode&) const override {
        y.resize(output_shape());
        const T* W = p.data();
        const T* B = W + out_c_ * in_.channels * k_;
        for (std::size_t o = 0; o < out_c_; ++o) {
            T* yo = y.channel(o);
            std::fill(yo, yo + out_len_, B[o]);
            for (std::size_t c = 0; c < in_.channels; ++c) {
                const T* xc = x.channel(c);
                const T* w = W + (o * in_.channels + c) * k_;
                for (std::size_t j = 0; j < k_; ++j) {
                    const long off = static_cast<long>(j) - static_cast<long>(pad_);
                    std::size_t lo, hi;
                    valid_range(off, lo, hi);
                    const T wj = w[j];
                    if (stride_ == 1) {
                        const T* xs = xc + off;
                        for (std::size_t t = lo; t < hi; ++t) yo[t] += wj * xs[t];
                    } else {
                        for (std::size_t t = lo; t < hi; ++t)
                            yo[t] += wj * xc[static_cast<long>(t * stride_) + off];
                    }
                }
            }
            if (act_ == Activation::Relu)
                for (std::size_t t = 0; t < out_len_; ++t) yo[t] = yo[t] > T(0) ? yo[t] : T(0);
        }
    }

    void backward(std::span<const T> p, std::span<T> g, const Tensor<T>& x, const Tensor<T>& y,
                  Tensor<T>& dy, Tensor<T>* dx, Cache<T>&) const override {
        const T* W = p.data();
        T* dW = g.data();
        T* dB = dW + out_c_ * in_.channels * k_;
        if (dx) {
            dx->resize(in_);
            std::fill(dx->data.begin(), dx->data.end(), T(0));
        }
        for (std::size_t o = 0; o < out_c_; ++o) {
            T* dz = dy.channel(o);
            if (act_ == Activation::Relu) {
                const T* yo = y.channel(o);
                for (std::size_t t = 0; t < out_len_; ++t)
                    if (!(yo[t] > T(0))) dz[t] = T(0);
            }
            T bsum = 0;
            for (std::size_t t = 0; t < out_len_; ++t) bsum += dz[t];
            dB[o] += bsum;
            for (std::size_t c = 0; c < in_.channels; ++c) {
                const T* xc = x.channel(c);
                const T* w = W + (o * in_.channels + c) * k_;
                T* dw = dW + (o * in_.channels + c) * k_;
                T* dxc = dx ? dx->channel(c) : nullptr;
                for (std::size_t j = 0; j < k_; ++j) {
                    const long off = static_cast<long>(j) - static_cast<long>(pad_);
                    std::size_t lo, hi;
                    valid_range(off, lo, hi);
                    T acc = 0;
                    if (stride_ == 1) {
                        const T* xs = xc + off;
                        for (std::size_t t = lo; t < hi; ++t) acc += dz[t] * xs[t];
                        if (dxc) {
                            T* ds = dxc + off;
                            const T wj = w[j];
                            for (std::size_t t = lo; t < hi; ++t) ds[t] += wj * dz[t];
                        }
                    } else {
                        for (std::size_t t = lo; t < hi; ++t)
                            acc += dz[t] * xc[static_cast<long>(t * stride_) + off];
                        if (dxc) {
                            const T wj = w[j];
                            for (std::size_t t = lo; t < hi; ++t)
                                dxc[static_cast<long>(t * stride_) + off] += wj * dz[t];
                        }
                    }
                    dw[j] += acc;
                }
            }
        }
    }

private:
    Shape in_;
    std::size_t out_c_, k_, stride_, pad_ = 0, out_len_ = 0;
    Activation act_;
};

template <class T>
class MaxPool final : public Module<T> {
public:
    MaxPool(Shape in, const LayerSpec& s) : in_(in), width_(s.width) {
        if (width_ == 0) throw ArchError("maxpool width must be positive");
        if (in_.length < width_)
            throw ArchError("maxpool width " + std::to_string(width_) + " exceeds input length " +
                            std::to_string(in_.length));
    }
    Shape output_shape() const override { return {in_.channels, in_.length / width_}; }

    void forward(std::span<const T>, const Tensor<T>& x, Tensor<T>& y, Cache<T>& cache,
                 const RunMode&) const override {
        const auto out = output_shape();
        y.resize(out);
        cache.index.resize(out.size());
        for (std::size_t c = 0; c < in_.channels; ++c) {
            const T* xc = x.channel(c);
            T* yc = y.channel(c);
            for (std::size_t t = 0; t < out.length; ++t) {
                std::size_t best = t * width_;
                for (std::size_t j = best + 1; j < (t + 1) * width_; ++j)
                    if (xc[j] > xc[best]) best = j;
                yc[t] = xc[best];
                cache.index[c * out.length + t] = static_cast<std::uint32_t>(best);
            }
        }
    }

    void backward(std::span<const T>, std::span<T>, const Tensor<T>&, const Tensor<T>&, Tensor<T>& dy,
                  Tensor<T>* dx, Cache<T>& cache) const override {
        if (!dx) return;
        dx->resize(in_);
        std::fill(dx->data.begin(), dx->data.end(), T(0));
        const auto out = output_shape();
        for (std::size_t c = 0; c < in_.channels; ++c) {
            T* dxc = dx->channel(c);
            const T* dyc = dy.channel(c);
            for (std::size_t t = 0; t < out.length; ++t) dxc[cache.index[c * out.length + t]] += dyc[t];
        }
    }

private:
    Shape in_;
    std::size_t width_;
};

template <class T>
class Dropout final : public Module<T> {
public:
    Dropout(Shape in, const LayerSpec& s) : in_(in), rate_(s.rate) {
        if (rate_ >= 1.0) throw ArchError("dropout rate must be < 1");
    }
    Shape output_shape() const override { return in_; }

    void forward(std::span<const T>, const Tensor<T>& x, Tensor<T>& y, Cache<T>& cache,
                 const RunMode& mode) const override {
        y = x;
        const double rate = rate_ < 0.0 ? mode.default_dropout : rate_;
        cache.mask.clear();
        if (!mode.train || rate <= 0.0 || mode.rng == nullptr) return;
        const double keep = 1.0 - rate;
        const T scale = static_cast<T>(1.0 / keep);
        cache.mask.resize(x.data.size());
        std::bernoulli_distribution bern(keep);
        for (std::size_t i = 0; i < y.data.size(); ++i) {
            cache.mask[i] = bern(*mode.rng) ? scale : T(0);
            y.data[i] *= cache.mask[i];
        }
    }

    void backward(std::span<const T>, std::span<T>, const Tensor<T>&, const Tensor<T>&, Tensor<T>& dy,
                  Tensor<T>* dx, Cache<T>& cache) const override {
        if (!dx) return;
        *dx = dy;
        dx->shape = in_;
        if (!cache.mask.empty())
            for (std::size_t i = 0; i < dx->data.size(); ++i) dx->data[i] *= cache.mask[i];
    }

private:
    Shape in_;
    double rate_;
};

template <class T>
class Dense final : public Module<T> {
public:
    Dense(Shape in, const LayerSpec& s) : in_(in), n_in_(in.size()), units_(s.units), act_(s.activation) {
        if (units_ == 0) throw ArchError("dense layer needs positive units");
    }
    Shape output_shape() const override { return {units_, 1}; }
    std::size_t param_count() const override { return units_ * n_in_ + units_; }
    std::size_t dense_layer_count() const override { return 1; }

    void init(std::span<T> p, Rng& rng) const override {
        const double fan_in = static_cast<double>(n_in_);
        const double bound = act_ == Activation::Relu ? std::sqrt(6.0 / fan_in)
                                                      : std::sqrt(6.0 / (fan_in + static_cast<double>(units_)));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (std::size_t i = 0; i < units_ * n_in_; ++i) p[i] = static_cast<T>(u(rng));
        for (std::size_t i = units_ * n_in_; i < p.size(); ++i) p[i] = T(0);
    }

    void forward(std::span<const T> p, const Tensor<T>& x, Tensor<T>& y, Cache<T>&,
                 const RunMode&) const override {
        y.resize(output_shape());
        const T* W = p.data();
        const T* B = W + units_ * n_in_;
        const T* xv = x.data.data();
        for (std::size_t o = 0; o < units_; ++o) {
            const T* w = W + o * n_in_;
            T acc = 0;
            for (std::size_t i = 0; i < n_in_; ++i) acc += w[i] * xv[i];
            acc += B[o];
            y.data[o] = (act_ == Activation::Relu && !(acc > T(0))) ? T(0) : acc;
        }
    }

    void backward(std::span<const T> p, std::span<T> g, const Tensor<T>& x, const Tensor<T>& y,
                  Tensor<T>& dy, Tensor<T>* dx, Cache<T>&) const override {
        const T* W = p.data();
        T* dW = g.data();
        T* dB = dW + units_ * n_in_;
        if (dx) {
            dx->resize(in_);
            std::fill(dx->data.begin(), dx->data.end(), T(0));
        }
        const T* xv = x.data.data();
        for (std::size_t o = 0; o < units_; ++o) {
            T dz = dy.data[o];
            if (act_ == Activation::Relu && !(y.data[o] > T(0))) dz = T(0);
            if (dz == T(0)) continue;
            dB[o] += dz;
            T* dw = dW + o * n_in_;
            for (std::size_t i = 0; i < n_in_; ++i) dw[i] += dz * xv[i];
            if (dx) {
                const T* w = W + o * n_in_;
                T* d = dx->data.data();
                for (std::size_t i = 0; i < n_in_; ++i) d[i] += dz * w[i];
            }
        }
    }

private:
    Shape in_;
    std::size_t n_in_, units_;
    Activation act_;
};

template <class T>
std::unique_ptr<Module<T>> make_module(Shape in, const LayerSpec& s);

template <class T>
class Sequential final : public Module<T> {
public:
    Sequential(Shape in, const std::vector<LayerSpec>& specs) : in_(in) {
        Shape cur = in;
        for (const auto& s : specs) {
            if (s.type == LayerType::Softmax) continue;
            auto m = make_module<T>(cur, s);
            offsets_.push_back(total_);
            total_ += m->param_count();
            cur = m->output_shape();
            layers_.push_back(std::move(m));
        }
        out_ = cur;
    }

    Shape output_shape() const override { return out_; }
    std::size_t param_count() const override { return total_; }
    std::size_t conv_layer_count() const override {
        std::size_t n = 0;
        for (const auto& l : layers_) n += l->conv_layer_count();
        return n;
    }
    std::size_t dense_layer_count() const override {
        std::size_t n = 0;
        for (const auto& l : layers_) n += l->dense_layer_count();
        return n;
    }

    void init(std::span<T> p, Rng& rng) const override {
        for (std::size_t i = 0; i < layers_.size(); ++i)
            layers_[i]->init(p.subspan(offsets_[i], layers_[i]->param_count()), rng);
    }

    void forward(std::span<const T> p, const Tensor<T>& x, Tensor<T>& y, Cache<T>& cache,
                 const RunMode& mode) const override {
        if (layers_.empty()) {
            y = x;
            return;
        }
        cache.acts.resize(layers_.size());
        cache.children.resize(layers_.size());
        const Tensor<T>* cur = &x;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            layers_[i]->forward(p.subspan(offsets_[i], layers_[i]->param_count()), *cur, cache.acts[i],
                                cache.children[i], mode);
            cur = &cache.acts[i];
        }
        y = *cur;
    }

    void backward(std::span<const T> p, std::span<T> g, const Tensor<T>& x, const Tensor<T>&,
                  Tensor<T>& dy, Tensor<T>* dx, Cache<T>& cache) const override {
        if (layers_.empty()) {
            if (dx) *dx = dy;
            return;
        }
        cache.scratch.resize(2);
        Tensor<T>* grad_out = &dy;
        for (std::size_t k = layers_.size(); k-- > 0;) {
            const Tensor<T>& in = k == 0 ? x : cache.acts[k - 1];
            Tensor<T>* grad_in = nullptr;
            if (k > 0) grad_in = &cache.scratch[k % 2];
            else grad_in = dx;
            layers_[k]->backward(p.subspan(offsets_[k], layers_[k]->param_count()),
                                 g.subspan(offsets_[k], layers_[k]->param_count()), in, cache.acts[k],
                                 *grad_out, grad_in, cache.children[k]);
            if (k > 0) grad_out = grad_in;
        }
    }

private:
    Shape in_, out_;
    std::vector<std::unique_ptr<Module<T>>> layers_;
    std::vector<std::size_t> offsets_;
    std::size_t total_ = 0;
};

// Branches see the same input; outputs are concatenated along channels.
template <class T>
class Parallel final : public Module<T> {
public:
    Parallel(Shape in, const LayerSpec& s) : in_(in) {
        if (s.branches.size() < 2) throw ArchError("parallel block needs at least two branches");
        for (const auto& b : s.branches) {
            auto seq = std::make_unique<Sequential<T>>(in, b);
            const auto shape = seq->output_shape();
            if (!branches_.empty() && shape.length != out_.length)
                throw ArchError("parallel branches end with different lengths");
            out_.length = shape.length;
            out_.channels = (branches_.empty() ? 0 : out_.channels) + shape.channels;
            offsets_.push_back(total_);
            total_ += seq->param_count();
            branches_.push_back(std::move(seq));
        }
    }

    Shape output_shape() const override { return out_; }
    std::size_t param_count() const override { return total_; }
    std::size_t conv_layer_count() const override {
        std::size_t n = 0;
        for (const auto& b : branches_) n = std::max(n, b->conv_layer_count());
        return n;
    }

    void init(std::span<T> p, Rng& rng) const override {
        for (std::size_t i = 0; i < branches_.size(); ++i)
            branches_[i]->init(p.subspan(offsets_[i], branches_[i]->param_count()), rng);
    }

    void forward(std::span<const T> p, const Tensor<T>& x, Tensor<T>& y, Cache<T>& cache,
                 const RunMode& mode) const override {
        cache.children.resize(branches_.size());
        cache.acts.resize(branches_.size());
        y.resize(out_);
        std::size_t c0 = 0;
        for (std::size_t i = 0; i < branches_.size(); ++i) {
            auto& bout = cache.acts[i];
            branches_[i]->forward(p.subspan(offsets_[i], branches_[i]->param_count()), x, bout,
                                  cache.children[i], mode);
            std::copy(bout.data.begin(), bout.data.end(), y.data.begin() + static_cast<long>(c0 * out_.length));
            c0 += bout.shape.channels;
        }
    }

    void backward(std::span<const T> p, std::span<T> g, const Tensor<T>& x, const Tensor<T>&,
                  Tensor<T>& dy, Tensor<T>* dx, Cache<T>& cache) const override {
        cache.scratch.resize(2);
        if (dx) {
            dx->resize(in_);
            std::fill(dx->data.begin(), dx->data.end(), T(0));
        }
        std::size_t c0 = 0;
        for (std::size_t i = 0; i < branches_.size(); ++i) {
            const auto shape = cache.acts[i].shape;
            auto& slice = cache.scratch[0];
            slice.resize(shape);
            std::copy_n(dy.data.begin() + static_cast<long>(c0 * out_.length), shape.size(), slice.data.begin());
            Tensor<T>* bdx = dx ? &cache.scratch[1] : nullptr;
            branches_[i]->backward(p.subspan(offsets_[i], branches_[i]->param_count()),
                                   g.subspan(offsets_[i], branches_[i]->param_count()), x, cache.acts[i],
                                   slice, bdx, cache.children[i]);
            if (dx)
                for (std::size_t k = 0; k < dx->data.size(); ++k) dx->data[k] += bdx->data[k];
            c0 += shape.channels;
        }
    }

private:
    Shape in_, out_{0, 0};
    std::vector<std::unique_ptr<Sequential<T>>> branches_;
    std::vector<std::size_t> offsets_;
    std::size_t total_ = 0;
};

template <class T>
std::unique_ptr<Module<T>> make_module(Shape in, const LayerSpec& s) {
    switch (s.type) {
    case LayerType::Conv: return std::make_unique<Conv1d<T>>(in, s);
    case LayerType::MaxPool: return std::make_unique<MaxPool<T>>(in, s);
    case LayerType::Dropout: return std::make_unique<Dropout<T>>(in, s);
    case LayerType::Dense: return std::make_unique<Dense<T>>(in, s);
    case LayerType::Parallel: return std::make_unique<Parallel<T>>(in, s);
    case LayerType::Softmax: break;
    }
    throw ArchError("softmax may only terminate a network");
}

} // namespace

template <class T>
Network<T>::Network(const std::vector<std::vector<LayerSpec>>& streams,
                    const std::vector<std::size_t>& input_lengths, const std::vector<LayerSpec>& head,
                    std::size_t n_outputs)
    : input_lengths_(input_lengths), n_outputs_(n_outputs) {
    if (streams.empty() || streams.size() != input_lengths.size())
        throw ArchError("need one input length per stream");
    for (std::size_t i = 0; i < streams.size(); ++i) {
        for (const auto& s : streams[i])
            if (s.type == LayerType::Dense || s.type == LayerType::Softmax)
                throw ArchError("streams hold convolutional layers only");
        if (input_lengths[i] == 0) throw ArchError("input length must be positive");
        auto seq = std::make_unique<Sequential<T>>(Shape{1, input_lengths[i]}, streams[i]);
        const auto shape = seq->output_shape();
        if (i > 0 && shape.length != fused_shape_.length)
            throw ArchError("streams end with different spatial lengths (" + std::to_string(shape.length) +
                            " vs " + std::to_string(fused_shape_.length) + ")");
        fused_shape_.length = shape.length;
        fused_shape_.channels = (i == 0 ? 0 : fused_shape_.channels) + shape.channels;
        stream_offsets_.push_back(total_params_);
        total_params_ += seq->param_count();
        streams_.push_back(std::move(seq));
    }
    if (head.empty() || head.back().type != LayerType::Softmax)
        throw ArchError("network must end with a softmax layer");
    const LayerSpec* last_dense = nullptr;
    for (const auto& s : head)
        if (s.type == LayerType::Dense) last_dense = &s;
    if (!last_dense) throw ArchError("head needs at least one dense layer");
    if (last_dense->units != n_outputs)
        throw ArchError("final dense layer has " + std::to_string(last_dense->units) + " units, expected " +
                        std::to_string(n_outputs));
    if (last_dense->activation != Activation::None)
        throw ArchError("final dense layer must be linear (softmax follows)");
    head_ = std::make_unique<Sequential<T>>(fused_shape_, head);
    head_offset_ = total_params_;
    total_params_ += head_->param_count();
}

template <class T>
Network<T>::~Network() = default;
template <class T>
Network<T>::Network(Network&&) noexcept = default;
template <class T>
Network<T>& Network<T>::operator=(Network&&) noexcept = default;

template <class T>
Shape Network<T>::stream_output_shape(std::size_t i) const {
    return streams_.at(i)->output_shape();
}

template <class T>
std::size_t Network<T>::stream_param_count(std::size_t i) const {
    return streams_.at(i)->param_count();
}

template <class T>
std::size_t Network<T>::conv_layer_count(std::size_t stream) const {
    return streams_.at(stream)->conv_layer_count();
}

template <class T>
std::size_t Network<T>::dense_layer_count() const {
    return head_->dense_layer_count();
}

template <class T>
void Network<T>::init_params(std::span<T> params, std::uint64_t seed) const {
    if (params.size() != total_params_) throw ArchError("parameter buffer has the wrong size");
    for (std::size_t i = 0; i < streams_.size(); ++i) {
        auto rng = make_rng(seed, 0xC0 + i);
        streams_[i]->init(params.subspan(stream_offsets_[i], streams_[i]->param_count()), rng);
    }
    auto rng = make_rng(seed, 0xDE);
    head_->init(params.subspan(head_offset_, head_->param_count()), rng);
}

template <class T>
void Network<T>::forward(std::span<const T> params, std::span<const std::span<const T>> inputs,
                         Workspace<T>& ws, const RunMode& mode) const {
    if (inputs.size() != streams_.size()) throw ArchError("wrong number of network inputs");
    ws.inputs.resize(streams_.size());
    ws.stream_caches.resize(streams_.size());
    ws.stream_out.resize(streams_.size());
    ws.fused.resize(fused_shape_);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < streams_.size(); ++i) {
        if (inputs[i].size() != input_lengths_[i])
            throw ArchError("input length " + std::to_string(inputs[i].size()) + " does not match " +
                            std::to_string(input_lengths_[i]));
        ws.inputs[i].resize({1, input_lengths_[i]});
        std::copy(inputs[i].begin(), inputs[i].end(), ws.inputs[i].data.begin());
        streams_[i]->forward(params.subspan(stream_offsets_[i], streams_[i]->param_count()), ws.inputs[i],
                             ws.stream_out[i], ws.stream_caches[i], mode);
        std::copy(ws.stream_out[i].data.begin(), ws.stream_out[i].data.end(),
                  ws.fused.data.begin() + static_cast<long>(pos));
        pos += ws.stream_out[i].data.size();
    }
    head_->forward(params.subspan(head_offset_, head_->param_count()), ws.fused, ws.logits, ws.head_cache,
                   mode);
}

template <class T>
void Network<T>::backward(std::span<const T> params, std::span<T> grads, Workspace<T>& ws) const {
    if (grads.size() != total_params_) throw ArchError("gradient buffer has the wrong size");
    head_->backward(params.subspan(head_offset_, head_->param_count()),
                    grads.subspan(head_offset_, head_->param_count()), ws.fused, ws.logits, ws.dlogits,
                    &ws.dfused, ws.head_cache);
    ws.dstream.resize(streams_.size());
    std::size_t pos = 0;
    for (std::size_t i = 0; i < streams_.size(); ++i) {
        auto& d = ws.dstream[i];
        d.resize(ws.stream_out[i].shape);
        std::copy_n(ws.dfused.data.begin() + static_cast<long>(pos), d.data.size(), d.data.begin());
        pos += d.data.size();
        streams_[i]->backward(params.subspan(stream_offsets_[i], streams_[i]->param_count()),
                              grads.subspan(stream_offsets_[i], streams_[i]->param_count()), ws.inputs[i],
                              ws.stream_out[i], d, nullptr, ws.stream_caches[i]);
    }
}

template class Network<float>;
template class Network<double>;

template <class T>
double cross_entropy_loss(std::span<const T> logits, std::size_t target, std::span<T> dlogits) {
    std::vector<double> z(logits.begin(), logits.end());
    const auto p = spectramin::softmax(z);
    for (std::size_t i = 0; i < p.size(); ++i)
        dlogits[i] = static_cast<T>(p[i] - (i == target ? 1.0 : 0.0));
    return -std::log(std::max(p[target], 1e-300));
}

template <class T>
double softmax_mae_loss(std::span<const T> logits, std::span<const double> target, std::span<T> dlogits) {
    std::vector<double> z(logits.begin(), logits.end());
    const auto p = spectramin::softmax(z);
    const double n = static_cast<double>(p.size());
    double loss = 0.0;
    std::vector<double> g(p.size());
    double gp = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double diff = p[i] - target[i];
        loss += std::abs(diff);
        g[i] = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) / n;
        gp += g[i] * p[i];
    }
    for (std::size_t i = 0; i < p.size(); ++i) dlogits[i] = static_cast<T>(p[i] * (g[i] - gp));
    return loss / n;
}

template double cross_entropy_loss<float>(std::span<const float>, std::size_t, std::span<float>);
template double cross_entropy_loss<double>(std::span<const double>, std::size_t, std::span<double>);
template double softmax_mae_loss<float>(std::span<const float>, std::span<const double>, std::span<float>);
template double softmax_mae_loss<double>(std::span<const double>, std::span<const double>, std::span<double>);

} // namespace spectramin::nn
