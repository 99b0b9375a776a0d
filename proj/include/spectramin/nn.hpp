#pragma once

// Small 1-D convolutional network engine: layer specs, a flat parameter
// layout, and per-sample forward/backward passes. Instantiated for float
// (training, inference) and double (gradient checks).

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spectramin/rng.hpp"

namespace spectramin::nn {

enum class Activation { None, Relu };
enum class LayerType { Conv, MaxPool, Dropout, Dense, Parallel, Softmax };

struct LayerSpec {
    LayerType type = LayerType::Conv;
    std::size_t out_channels = 0;  // conv
    std::size_t kernel = 0;
    std::size_t stride = 1;
    std::size_t width = 0;         // maxpool
    double rate = -1.0;            // dropout; negative means "use the training default"
    std::size_t units = 0;         // dense
    Activation activation = Activation::Relu;
    std::vector<std::vector<LayerSpec>> branches;  // parallel

    static LayerSpec conv(std::size_t out_channels, std::size_t kernel, std::size_t stride = 1,
                          Activation act = Activation::Relu);
    static LayerSpec max_pool(std::size_t width);
    static LayerSpec dropout(double rate = -1.0);
    static LayerSpec dense(std::size_t units, Activation act = Activation::Relu);
    static LayerSpec parallel(std::vector<std::vector<LayerSpec>> branches);
    static LayerSpec softmax();
};

nlohmann::json to_json(const LayerSpec& spec);
LayerSpec layer_from_json(const nlohmann::json& j);

struct Shape {
    std::size_t channels = 1;
    std::size_t length = 1;
    std::size_t size() const noexcept { return channels * length; }
    bool operator==(const Shape&) const = default;
};

template <class T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    void resize(Shape s) {
        shape = s;
        data.resize(s.size());
    }
    T* channel(std::size_t c) { return data.data() + c * shape.length; }
    const T* channel(std::size_t c) const { return data.data() + c * shape.length; }
};

template <class T>
struct Cache {
    std::vector<Tensor<T>> acts;       // per-layer outputs (sequential)
    std::vector<Tensor<T>> scratch;    // gradient buffers
    std::vector<std::uint32_t> index;  // maxpool argmax
    std::vector<T> mask;               // dropout mask
    std::vector<Cache<T>> children;
};

struct RunMode {
    bool train = false;
    Rng* rng = nullptr;
    double default_dropout = 0.5;
};

template <class T>
class Module {
public:
    virtual ~Module() = default;
    virtual Shape output_shape() const = 0;
    virtual std::size_t param_count() const { return 0; }
    virtual void init(std::span<T> /*params*/, Rng& /*rng*/) const {}
    virtual void forward(std::span<const T> params, const Tensor<T>& x, Tensor<T>& y, Cache<T>& cache,
                         const RunMode& mode) const = 0;
    // `dy` is scratch and may be overwritten. `dx` may be null when the input
    // gradient is not needed.
    virtual void backward(std::span<const T> params, std::span<T> grads, const Tensor<T>& x,
                          const Tensor<T>& y, Tensor<T>& dy, Tensor<T>* dx, Cache<T>& cache) const = 0;
    virtual std::size_t conv_layer_count() const { return 0; }
    virtual std::size_t dense_layer_count() const { return 0; }
};

template <class T>
struct Workspace {
    std::vector<Tensor<T>> inputs;
    std::vector<Cache<T>> stream_caches;
    std::vector<Tensor<T>> stream_out;
    Tensor<T> fused;
    Cache<T> head_cache;
    Tensor<T> logits;
    Tensor<T> dlogits;
    std::vector<Tensor<T>> dstream;
    Tensor<T> dfused;
};

// One or more convolutional streams whose final feature maps are concatenated
// along the channel axis and fed to a shared dense head. A single-stream
// network is the ordinary CNN.
template <class T>
class Network {
public:
    Network(const std::vector<std::vector<LayerSpec>>& streams,
            const std::vector<std::size_t>& input_lengths, const std::vector<LayerSpec>& head,
            std::size_t n_outputs);
    ~Network();
    Network(Network&&) noexcept;
    Network& operator=(Network&&) noexcept;

    std::size_t param_count() const noexcept { return total_params_; }
    std::size_t stream_count() const noexcept { return streams_.size(); }
    std::size_t n_outputs() const noexcept { return n_outputs_; }
    Shape stream_output_shape(std::size_t i) const;
    Shape fused_shape() const noexcept { return fused_shape_; }
    std::size_t stream_param_offset(std::size_t i) const { return stream_offsets_.at(i); }
    std::size_t stream_param_count(std::size_t i) const;
    std::size_t head_param_offset() const noexcept { return head_offset_; }
    std::size_t conv_layer_count(std::size_t stream) const;
    std::size_t dense_layer_count() const;

    void init_params(std::span<T> params, std::uint64_t seed) const;

    // Fills ws.logits.
    void forward(std::span<const T> params, std::span<const std::span<const T>> inputs,
                 Workspace<T>& ws, const RunMode& mode) const;
    // Accumulates parameter gradients for the sample last passed to forward.
    // Reads ws.dlogits.
    void backward(std::span<const T> params, std::span<T> grads, Workspace<T>& ws) const;

private:
    std::vector<std::unique_ptr<Module<T>>> streams_;
    std::unique_ptr<Module<T>> head_;
    std::vector<std::size_t> stream_offsets_;
    std::vector<std::size_t> input_lengths_;
    std::size_t head_offset_ = 0;
    std::size_t total_params_ = 0;
    std::size_t n_outputs_ = 0;
    Shape fused_shape_;
};

extern template class Network<float>;
extern template class Network<double>;

// Loss for one sample; writes d(loss)/d(logits) into `dlogits`.
template <class T>
double cross_entropy_loss(std::span<const T> logits, std::size_t target, std::span<T> dlogits);

// Mean absolute error between softmax(logits) and `target` (a distribution).
template <class T>
double softmax_mae_loss(std::span<const T> logits, std::span<const double> target,
                        std::span<T> dlogits);

// shadow <- decay * shadow + (1 - decay) * weights
template <class T>
void ema_update(std::span<T> shadow, std::span<const T> weights, double decay) {
    const T d = static_cast<T>(decay);
    const T r = static_cast<T>(1.0 - decay);
    for (std::size_t i = 0; i < shadow.size(); ++i) shadow[i] = d * shadow[i] + r * weights[i];
}

} // namespace spectramin::nn
