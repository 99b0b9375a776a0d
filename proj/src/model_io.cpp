#include <bit>
#include <cstring>

#include "model_internal.hpp"
#include "spectramin/error.hpp"
#include "spectramin/learners.hpp"

namespace spectramin {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'S', 'P', 'M', 'N'};

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class U>
void put_le(std::string& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <class U>
U get_le(std::string_view in, std::size_t at) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
        v |= static_cast<U>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

class BlobWriter {
public:
    json add(std::span<const float> v) {
        json ref{{"offset", data_.size()}, {"count", v.size()}};
        data_.insert(data_.end(), v.begin(), v.end());
        return ref;
    }
    void append_to(std::string& out) const {
        for (float f : data_) put_le(out, std::bit_cast<std::uint32_t>(f));
    }

private:
    std::vector<float> data_;
};

class BlobReader {
public:
    explicit BlobReader(std::string_view bytes) : bytes_(bytes) {
        if (bytes.size() % 4 != 0) throw ModelFormatError("truncated weight blob");
    }
    std::vector<float> get(const json& ref) const {
        const auto off = ref.at("offset").get<std::size_t>();
        const auto n = ref.at("count").get<std::size_t>();
        if (off > bytes_.size() / 4 || n > bytes_.size() / 4 - off) throw ModelFormatError("truncated weight blob");
        std::vector<float> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes_, 4 * (off + i)));
        return v;
    }

private:
    std::string_view bytes_;
};

json grid_json(const GridSpec& g) { return {{"start", g.start}, {"end", g.end}, {"n_points", g.n_points}}; }

GridSpec grid_from(const json& j) {
    GridSpec g{j.at("start").get<double>(), j.at("end").get<double>(), j.at("n_points").get<std::size_t>()};
    g.validate();
    return g;
}

json cnn_json(const CnnModel& m, BlobWriter& blob) {
    return {{"arch", m.arch.to_json()},
            {"config", m.config.to_json()},
            {"epoch_loss", m.epoch_loss},
            {"weights", blob.add(m.weights)},
            {"shadow", blob.add(m.shadow)}};
}

CnnModel cnn_from(const json& j, const BlobReader& blob) {
    CnnModel m;
    m.arch = CnnArchitecture::from_json(j.at("arch"));
    m.config = TrainConfig::from_json(j.at("config"));
    m.epoch_loss = j.at("epoch_loss").get<std::vector<double>>();
    m.weights = blob.get(j.at("weights"));
    m.shadow = blob.get(j.at("shadow"));
    attach_network(m);
    if (m.weights.size() != m.net->param_count() || (!m.shadow.empty() && m.shadow.size() != m.weights.size()))
        throw ModelFormatError("weight count does not match the architecture");
    return m;
}

json body_json(const TrainedModel& model, BlobWriter& blob) {
    return std::visit(
        [&](const auto& b) -> json {
            using B = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<B, KnnModel>) {
                return {{"k", b.k}, {"dim", b.dim}, {"labels", b.labels}, {"rows", blob.add(b.rows)}};
            } else if constexpr (std::is_same_v<B, ExtraTreesModel>) {
                json trees = json::array();
                for (const auto& t : b.trees)
                    trees.push_back({{"feature", t.feature},
                                     {"left", t.left},
                                     {"right", t.right},
                                     {"threshold", blob.add(t.threshold)},
                                     {"leaf_counts", blob.add(t.leaf_counts)}});
                return {{"n_classes", b.n_classes}, {"n_features", b.n_features}, {"trees", trees}};
            } else if constexpr (std::is_same_v<B, LinearSvmModel>) {
                return {{"n_classes", b.n_classes},
                        {"dim", b.dim},
                        {"weights", blob.add(b.weights)},
                        {"bias", blob.add(b.bias)}};
            } else if constexpr (std::is_same_v<B, CnnModel>) {
                return cnn_json(b, blob);
            } else if constexpr (std::is_same_v<B, EnsembleModel>) {
                json members = json::array();
                for (const auto& m : b.members) members.push_back(cnn_json(m, blob));
                return {{"members", members}};
            } else {
                return {{"arch", b.arch.to_json()},
                        {"config", b.config.to_json()},
                        {"epoch_loss", b.epoch_loss},
                        {"weights", blob.add(b.weights)},
                        {"shadow", blob.add(b.shadow)}};
            }
        },
        model.body);
}

void body_from(TrainedModel& model, const json& j, const BlobReader& blob) {
    switch (model.kind) {
    case ModelKind::Knn: {
        KnnModel m;
        m.k = j.at("k").get<std::size_t>();
        m.dim = j.at("dim").get<std::size_t>();
        m.labels = j.at("labels").get<std::vector<int>>();
        m.rows = blob.get(j.at("rows"));
        if (m.rows.size() != m.labels.size() * m.dim) throw ModelFormatError("KNN row count mismatch");
        for (int l : m.labels)
            if (l < 0 || static_cast<std::size_t>(l) >= model.classes.size())
                throw ModelFormatError("KNN label out of range");
        finalize_knn(m);
        model.body = std::move(m);
        return;
    }
    case ModelKind::ExtraTrees: {
        ExtraTreesModel m;
        m.n_classes = j.at("n_classes").get<std::size_t>();
        m.n_features = j.at("n_features").get<std::size_t>();
        for (const auto& t : j.at("trees")) {
            DecisionTree tree;
            tree.feature = t.at("feature").get<std::vector<int>>();
            tree.left = t.at("left").get<std::vector<int>>();
            tree.right = t.at("right").get<std::vector<int>>();
            tree.threshold = blob.get(t.at("threshold"));
            tree.leaf_counts = blob.get(t.at("leaf_counts"));
            const auto n = tree.feature.size();
            if (tree.left.size() != n || tree.right.size() != n || tree.threshold.size() != n ||
                m.n_classes == 0 || tree.leaf_counts.size() % m.n_classes != 0)
                throw ModelFormatError("inconsistent tree arrays");
            const auto n_leaves = static_cast<int>(tree.leaf_counts.size() / m.n_classes);
            for (std::size_t i = 0; i < n; ++i) {
                const bool leaf = tree.feature[i] < 0;
                const bool ok = leaf ? (tree.left[i] >= 0 && tree.left[i] < n_leaves)
                                     : (static_cast<std::size_t>(tree.feature[i]) < m.n_features &&
                                        tree.left[i] > static_cast<int>(i) && tree.left[i] < static_cast<int>(n) &&
                                        tree.right[i] > static_cast<int>(i) && tree.right[i] < static_cast<int>(n));
                if (!ok) throw ModelFormatError("corrupt tree node");
            }
            m.trees.push_back(std::move(tree));
        }
        model.body = std::move(m);
        return;
    }
    case ModelKind::LinearSvm: {
        LinearSvmModel m;
        m.n_classes = j.at("n_classes").get<std::size_t>();
        m.dim = j.at("dim").get<std::size_t>();
        m.weights = blob.get(j.at("weights"));
        m.bias = blob.get(j.at("bias"));
        if (m.weights.size() != m.n_classes * m.dim || m.bias.size() != m.n_classes)
            throw ModelFormatError("SVM weight count mismatch");
        model.body = std::move(m);
        return;
    }
    case ModelKind::Cnn:
    case ModelKind::LibsCnn: model.body = cnn_from(j, blob); return;
    case ModelKind::Ensemble: {
        EnsembleModel e;
        for (const auto& m : j.at("members")) e.members.push_back(cnn_from(m, blob));
        model.body = std::move(e);
        return;
    }
    case ModelKind::TwoStream: {
        TwoStreamModel m;
        m.arch = TwoStreamArchitecture::from_json(j.at("arch"));
        m.config = TrainConfig::from_json(j.at("config"));
        m.epoch_loss = j.at("epoch_loss").get<std::vector<double>>();
        m.weights = blob.get(j.at("weights"));
        m.shadow = blob.get(j.at("shadow"));
        attach_network(m);
        if (m.weights.size() != m.net->param_count()) throw ModelFormatError("weight count mismatch");
        model.body = std::move(m);
        return;
    }
    }
}

} // namespace

std::string serialize_model(const TrainedModel& model) {
    BlobWriter blob;
    json desc{{"format", "spectramin-model"},
              {"kind", to_string(model.kind)},
              {"classes", model.classes},
              {"spectrum_kind", to_string(model.spectrum_kind)},
              {"grid", grid_json(model.grid)},
              {"seed", model.seed},
              {"body", body_json(model, blob)}};
    if (model.grid_b) desc["grid_b"] = grid_json(*model.grid_b);
    const std::string text = desc.dump();
    std::string out(kMagic, 4);
    put_le<std::uint32_t>(out, kModelFormatVersion);
    put_le<std::uint64_t>(out, text.size());
    out += text;
    blob.append_to(out);
    return out;
}

TrainedModel deserialize_model(std::string_view bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw ModelFormatError("not a spectramin model file (bad magic)");
    const auto version = get_le<std::uint32_t>(bytes, 4);
    if (version != kModelFormatVersion)
        throw ModelFormatError("unsupported model format version " + std::to_string(version));
    const auto len = get_le<std::uint64_t>(bytes, 8);
    if (len > bytes.size() - 16) throw ModelFormatError("truncated model descriptor");
    TrainedModel model;
    try {
        const json desc = json::parse(bytes.substr(16, len));
        model.kind = parse_model_kind(desc.at("kind").get<std::string>());
        model.classes = desc.at("classes").get<std::vector<std::string>>();
        model.spectrum_kind = parse_kind(desc.at("spectrum_kind").get<std::string>());
        model.grid = grid_from(desc.at("grid"));
        if (desc.contains("grid_b")) model.grid_b = grid_from(desc["grid_b"]);
        model.seed = desc.at("seed").get<std::uint64_t>();
        body_from(model, desc.at("body"), BlobReader(bytes.substr(16 + len)));
    } catch (const json::exception& e) {
        throw ModelFormatError(std::string("malformed model descriptor: ") + e.what());
    } catch (const ModelFormatError&) {
        throw;
    } catch (const Error& e) {
        throw ModelFormatError(std::string("invalid model contents: ") + e.what());
    }
    return model;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    write_text_atomic(path, serialize_model(model));
}

TrainedModel load_model(const std::filesystem::path& path) { return deserialize_model(read_text_file(path)); }

} // namespace spectramin
