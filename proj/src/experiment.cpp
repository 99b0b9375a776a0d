#include <algorithm>
#include <atomic>
#include <exception>
#include <random>
#include <set>
#include <thread>

#include "spectramin/error.hpp"
#include "spectramin/evalharness.hpp"
#include "spectramin/rng.hpp"
#include "spectramin/synthetic.hpp"

namespace spectramin {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

LabeledDataset DatasetSource::load() const {
    if (path) {
        const auto j = json::parse(read_text_file(*path), nullptr, false);
        if (j.is_discarded()) throw ConfigError("'" + path->string() + "' is not valid JSON");
        if (j.contains("entries")) return build_dataset(*path);
        return dataset_from_json(j);
    }
    if (synthetic == "raman-library") return make_raman_library(RamanLibraryParams::from_json(params));
    if (synthetic == "complementary-a") return make_complementary(ComplementaryParams::from_json(params)).first;
    if (synthetic == "complementary-b") return make_complementary(ComplementaryParams::from_json(params)).second;
    throw ConfigError("unknown synthetic dataset '" + synthetic + "'");
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

DatasetSource source_from(const json& j, const std::filesystem::path& base) {
    DatasetSource s;
    if (j.is_string()) {
        s.path = resolve(base, j.get<std::string>());
    } else if (j.contains("path")) {
        s.path = resolve(base, j["path"].get<std::string>());
    } else {
        s.synthetic = j.at("synthetic").get<std::string>();
        s.params = j.value("params", json::object());
    }
    return s;
}

ExperimentMode parse_mode(const std::string& m) {
    if (m == "single") return ExperimentMode::Single;
    if (m == "fusion") return ExperimentMode::Fusion;
    if (m == "libs") return ExperimentMode::Libs;
    throw ConfigError("unknown experiment mode '" + m + "'");
}

std::string mode_name(ExperimentMode m) {
    switch (m) {
    case ExperimentMode::Single: return "single";
    case ExperimentMode::Fusion: return "fusion";
    case ExperimentMode::Libs: return "libs";
    }
    return "single";
}

} // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::filesystem::path& base) {
    static const std::set<std::string> known{"name",    "mode",         "n_runs",          "base_seed", "protocol",
                                             "dataset", "dataset_b",    "models",          "rules",     "two_stream",
                                             "pairs_per_species", "augment", "remove_outliers", "libs", "pca"};
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw ConfigError("unknown experiment key '" + k + "'");

    ExperimentConfig c;
    try {
        c.name = j.value("name", c.name);
        c.mode = parse_mode(j.value("mode", std::string("single")));
        const auto runs = j.value("n_runs", std::int64_t{30});
        if (runs < 1) throw ConfigError("n_runs must be >= 1");
        c.n_runs = static_cast<std::size_t>(runs);
        c.base_seed = j.value("base_seed", c.base_seed);
        c.protocol = parse_protocol(j.value("protocol", std::string("three-per-species")));
        if (j.contains("dataset")) c.dataset = source_from(j["dataset"], base);
        if (j.contains("dataset_b")) c.dataset_b = source_from(j["dataset_b"], base);
        for (const auto& m : j.value("models", json::array())) c.models.push_back(ModelSpec::from_json(m));
        for (const auto& r : j.value("rules", json::array())) c.rules.push_back(parse_fusion_rule(r.get<std::string>()));
        if (j.contains("two_stream")) c.two_stream = TrainConfig::from_json(j["two_stream"]);
        c.pairs_per_species = j.value("pairs_per_species", c.pairs_per_species);
        if (j.contains("augment")) {
            const auto& a = j["augment"];
            if (a.is_string()) {
                c.augmentation = parse_technique(a.get<std::string>());
            } else {
                c.augmentation = parse_technique(a.value("technique", std::string("none")));
                c.augment_params = AugmentParams::from_json(a.value("params", json::object()));
            }
        }
        c.remove_outliers = j.value("remove_outliers", false);
        if (j.contains("pca")) c.pca_species = j["pca"].value("species", std::vector<std::string>{});
        if (j.contains("libs")) {
            const auto& l = j["libs"];
            LibsExperiment le;
            le.lines = resolve(base, l.at("lines").get<std::string>());
            le.minerals = resolve(base, l.at("minerals").get<std::string>());
            le.methods = l.value("methods", le.methods);
            for (const auto& m : le.methods)
                if (m != "cosine" && m != "cnn") throw ConfigError("unknown LIBS method '" + m + "'");
            le.noise = l.value("noise", le.noise);
            if (l.contains("grid")) {
                const auto& g = l["grid"];
                le.grid = {g.at("start").get<double>(), g.at("end").get<double>(), g.at("n_points").get<std::size_t>()};
                le.grid.validate();
            }
            if (l.contains("cnn")) {
                const auto& cj = l["cnn"];
                le.cnn.n_samples = cj.value("n_samples", le.cnn.n_samples);
                le.cnn.max_elements = cj.value("max_elements", le.cnn.max_elements);
                le.cnn.train = TrainConfig::from_json(cj.value("train", json::object()));
            }
            c.libs = std::move(le);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed experiment config: ") + e.what());
    }

    switch (c.mode) {
    case ExperimentMode::Single:
        if (!j.contains("dataset")) throw ConfigError("single mode needs a dataset");
        if (c.models.empty()) throw ConfigError("single mode needs at least one model");
        break;
    case ExperimentMode::Fusion:
        if (!j.contains("dataset") || !c.dataset_b) throw ConfigError("fusion mode needs dataset and dataset_b");
        if (c.models.empty() || c.models.size() > 2) throw ConfigError("fusion mode takes one or two models");
        if (c.rules.empty()) c.rules = {FusionRule::Average, FusionRule::Multiply};
        break;
    case ExperimentMode::Libs:
        if (!c.libs) throw ConfigError("libs mode needs a libs section");
        break;
    }
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    const auto j = json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded()) throw ConfigError("'" + path.string() + "' is not valid JSON");
    return from_json(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// Runs

namespace {

struct Loaded {
    LabeledDataset a;
    LabeledDataset b;
    LineTable lines;
    std::map<std::string, ElementComposition> minerals;  // restricted to elements with lines
    std::vector<std::string> mineral_names;
};

void check_disjoint(const SplitPlan& plan, const LabeledDataset& ds) {
    plan.check_partition(ds.size());
    std::vector<char> in_train(ds.size(), 0);
    for (auto i : plan.train_indices) in_train[i] = 1;
    for (auto i : plan.test_indices)
        if (in_train[i]) throw ConfigError("sample '" + ds.samples[i].id + "' appears in both train and test");
}

std::pair<LabeledDataset, LabeledDataset> prepare(const ExperimentConfig& cfg, const LabeledDataset& ds,
                                                  std::uint64_t seed) {
    const auto plan = make_split(ds, cfg.protocol, seed);
    check_disjoint(plan, ds);
    std::vector<std::size_t> train_idx = plan.train_indices;
    if (cfg.remove_outliers) train_idx = filter_training_outliers(ds, train_idx);
    auto train = ds.subset(train_idx);
    if (cfg.augmentation != AugmentTechnique::None)
        train = augment(train, cfg.augmentation, derive_seed(seed, 0xA6), cfg.augment_params);
    return {std::move(train), ds.subset(plan.test_indices)};
}

MethodResult finish_method(std::string name, std::vector<SampleRecord> records) {
    MethodResult m{std::move(name), 0.0, std::move(records)};
    std::size_t correct = 0;
    for (const auto& r : m.samples)
        if (static_cast<int>(r.prediction.argmax()) == r.label) ++correct;
    m.accuracy = m.samples.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(m.samples.size());
    return m;
}

RunResult run_single(const ExperimentConfig& cfg, const Loaded& data, std::size_t r, std::uint64_t seed) {
    auto [train, test] = prepare(cfg, data.a, seed);
    RunResult out{r, seed, {}};
    for (const auto& spec : cfg.models) {
        const auto model = train_model(spec, train, seed);
        std::vector<SampleRecord> records;
        for (const auto& s : test.samples) records.push_back({s.id, s.species, predict(model, s.spectrum.values), {}, {}});
        out.methods.push_back(finish_method(spec.name, std::move(records)));
    }
    return out;
}

// Base-model predictions on held-out folds of the training data, paired by
// species, for training the fusion SVM without leakage.
std::vector<FusionExample> heldout_fusion_examples(const ExperimentConfig& cfg, const LabeledDataset& train_a,
                                                   const LabeledDataset& train_b, const ModelSpec& spec_a,
                                                   const ModelSpec& spec_b, std::uint64_t seed) {
    constexpr std::size_t kFolds = 3;
    auto folds_of = [&](const LabeledDataset& ds, std::uint64_t stream) {
        std::vector<std::size_t> fold(ds.size());
        auto rng = make_rng(seed, stream);
        for (auto members : ds.indices_by_species()) {
            std::shuffle(members.begin(), members.end(), rng);
            for (std::size_t k = 0; k < members.size(); ++k) fold[members[k]] = k % kFolds;
        }
        return fold;
    };
    const auto fa = folds_of(train_a, 0xF0A), fb = folds_of(train_b, 0xF0B);
    std::vector<FusionExample> out;
    for (std::size_t f = 0; f < kFolds; ++f) {
        std::vector<std::size_t> ia_in, ia_out, ib_in, ib_out;
        for (std::size_t i = 0; i < train_a.size(); ++i) (fa[i] == f ? ia_out : ia_in).push_back(i);
        for (std::size_t i = 0; i < train_b.size(); ++i) (fb[i] == f ? ib_out : ib_in).push_back(i);
        if (ia_out.empty() || ib_out.empty() || ia_in.empty() || ib_in.empty()) continue;
        const auto held_a = train_a.subset(ia_out), held_b = train_b.subset(ib_out);
        const auto ma = train_model(spec_a, train_a.subset(ia_in), derive_seed(seed, 0xF10 + f));
        const auto mb = train_model(spec_b, train_b.subset(ib_in), derive_seed(seed, 0xF20 + f));
        std::vector<PairedSample> pairs;
        try {
            pairs = pair_by_species(held_a, held_b, cfg.pairs_per_species, derive_seed(seed, 0xF30 + f));
        } catch (const EmptyIntersection&) {
            continue;
        }
        for (const auto& p : pairs)
            out.push_back({predict(ma, p.spectrum_a.values), predict(mb, p.spectrum_b.values), p.species});
    }
    if (out.empty()) throw EmptyClass("no held-out pairs to train the fusion SVM");
    return out;
}

RunResult run_fusion(const ExperimentConfig& cfg, const Loaded& data, std::size_t r, std::uint64_t seed) {
    const auto seed_b = derive_seed(seed, 0xB);
    auto [train_a, test_a] = prepare(cfg, data.a, seed);
    auto [train_b, test_b] = prepare(cfg, data.b, seed_b);
    const auto& spec_a = cfg.models.front();
    const auto& spec_b = cfg.models.back();
    const auto model_a = train_model(spec_a, train_a, seed);
    const auto model_b = train_model(spec_b, train_b, seed_b);

    const auto pairs = pair_by_species(test_a, test_b, cfg.pairs_per_species, derive_seed(seed, 0x9));
    std::vector<Prediction> pa, pb;
    for (const auto& p : pairs) {
        pa.push_back(predict(model_a, p.spectrum_a.values));
        pb.push_back(predict(model_b, p.spectrum_b.values));
    }
    auto records = [&](auto&& make) {
        std::vector<SampleRecord> out;
        for (std::size_t i = 0; i < pairs.size(); ++i)
            out.push_back({test_a.samples[pairs[i].index_a].id + "|" + test_b.samples[pairs[i].index_b].id,
                           pairs[i].species, make(i), {}, {}});
        return out;
    };

    RunResult out{r, seed, {}};
    out.methods.push_back(finish_method("A:" + spec_a.name, records([&](std::size_t i) { return pa[i]; })));
    out.methods.push_back(finish_method("B:" + spec_b.name, records([&](std::size_t i) { return pb[i]; })));
    for (auto rule : cfg.rules) {
        if (rule == FusionRule::Svm) {
            const auto ex = heldout_fusion_examples(cfg, train_a, train_b, spec_a, spec_b, seed);
            const auto svm = fuse_svm(ex);
            out.methods.push_back(
                finish_method("fuse-svm", records([&](std::size_t i) { return apply_fused_svm(svm, pa[i], pb[i]); })));
        } else {
            out.methods.push_back(finish_method("fuse-" + to_string(rule),
                                                records([&](std::size_t i) { return fuse(rule, pa[i], pb[i]); })));
        }
    }
    if (cfg.two_stream) {
        const auto n = train_a.n_classes();
        const auto train_pairs =
            pair_by_species(train_a, train_b, cfg.pairs_per_species, derive_seed(seed, 0x25));
        TrainConfig tc = *cfg.two_stream;
        tc.seed = seed;
        const auto ts = train_two_stream_cnn(train_pairs, train_a.species.names(),
                                             simple_fusion_net(n, train_a.grid.n_points),
                                             simple_fusion_net(n, train_b.grid.n_points), tc);
        out.methods.push_back(finish_method("two-stream", records([&](std::size_t i) {
                                                return predict_two_stream(ts, pairs[i].spectrum_a.values,
                                                                          pairs[i].spectrum_b.values);
                                            })));
    }
    return out;
}

RunResult run_libs(const ExperimentConfig& cfg, const Loaded& data, std::size_t r, std::uint64_t seed) {
    const auto& le = *cfg.libs;
    auto rng = make_rng(seed, 0x1B5);
    std::normal_distribution<double> eps(0.0, le.noise);
    std::vector<Spectrum> spectra;
    for (const auto& name : data.mineral_names) {
        auto raw = synth_libs_raw(data.minerals.at(name), data.lines, le.grid);
        for (auto& v : raw) v = std::max(0.0, v * (1.0 + eps(rng)));
        spectra.push_back({le.grid, normalize_unit(raw), SpectrumKind::LIBS, {}});
    }

    std::optional<TrainedModel> cnn;
    RunResult out{r, seed, {}};
    for (const auto& method : le.methods) {
        if (method == "cnn" && !cnn) {
            auto params = le.cnn;
            params.train.seed = seed;
            cnn = train_libs_cnn(data.lines, le.grid, params);
        }
        std::vector<SampleRecord> records;
        for (std::size_t i = 0; i < spectra.size(); ++i) {
            const auto& truth = data.minerals.at(data.mineral_names[i]);
            SampleRecord rec{data.mineral_names[i], static_cast<int>(i), Prediction::uniform(data.mineral_names), {}, {}};
            try {
                const auto est = method == "cnn" ? predict_libs_cnn(*cnn, spectra[i])
                                                 : estimate_composition_cosine(spectra[i], data.lines).composition;
                rec.prediction = match_mineral_by_composition(est, data.minerals);
                rec.composition_similarity = composition_cosine(est, truth);
                rec.composition_mae = composition_mae(est, truth);
            } catch (const NoPeaksError&) {
                rec.prediction.degenerate = true;
                rec.composition_similarity = 0.0;
                rec.composition_mae = composition_mae({}, truth);
            }
            records.push_back(std::move(rec));
        }
        out.methods.push_back(finish_method(method, std::move(records)));
    }
    return out;
}

Loaded load_inputs(const ExperimentConfig& cfg) {
    Loaded d;
    switch (cfg.mode) {
    case ExperimentMode::Single: d.a = cfg.dataset.load(); break;
    case ExperimentMode::Fusion: {
        auto a = cfg.dataset.load();
        auto b = cfg.dataset_b->load();
        const auto shared = common_species(a, b);
        if (shared.empty()) throw EmptyIntersection("the two datasets share no species");
        d.a = restrict_to_species(a, shared);
        d.b = restrict_to_species(b, shared);
        break;
    }
    case ExperimentMode::Libs: {
        d.lines = LineTable::load(cfg.libs->lines);
        for (const auto& [name, comp] : load_mineral_table(cfg.libs->minerals)) {
            std::map<std::string, double> kept;
            for (const auto& [el, f] : comp)
                if (d.lines.has(el)) kept[el] = f;
            if (kept.empty()) continue;
            d.minerals[name] = normalize_composition(kept);
            d.mineral_names.push_back(name);
        }
        if (d.minerals.empty()) throw MissingLines("no mineral has an element covered by the line table");
        break;
    }
    }
    return d;
}

} // namespace

std::vector<RunResult> run_experiment(const ExperimentConfig& cfg, std::size_t jobs) {
    const Loaded data = load_inputs(cfg);
    std::vector<RunResult> results(cfg.n_runs);
    std::vector<std::exception_ptr> errors(cfg.n_runs);

    auto run_one = [&](std::size_t r) {
        const std::uint64_t seed = cfg.base_seed + r;
        try {
            switch (cfg.mode) {
            case ExperimentMode::Single: results[r] = run_single(cfg, data, r, seed); break;
            case ExperimentMode::Fusion: results[r] = run_fusion(cfg, data, r, seed); break;
            case ExperimentMode::Libs: results[r] = run_libs(cfg, data, r, seed); break;
            }
            for (const auto& m : results[r].methods)
                if (recompute_accuracy(m) != m.accuracy) throw StatsError("accuracy recount mismatch for " + m.method);
        } catch (const Error& e) {
            errors[r] = std::make_exception_ptr(Error(e.code(), "run " + std::to_string(r) + ": " + e.what(), e.category()));
        } catch (const std::exception& e) {
            errors[r] = std::make_exception_ptr(
                Error("RuntimeError", "run " + std::to_string(r) + ": " + e.what(), ErrorCategory::Runtime));
        }
    };

    jobs = std::clamp<std::size_t>(jobs, 1, cfg.n_runs);
    if (jobs == 1) {
        for (std::size_t r = 0; r < cfg.n_runs; ++r) run_one(r);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < jobs; ++t)
            pool.emplace_back([&] {
                for (std::size_t r = next++; r < cfg.n_runs; r = next++) run_one(r);
            });
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

double recompute_accuracy(const MethodResult& m) {
    if (m.samples.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& s : m.samples) {
        const auto& sc = s.prediction.scores;
        std::size_t best = 0;
        for (std::size_t i = 1; i < sc.size(); ++i)
            if (sc[i] > sc[best]) best = i;
        hits += static_cast<int>(best) == s.label;
    }
    return static_cast<double>(hits) / static_cast<double>(m.samples.size());
}

std::vector<MethodSummary> summarize(const std::vector<RunResult>& results) {
    std::vector<MethodSummary> out;
    for (const auto& run : results)
        for (const auto& m : run.methods) {
            auto it = std::find_if(out.begin(), out.end(), [&](const MethodSummary& s) { return s.method == m.method; });
            if (it == out.end()) {
                out.push_back({m.method, {}, {}, {}});
                it = out.end() - 1;
            }
            it->accuracies.push_back(m.accuracy);
        }
    for (auto& s : out) {
        s.ci = accuracy_ci(s.accuracies);
        double total = 0.0;
        std::size_t n = 0;
        for (const auto& run : results)
            for (const auto& m : run.methods)
                if (m.method == s.method)
                    for (const auto& rec : m.samples)
                        if (rec.composition_mae) {
                            total += *rec.composition_mae;
                            ++n;
                        }
        if (n) s.mean_composition_mae = total / static_cast<double>(n);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Exports that need the loaded inputs

namespace {

std::pair<std::string, std::string> pca_and_meanstd(const ExperimentConfig& cfg) {
    std::vector<std::vector<double>> rows;
    std::vector<std::string> ids, labels;
    std::string meanstd = "species,position,mean,stddev\n";
    if (cfg.mode == ExperimentMode::Libs) {
        const auto data = load_inputs(cfg);
        for (const auto& name : data.mineral_names) {
            rows.push_back(synth_libs_spectrum(data.minerals.at(name), data.lines, cfg.libs->grid).values);
            ids.push_back(name);
            labels.push_back(name);
        }
    } else {
        auto ds = cfg.dataset.load();
        if (!cfg.pca_species.empty()) ds = restrict_to_species(ds, cfg.pca_species);
        for (const auto& s : ds.samples) {
            rows.push_back(s.spectrum.values);
            ids.push_back(s.id);
            labels.push_back(ds.species.name(s.species));
        }
        meanstd = class_mean_std_csv(ds);
    }
    if (rows.size() < 2) return {"sample_id,species,pc1,pc2\n", meanstd};
    const auto k = std::min<std::size_t>({2, rows.size(), rows.front().size()});
    return {export_pca_csv(ids, labels, pca_project(rows, k)), meanstd};
}

} // namespace

void write_experiment_outputs(const ExperimentConfig& cfg, const std::vector<RunResult>& results,
                              const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto summaries = summarize(results);
    const auto [pca, meanstd] = pca_and_meanstd(cfg);
    write_text_atomic(dir / "results.json", results_to_json(cfg, results).dump(2) + "\n");
    write_text_atomic(dir / "report.md", report_markdown(cfg, summaries));
    write_text_atomic(dir / "violin.csv", export_violin_csv(results));
    write_text_atomic(dir / "pca.csv", pca);
    write_text_atomic(dir / "meanstd.csv", meanstd);
}

std::string to_string(ExperimentMode m) { return mode_name(m); }

} // namespace spectramin
