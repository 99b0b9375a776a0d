// spectramin command-line tool.

#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "spectramin/augment.hpp"
#include "spectramin/datasets.hpp"
#include "spectramin/error.hpp"
#include "spectramin/evalharness.hpp"
#include "spectramin/fusion.hpp"
#include "spectramin/learners.hpp"
#include "spectramin/libs.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spectramin;

namespace {

json parse_json_text(const std::string& text, const std::string& what) {
    auto j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError(what + " is not valid JSON");
    return j;
}

json load_json(const fs::path& path) { return parse_json_text(read_text_file(path), "'" + path.string() + "'"); }

// Inline JSON when the argument starts with '{', otherwise a file path.
json json_arg(const std::string& arg) {
    const auto first = arg.find_first_not_of(" \t\n");
    if (first != std::string::npos && arg[first] == '{') return parse_json_text(arg, "inline JSON");
    return load_json(arg);
}

void emit(const json& j, const std::string& out) {
    const auto text = j.dump(2) + "\n";
    if (out.empty() || out == "-") std::cout << text;
    else write_text_atomic(out, text);
}

LabeledDataset training_part(const LabeledDataset& ds, const std::string& plan_path) {
    if (plan_path.empty()) return ds;
    const auto plan = plan_from_json(load_json(plan_path));
    plan.check_partition(ds.size());
    return ds.subset(plan.train_indices);
}

std::string spectrum_csv(const Spectrum& s) {
    std::ostringstream out;
    out.precision(12);
    out << "position,intensity\n";
    for (std::size_t i = 0; i < s.values.size(); ++i) out << s.grid.position(i) << ',' << s.values[i] << '\n';
    return out.str();
}

json prediction_json(const Prediction& p, const std::string& model, std::uint64_t seed, std::size_t top) {
    json j = prediction_to_json(p);
    j["model"] = model;
    j["seed"] = seed;
    json ranked = json::array();
    const auto order = p.ranking();
    for (std::size_t i = 0; i < std::min(top, order.size()); ++i)
        ranked.push_back({{"species", p.classes[order[i]]}, {"score", p.scores[order[i]]}});
    j["top"] = ranked;
    return j;
}

struct Options {
    std::string manifest, dataset, dataset_b, plan, plan_b, out, protocol = "three-per-species", technique, model_kind,
        config, model, input, input_b, format = "auto", lines, composition, method = "cosine", minerals, pred_a, pred_b,
        rule, svm_model, pairs;
    std::uint64_t seed = 0;
    std::size_t top = 5, jobs = 1, samples = 2000;
    double sigma = 0.2;
    bool skip_missing = false;
};

int cmd_ingest(const Options& o) {
    const auto ds = build_dataset(o.manifest);
    save_dataset(ds, o.out);
    std::cerr << "ingested " << ds.size() << " spectra, " << ds.n_classes() << " species\n";
    return 0;
}

int cmd_split(const Options& o) {
    const auto ds = load_dataset(o.dataset);
    const auto plan = make_split(ds, parse_protocol(o.protocol), o.seed);
    write_text_atomic(o.out, plan_to_json(plan).dump(2) + "\n");
    std::cerr << plan.train_indices.size() << " train, " << plan.test_indices.size() << " test\n";
    return 0;
}

int cmd_augment(const Options& o) {
    const auto ds = load_dataset(o.dataset);
    const auto train = training_part(ds, o.plan);
    AugmentParams params;
    if (!o.config.empty()) params = AugmentParams::from_json(json_arg(o.config));
    save_dataset(augment(train, parse_technique(o.technique), o.seed, params), o.out);
    return 0;
}

int cmd_train(const Options& o) {
    json cfg = o.config.empty() ? json::object() : json_arg(o.config);
    cfg["model"] = o.model_kind;
    const auto spec = ModelSpec::from_json(cfg);
    const auto ds = load_dataset(o.dataset);
    auto train = training_part(ds, o.plan);
    TrainedModel model;
    if (spec.kind == ModelKind::TwoStream) {
        if (o.dataset_b.empty()) throw ConfigError("two-stream training needs --dataset-b");
        auto train_b = training_part(load_dataset(o.dataset_b), o.plan_b);
        const auto shared = common_species(train, train_b);
        if (shared.empty()) throw EmptyIntersection("the two datasets share no species");
        train = restrict_to_species(train, shared);
        train_b = restrict_to_species(train_b, shared);
        const auto pairs = pair_by_species(train, train_b, cfg.value("pairs_per_species", std::size_t{50}), o.seed);
        const auto n = shared.size();
        auto arch_a = cfg.contains("arch_a") ? CnnArchitecture::from_json(cfg["arch_a"])
                                             : simple_fusion_net(n, train.grid.n_points);
        auto arch_b = cfg.contains("arch_b") ? CnnArchitecture::from_json(cfg["arch_b"])
                                             : simple_fusion_net(n, train_b.grid.n_points);
        TrainConfig tc = spec.train;
        tc.seed = o.seed;
        model = train_two_stream_cnn(pairs, shared, arch_a, arch_b, tc);
    } else {
        model = train_model(spec, train, o.seed);
    }
    save_model(model, o.out);
    std::cerr << "trained " << to_string(model.kind) << " on " << train.size() << " spectra\n";
    return 0;
}

Spectrum read_input(const std::string& path, SpectrumKind kind, const GridSpec& grid, const std::string& format) {
    return preprocess(read_spectrum_file(path, kind, format), grid);
}

int cmd_predict(const Options& o) {
    const auto model = load_model(o.model);
    Prediction p;
    if (model.kind == ModelKind::TwoStream) {
        if (o.input_b.empty()) throw ConfigError("two-stream models need --input-b");
        const auto a = read_input(o.input, model.spectrum_kind, model.grid, o.format);
        const auto b = read_input(o.input_b, model.grid_b ? SpectrumKind::VNIR : model.spectrum_kind,
                                  model.grid_b.value_or(model.grid), o.format);
        p = predict_two_stream(model, a.values, b.values);
    } else {
        p = predict(model, read_input(o.input, model.spectrum_kind, model.grid, o.format).values);
    }
    emit(prediction_json(p, to_string(model.kind), model.seed, o.top), o.out);
    return 0;
}

int cmd_libs_synth(const Options& o) {
    const auto lines = LineTable::load(o.lines);
    const auto comp = composition_from_json(json_arg(o.composition));
    std::vector<std::string> skipped;
    SynthOptions opt;
    opt.sigma_nm = o.sigma;
    opt.skip_missing = o.skip_missing;
    opt.skipped = &skipped;
    const auto s = synth_libs_spectrum(comp, lines, GridSpec::libs(), opt);
    for (const auto& el : skipped) std::cerr << "warning: no lines for " << el << ", skipped\n";
    write_text_atomic(o.out, spectrum_csv(s));
    return 0;
}

int cmd_libs_estimate(const Options& o) {
    const auto lines = LineTable::load(o.lines);
    json out;
    ElementComposition comp;
    if (o.method == "cosine") {
        const auto s = read_input(o.input, SpectrumKind::LIBS, GridSpec::libs(), o.format);
        const auto est = estimate_composition_cosine(s, lines);
        comp = est.composition;
        out["similarity"] = est.similarity;
        json peaks = json::array();
        for (const auto& p : est.peaks) peaks.push_back({{"wavelength_nm", p.wavelength_nm}, {"height", p.height}});
        out["peaks"] = peaks;
    } else if (o.method == "cnn") {
        if (o.model.empty()) throw ConfigError("--method cnn needs --model");
        const auto model = load_model(o.model);
        comp = predict_libs_cnn(model, read_input(o.input, SpectrumKind::LIBS, model.grid, o.format));
    } else {
        throw ConfigError("unknown method '" + o.method + "' (expected cosine or cnn)");
    }
    out["method"] = o.method;
    out["composition"] = composition_to_json(comp);
    if (!o.minerals.empty())
        out["minerals"] = prediction_to_json(match_mineral_by_composition(comp, load_mineral_table(o.minerals)));
    emit(out, o.out);
    return 0;
}

int cmd_libs_train(const Options& o) {
    const auto lines = LineTable::load(o.lines);
    LibsTrainParams params;
    params.n_samples = o.samples;
    if (!o.config.empty()) {
        const auto j = json_arg(o.config);
        params.max_elements = j.value("max_elements", params.max_elements);
        params.train = TrainConfig::from_json(j.value("train", json::object()));
        if (j.contains("arch")) params.arch = CnnArchitecture::from_json(j["arch"]);
    }
    params.sigma_nm = o.sigma;
    params.train.seed = o.seed;
    save_model(train_libs_cnn(lines, GridSpec::libs(), params), o.out);
    return 0;
}

int cmd_fuse(const Options& o) {
    auto a = prediction_from_json(load_json(o.pred_a));
    auto b = prediction_from_json(load_json(o.pred_b));
    if (a.classes != b.classes) std::tie(a, b) = align_to_intersection(a, b);
    const auto rule = parse_fusion_rule(o.rule);
    Prediction fused;
    if (rule == FusionRule::Svm) {
        if (o.svm_model.empty()) throw ConfigError("--rule svm needs --svm-model");
        fused = apply_fused_svm(load_model(o.svm_model), a, b);
    } else {
        fused = fuse(rule, a, b);
    }
    json j = prediction_to_json(fused);
    j["rule"] = o.rule;
    if (fused.degenerate) {
        j["degenerate"] = true;
        std::cerr << "warning: the fused product is zero everywhere; returning uniform scores\n";
    }
    emit(j, o.out);
    return 0;
}

// Pairs file: [{"a": prediction, "b": prediction, "label": species}, ...]
int cmd_fuse_train(const Options& o) {
    const auto j = load_json(o.pairs);
    if (!j.is_array() || j.empty()) throw ConfigError("pairs file must be a nonempty JSON array");
    std::vector<FusionExample> ex;
    for (const auto& item : j) {
        auto a = prediction_from_json(item.at("a"));
        auto b = prediction_from_json(item.at("b"));
        const auto label = item.at("label").get<std::string>();
        const auto it = std::find(a.classes.begin(), a.classes.end(), label);
        if (it == a.classes.end()) throw ConfigError("label '" + label + "' is not in the class list");
        ex.push_back({std::move(a), std::move(b), static_cast<int>(it - a.classes.begin())});
    }
    SvmParams params;
    if (!o.config.empty()) {
        const auto c = json_arg(o.config);
        params.epochs = c.value("epochs", params.epochs);
        params.learning_rate = c.value("learning_rate", params.learning_rate);
        params.reg = c.value("reg", params.reg);
    }
    auto model = fuse_svm(ex, params);
    model.seed = o.seed;
    save_model(model, o.out);
    return 0;
}

int cmd_evaluate(const Options& o) {
    const auto cfg = ExperimentConfig::load(o.config);
    const auto results = run_experiment(cfg, o.jobs);
    write_experiment_outputs(cfg, results, o.out);
    std::cout << report_markdown(cfg, summarize(results));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mineral identification from Raman, VNIR and LIBS spectra"};
    app.require_subcommand(1);
    Options o;

    auto seed_opt = [&](CLI::App* sub) {
        sub->add_option("--seed", o.seed, "Random seed")->envname("SPECTRAMIN_SEED");
    };
    std::function<int()> action;
    auto on = [&](CLI::App* sub, int (*fn)(const Options&)) { sub->callback([&, fn] { action = [&, fn] { return fn(o); }; }); };

    auto* ingest = app.add_subcommand("ingest", "Build a dataset from a manifest");
    ingest->add_option("--manifest", o.manifest)->required()->check(CLI::ExistingFile);
    ingest->add_option("--out", o.out)->required();
    on(ingest, cmd_ingest);

    auto* split = app.add_subcommand("split", "Make a train/test plan");
    split->add_option("--dataset", o.dataset)->required()->check(CLI::ExistingFile);
    split->add_option("--protocol", o.protocol)->check(CLI::IsMember({"three-per-species", "loo"}));
    split->add_option("--out", o.out)->required();
    seed_opt(split);
    on(split, cmd_split);

    auto* aug = app.add_subcommand("augment", "Augment the training part of a plan");
    aug->add_option("--dataset", o.dataset)->required()->check(CLI::ExistingFile);
    aug->add_option("--plan", o.plan)->check(CLI::ExistingFile);
    aug->add_option("--technique", o.technique)
        ->required()
        ->check(CLI::IsMember({"none", "shift", "offset", "noise", "bjerrum", "smote"}));
    aug->add_option("--params", o.config, "Augmentation magnitudes (JSON file or inline)");
    aug->add_option("--out", o.out)->required();
    seed_opt(aug);
    on(aug, cmd_augment);

    auto* train = app.add_subcommand("train", "Train a classifier");
    train->add_option("--dataset", o.dataset)->required()->check(CLI::ExistingFile);
    train->add_option("--plan", o.plan)->check(CLI::ExistingFile);
    train->add_option("--dataset-b", o.dataset_b, "Second modality (two-stream)")->check(CLI::ExistingFile);
    train->add_option("--plan-b", o.plan_b)->check(CLI::ExistingFile);
    train->add_option("--model", o.model_kind)
        ->required()
        ->check(CLI::IsMember({"knn", "trees", "svm", "cnn", "ensemble6", "two-stream"}));
    train->add_option("--config", o.config, "Model config (JSON file or inline)");
    train->add_option("--out", o.out)->required();
    seed_opt(train);
    on(train, cmd_train);

    auto* pred = app.add_subcommand("predict", "Rank species for a spectrum");
    pred->add_option("--model", o.model)->required()->check(CLI::ExistingFile);
    pred->add_option("--input", o.input)->required()->check(CLI::ExistingFile);
    pred->add_option("--input-b", o.input_b, "Second-modality spectrum (two-stream)")->check(CLI::ExistingFile);
    pred->add_option("--format", o.format)->check(CLI::IsMember({"auto", "rruff", "csv"}));
    pred->add_option("--top", o.top)->check(CLI::PositiveNumber);
    pred->add_option("--out", o.out, "Write JSON here instead of stdout");
    on(pred, cmd_predict);

    auto* libs = app.add_subcommand("libs", "LIBS composition tools");
    libs->require_subcommand(1);
    auto* synth = libs->add_subcommand("synth", "Synthesize a LIBS spectrum");
    synth->add_option("--lines", o.lines)->required()->check(CLI::ExistingFile);
    synth->add_option("--composition", o.composition, "JSON file or inline object of element fractions")->required();
    synth->add_option("--sigma", o.sigma)->check(CLI::PositiveNumber);
    synth->add_flag("--skip-missing", o.skip_missing, "Skip elements without lines instead of failing");
    synth->add_option("--out", o.out)->required();
    on(synth, cmd_libs_synth);

    auto* estimate = libs->add_subcommand("estimate", "Estimate elemental composition");
    estimate->add_option("--lines", o.lines)->required()->check(CLI::ExistingFile);
    estimate->add_option("--input", o.input)->required()->check(CLI::ExistingFile);
    estimate->add_option("--method", o.method)->check(CLI::IsMember({"cosine", "cnn"}));
    estimate->add_option("--model", o.model)->check(CLI::ExistingFile);
    estimate->add_option("--minerals", o.minerals, "name,formula table to rank minerals")->check(CLI::ExistingFile);
    estimate->add_option("--format", o.format)->check(CLI::IsMember({"auto", "rruff", "csv"}));
    estimate->add_option("--out", o.out);
    on(estimate, cmd_libs_estimate);

    auto* ltrain = libs->add_subcommand("train", "Train the LIBS composition regressor");
    ltrain->add_option("--lines", o.lines)->required()->check(CLI::ExistingFile);
    ltrain->add_option("--samples", o.samples)->check(CLI::PositiveNumber);
    ltrain->add_option("--sigma", o.sigma)->check(CLI::PositiveNumber);
    ltrain->add_option("--config", o.config);
    ltrain->add_option("--out", o.out)->required();
    seed_opt(ltrain);
    on(ltrain, cmd_libs_train);

    auto* fusecmd = app.add_subcommand("fuse", "Fuse two prediction files");
    fusecmd->add_option("--pred-a", o.pred_a)->required()->check(CLI::ExistingFile);
    fusecmd->add_option("--pred-b", o.pred_b)->required()->check(CLI::ExistingFile);
    fusecmd->add_option("--rule", o.rule)->required()->check(CLI::IsMember({"ave", "mul", "sq", "svm"}));
    fusecmd->add_option("--svm-model", o.svm_model)->check(CLI::ExistingFile);
    fusecmd->add_option("--out", o.out);
    on(fusecmd, cmd_fuse);

    auto* ftrain = app.add_subcommand("fuse-train", "Train the SVM fusion rule on held-out prediction pairs");
    ftrain->add_option("--pairs", o.pairs)->required()->check(CLI::ExistingFile);
    ftrain->add_option("--config", o.config, "SVM parameters (JSON file or inline)");
    ftrain->add_option("--out", o.out)->required();
    seed_opt(ftrain);
    on(ftrain, cmd_fuse_train);

    auto* eval = app.add_subcommand("evaluate", "Run a cross-validation experiment");
    eval->add_option("--config", o.config)->required()->check(CLI::ExistingFile);
    eval->add_option("--out", o.out)->required();
    eval->add_option("--jobs", o.jobs, "Parallel runs")->check(CLI::PositiveNumber);
    on(eval, cmd_evaluate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    try {
        return action ? action() : 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.category() == ErrorCategory::Validation ? 1 : 2;
    } catch (const json::exception& e) {
        std::cerr << "error: malformed JSON: " << e.what() << "\n";
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
