#include <algorithm>
#include <cstdio>
#include <sstream>

#include "spectramin/evalharness.hpp"

namespace spectramin {

using nlohmann::json;

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q.push_back('"');
        q.push_back(c);
    }
    return q + "\"";
}

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
    return buf;
}

// Index of the highest mean accuracy; first wins ties.
std::size_t best_index(const std::vector<MethodSummary>& s) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i].ci.mean > s[best].ci.mean) best = i;
    return best;
}

} // namespace

json results_to_json(const ExperimentConfig& cfg, const std::vector<RunResult>& results) {
    const auto summaries = summarize(results);
    json methods = json::array();
    for (const auto& s : summaries) {
        json m{{"method", s.method},
               {"mean_accuracy", s.ci.mean},
               {"ci95_half_width", s.ci.half_width ? json(*s.ci.half_width) : json(nullptr)},
               {"accuracies", s.accuracies}};
        if (s.mean_composition_mae) m["mean_composition_mae"] = *s.mean_composition_mae;
        methods.push_back(std::move(m));
    }
    json runs = json::array();
    for (const auto& r : results) {
        json ms = json::array();
        for (const auto& m : r.methods) {
            json samples = json::array();
            for (const auto& s : m.samples) {
                const auto top = s.prediction.argmax();
                json js{{"id", s.id},
                        {"label", s.prediction.classes.at(static_cast<std::size_t>(s.label))},
                        {"predicted", s.prediction.classes[top]},
                        {"score_predicted", s.prediction.scores[top]},
                        {"score_label", s.prediction.scores.at(static_cast<std::size_t>(s.label))}};
                if (s.prediction.degenerate) js["degenerate"] = true;
                if (s.composition_similarity) js["composition_similarity"] = *s.composition_similarity;
                if (s.composition_mae) js["composition_mae"] = *s.composition_mae;
                samples.push_back(std::move(js));
            }
            ms.push_back({{"method", m.method}, {"accuracy", m.accuracy}, {"samples", std::move(samples)}});
        }
        runs.push_back({{"run", r.run}, {"seed", r.seed}, {"methods", std::move(ms)}});
    }
    json out{{"name", cfg.name},
             {"mode", to_string(cfg.mode)},
             {"n_runs", cfg.n_runs},
             {"base_seed", cfg.base_seed},
             {"protocol", to_string(cfg.protocol)},
             {"augmentation", to_string(cfg.augmentation)},
             {"methods", std::move(methods)},
             {"runs", std::move(runs)}};
    if (!summaries.empty()) out["best_method"] = summaries[best_index(summaries)].method;
    return out;
}

std::string report_markdown(const ExperimentConfig& cfg, const std::vector<MethodSummary>& summaries) {
    std::ostringstream out;
    out << "# " << cfg.name << "\n\n";
    out << "Mode: " << to_string(cfg.mode) << ". Runs: " << cfg.n_runs << ". Base seed: " << cfg.base_seed;
    if (cfg.mode != ExperimentMode::Libs) out << ". Split: " << to_string(cfg.protocol);
    if (cfg.augmentation != AugmentTechnique::None) out << ". Augmentation: " << to_string(cfg.augmentation);
    out << ".\n\n";
    const bool mae = std::any_of(summaries.begin(), summaries.end(),
                                 [](const MethodSummary& s) { return s.mean_composition_mae.has_value(); });
    out << "| Method | Accuracy | 95% CI | Runs |" << (mae ? " Composition MAE |" : "") << "\n";
    out << "|---|---|---|---|" << (mae ? "---|" : "") << "\n";
    const auto best = summaries.empty() ? 0 : best_index(summaries);
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        const auto& s = summaries[i];
        const std::string b = i == best ? "**" : "";
        out << "| " << b << s.method << b << " | " << b << percent(s.ci.mean) << b << " | "
            << (s.ci.half_width ? "± " + percent(*s.ci.half_width) : std::string("n/a")) << " | "
            << s.accuracies.size() << " |";
        if (mae) {
            char buf[32];
            if (s.mean_composition_mae) std::snprintf(buf, sizeof buf, " %.4f |", *s.mean_composition_mae);
            else std::snprintf(buf, sizeof buf, " n/a |");
            out << buf;
        }
        out << "\n";
    }
    if (!summaries.empty()) out << "\nHighest accuracy in bold.\n";
    return out.str();
}

std::string export_violin_csv(const std::vector<RunResult>& results) {
    struct Row {
        std::string algorithm, sample;
        std::size_t run;
        double sim;
    };
    std::vector<Row> rows;
    for (const auto& r : results)
        for (const auto& m : r.methods)
            for (const auto& s : m.samples)
                if (s.composition_similarity) rows.push_back({m.method, s.id, r.run, *s.composition_similarity});
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.algorithm != b.algorithm) return a.algorithm < b.algorithm;
        if (a.sample != b.sample) return a.sample < b.sample;
        return a.run < b.run;
    });
    std::ostringstream out;
    out.precision(12);
    out << "algorithm,sample_id,run,cosine_similarity\n";
    for (const auto& r : rows)
        out << csv_field(r.algorithm) << ',' << csv_field(r.sample) << ',' << r.run << ',' << r.sim << '\n';
    return out.str();
}

} // namespace spectramin
