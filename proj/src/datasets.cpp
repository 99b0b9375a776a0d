#include "spectramin/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include "spectramin/error.hpp"
#include "spectramin/rng.hpp"

namespace spectramin {

using nlohmann::json;

int SpeciesIndex::add(const std::string& name) {
    if (auto it = ids_.find(name); it != ids_.end()) return it->second;
    const int id = static_cast<int>(names_.size());
    names_.push_back(name);
    ids_.emplace(name, id);
    return id;
}

int SpeciesIndex::id(const std::string& name) const {
    auto it = ids_.find(name);
    return it == ids_.end() ? -1 : it->second;
}

void LabeledDataset::add(Spectrum spectrum, const std::string& species_name, std::string id) {
    if (!(spectrum.grid == grid)) throw InvalidSpectrum("sample grid differs from dataset grid");
    LabeledSample s;
    s.species = species.add(species_name);
    s.spectrum = std::move(spectrum);
    s.id = id.empty() ? "s" + std::to_string(samples.size()) : std::move(id);
    samples.push_back(std::move(s));
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
    LabeledDataset out;
    out.kind = kind;
    out.grid = grid;
    out.species = species;
    out.samples.reserve(indices.size());
    for (auto i : indices) out.samples.push_back(samples.at(i));
    return out;
}

std::vector<std::vector<std::size_t>> LabeledDataset::indices_by_species() const {
    std::vector<std::vector<std::size_t>> out(species.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        out[static_cast<std::size_t>(samples[i].species)].push_back(i);
    return out;
}

std::vector<int> LabeledDataset::labels() const {
    std::vector<int> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.species);
    return out;
}

void LabeledDataset::validate() const {
    grid.validate();
    for (const auto& s : samples) {
        if (s.species < 0 || static_cast<std::size_t>(s.species) >= species.size())
            throw ConfigError("sample '" + s.id + "' has an unknown species id");
        if (!(s.spectrum.grid == grid) || s.spectrum.values.size() != grid.n_points)
            throw InvalidSpectrum("sample '" + s.id + "' does not match the dataset grid");
    }
}

std::string to_string(SplitProtocol p) {
    return p == SplitProtocol::ThreePerSpecies ? "three-per-species" : "loo";
}

SplitProtocol parse_protocol(const std::string& text) {
    if (text == "three-per-species" || text == "three") return SplitProtocol::ThreePerSpecies;
    if (text == "loo" || text == "leave-one-out") return SplitProtocol::LeaveOneOutPerSpecies;
    throw ConfigError("unknown split protocol '" + text + "'");
}

void SplitPlan::check_partition(std::size_t n) const {
    std::vector<char> seen(n, 0);
    auto mark = [&](std::size_t i) {
        if (i >= n) throw ConfigError("split index out of range");
        if (seen[i]) throw ConfigError("split index " + std::to_string(i) + " appears twice");
        seen[i] = 1;
    };
    for (auto i : train_indices) mark(i);
    for (auto i : test_indices) mark(i);
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw ConfigError("split does not cover every sample");
}

std::string normalize_species_name(std::string_view name) {
    std::string out;
    bool pending_space = false;
    for (char c : name) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

// "x, y" (extra columns ignored). Whitespace-separated pairs are accepted as well.
bool parse_pair(std::string_view line, double& x, double& y) {
    auto comma = line.find(',');
    if (comma == std::string_view::npos) {
        line = trim(line);
        auto ws = line.find_first_of(" \t");
        if (ws == std::string_view::npos) return false;
        return parse_double(line.substr(0, ws), x) && parse_double(line.substr(ws), y);
    }
    auto rest = line.substr(comma + 1);
    auto comma2 = rest.find(',');
    if (comma2 != std::string_view::npos) rest = rest.substr(0, comma2);
    return parse_double(line.substr(0, comma), x) && parse_double(rest, y);
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        pos = nl + 1;
    }
    return lines;
}

// Sorts ascending by position and averages duplicate positions.
RawSpectrum finish_pairs(std::vector<std::pair<double, double>> pairs, SpectrumKind kind,
                         Meta meta) {
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < pairs.size();) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < pairs.size() && pairs[j].first == pairs[i].first) sum += pairs[j++].second;
        xs.push_back(pairs[i].first);
        ys.push_back(sum / static_cast<double>(j - i));
        i = j;
    }
    if (xs.size() < 2) throw ParseError("need at least 2 distinct positions");
    return RawSpectrum(std::move(xs), std::move(ys), kind, std::move(meta));
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

} // namespace

RawSpectrum parse_rruff_text(std::string_view text, SpectrumKind kind) {
    Meta meta;
    std::vector<std::pair<double, double>> pairs;
    std::size_t line_no = 0;
    for (auto raw : split_lines(text)) {
        ++line_no;
        auto line = trim(raw);
        if (line.empty()) continue;
        if (line.starts_with("##")) {
            auto body = line.substr(2);
            if (trim(body) == "END" || trim(body).starts_with("END=")) break;
            auto eq = body.find('=');
            if (eq == std::string_view::npos) continue;
            auto key = lower(trim(body.substr(0, eq)));
            std::string value(trim(body.substr(eq + 1)));
            if (key == "names" || key == "name") meta["name"] = value;
            else meta[key] = value;
            continue;
        }
        double x, y;
        if (!parse_pair(line, x, y))
            throw ParseError("line " + std::to_string(line_no) + ": expected 'x, y' pair");
        pairs.emplace_back(x, y);
    }
    if (pairs.empty()) throw ParseError("no numeric pairs found");
    if (!meta.contains("name")) throw ParseError("missing ##NAMES or ##NAME header");
    return finish_pairs(std::move(pairs), kind, std::move(meta));
}

RawSpectrum parse_csv_xy(std::string_view text, SpectrumKind kind) {
    std::vector<std::pair<double, double>> pairs;
    std::size_t line_no = 0;
    bool first = true;
    for (auto raw : split_lines(text)) {
        ++line_no;
        auto line = trim(raw);
        if (line.empty()) continue;
        double x, y;
        if (!parse_pair(line, x, y)) {
            if (first) {
                first = false;
                continue;  // header row
            }
            throw ParseError("line " + std::to_string(line_no) + ": expected two numeric columns");
        }
        first = false;
        pairs.emplace_back(x, y);
    }
    if (pairs.size() < 2) throw ParseError("need at least 2 data rows");
    return finish_pairs(std::move(pairs), kind, {});
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_atomic(const std::filesystem::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw ConfigError("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

RawSpectrum read_spectrum_file(const std::filesystem::path& path, SpectrumKind kind,
                               const std::string& format) {
    const auto text = read_text_file(path);
    std::string fmt = format;
    if (fmt == "auto") fmt = trim(text).starts_with("##") ? "rruff" : "csv";
    RawSpectrum raw = [&] {
        try {
            if (fmt == "rruff") return parse_rruff_text(text, kind);
            if (fmt == "csv") return parse_csv_xy(text, kind);
        } catch (const ParseError& e) {
            throw ParseError(path.string() + ": " + e.what());
        }
        throw ManifestError("unknown format '" + format + "'");
    }();
    Meta meta = raw.meta();
    if (!meta.contains("id")) meta["id"] = path.stem().string();
    return RawSpectrum(raw.positions(), raw.intensities(), kind, std::move(meta));
}

LabeledDataset build_dataset(const std::filesystem::path& manifest_path) {
    json manifest;
    try {
        manifest = json::parse(read_text_file(manifest_path));
    } catch (const json::exception& e) {
        throw ManifestError(std::string("invalid manifest JSON: ") + e.what());
    } catch (const ConfigError& e) {
        throw ManifestError(e.what());
    }
    if (!manifest.contains("entries") || !manifest["entries"].is_array())
        throw ManifestError("manifest needs an 'entries' array");
    const auto& entries = manifest["entries"];
    if (entries.empty()) throw ManifestError("manifest lists no files");

    std::optional<SpectrumKind> kind;
    if (manifest.contains("kind")) kind = parse_kind(manifest["kind"].get<std::string>());
    for (const auto& e : entries) {
        if (!e.contains("kind")) continue;
        auto k = parse_kind(e["kind"].get<std::string>());
        if (kind && *kind != k) throw ManifestError("manifest mixes spectrum kinds");
        kind = k;
    }
    if (!kind) throw ManifestError("manifest does not state a spectrum kind");

    LabeledDataset ds;
    ds.kind = *kind;
    ds.grid = GridSpec::default_for(*kind);
    if (manifest.contains("grid")) {
        const auto& g = manifest["grid"];
        ds.grid = {g.at("start").get<double>(), g.at("end").get<double>(),
                   g.at("n_points").get<std::size_t>()};
        ds.grid.validate();
    }

    const auto base = manifest_path.parent_path();
    for (const auto& e : entries) {
        if (!e.contains("file") || !e.contains("species"))
            throw ManifestError("every entry needs 'file' and 'species'");
        const auto format = e.value("format", std::string("auto"));
        if (format != "auto" && format != "rruff" && format != "csv")
            throw ManifestError("unknown format '" + format + "'");
        auto file = std::filesystem::path(e["file"].get<std::string>());
        if (file.is_relative()) file = base / file;
        if (!std::filesystem::exists(file)) throw ManifestError("missing file '" + file.string() + "'");
        auto raw = read_spectrum_file(file, *kind, format);
        auto spectrum = preprocess(raw, ds.grid);
        auto id = spectrum.meta.count("id") ? spectrum.meta.at("id") : std::string{};
        ds.add(std::move(spectrum), e["species"].get<std::string>(), id);
    }
    return ds;
}

SplitPlan split_three_per_species(const LabeledDataset& ds, std::uint64_t seed) {
    SplitPlan plan;
    plan.seed = seed;
    plan.protocol = SplitProtocol::ThreePerSpecies;
    auto rng = make_rng(seed, 0x3A);
    for (auto members : ds.indices_by_species()) {
        if (members.empty()) continue;
        std::shuffle(members.begin(), members.end(), rng);
        const std::size_t n_train = members.size() <= 3 ? members.size() : 3;
        for (std::size_t i = 0; i < members.size(); ++i)
            (i < n_train ? plan.train_indices : plan.test_indices).push_back(members[i]);
    }
    std::sort(plan.train_indices.begin(), plan.train_indices.end());
    std::sort(plan.test_indices.begin(), plan.test_indices.end());
    return plan;
}

SplitPlan split_leave_one_out(const LabeledDataset& ds, std::uint64_t seed) {
    SplitPlan plan;
    plan.seed = seed;
    plan.protocol = SplitProtocol::LeaveOneOutPerSpecies;
    auto rng = make_rng(seed, 0x100);
    for (const auto& members : ds.indices_by_species()) {
        if (members.empty()) continue;
        std::size_t held = members.size();
        if (members.size() >= 2) held = uniform_index(rng, members.size());
        for (std::size_t i = 0; i < members.size(); ++i)
            (i == held ? plan.test_indices : plan.train_indices).push_back(members[i]);
    }
    std::sort(plan.train_indices.begin(), plan.train_indices.end());
    std::sort(plan.test_indices.begin(), plan.test_indices.end());
    return plan;
}

SplitPlan make_split(const LabeledDataset& ds, SplitProtocol protocol, std::uint64_t seed) {
    return protocol == SplitProtocol::ThreePerSpecies ? split_three_per_species(ds, seed)
                                                      : split_leave_one_out(ds, seed);
}

std::vector<std::size_t> filter_training_outliers(const LabeledDataset& ds,
                                                  std::span<const std::size_t> train,
                                                  double threshold) {
    std::vector<std::vector<std::size_t>> by_class(ds.n_classes());
    for (auto i : train) by_class[static_cast<std::size_t>(ds.samples.at(i).species)].push_back(i);
    std::vector<std::size_t> kept;
    for (const auto& members : by_class) {
        if (members.empty()) continue;
        std::vector<std::vector<double>> rows;
        for (auto i : members) rows.push_back(ds.samples[i].spectrum.values);
        for (auto k : outlier_inliers(rows, threshold)) kept.push_back(members[k]);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

namespace {

std::vector<PairedSample> pair_members(const LabeledDataset& a, const LabeledDataset& b,
                                       const std::vector<std::pair<std::size_t, std::size_t>>& cand,
                                       std::size_t cap, Rng& rng, int species,
                                       const std::string& name) {
    std::vector<std::size_t> pick(cand.size());
    std::iota(pick.begin(), pick.end(), 0);
    if (cand.size() > cap) {
        // partial Fisher-Yates, then restore product order
        for (std::size_t i = 0; i < cap; ++i) {
            auto j = i + uniform_index(rng, pick.size() - i);
            std::swap(pick[i], pick[j]);
        }
        pick.resize(cap);
        std::sort(pick.begin(), pick.end());
    }
    std::vector<PairedSample> out;
    out.reserve(pick.size());
    for (auto p : pick) {
        const auto [ia, ib] = cand[p];
        out.push_back({a.samples[ia].spectrum, b.samples[ib].spectrum, species, name, ia, ib});
    }
    return out;
}

} // namespace

std::vector<PairedSample> pair_by_species(const LabeledDataset& a, const LabeledDataset& b,
                                          std::size_t max_pairs_per_species, std::uint64_t seed) {
    if (a.empty() || b.empty()) throw EmptyIntersection("pairing needs two nonempty datasets");
    std::unordered_map<std::string, int> b_ids;
    for (std::size_t i = 0; i < b.species.size(); ++i)
        b_ids.emplace(normalize_species_name(b.species.name(static_cast<int>(i))), static_cast<int>(i));
    const auto a_members = a.indices_by_species();
    const auto b_members = b.indices_by_species();

    auto rng = make_rng(seed, 0x9A1);
    std::vector<PairedSample> out;
    bool any = false;
    for (std::size_t s = 0; s < a.species.size(); ++s) {
        auto it = b_ids.find(normalize_species_name(a.species.name(static_cast<int>(s))));
        if (it == b_ids.end()) continue;
        const auto& bm = b_members[static_cast<std::size_t>(it->second)];
        if (a_members[s].empty() || bm.empty()) continue;
        any = true;
        std::vector<std::pair<std::size_t, std::size_t>> cand;
        for (auto ia : a_members[s])
            for (auto ib : bm) cand.emplace_back(ia, ib);
        auto part = pair_members(a, b, cand, max_pairs_per_species, rng, static_cast<int>(s),
                                 a.species.name(static_cast<int>(s)));
        std::move(part.begin(), part.end(), std::back_inserter(out));
    }
    if (!any) throw EmptyIntersection("datasets share no species");
    return out;
}

std::vector<PairedSample> pair_same_modality(const LabeledDataset& ds, std::uint64_t seed,
                                             std::size_t max_pairs_per_species) {
    auto rng = make_rng(seed, 0x5A3E);
    std::vector<PairedSample> out;
    const auto members = ds.indices_by_species();
    for (std::size_t s = 0; s < members.size(); ++s) {
        std::vector<std::pair<std::size_t, std::size_t>> cand;
        for (auto i : members[s])
            for (auto j : members[s])
                if (i != j) cand.emplace_back(i, j);
        if (cand.empty()) continue;
        auto part = pair_members(ds, ds, cand, max_pairs_per_species, rng, static_cast<int>(s),
                                 ds.species.name(static_cast<int>(s)));
        std::move(part.begin(), part.end(), std::back_inserter(out));
    }
    return out;
}

std::vector<std::string> common_species(const LabeledDataset& a, const LabeledDataset& b) {
    std::unordered_map<std::string, bool> in_b;
    for (const auto& n : b.species.names()) in_b[normalize_species_name(n)] = true;
    std::vector<std::string> out;
    for (const auto& n : a.species.names())
        if (in_b.contains(normalize_species_name(n))) out.push_back(n);
    return out;
}

LabeledDataset restrict_to_species(const LabeledDataset& ds, const std::vector<std::string>& names) {
    LabeledDataset out;
    out.kind = ds.kind;
    out.grid = ds.grid;
    std::unordered_map<std::string, int> wanted;
    for (const auto& n : names) wanted.emplace(normalize_species_name(n), out.species.add(n));
    for (const auto& s : ds.samples) {
        auto it = wanted.find(normalize_species_name(ds.species.name(s.species)));
        if (it == wanted.end()) continue;
        LabeledSample copy = s;
        copy.species = it->second;
        out.samples.push_back(std::move(copy));
    }
    return out;
}

json dataset_to_json(const LabeledDataset& ds) {
    json j;
    j["format"] = "spectramin-dataset";
    j["version"] = 1;
    j["kind"] = to_string(ds.kind);
    j["grid"] = {{"start", ds.grid.start}, {"end", ds.grid.end}, {"n_points", ds.grid.n_points}};
    j["species"] = ds.species.names();
    json samples = json::array();
    for (const auto& s : ds.samples) {
        samples.push_back({{"id", s.id},
                           {"species", s.species},
                           {"meta", s.spectrum.meta},
                           {"values", s.spectrum.values}});
    }
    j["samples"] = std::move(samples);
    return j;
}

LabeledDataset dataset_from_json(const json& j) {
    try {
        if (j.value("format", std::string{}) != "spectramin-dataset")
            throw ConfigError("not a spectramin dataset file");
        if (j.at("version").get<int>() != 1) throw ConfigError("unsupported dataset version");
        LabeledDataset ds;
        ds.kind = parse_kind(j.at("kind").get<std::string>());
        const auto& g = j.at("grid");
        ds.grid = {g.at("start").get<double>(), g.at("end").get<double>(),
                   g.at("n_points").get<std::size_t>()};
        for (const auto& name : j.at("species")) ds.species.add(name.get<std::string>());
        for (const auto& s : j.at("samples")) {
            LabeledSample sample;
            sample.id = s.at("id").get<std::string>();
            sample.species = s.at("species").get<int>();
            sample.spectrum.grid = ds.grid;
            sample.spectrum.kind = ds.kind;
            sample.spectrum.meta = s.value("meta", Meta{});
            sample.spectrum.values = s.at("values").get<std::vector<double>>();
            ds.samples.push_back(std::move(sample));
        }
        ds.validate();
        return ds;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed dataset: ") + e.what());
    }
}

json plan_to_json(const SplitPlan& plan) {
    return {{"format", "spectramin-split"},
            {"protocol", to_string(plan.protocol)},
            {"seed", plan.seed},
            {"train", plan.train_indices},
            {"test", plan.test_indices}};
}

SplitPlan plan_from_json(const json& j) {
    try {
        SplitPlan plan;
        plan.protocol = parse_protocol(j.at("protocol").get<std::string>());
        plan.seed = j.at("seed").get<std::uint64_t>();
        plan.train_indices = j.at("train").get<std::vector<std::size_t>>();
        plan.test_indices = j.at("test").get<std::vector<std::size_t>>();
        return plan;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed split plan: ") + e.what());
    }
}

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path) {
    write_text_atomic(path, dataset_to_json(ds).dump());
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
    try {
        return dataset_from_json(json::parse(read_text_file(path)));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

} // namespace spectramin
