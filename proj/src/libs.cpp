#include "spectramin/libs.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "spectramin/datasets.hpp"
#include "spectramin/error.hpp"

namespace spectramin {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Splits one CSV record; double quotes group fields containing commas.
std::vector<std::string> split_csv(std::string_view line) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (c == '"') {
            if (quoted && i + 1 < line.size() && line[i + 1] == '"') {
                out.back().push_back('"');
                ++i;
            } else {
                quoted = !quoted;
            }
        } else if (c == ',' && !quoted) {
            out.emplace_back();
        } else {
            out.back().push_back(c);
        }
    }
    if (quoted) throw ParseError("unterminated quote in CSV record");
    for (auto& f : out) f = std::string(trim(f));
    return out;
}

template <class F>
void for_each_record(std::string_view text, F&& f) {
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        f(split_csv(line), line_no);
    }
}

double parse_number(const std::string& s, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": '" + s + "' is not a number");
    }
}

} // namespace

// ---------------------------------------------------------------------------
// Line table

LineTable::LineTable(std::vector<EmissionLine> lines) {
    for (auto& l : lines) add(std::move(l));
}

void LineTable::add(EmissionLine line) {
    if (!is_element_symbol(line.element)) throw ParseError("unknown element symbol '" + line.element + "'");
    if (!(line.wavelength_nm > 0.0) || !std::isfinite(line.wavelength_nm))
        throw ParseError("line wavelength must be positive");
    if (!(line.rel_intensity >= 0.0) || !std::isfinite(line.rel_intensity))
        throw ParseError("line intensity must be nonnegative");
    if (line.stage < 1) throw ParseError("ionization stage must be >= 1");
    lines_.push_back(std::move(line));
}

std::vector<std::string> LineTable::elements() const {
    std::set<std::string> s;
    for (const auto& l : lines_) s.insert(l.element);
    std::vector<std::string> out(s.begin(), s.end());
    std::sort(out.begin(), out.end(),
              [](const std::string& a, const std::string& b) { return atomic_number(a) < atomic_number(b); });
    return out;
}

std::vector<EmissionLine> LineTable::lines_for(const std::string& element) const {
    std::vector<EmissionLine> out;
    for (const auto& l : lines_)
        if (l.element == element) out.push_back(l);
    return out;
}

bool LineTable::has(const std::string& element) const {
    return std::any_of(lines_.begin(), lines_.end(), [&](const EmissionLine& l) { return l.element == element; });
}

LineTable LineTable::from_csv(std::string_view text) {
    LineTable t;
    bool first = true;
    for_each_record(text, [&](const std::vector<std::string>& f, std::size_t line_no) {
        const bool header = first && !f.empty() && f[0] == "element";
        first = false;
        if (header) return;
        if (f.size() != 4)
            throw ParseError("line " + std::to_string(line_no) + ": expected element,stage,wavelength_nm,rel_intensity");
        const double stage = parse_number(f[1], line_no);
        if (stage != std::floor(stage)) throw ParseError("line " + std::to_string(line_no) + ": stage must be an integer");
        t.add({f[0], static_cast<int>(stage), parse_number(f[2], line_no), parse_number(f[3], line_no)});
    });
    if (t.size() == 0) throw ParseError("line table is empty");
    return t;
}

LineTable LineTable::load(const std::filesystem::path& path) { return from_csv(read_text_file(path)); }

std::string LineTable::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "element,stage,wavelength_nm,rel_intensity\n";
    for (const auto& l : lines_) out << l.element << ',' << l.stage << ',' << l.wavelength_nm << ',' << l.rel_intensity << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// Synthesis

std::vector<double> synth_libs_raw(const ElementComposition& comp, const LineTable& lines, const GridSpec& grid,
                                   const SynthOptions& opt) {
    grid.validate();
    if (!(opt.sigma_nm > 0.0)) throw ConfigError("sigma_nm must be positive");
    std::vector<double> out(grid.n_points, 0.0);
    const double step = grid.step();
    const double reach = 12.0 * opt.sigma_nm;
    const double inv2s2 = 1.0 / (2.0 * opt.sigma_nm * opt.sigma_nm);
    for (const auto& [el, frac] : comp) {
        if (!(frac >= 0.0) || !std::isfinite(frac)) throw FormulaError("fraction of " + el + " is not a nonnegative number");
        if (frac == 0.0) continue;
        const auto el_lines = lines.lines_for(el);
        if (el_lines.empty()) {
            if (!opt.skip_missing) throw MissingLines("no emission lines for element " + el);
            if (opt.skipped) opt.skipped->push_back(el);
            continue;
        }
        for (const auto& l : el_lines) {
            const double lo = (l.wavelength_nm - reach - grid.start) / step;
            const double hi = (l.wavelength_nm + reach - grid.start) / step;
            if (hi < 0.0 || lo > static_cast<double>(grid.n_points - 1)) continue;
            const auto i0 = static_cast<std::size_t>(std::max(0.0, std::ceil(lo)));
            const auto i1 = static_cast<std::size_t>(std::min(static_cast<double>(grid.n_points - 1), std::floor(hi)));
            for (std::size_t i = i0; i <= i1; ++i) {
                const double d = grid.position(i) - l.wavelength_nm;
                out[i] += frac * l.rel_intensity * std::exp(-d * d * inv2s2);
            }
        }
    }
    return out;
}

Spectrum synth_libs_spectrum(const ElementComposition& comp, const LineTable& lines, const GridSpec& grid,
                             const SynthOptions& opt) {
    const auto raw = synth_libs_raw(comp, lines, grid, opt);
    Spectrum s;
    s.grid = grid;
    s.values = normalize_unit(raw);
    s.kind = SpectrumKind::LIBS;
    return s;
}

// ---------------------------------------------------------------------------
// Peaks

std::vector<Peak> detect_peaks(std::span<const double> v, const GridSpec& grid, const PeakParams& params) {
    if (v.size() != grid.n_points) throw InvalidSpectrum("spectrum length does not match its grid");
    const std::size_t n = v.size();
    std::vector<Peak> out;
    std::size_t i = 1;
    while (i + 1 < n) {
        if (!(v[i] > v[i - 1])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && v[j + 1] == v[i]) ++j;
        if (j + 1 >= n || !(v[j + 1] < v[i])) {
            i = j + 1;
            continue;
        }
        const std::size_t p = (i + j) / 2;
        const double h = v[p];

        // Topographic prominence: lowest point on each side before terrain
        // higher than the peak, the higher of the two is the key col.
        double left_min = h;
        for (std::size_t k = i; k-- > 0;) {
            if (v[k] > h) break;
            left_min = std::min(left_min, v[k]);
        }
        double right_min = h;
        for (std::size_t k = j + 1; k < n; ++k) {
            if (v[k] > h) break;
            right_min = std::min(right_min, v[k]);
        }
        const double prominence = h - std::max(left_min, right_min);

        if (h >= params.min_height && prominence >= params.min_prominence && h > 0.0) {
            Peak pk{p, grid.position(p), h, prominence};
            if (i == j) {
                const double a = v[p - 1], b = v[p], c = v[p + 1];
                double delta = 0.0, apex = b;
                if (a > 0.0 && c > 0.0) {
                    const double la = std::log(a), lb = std::log(b), lc = std::log(c);
                    const double den = la - 2.0 * lb + lc;
                    if (den < 0.0) {
                        delta = std::clamp(0.5 * (la - lc) / den, -0.5, 0.5);
                        apex = std::exp(lb - 0.25 * (la - lc) * delta);
                    }
                } else {
                    const double den = a - 2.0 * b + c;
                    if (den < 0.0) {
                        delta = std::clamp(0.5 * (a - c) / den, -0.5, 0.5);
                        apex = b - 0.25 * (a - c) * delta;
                    }
                }
                pk.wavelength_nm = std::clamp(grid.position(p) + delta * grid.step(), grid.start, grid.end);
                pk.height = apex;
            }
            out.push_back(pk);
        }
        i = j + 1;
    }
    return out;
}

std::vector<Peak> detect_peaks(const Spectrum& spectrum, const PeakParams& params) {
    return detect_peaks(spectrum.values, spectrum.grid, params);
}

// ---------------------------------------------------------------------------
// Weighted vectors and the cosine estimator

Binning Binning::for_grid(const GridSpec& grid, double width) {
    grid.validate();
    if (!(width > 0.0)) throw ConfigError("bin width must be positive");
    return {grid.start, width, static_cast<std::size_t>(std::floor((grid.end - grid.start) / width)) + 1};
}

std::optional<std::size_t> Binning::bin_of(double wavelength_nm) const {
    const double r = (wavelength_nm - start) / width;
    if (!(r >= 0.0)) return std::nullopt;
    const auto b = static_cast<std::size_t>(std::floor(r));
    if (b >= n_bins) return std::nullopt;
    return b;
}

double sparse_dot(const SparseVector& a, const SparseVector& b) {
    const auto& small = a.size() <= b.size() ? a : b;
    const auto& large = a.size() <= b.size() ? b : a;
    double s = 0.0;
    for (const auto& [k, v] : small)
        if (auto it = large.find(k); it != large.end()) s += v * it->second;
    return s;
}

double sparse_norm(const SparseVector& a) { return std::sqrt(sparse_dot(a, a)); }

std::map<std::string, SparseVector> element_weight_vectors(const LineTable& lines, const Binning& binning) {
    std::map<std::string, SparseVector> out;
    for (const auto& l : lines.lines()) {
        const auto b = binning.bin_of(l.wavelength_nm);
        if (!b || l.rel_intensity <= 0.0) continue;
        out[l.element][*b] += l.rel_intensity;
    }
    for (auto& [el, vec] : out) {
        const double n = sparse_norm(vec);
        for (auto& [k, v] : vec) v /= n;
    }
    return out;
}

CosineEstimate estimate_composition_cosine(const Spectrum& spectrum, const LineTable& lines,
                                           const CosineParams& params) {
    CosineEstimate est;
    est.peaks = detect_peaks(spectrum, params.peaks);
    if (est.peaks.empty()) throw NoPeaksError("no peaks detected in the query spectrum");
    const auto binning = Binning::for_grid(spectrum.grid, params.bin_width);
    SparseVector query;
    for (const auto& p : est.peaks)
        if (auto b = binning.bin_of(p.wavelength_nm)) query[*b] += p.height;
    const double qn = sparse_norm(query);
    if (!(qn > 0.0)) throw NoPeaksError("detected peaks carry no intensity");

    const auto vectors = element_weight_vectors(lines, binning);
    std::map<std::string, double> kept;
    for (const auto& el : lines.elements()) {
        double sim = 0.0;
        if (auto it = vectors.find(el); it != vectors.end()) sim = std::max(0.0, sparse_dot(query, it->second) / qn);
        est.similarity[el] = sim;
        if (sim >= params.similarity_floor) kept[el] = sim;
    }
    if (kept.empty()) throw NoPeaksError("no detected peak matches a line in the table");
    est.composition = normalize_composition(kept);
    return est;
}

// ---------------------------------------------------------------------------
// Composition comparison and mineral matching

double composition_mae(const ElementComposition& pred, const ElementComposition& truth) {
    std::set<std::string> keys;
    for (const auto& [k, v] : pred) keys.insert(k);
    for (const auto& [k, v] : truth) keys.insert(k);
    if (keys.empty()) throw StatsError("both compositions are empty");
    double s = 0.0;
    for (const auto& k : keys) {
        const auto a = pred.count(k) ? pred.at(k) : 0.0;
        const auto b = truth.count(k) ? truth.at(k) : 0.0;
        s += std::abs(a - b);
    }
    return s / static_cast<double>(keys.size());
}

double composition_cosine(const ElementComposition& a, const ElementComposition& b) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (const auto& [k, v] : a) {
        aa += v * v;
        if (auto it = b.find(k); it != b.end()) ab += v * it->second;
    }
    for (const auto& [k, v] : b) bb += v * v;
    if (aa == 0.0 || bb == 0.0) throw ZeroVector("composition cosine of an all-zero composition");
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

Prediction match_mineral_by_composition(const ElementComposition& est,
                                        const std::map<std::string, ElementComposition>& minerals) {
    if (minerals.empty()) throw ConfigError("mineral table is empty");
    double norm = 0.0;
    for (const auto& [k, v] : est) norm += v * v;
    if (norm == 0.0) throw ZeroVector("estimated composition is all zero");
    std::vector<std::string> names;
    std::vector<double> scores;
    for (const auto& [name, comp] : minerals) {
        names.push_back(name);
        scores.push_back(std::max(0.0, composition_cosine(est, comp)));
    }
    return Prediction::from_scores(std::move(names), std::move(scores));
}

std::map<std::string, ElementComposition> parse_mineral_table(std::string_view text) {
    std::map<std::string, ElementComposition> out;
    bool first = true;
    for_each_record(text, [&](const std::vector<std::string>& f, std::size_t line_no) {
        const bool header = first && f.size() == 2 && f[0] == "name" && f[1] == "formula";
        first = false;
        if (header) return;
        if (f.size() != 2 || f[0].empty())
            throw ParseError("line " + std::to_string(line_no) + ": expected name,formula (quote formulas with commas)");
        if (out.count(f[0])) throw ParseError("duplicate mineral '" + f[0] + "'");
        out[f[0]] = parse_formula(f[1]).fractions;
    });
    if (out.empty()) throw ParseError("mineral table is empty");
    return out;
}

std::map<std::string, ElementComposition> load_mineral_table(const std::filesystem::path& path) {
    return parse_mineral_table(read_text_file(path));
}

ElementComposition composition_from_json(const nlohmann::json& j) {
    const auto& obj = j.contains("composition") ? j["composition"] : j;
    if (!obj.is_object()) throw ConfigError("composition must be a JSON object of element fractions");
    std::map<std::string, double> w;
    for (const auto& [k, v] : obj.items()) {
        if (!v.is_number()) throw ConfigError("fraction of " + k + " is not a number");
        if (!is_element_symbol(k)) throw FormulaError("unknown element symbol '" + k + "'");
        w[k] = v.get<double>();
    }
    return normalize_composition(w);
}

nlohmann::json composition_to_json(const ElementComposition& comp) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : comp) j[k] = v;
    return j;
}

} // namespace spectramin
