#include "spectramin/spectra.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "spectramin/error.hpp"

namespace spectramin {

std::string to_string(SpectrumKind kind) {
    switch (kind) {
    case SpectrumKind::Raman: return "raman";
    case SpectrumKind::VNIR: return "vnir";
    case SpectrumKind::LIBS: return "libs";
    }
    return "raman";
}

SpectrumKind parse_kind(const std::string& text) {
    std::string t;
    for (char c : text) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (t == "raman") return SpectrumKind::Raman;
    if (t == "vnir") return SpectrumKind::VNIR;
    if (t == "libs") return SpectrumKind::LIBS;
    throw ConfigError("unknown spectrum kind '" + text + "'");
}

void GridSpec::validate() const {
    if (!(std::isfinite(start) && std::isfinite(end)) || !(start < end))
        throw InvalidGrid("grid requires start < end");
    if (n_points < 2) throw InvalidGrid("grid requires at least 2 points");
}

GridSpec GridSpec::default_for(SpectrumKind kind) {
    switch (kind) {
    case SpectrumKind::Raman: return raman();
    case SpectrumKind::VNIR: return vnir();
    case SpectrumKind::LIBS: return libs();
    }
    return raman();
}

RawSpectrum::RawSpectrum(std::vector<double> positions, std::vector<double> intensities,
                         SpectrumKind kind, Meta meta)
    : positions_(std::move(positions)), intensities_(std::move(intensities)), kind_(kind),
      meta_(std::move(meta)) {
    if (positions_.size() != intensities_.size())
        throw InvalidSpectrum("positions and intensities differ in length");
    if (positions_.size() < 2) throw InvalidSpectrum("need at least 2 points");
    for (std::size_t i = 0; i < positions_.size(); ++i) {
        if (!std::isfinite(positions_[i]) || !std::isfinite(intensities_[i]))
            throw InvalidSpectrum("non-finite sample at index " + std::to_string(i));
        if (i > 0 && !(positions_[i] > positions_[i - 1]))
            throw InvalidSpectrum("positions must be strictly increasing");
    }
}

std::vector<double> resample_linear(const RawSpectrum& raw, const GridSpec& grid) {
    grid.validate();
    const auto& xs = raw.positions();
    const auto& ys = raw.intensities();
    std::vector<double> out(grid.n_points, 0.0);
    std::size_t j = 0;
    for (std::size_t i = 0; i < grid.n_points; ++i) {
        const double x = grid.position(i);
        if (x < xs.front() || x > xs.back()) continue;
        while (j + 1 < xs.size() && xs[j + 1] < x) ++j;
        if (x == xs[j]) {
            out[i] = ys[j];
            continue;
        }
        if (j + 1 == xs.size()) {
            out[i] = ys[j];
            continue;
        }
        if (x == xs[j + 1]) {
            out[i] = ys[j + 1];
            continue;
        }
        const double t = (x - xs[j]) / (xs[j + 1] - xs[j]);
        out[i] = ys[j] + t * (ys[j + 1] - ys[j]);
    }
    return out;
}

std::vector<double> normalize_unit(std::span<const double> values) {
    std::vector<double> out(values.size(), 0.0);
    if (values.empty()) return out;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double mn = *lo, mx = *hi;
    if (!(mx > mn)) return out;
    const double range = mx - mn;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = std::clamp((values[i] - mn) / range, 0.0, 1.0);
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidSpectrum("cosine_similarity: length mismatch");
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine_similarity of a zero vector");
    return dot(a, b) / (na * nb);
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
    return 1.0 - cosine_similarity(a, b);
}

std::vector<double> class_mean(std::span<const std::vector<double>> rows) {
    if (rows.empty()) throw EmptyClass("class_mean of an empty class");
    std::vector<double> mean(rows.front().size(), 0.0);
    for (const auto& r : rows) {
        if (r.size() != mean.size()) throw InvalidSpectrum("class_mean: rows differ in length");
        for (std::size_t i = 0; i < r.size(); ++i) mean[i] += r[i];
    }
    const double n = static_cast<double>(rows.size());
    for (auto& v : mean) v /= n;
    return mean;
}

std::vector<double> class_mean(std::span<const Spectrum> spectra) {
    if (spectra.empty()) throw EmptyClass("class_mean of an empty class");
    std::vector<std::vector<double>> rows;
    rows.reserve(spectra.size());
    for (const auto& s : spectra) {
        if (!(s.grid == spectra.front().grid)) throw InvalidSpectrum("class_mean: grids differ");
        rows.push_back(s.values);
    }
    return class_mean(rows);
}

std::vector<std::size_t> outlier_inliers(std::span<const std::vector<double>> rows,
                                         double threshold) {
    const auto mean = class_mean(rows);
    const double mean_norm = l2_norm(mean);
    std::vector<std::size_t> kept(rows.size());
    std::iota(kept.begin(), kept.end(), 0);
    if (mean_norm == 0.0) return kept;

    std::vector<double> dist(rows.size(), 1.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double n = l2_norm(rows[i]);
        if (n > 0.0) dist[i] = 1.0 - dot(rows[i], mean) / (n * mean_norm);
    }
    kept.clear();
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (dist[i] <= threshold) kept.push_back(i);
    if (kept.empty()) {
        const auto best = std::min_element(dist.begin(), dist.end()) - dist.begin();
        kept.push_back(static_cast<std::size_t>(best));
    }
    return kept;
}

std::vector<Spectrum> remove_outliers(std::span<const Spectrum> class_spectra, double threshold) {
    if (class_spectra.empty()) throw EmptyClass("remove_outliers of an empty class");
    std::vector<std::vector<double>> rows;
    rows.reserve(class_spectra.size());
    for (const auto& s : class_spectra) rows.push_back(s.values);
    std::vector<Spectrum> out;
    for (auto i : outlier_inliers(rows, threshold)) out.push_back(class_spectra[i]);
    return out;
}

Spectrum preprocess(const RawSpectrum& raw, const GridSpec& grid) {
    Spectrum s;
    s.grid = grid;
    s.kind = raw.kind();
    s.meta = raw.meta();
    s.values = normalize_unit(resample_linear(raw, grid));
    return s;
}

} // namespace spectramin
