#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace spectramin {

enum class SpectrumKind { Raman, VNIR, LIBS };

std::string to_string(SpectrumKind kind);
SpectrumKind parse_kind(const std::string& text);

using Meta = std::map<std::string, std::string>;

// Uniform sampling grid: n_points positions from start to end inclusive.
struct GridSpec {
    double start = 0.0;
    double end = 1.0;
    std::size_t n_points = 2;

    double step() const { return (end - start) / static_cast<double>(n_points - 1); }
    double position(std::size_t i) const { return start + step() * static_cast<double>(i); }
    void validate() const;

    bool operator==(const GridSpec&) const = default;

    static GridSpec raman() { return {85.0, 1800.0, 1715}; }
    static GridSpec vnir() { return {350.0, 4000.0, 1715}; }
    static GridSpec libs() { return {200.0, 900.0, 7001}; }
    static GridSpec default_for(SpectrumKind kind);
};

// A measured trace as read from disk. Positions are strictly increasing.
class RawSpectrum {
public:
    RawSpectrum(std::vector<double> positions, std::vector<double> intensities,
                SpectrumKind kind, Meta meta = {});

    const std::vector<double>& positions() const noexcept { return positions_; }
    const std::vector<double>& intensities() const noexcept { return intensities_; }
    SpectrumKind kind() const noexcept { return kind_; }
    const Meta& meta() const noexcept { return meta_; }
    std::size_t size() const noexcept { return positions_.size(); }

private:
    std::vector<double> positions_;
    std::vector<double> intensities_;
    SpectrumKind kind_;
    Meta meta_;
};

// Preprocessed fixed-length spectrum, values in [0, 1].
struct Spectrum {
    GridSpec grid;
    std::vector<double> values;
    SpectrumKind kind = SpectrumKind::Raman;
    Meta meta;
};

// Linear interpolation onto `grid`; grid points outside the measured range are 0.
std::vector<double> resample_linear(const RawSpectrum& raw, const GridSpec& grid);

// Min-max scaling to [0, 1]. A constant input maps to all zeros.
std::vector<double> normalize_unit(std::span<const double> values);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

// Throws ZeroVector if either input has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);
double cosine_distance(std::span<const double> a, std::span<const double> b);

std::vector<double> class_mean(std::span<const std::vector<double>> rows);
std::vector<double> class_mean(std::span<const Spectrum> spectra);

// Indices of rows whose cosine distance to the class mean is <= threshold.
// The mean is computed once over all rows. Never empty: if every row is an
// outlier, the row nearest to the mean is kept. Zero rows count as distance 1.
std::vector<std::size_t> outlier_inliers(std::span<const std::vector<double>> rows,
                                         double threshold = 0.5);

std::vector<Spectrum> remove_outliers(std::span<const Spectrum> class_spectra,
                                      double threshold = 0.5);

// resample_linear followed by normalize_unit.
Spectrum preprocess(const RawSpectrum& raw, const GridSpec& grid);

} // namespace spectramin
