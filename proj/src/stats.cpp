#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "spectramin/error.hpp"
#include "spectramin/evalharness.hpp"

namespace spectramin {

AccuracyCI accuracy_ci(std::span<const double> acc) {
    if (acc.empty()) throw StatsError("accuracy_ci of an empty list");
    const double n = static_cast<double>(acc.size());
    double mean = 0.0;
    for (double a : acc) mean += a;
    mean /= n;
    AccuracyCI out{mean, std::nullopt};
    if (acc.size() < 2) return out;
    double ss = 0.0;
    for (double a : acc) ss += (a - mean) * (a - mean);
    out.half_width = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    return out;
}

PcaResult pca_project(std::span<const std::vector<double>> rows, std::size_t k) {
    if (rows.size() < 2) throw StatsError("PCA needs at least two samples");
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto d = static_cast<Eigen::Index>(rows.front().size());
    if (d == 0) throw StatsError("PCA of zero-dimensional data");
    if (k == 0 || static_cast<Eigen::Index>(k) > std::min(n, d))
        throw StatsError("n_components must lie in [1, min(n_samples, n_features)]");

    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != d)
            throw StatsError("PCA rows differ in length");
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    const Eigen::RowVectorXd mu = x.colwise().mean();
    x.rowwise() -= mu;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    Eigen::MatrixXd v = svd.matrixV().leftCols(static_cast<Eigen::Index>(k));
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
        Eigen::Index arg = 0;
        for (Eigen::Index j = 1; j < d; ++j)
            if (std::abs(v(j, c)) > std::abs(v(arg, c))) arg = j;
        if (v(arg, c) < 0.0) v.col(c) *= -1.0;
    }
    const Eigen::MatrixXd proj = x * v;

    PcaResult out;
    out.mean.assign(mu.data(), mu.data() + d);
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
        out.components.emplace_back(v.col(c).data(), v.col(c).data() + d);
        out.explained_variance.push_back(s(c) * s(c) / static_cast<double>(n - 1));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> r(k);
        for (std::size_t c = 0; c < k; ++c) r[c] = proj(i, static_cast<Eigen::Index>(c));
        out.projections.push_back(std::move(r));
    }
    return out;
}

std::vector<ClassMeanStd> class_mean_std(const LabeledDataset& ds, const std::vector<std::string>& species) {
    std::vector<std::string> names = species.empty() ? ds.species.names() : species;
    const auto members = ds.indices_by_species();
    std::vector<ClassMeanStd> out;
    for (const auto& name : names) {
        const int id = ds.species.id(name);
        if (id < 0 || members[static_cast<std::size_t>(id)].empty())
            throw EmptyClass("species '" + name + "' has no spectra");
        const auto& idx = members[static_cast<std::size_t>(id)];
        const std::size_t d = ds.grid.n_points;
        ClassMeanStd c{name, std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
        for (auto i : idx)
            for (std::size_t j = 0; j < d; ++j) c.mean[j] += ds.samples[i].spectrum.values[j];
        for (auto& m : c.mean) m /= static_cast<double>(idx.size());
        for (auto i : idx)
            for (std::size_t j = 0; j < d; ++j) {
                const double e = ds.samples[i].spectrum.values[j] - c.mean[j];
                c.stddev[j] += e * e;
            }
        for (auto& s : c.stddev) s = std::sqrt(s / static_cast<double>(idx.size()));
        out.push_back(std::move(c));
    }
    return out;
}

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

} // namespace

std::string class_mean_std_csv(const LabeledDataset& ds, const std::vector<std::string>& species) {
    std::ostringstream out;
    out.precision(10);
    out << "species,position,mean,stddev\n";
    for (const auto& c : class_mean_std(ds, species))
        for (std::size_t j = 0; j < c.mean.size(); ++j)
            out << csv_field(c.species) << ',' << ds.grid.position(j) << ',' << c.mean[j] << ',' << c.stddev[j] << '\n';
    return out.str();
}

std::string export_pca_csv(const std::vector<std::string>& ids, const std::vector<std::string>& labels,
                           const PcaResult& pca) {
    std::ostringstream out;
    out.precision(12);
    out << "sample_id,species";
    for (std::size_t c = 0; c < pca.explained_variance.size(); ++c) out << ",pc" << c + 1;
    out << '\n';
    for (std::size_t i = 0; i < pca.projections.size(); ++i) {
        out << csv_field(ids.at(i)) << ',' << csv_field(labels.at(i));
        for (double v : pca.projections[i]) out << ',' << v;
        out << '\n';
    }
    return out.str();
}

} // namespace spectramin
