#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

#include "spectramin/datasets.hpp"

namespace testutil {

inline spectramin::Spectrum spec(std::vector<double> v) {
    spectramin::Spectrum s;
    s.grid = {0.0, static_cast<double>(v.size() - 1), v.size()};
    s.values = std::move(v);
    return s;
}

// Dataset on a tiny grid; labels are species names.
inline spectramin::LabeledDataset dataset(const std::vector<std::vector<double>>& rows,
                                          const std::vector<std::string>& labels) {
    spectramin::LabeledDataset ds;
    ds.grid = {0.0, static_cast<double>(rows.at(0).size() - 1), rows.at(0).size()};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto s = spec(rows[i]);
        s.grid = ds.grid;
        ds.add(std::move(s), labels[i], "s" + std::to_string(i));
    }
    return ds;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("spectramin-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

} // namespace testutil
