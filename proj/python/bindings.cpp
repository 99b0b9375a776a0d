#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "spectramin/augment.hpp"
#include "spectramin/datasets.hpp"
#include "spectramin/error.hpp"
#include "spectramin/evalharness.hpp"
#include "spectramin/formula.hpp"
#include "spectramin/fusion.hpp"
#include "spectramin/learners.hpp"
#include "spectramin/libs.hpp"
#include "spectramin/synthetic.hpp"

namespace py = pybind11;
using namespace spectramin;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; Python's json module does the rest.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }
json from_py(const py::handle& o) { return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>()); }

// Owned for the life of the process; never released at interpreter shutdown.
py::handle validation_error;
py::handle runtime_failure;

Prediction prediction_arg(const py::handle& o) {
    if (py::isinstance<Prediction>(o)) return o.cast<Prediction>();
    return prediction_from_json(from_py(o));
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Mineral classification from Raman, VNIR and LIBS spectra";

    validation_error = py::exception<Error>(m, "ValidationError", PyExc_ValueError).release();
    runtime_failure = py::exception<ZeroVector>(m, "SpectraminRuntimeError", PyExc_RuntimeError).release();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            const auto target = e.category() == ErrorCategory::Validation ? validation_error : runtime_failure;
            py::object exc = target(e.what());
            exc.attr("code") = e.code();
            PyErr_SetObject(target.ptr(), exc.ptr());
        } catch (const json::exception& e) {
            PyErr_SetString(validation_error.ptr(), e.what());
        }
    });

    py::enum_<SpectrumKind>(m, "SpectrumKind")
        .value("Raman", SpectrumKind::Raman)
        .value("VNIR", SpectrumKind::VNIR)
        .value("LIBS", SpectrumKind::LIBS);

    py::class_<GridSpec>(m, "GridSpec")
        .def(py::init<>())
        .def(py::init([](double start, double end, std::size_t n) {
                 GridSpec g{start, end, n};
                 g.validate();
                 return g;
             }),
             py::arg("start"), py::arg("end"), py::arg("n_points"))
        .def_readwrite("start", &GridSpec::start)
        .def_readwrite("end", &GridSpec::end)
        .def_readwrite("n_points", &GridSpec::n_points)
        .def("step", &GridSpec::step)
        .def("position", &GridSpec::position)
        .def_static("raman", &GridSpec::raman)
        .def_static("vnir", &GridSpec::vnir)
        .def_static("libs", &GridSpec::libs)
        .def("__eq__", [](const GridSpec& a, const GridSpec& b) { return a == b; })
        .def("__repr__", [](const GridSpec& g) {
            return "GridSpec(" + std::to_string(g.start) + ", " + std::to_string(g.end) + ", " +
                   std::to_string(g.n_points) + ")";
        });

    py::class_<Spectrum>(m, "Spectrum")
        .def(py::init<>())
        .def(py::init([](GridSpec grid, std::vector<double> values, SpectrumKind kind) {
                 if (values.size() != grid.n_points) throw InvalidSpectrum("values do not match the grid");
                 return Spectrum{grid, std::move(values), kind, {}};
             }),
             py::arg("grid"), py::arg("values"), py::arg("kind") = SpectrumKind::Raman)
        .def_readwrite("grid", &Spectrum::grid)
        .def_readwrite("values", &Spectrum::values)
        .def_readwrite("kind", &Spectrum::kind)
        .def_readwrite("meta", &Spectrum::meta);

    m.def(
        "preprocess",
        [](std::vector<double> positions, std::vector<double> intensities, const GridSpec& grid, SpectrumKind kind) {
            return preprocess(RawSpectrum(std::move(positions), std::move(intensities), kind), grid);
        },
        py::arg("positions"), py::arg("intensities"), py::arg("grid"), py::arg("kind") = SpectrumKind::Raman,
        "Resample onto `grid` and scale to [0, 1].");
    m.def("read_spectrum",
          [](const std::filesystem::path& path, const GridSpec& grid, SpectrumKind kind, const std::string& format) {
              return preprocess(read_spectrum_file(path, kind, format), grid);
          },
          py::arg("path"), py::arg("grid"), py::arg("kind") = SpectrumKind::Raman, py::arg("format") = "auto");
    m.def("cosine_similarity", [](const std::vector<double>& a, const std::vector<double>& b) {
        return cosine_similarity(a, b);
    });
    m.def("outlier_inliers",
          [](const std::vector<std::vector<double>>& rows, double threshold) { return outlier_inliers(rows, threshold); },
          py::arg("rows"), py::arg("threshold") = 0.5);

    py::class_<Prediction>(m, "Prediction")
        .def(py::init([](std::vector<std::string> classes, std::vector<double> scores) {
                 return Prediction::from_scores(std::move(classes), std::move(scores));
             }),
             py::arg("classes"), py::arg("scores"))
        .def_readonly("classes", &Prediction::classes)
        .def_readonly("scores", &Prediction::scores)
        .def_readonly("degenerate", &Prediction::degenerate)
        .def("argmax", &Prediction::argmax)
        .def("top_class", &Prediction::top_class)
        .def("ranking", &Prediction::ranking)
        .def("entropy", &Prediction::entropy)
        .def("to_dict", [](const Prediction& p) { return to_py(prediction_to_json(p)); });

    py::class_<LabeledDataset>(m, "Dataset")
        .def_property_readonly("kind", [](const LabeledDataset& d) { return d.kind; })
        .def_property_readonly("grid", [](const LabeledDataset& d) { return d.grid; })
        .def_property_readonly("species", [](const LabeledDataset& d) { return d.species.names(); })
        .def_property_readonly("labels", &LabeledDataset::labels)
        .def_property_readonly("ids",
                               [](const LabeledDataset& d) {
                                   std::vector<std::string> ids;
                                   for (const auto& s : d.samples) ids.push_back(s.id);
                                   return ids;
                               })
        .def("spectrum", [](const LabeledDataset& d, std::size_t i) { return d.samples.at(i).spectrum; })
        .def("subset", [](const LabeledDataset& d, const std::vector<std::size_t>& idx) { return d.subset(idx); })
        .def("save", [](const LabeledDataset& d, const std::filesystem::path& p) { save_dataset(d, p); })
        .def("__len__", &LabeledDataset::size);

    m.def("build_dataset", &build_dataset, py::arg("manifest"));
    m.def("load_dataset", &load_dataset, py::arg("path"));
    m.def("raman_library", [](const py::dict& params) { return make_raman_library(RamanLibraryParams::from_json(from_py(params))); },
          py::arg("params") = py::dict());
    m.def("complementary", [](const py::dict& params) { return make_complementary(ComplementaryParams::from_json(from_py(params))); },
          py::arg("params") = py::dict());

    m.def(
        "split",
        [](const LabeledDataset& ds, const std::string& protocol, std::uint64_t seed) {
            const auto plan = make_split(ds, parse_protocol(protocol), seed);
            return py::make_tuple(plan.train_indices, plan.test_indices);
        },
        py::arg("dataset"), py::arg("protocol") = "three-per-species", py::arg("seed") = 0,
        "Returns (train_indices, test_indices).");
    m.def(
        "augment",
        [](const LabeledDataset& train, const std::string& technique, std::uint64_t seed, const py::dict& params) {
            return augment(train, parse_technique(technique), seed, AugmentParams::from_json(from_py(params)));
        },
        py::arg("train"), py::arg("technique"), py::arg("seed") = 0, py::arg("params") = py::dict());

    py::class_<TrainedModel>(m, "Model")
        .def_property_readonly("kind", [](const TrainedModel& t) { return to_string(t.kind); })
        .def_property_readonly("classes", [](const TrainedModel& t) { return t.classes; })
        .def_property_readonly("grid", [](const TrainedModel& t) { return t.grid; })
        .def_property_readonly("seed", [](const TrainedModel& t) { return t.seed; })
        .def("predict", [](const TrainedModel& t, const std::vector<double>& x) { return predict(t, x); })
        .def("predict", [](const TrainedModel& t, const Spectrum& s) { return predict(t, s.values); })
        .def("predict_pair",
             [](const TrainedModel& t, const Spectrum& a, const Spectrum& b) {
                 return predict_two_stream(t, a.values, b.values);
             })
        .def("save", [](const TrainedModel& t, const std::filesystem::path& p) { save_model(t, p); })
        .def("to_bytes", [](const TrainedModel& t) { return py::bytes(serialize_model(t)); });

    m.def(
        "train",
        [](const LabeledDataset& train, const py::dict& spec, std::uint64_t seed) {
            return train_model(ModelSpec::from_json(from_py(spec)), train, seed);
        },
        py::arg("train"), py::arg("spec"), py::arg("seed") = 0,
        "`spec` is a model description such as {'model': 'knn', 'k': 5}.");
    m.def("load_model", &load_model, py::arg("path"));
    m.def("model_from_bytes", [](const py::bytes& b) { return deserialize_model(std::string(b)); });

    m.def(
        "fuse",
        [](const std::string& rule, const py::handle& p, const py::handle& q) {
            const auto [a, b] = align_to_intersection(prediction_arg(p), prediction_arg(q));
            return fuse(parse_fusion_rule(rule), a, b);
        },
        py::arg("rule"), py::arg("p"), py::arg("q"),
        "Late fusion of two predictions (ave, mul, sq). Class lists are intersected first.");

    m.def("parse_formula", [](const std::string& text) {
        const auto f = parse_formula(text);
        return py::make_tuple(f.counts, f.fractions);
    });
    py::class_<LineTable>(m, "LineTable")
        .def(py::init<>())
        .def_static("load", &LineTable::load)
        .def_static("from_csv", [](const std::string& text) { return LineTable::from_csv(text); })
        .def("add",
             [](LineTable& t, const std::string& el, int stage, double wl, double rel) {
                 t.add({el, stage, wl, rel});
             },
             py::arg("element"), py::arg("stage"), py::arg("wavelength_nm"), py::arg("rel_intensity"))
        .def("elements", &LineTable::elements)
        .def("__len__", &LineTable::size);
    m.def(
        "synth_libs",
        [](const std::map<std::string, double>& comp, const LineTable& lines, const GridSpec& grid, double sigma) {
            SynthOptions opt;
            opt.sigma_nm = sigma;
            return synth_libs_spectrum(comp, lines, grid, opt);
        },
        py::arg("composition"), py::arg("lines"), py::arg("grid") = GridSpec::libs(), py::arg("sigma_nm") = 0.2);
    m.def(
        "estimate_composition",
        [](const Spectrum& s, const LineTable& lines) {
            const auto est = estimate_composition_cosine(s, lines);
            return py::make_tuple(est.composition, est.similarity);
        },
        py::arg("spectrum"), py::arg("lines"), "Returns (composition, per-element similarity).");
    m.def("composition_mae", &composition_mae);
    m.def("match_mineral",
          &match_mineral_by_composition, py::arg("estimate"), py::arg("minerals"));

    m.def("accuracy_ci", [](const std::vector<double>& acc) {
        const auto ci = accuracy_ci(acc);
        return py::make_tuple(ci.mean, ci.half_width ? py::cast(*ci.half_width) : py::none());
    });
    m.def(
        "run_experiment",
        [](const py::dict& config, std::size_t jobs, const std::filesystem::path& base_dir) {
            const auto cfg = ExperimentConfig::from_json(from_py(config), base_dir);
            std::vector<RunResult> results;
            {
                py::gil_scoped_release release;
                results = run_experiment(cfg, jobs);
            }
            return to_py(results_to_json(cfg, results));
        },
        py::arg("config"), py::arg("jobs") = 1, py::arg("base_dir") = std::filesystem::path{},
        "Runs every configured method and returns the results document.");
}
