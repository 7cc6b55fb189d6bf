#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "qxfer/circuits.hpp"
#include "qxfer/config.hpp"
#include "qxfer/device.hpp"
#include "qxfer/errors.hpp"
#include "qxfer/evalrep.hpp"
#include "qxfer/pipeline.hpp"
#include "qxfer/qsim.hpp"

namespace py = pybind11;
using namespace qxfer;

namespace {

py::dict circuit_dict(const Circuit& c) {
    py::dict d;
    d["id"] = c.id;
    d["family"] = std::string(to_string(c.family));
    d["n_qubits"] = c.n_qubits;
    d["depth"] = c.depth;
    d["gates"] = serialize_gates(c);
    return d;
}

const Circuit& find_circuit(const CircuitSuite& suite, const std::string& id) {
    for (const auto& c : suite.circuits) {
        if (c.id == id) return c;
    }
    throw py::key_error("no circuit with id '" + id + "'");
}

DeviceProfile profile_by_name(const std::string& name) {
    return preset(preset_from_string(name));
}

}  // namespace

PYBIND11_MODULE(_qxfer, m) {
    m.doc() = "Native core of the qxfer cross-device noise-correction pipeline";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);

    py::class_<DeviceProfile>(m, "DeviceProfile")
        .def(py::init<>())
        .def_readwrite("name", &DeviceProfile::name)
        .def_readwrite("t1_us", &DeviceProfile::t1_us)
        .def_readwrite("t2_us", &DeviceProfile::t2_us)
        .def_readwrite("readout_error", &DeviceProfile::readout_error)
        .def_readwrite("cx_error", &DeviceProfile::cx_error)
        .def("__repr__", [](const DeviceProfile& p) {
            return "DeviceProfile(" + p.name + ", t1=" + std::to_string(p.t1_us) + ", t2=" +
                   std::to_string(p.t2_us) + ")";
        });
    m.def("device_preset", &profile_by_name, py::arg("name"), "Preset device profile: SourceA or TargetB");

    m.def(
        "generate_suite",
        [](std::uint64_t seed) {
            py::list out;
            for (const auto& c : generate_suite(seed).circuits) out.append(circuit_dict(c));
            return out;
        },
        py::arg("seed") = 42, "The 85-circuit benchmark suite as a list of dicts");

    m.def(
        "ideal_distribution",
        [](std::uint64_t seed, const std::string& id) {
            const auto suite = generate_suite(seed);
            return ideal_distribution(find_circuit(suite, id)).probs;
        },
        py::arg("seed"), py::arg("circuit_id"));

    m.def(
        "noisy_distribution",
        [](std::uint64_t seed, const std::string& id, const std::string& device) {
            const auto suite = generate_suite(seed);
            return noisy_distribution(find_circuit(suite, id), build_channels(profile_by_name(device))).probs;
        },
        py::arg("seed"), py::arg("circuit_id"), py::arg("device"),
        "Exact noisy output distribution (before shot sampling)");

    m.def(
        "kl_metric", [](const std::vector<double>& p, const std::vector<double>& q) { return kl_metric(p, q); },
        py::arg("p"), py::arg("q"));
    m.def(
        "tv_metric", [](const std::vector<double>& p, const std::vector<double>& q) { return tv_metric(p, q); },
        py::arg("p"), py::arg("q"));

    m.def(
        "improvement_stats",
        [](double zero_shot, double few_shot, double in_domain) {
            const auto s = improvement_stats(zero_shot, few_shot, in_domain);
            py::dict d;
            d["improvement_pct"] = s.improvement_pct;
            d["gap_recovery_pct"] = s.gap_recovery_pct ? py::cast(*s.gap_recovery_pct) : py::none();
            d["warning"] = s.warning;
            return d;
        },
        py::arg("kl_zero_shot"), py::arg("kl_few_shot"), py::arg("kl_in_domain"));

    m.def("default_config", [] { return config_to_json(RunConfig{}); }, "Default run config as JSON text");

    py::class_<Pipeline>(m, "Pipeline")
        .def(py::init([](const std::string& config_json, const std::filesystem::path& run_dir) {
                 return Pipeline(config_json.empty() ? RunConfig{} : config_from_json(config_json), run_dir);
             }),
             py::arg("config_json") = "", py::arg("run_dir") = std::filesystem::path("runs/python"))
        .def_property_readonly("hash", &Pipeline::hash)
        .def_property_readonly("run_dir", &Pipeline::dir)
        .def("gen", [](const Pipeline& p) { return p.gen().circuits.size(); },
             py::call_guard<py::gil_scoped_release>())
        .def("simulate", [](const Pipeline& p, const std::string& backend) { return p.simulate(backend).size(); },
             py::arg("backend"), py::call_guard<py::gil_scoped_release>())
        .def(
            "train",
            [](const Pipeline& p) {
                const auto log = [&] {
                    py::gil_scoped_release release;
                    return p.train().log;
                }();
                py::dict d;
                d["best_epoch"] = log.best_epoch;
                d["best_val_kl"] = log.best_val_kl;
                d["stopped_epoch"] = log.stopped_epoch;
                d["early_stopped"] = log.early_stopped;
                return d;
            })
        .def(
            "eval",
            [](const Pipeline& p, const std::string& condition) {
                const auto m = [&] {
                    py::gil_scoped_release release;
                    return p.eval(condition_from_string(condition));
                }();
                py::dict d;
                d["kl"] = m.kl;
                d["tv"] = m.tv;
                return d;
            },
            py::arg("condition"))
        .def(
            "adapt",
            [](const Pipeline& p, const std::vector<int>& ks, const std::vector<std::uint64_t>& seeds,
               bool replay) {
                const auto runs = [&] {
                    py::gil_scoped_release release;
                    return p.adapt(ks, seeds, replay);
                }();
                py::list out;
                for (const auto& r : runs) {
                    py::dict d;
                    d["k"] = r.k;
                    d["seed"] = r.seed;
                    d["kl"] = r.kl;
                    d["tv"] = r.tv;
                    d["epochs_run"] = r.epochs_run;
                    d["source_val_kl"] = r.source_val_kl;
                    d["frozen_intact"] = r.frozen_intact;
                    out.append(d);
                }
                return out;
            },
            py::arg("ks"), py::arg("seeds"), py::arg("replay") = true)
        .def(
            "ablate",
            [](const Pipeline& p) {
                const auto rows = [&] {
                    py::gil_scoped_release release;
                    return p.ablate();
                }();
                py::list out;
                for (const auto& r : rows) {
                    py::dict d;
                    d["feature_index"] = r.feature_index;
                    d["feature"] = r.feature_name;
                    d["kl"] = r.kl;
                    d["delta"] = r.delta;
                    d["within_noise"] = r.within_noise;
                    out.append(d);
                }
                return out;
            })
        .def("report", &Pipeline::report, "Writes report files; returns warnings for missing inputs")
        .def("all", &Pipeline::all, py::call_guard<py::gil_scoped_release>());
}
