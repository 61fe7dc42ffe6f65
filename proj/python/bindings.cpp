#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "inet/cli.hpp"
#include "inet/datagen.hpp"
#include "inet/distill.hpp"
#include "inet/evalharness.hpp"
#include "inet/inet.hpp"
#include "inet/lambdanet.hpp"
#include "inet/trees.hpp"

namespace py = pybind11;
using namespace inet;

namespace {

struct PyTree {
  TreeModel tree;
};

}  // namespace

PYBIND11_MODULE(inet_trees, m) {
  m.doc() = "Decision-tree surrogates for small neural networks";

  auto base = py::register_exception<Error>(m, "InetError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  m.def(
      "generate_dataset",
      [](Eigen::Index n, Eigen::Index rows, double p, std::uint64_t seed) {
        SyntheticDataset ds = generate_dataset(n, rows, p, seed);
        return py::make_tuple(ds.features, ds.labels, provenance_to_json(ds).dump());
      },
      py::arg("n"), py::arg("m"), py::arg("p") = 5.0, py::arg("seed") = 0,
      "Returns (features, labels, provenance_json).");

  m.def(
      "is_linearly_separable",
      [](const Matrix& x, const std::vector<int>& y, int max_epochs) {
        return is_linearly_separable(x, y, SeparabilityConfig{max_epochs});
      },
      py::arg("x"), py::arg("labels"), py::arg("max_epochs") = 1000);

  m.def("lambda_theta_size", &lambda_theta_size, py::arg("n"), py::arg("hidden") = 128);

  py::class_<LambdaNet>(m, "LambdaNet")
      .def_property_readonly("theta", [](const LambdaNet& l) { return l.theta; })
      .def_property_readonly("n", &LambdaNet::n)
      .def_readonly("train_accuracy", &LambdaNet::train_accuracy)
      .def_readonly("test_accuracy", &LambdaNet::test_accuracy)
      .def("predict", [](const LambdaNet& l, const Matrix& x) { return predict_lambda(l, x); })
      .def("to_json", [](const LambdaNet& l) { return lambda_to_json(l).dump(); })
      .def_static("from_json", [](const std::string& text) { return lambda_from_json(nlohmann::json::parse(text)); });

  m.def(
      "train_lambda_net",
      [](const Matrix& x, const Vector& y, std::uint64_t seed, int epochs, double learning_rate) {
        LambdaConfig cfg;
        cfg.epochs = epochs;
        cfg.learning_rate = learning_rate;
        const RowSplit split = split_rows(x.rows(), cfg.valid_fraction, cfg.test_fraction, mix64(seed));
        return train_lambda_net(x, y, split, cfg, seed);
      },
      py::arg("x"), py::arg("y"), py::arg("seed") = 0, py::arg("epochs") = 1000, py::arg("learning_rate") = 1e-3);

  py::class_<PyTree>(m, "Tree")
      .def_property_readonly("family", [](const PyTree& t) { return std::string(to_string(family_of(t.tree))); })
      .def("evaluate", [](const PyTree& t, const Matrix& x) { return evaluate(t.tree, x); })
      .def("to_json", [](const PyTree& t) { return tree_to_json(t.tree).dump(); })
      .def("to_dot", [](const PyTree& t) { return to_dot(t.tree); })
      .def_static("from_json", [](const std::string& text) { return PyTree{tree_from_json(nlohmann::json::parse(text))}; });

  m.def(
      "cart_fit",
      [](const Matrix& x, const std::vector<int>& y, int max_depth) {
        CartConfig cfg;
        cfg.max_depth = max_depth;
        return PyTree{cart_fit(x, y, cfg)};
      },
      py::arg("x"), py::arg("labels"), py::arg("max_depth") = 3);

  m.def(
      "distill",
      [](const LambdaNet& lambda, const std::string& family, const std::string& strategy, std::size_t queries,
         int depth, std::uint64_t seed) {
        DistillConfig cfg;
        cfg.query_count = queries;
        cfg.cart.max_depth = depth;
        cfg.sdt.depth = depth;
        return PyTree{distill(lambda, family_from_string(family), strategy_from_string(strategy), cfg, seed).tree};
      },
      py::arg("lambda_net"), py::arg("family") = "standard_dt", py::arg("strategy") = "standard_uniform",
      py::arg("queries") = 10000, py::arg("depth") = 3, py::arg("seed") = 0);

  m.def(
      "fidelity", [](const PyTree& t, const LambdaNet& l, const Matrix& x) { return fidelity(t.tree, l, x); },
      py::arg("tree"), py::arg("lambda_net"), py::arg("x"));

  m.def(
      "welch_t_test",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const WelchResult r = welch_t_test(a, b);
        return py::make_tuple(r.t, r.df, r.p_value);
      },
      py::arg("a"), py::arg("b"), "Returns (t, df, two-sided p).");

  py::class_<INetModel>(m, "INet")
      .def_property_readonly("family", [](const INetModel& model) { return std::string(to_string(model.family)); })
      .def_property_readonly("depth", &INetModel::depth)
      .def("interpret", [](const INetModel& model, const Vector& theta) { return PyTree{interpret(model, theta)}; })
      .def_static("load", [](const std::string& path) { return load_inet(path); });

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> storage{"inet"};
        storage.insert(storage.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const std::string& s : storage) argv.push_back(s.c_str());
        std::ostringstream out, err;
        const int code = command_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one CLI command in-process; returns (exit_code, stdout, stderr).");
}
