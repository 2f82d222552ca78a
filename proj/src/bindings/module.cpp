#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gpsgraph/encodings.hpp"
#include "gpsgraph/experiments.hpp"
#include "gpsgraph/graph.hpp"
#include "gpsgraph/io.hpp"
#include "gpsgraph/train.hpp"

namespace py = pybind11;
using namespace gps;

namespace {

py::list eigvec_rows(const LapPe& pe, std::int64_t n) {
  py::list rows;
  for (std::int64_t u = 0; u < n; ++u) {
    py::list row;
    for (std::int64_t c = 0; c < pe.k; ++c) row.append(pe.eigvecs[u * pe.k + c]);
    rows.append(row);
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "GPS graph Transformer core: graphs, encodings, training";

  py::class_<Graph>(m, "Graph")
      .def_readonly("num_nodes", &Graph::num_nodes)
      .def_property_readonly("num_arcs", &Graph::num_arcs)
      .def_readonly("row_offsets", &Graph::row_offsets)
      .def_readonly("col_indices", &Graph::col_indices)
      .def("degree", &Graph::degree)
      .def("validate", &Graph::validate)
      .def_property_readonly("target",
                             [](const Graph& g) -> py::object {
                               switch (g.target_kind) {
                                 case TargetKind::kScalar:
                                   return py::float_(g.target_scalar);
                                 case TargetKind::kClassIndex:
                                   return py::int_(g.target_class);
                                 case TargetKind::kNodeClasses:
                                   return py::cast(g.target_node_classes);
                                 case TargetKind::kNone:
                                   return py::none();
                               }
                               return py::none();
                             });

  m.def("gen_csl", &gen_csl, py::arg("n"), py::arg("s"),
        "circular skip-link graph: cycle plus +-s chords, all degrees 4");
  m.def("gen_decalin", &gen_decalin, "two fused six-rings sharing an edge");
  m.def("decalin_anchors", [] {
    const auto a = decalin_anchors();
    return py::make_tuple(a.a, a.b, a.c, a.d);
  });
  m.def("load_graphs", [](const std::string& path, const std::string& kind) {
    return load_graphs(path, dataset_kind_from_string(kind));
  });
  m.def("save_graphs", &save_graphs);
  m.def("gen_zinc_like", [](std::int64_t num_graphs, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.num_graphs = num_graphs;
    cfg.seed = seed;
    return gen_zinc_like(cfg);
  });

  m.def("normalized_laplacian", [](const Graph& g) {
    const auto lap = normalized_laplacian(g);
    py::list rows;
    for (std::int64_t i = 0; i < g.num_nodes; ++i) {
      py::list row;
      for (std::int64_t j = 0; j < g.num_nodes; ++j) row.append(lap[i * g.num_nodes + j]);
      rows.append(row);
    }
    return rows;
  });
  m.def("lap_pe", [](const Graph& g, std::int64_t k) {
    const auto pe = lap_pe(g, k);
    return py::make_tuple(pe.eigvals, eigvec_rows(pe, g.num_nodes));
  });
  m.def("rwse", [](const Graph& g, std::int64_t steps) {
    const auto mat = rwse(g, steps);
    py::list rows;
    for (std::int64_t u = 0; u < g.num_nodes; ++u) {
      py::list row;
      for (std::int64_t t = 0; t < steps; ++t) row.append(mat[u * steps + t]);
      rows.append(row);
    }
    return rows;
  });
  m.def("wl_colors", [](const Graph& g, std::int64_t max_iters) {
    const auto res = wl_colors(g, max_iters);
    py::dict d;
    d["colors"] = res.colors;
    d["histogram"] = res.histogram;
    d["iterations"] = res.iterations;
    d["num_classes"] = res.num_classes;
    return d;
  });
  m.def("rel_distances", [](const Graph& g, const std::vector<std::vector<double>>& enc) {
    std::vector<double> flat;
    const std::int64_t k = enc.empty() ? 0 : static_cast<std::int64_t>(enc[0].size());
    for (const auto& row : enc) flat.insert(flat.end(), row.begin(), row.end());
    return rel_distances(g, flat, k);
  });

  py::class_<ExpressivityReport>(m, "ExpressivityReport")
      .def_readonly("wl_csl_equal", &ExpressivityReport::wl_csl_equal)
      .def_readonly("rwse_csl_separates", &ExpressivityReport::rwse_csl_separates)
      .def_readonly("lap_csl_separates", &ExpressivityReport::lap_csl_separates)
      .def_readonly("decalin_links", &ExpressivityReport::decalin_links)
      .def("all_pass", &ExpressivityReport::all_pass);
  m.def("expressivity_suite", &expressivity_suite, py::arg("print") = false);

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("best_val", &RunResult::best_val)
      .def_readonly("final_val", &RunResult::final_val)
      .def_readonly("final_test", &RunResult::final_test)
      .def_readonly("final_train_loss", &RunResult::final_train_loss)
      .def_readonly("param_count", &RunResult::param_count)
      .def_readonly("metric_name", &RunResult::metric_name)
      .def_readonly("config_echo", &RunResult::config_echo);
  m.def("run_config_text", [](const std::string& text) {
    return run_config(parse_run_config_text(text));
  });
  m.def("param_count_for", [](const std::string& config_text) {
    const RunConfig rc = parse_run_config_text(config_text);
    auto graphs = load_graphs(rc.dataset_path, dataset_kind_from_string(rc.dataset_kind));
    GpsModel model(model_config_from(rc, graphs), rc.seed);
    return model.param_count();
  });

  m.def("timing_benchmark",
        [](const std::vector<std::int64_t>& sizes, std::int64_t d, std::int64_t heads,
           std::int64_t m_feat) {
          py::list rows;
          for (const auto& r : timing_benchmark(sizes, d, heads, m_feat))
            rows.append(py::make_tuple(r.n, r.full_seconds, r.performer_seconds));
          return rows;
        });
}
