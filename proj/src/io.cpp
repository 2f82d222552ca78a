#include "gpsgraph/io.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "gpsgraph/rng.hpp"

namespace gps {

namespace {

constexpr std::int64_t kZincAtomTypes = 28;
constexpr std::int64_t kZincBondTypes = 3;

[[noreturn]] void fail_line(std::int64_t line, const std::string& what) {
  throw std::runtime_error("line " + std::to_string(line) + ": " + what);
}

}  // namespace

DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "zinc") return DatasetKind::kZinc;
  if (s == "generic") return DatasetKind::kGeneric;
  throw std::invalid_argument("unknown dataset kind: " + s);
}

std::vector<Graph> load_graphs(const std::string& path, DatasetKind kind) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_graphs: cannot open " + path);
  std::vector<Graph> out;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail_line(lineno, std::string("parse error: ") + e.what());
    }
    Graph g;
    try {
      g.num_nodes = j.at("num_nodes").get<std::int64_t>();
      std::vector<std::pair<std::int64_t, std::int64_t>> edges;
      for (const auto& e : j.at("edges")) {
        if (!e.is_array() || e.size() != 2) fail_line(lineno, "edge must be a [u, v] pair");
        edges.emplace_back(e[0].get<std::int64_t>(), e[1].get<std::int64_t>());
      }
      g = build_undirected(g.num_nodes, edges);

      const auto& nf = j.at("node_feat");
      if (static_cast<std::int64_t>(nf.size()) != g.num_nodes)
        fail_line(lineno, "node_feat length must equal num_nodes");
      const bool node_real = !nf.empty() && nf[0].is_array();
      if (node_real) {
        g.node_feat_kind = FeatKind::kReal;
        g.node_feat_dim = static_cast<std::int64_t>(nf[0].size());
        for (const auto& row : nf) {
          if (static_cast<std::int64_t>(row.size()) != g.node_feat_dim)
            fail_line(lineno, "ragged node_feat rows");
          for (const auto& v : row) g.node_feat_real.push_back(v.get<double>());
        }
      } else {
        g.node_feat_kind = FeatKind::kCategorical;
        g.node_feat_dim = 1;
        for (const auto& v : nf) g.node_feat_cat.push_back(v.get<std::int64_t>());
      }

      if (j.contains("edge_feat")) {
        const auto& ef = j.at("edge_feat");
        if (static_cast<std::int64_t>(ef.size()) != static_cast<std::int64_t>(edges.size()))
          fail_line(lineno, "edge_feat length must equal edge count");
        const bool edge_real = !ef.empty() && ef[0].is_array();
        // expand per-edge features onto both arc directions following arc order
        std::vector<nlohmann::json> per_edge(ef.begin(), ef.end());
        std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> edge_id;
        for (std::size_t i = 0; i < edges.size(); ++i) {
          auto [u, v] = edges[i];
          edge_id[{std::min(u, v), std::max(u, v)}] = static_cast<std::int64_t>(i);
        }
        const auto src = g.arc_sources();
        if (edge_real) {
          g.edge_feat_kind = FeatKind::kReal;
          g.edge_feat_dim = per_edge.empty() ? 0 : static_cast<std::int64_t>(per_edge[0].size());
        } else {
          g.edge_feat_kind = FeatKind::kCategorical;
          g.edge_feat_dim = 1;
        }
        for (std::int64_t a = 0; a < g.num_arcs(); ++a) {
          const std::int64_t u = src[a], v = g.col_indices[a];
          const auto& feat = per_edge[edge_id.at({std::min(u, v), std::max(u, v)})];
          if (edge_real)
            for (const auto& x : feat) g.edge_feat_real.push_back(x.get<double>());
          else
            g.edge_feat_cat.push_back(feat.get<std::int64_t>());
        }
      }

      if (j.contains("y")) {
        const auto& y = j.at("y");
        if (y.is_number_float()) {
          g.target_kind = TargetKind::kScalar;
          g.target_scalar = y.get<double>();
        } else if (y.is_number_integer()) {
          g.target_kind = TargetKind::kClassIndex;
          g.target_class = y.get<std::int64_t>();
        } else if (y.is_array()) {
          g.target_kind = TargetKind::kNodeClasses;
          for (const auto& v : y) g.target_node_classes.push_back(v.get<std::int64_t>());
          if (static_cast<std::int64_t>(g.target_node_classes.size()) != g.num_nodes)
            fail_line(lineno, "per-node target length must equal num_nodes");
        } else {
          fail_line(lineno, "unsupported target type");
        }
      }
    } catch (const nlohmann::json::exception& e) {
      fail_line(lineno, std::string("parse error: ") + e.what());
    }

    if (kind == DatasetKind::kZinc) {
      if (g.node_feat_kind != FeatKind::kCategorical)
        fail_line(lineno, "zinc schema requires categorical atom types");
      for (std::int64_t v : g.node_feat_cat)
        if (v < 0 || v >= kZincAtomTypes)
          fail_line(lineno, "atom type " + std::to_string(v) + " outside [0, 28)");
      for (std::int64_t v : g.edge_feat_cat)
        if (v < 0 || v >= kZincBondTypes)
          fail_line(lineno, "bond type " + std::to_string(v) + " outside [0, 3)");
    }
    try {
      g.validate();
    } catch (const std::invalid_argument& e) {
      fail_line(lineno, e.what());
    }
    out.push_back(std::move(g));
  }
  return out;
}

void save_graphs(const std::string& path, const std::vector<Graph>& graphs) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_graphs: cannot open " + path);
  for (const Graph& g : graphs) {
    nlohmann::json j;
    j["num_nodes"] = g.num_nodes;
    auto& edges = j["edges"] = nlohmann::json::array();
    nlohmann::json efeat = nlohmann::json::array();
    const auto src = g.arc_sources();
    std::vector<std::int64_t> edge_arcs;  // arcs with src < dst, in order
    for (std::int64_t a = 0; a < g.num_arcs(); ++a)
      if (src[a] < g.col_indices[a]) edge_arcs.push_back(a);
    for (std::int64_t a : edge_arcs) edges.push_back({src[a], g.col_indices[a]});
    auto& nfeat = j["node_feat"] = nlohmann::json::array();
    if (g.node_feat_kind == FeatKind::kCategorical)
      for (std::int64_t u = 0; u < g.num_nodes; ++u) nfeat.push_back(g.node_feat_cat[u]);
    if (g.node_feat_kind == FeatKind::kReal)
      for (std::int64_t u = 0; u < g.num_nodes; ++u) {
        nlohmann::json row = nlohmann::json::array();
        for (std::int64_t k = 0; k < g.node_feat_dim; ++k)
          row.push_back(g.node_feat_real[u * g.node_feat_dim + k]);
        nfeat.push_back(row);
      }
    if (g.edge_feat_kind == FeatKind::kCategorical) {
      for (std::int64_t a : edge_arcs) efeat.push_back(g.edge_feat_cat[a]);
      j["edge_feat"] = efeat;
    } else if (g.edge_feat_kind == FeatKind::kReal) {
      for (std::int64_t a : edge_arcs) {
        nlohmann::json row = nlohmann::json::array();
        for (std::int64_t k = 0; k < g.edge_feat_dim; ++k)
          row.push_back(g.edge_feat_real[a * g.edge_feat_dim + k]);
        efeat.push_back(row);
      }
      j["edge_feat"] = efeat;
    }
    if (g.target_kind == TargetKind::kScalar) j["y"] = g.target_scalar;
    if (g.target_kind == TargetKind::kClassIndex) j["y"] = g.target_class;
    if (g.target_kind == TargetKind::kNodeClasses) j["y"] = g.target_node_classes;
    os << j.dump() << "\n";
  }
}

DatasetSummary summarize(const std::vector<Graph>& graphs) {
  DatasetSummary s;
  s.num_graphs = static_cast<std::int64_t>(graphs.size());
  if (graphs.empty()) return s;
  double nodes = 0.0, edges = 0.0;
  for (const Graph& g : graphs) {
    nodes += static_cast<double>(g.num_nodes);
    edges += static_cast<double>(g.num_arcs()) / 2.0;
  }
  s.mean_nodes = nodes / static_cast<double>(s.num_graphs);
  s.mean_edges = edges / static_cast<double>(s.num_graphs);
  auto kind_str = [](FeatKind k, std::int64_t d) -> std::string {
    switch (k) {
      case FeatKind::kNone:
        return "none";
      case FeatKind::kCategorical:
        return "categorical[" + std::to_string(d) + "]";
      case FeatKind::kReal:
        return "real[" + std::to_string(d) + "]";
    }
    return "?";
  };
  s.node_feat = kind_str(graphs[0].node_feat_kind, graphs[0].node_feat_dim);
  s.edge_feat = kind_str(graphs[0].edge_feat_kind, graphs[0].edge_feat_dim);
  switch (graphs[0].target_kind) {
    case TargetKind::kNone:
      s.target = "none";
      break;
    case TargetKind::kScalar:
      s.target = "scalar";
      break;
    case TargetKind::kClassIndex:
      s.target = "class";
      break;
    case TargetKind::kNodeClasses:
      s.target = "node-classes";
      break;
  }
  return s;
}

std::string summary_to_string(const DatasetSummary& s) {
  std::ostringstream os;
  os << "graphs: " << s.num_graphs << "\n"
     << "mean nodes: " << s.mean_nodes << "\n"
     << "mean edges: " << s.mean_edges << "\n"
     << "node features: " << s.node_feat << "\n"
     << "edge features: " << s.edge_feat << "\n"
     << "target: " << s.target << "\n";
  return os.str();
}

namespace {

// Return probabilities diag(P^t) on a small graph, dense power iteration.
std::vector<double> return_probs(const Graph& g, std::int64_t steps) {
  const std::int64_t n = g.num_nodes;
  std::vector<double> p(static_cast<std::size_t>(n * n), 0.0), next(p.size(), 0.0);
  for (std::int64_t u = 0; u < n; ++u) p[u * n + u] = 1.0;
  std::vector<double> diag;
  const auto src = g.arc_sources();
  for (std::int64_t t = 0; t < steps; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::int64_t a = 0; a < g.num_arcs(); ++a) {
      const std::int64_t u = src[a], v = g.col_indices[a];
      const double w = 1.0 / static_cast<double>(g.degree(u));
      for (std::int64_t j = 0; j < n; ++j) next[u * n + j] += w * p[v * n + j];
    }
    std::swap(p, next);
  }
  diag.resize(static_cast<std::size_t>(n));
  for (std::int64_t u = 0; u < n; ++u) diag[u] = p[u * n + u];
  return diag;
}

}  // namespace

std::vector<Graph> gen_zinc_like(const SynthConfig& cfg) {
  RngStream root(cfg.seed);
  // fixed per-type contributions
  std::vector<double> atom_w(kZincAtomTypes);
  RngStream table(0x61746f6dull);
  for (auto& w : atom_w) w = table.uniform() - 0.5;

  std::vector<Graph> out;
  out.reserve(static_cast<std::size_t>(cfg.num_graphs));
  for (std::int64_t gi = 0; gi < cfg.num_graphs; ++gi) {
    RngStream rng = root.split(static_cast<std::uint64_t>(gi));
    std::int64_t n = static_cast<std::int64_t>(std::llround(23.2 + 6.3 * rng.normal()));
    n = std::clamp<std::int64_t>(n, 9, 37);

    // random tree skeleton, degree capped at 4
    std::vector<std::int64_t> deg(static_cast<std::size_t>(n), 0);
    std::vector<std::pair<std::int64_t, std::int64_t>> edges;
    for (std::int64_t u = 1; u < n; ++u) {
      std::int64_t v;
      do {
        v = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(u)));
      } while (deg[v] >= 4);
      edges.emplace_back(v, u);
      ++deg[u];
      ++deg[v];
    }
    std::set<std::pair<std::int64_t, std::int64_t>> have;
    std::vector<std::vector<std::int64_t>> adj(static_cast<std::size_t>(n));
    for (auto [u, v] : edges) {
      have.insert({std::min(u, v), std::max(u, v)});
      adj[u].push_back(v);
      adj[v].push_back(u);
    }

    // close a few rings; each graph leans toward one ring size so the
    // five/six mix varies strongly between graphs
    const std::int64_t rings = 1 + static_cast<std::int64_t>(rng.below(4));  // 1..4
    const double five_ring_bias = rng.uniform();
    for (std::int64_t r = 0; r < rings; ++r) {
      const std::int64_t want = rng.bernoulli(five_ring_bias) ? 4 : 5;  // 5- or 6-ring
      bool placed = false;
      for (std::int64_t attempt = 0; attempt < 20 && !placed; ++attempt) {
        const auto u = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n)));
        if (deg[u] >= 4) continue;
        // BFS for candidates at the wanted distance
        std::vector<std::int64_t> dist(static_cast<std::size_t>(n), -1);
        std::deque<std::int64_t> q{u};
        dist[u] = 0;
        std::vector<std::int64_t> candidates;
        while (!q.empty()) {
          const std::int64_t x = q.front();
          q.pop_front();
          if (dist[x] == want) {
            if (deg[x] < 4 && !have.count({std::min(u, x), std::max(u, x)}))
              candidates.push_back(x);
            continue;
          }
          for (std::int64_t y : adj[x])
            if (dist[y] < 0) {
              dist[y] = dist[x] + 1;
              q.push_back(y);
            }
        }
        if (candidates.empty()) continue;
        const std::int64_t v =
            candidates[rng.below(static_cast<std::uint64_t>(candidates.size()))];
        edges.emplace_back(u, v);
        have.insert({std::min(u, v), std::max(u, v)});
        adj[u].push_back(v);
        adj[v].push_back(u);
        ++deg[u];
        ++deg[v];
        placed = true;
      }
    }

    Graph g = build_undirected(n, edges);
    g.node_feat_kind = FeatKind::kCategorical;
    g.node_feat_dim = 1;
    // carbon-dominated composition, as in real small molecules
    g.node_feat_cat.resize(static_cast<std::size_t>(n));
    for (auto& t : g.node_feat_cat) {
      const double u = rng.uniform();
      if (u < 0.74)
        t = 0;
      else if (u < 0.85)
        t = 1;
      else if (u < 0.91)
        t = 2;
      else if (u < 0.95)
        t = 3;
      else
        t = 4 + static_cast<std::int64_t>(rng.below(kZincAtomTypes - 4));
    }
    g.edge_feat_kind = FeatKind::kCategorical;
    g.edge_feat_dim = 1;
    g.edge_feat_cat.resize(static_cast<std::size_t>(g.num_arcs()));
    {
      const auto src = g.arc_sources();
      std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> bond;
      for (std::int64_t a = 0; a < g.num_arcs(); ++a) {
        const auto key = std::minmax(src[a], g.col_indices[a]);
        auto it = bond.find(key);
        if (it == bond.end()) {
          const double u = rng.uniform();
          it = bond.emplace(key, u < 0.7 ? 0 : (u < 0.9 ? 1 : 2)).first;
        }
        g.edge_feat_cat[a] = it->second;
      }
    }

    // structural target keyed to ring size: odd-step return probabilities see
    // five-rings, even steps see six-rings, with opposite signs so degree
    // statistics alone cannot proxy the answer
    const auto p5 = return_probs(g, 5);
    const auto p6 = return_probs(g, 6);
    double mean_p5 = 0.0, mean_p6 = 0.0, mean_atom = 0.0;
    for (std::int64_t u = 0; u < n; ++u) {
      mean_p5 += p5[u];
      mean_p6 += p6[u];
      mean_atom += atom_w[g.node_feat_cat[u]];
    }
    mean_p5 /= static_cast<double>(n);
    mean_p6 /= static_cast<double>(n);
    mean_atom /= static_cast<double>(n);
    g.target_kind = TargetKind::kScalar;
    g.target_scalar = 30.0 * mean_p5 - 15.0 * mean_p6 + 0.75 * mean_atom + 3.50;
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace gps
