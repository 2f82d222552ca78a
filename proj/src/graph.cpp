#include "gpsgraph/graph.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

namespace gps {

std::vector<std::int64_t> Graph::arc_sources() const {
  std::vector<std::int64_t> src(static_cast<std::size_t>(num_arcs()));
  for (std::int64_t u = 0; u < num_nodes; ++u)
    for (std::int64_t a = row_offsets[u]; a < row_offsets[u + 1]; ++a) src[a] = u;
  return src;
}

void Graph::validate() const {
  if (static_cast<std::int64_t>(row_offsets.size()) != num_nodes + 1)
    throw std::invalid_argument("graph: row_offsets length must be num_nodes + 1");
  if (row_offsets.front() != 0 || row_offsets.back() != num_arcs())
    throw std::invalid_argument("graph: row_offsets must start at 0 and end at num_arcs");
  for (std::int64_t u = 0; u < num_nodes; ++u)
    if (row_offsets[u + 1] < row_offsets[u])
      throw std::invalid_argument("graph: row_offsets must be nondecreasing");
  for (std::int64_t v : col_indices)
    if (v < 0 || v >= num_nodes) throw std::invalid_argument("graph: column index out of range");

  const auto src = arc_sources();
  std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> arc_of;
  for (std::int64_t a = 0; a < num_arcs(); ++a) {
    if (!allow_self_loops && src[a] == col_indices[a])
      throw std::invalid_argument("graph: self-loop present without the self-loop flag");
    if (!arc_of.emplace(std::make_pair(src[a], col_indices[a]), a).second)
      throw std::invalid_argument("graph: duplicate arc");
  }
  for (std::int64_t a = 0; a < num_arcs(); ++a) {
    auto rev = arc_of.find({col_indices[a], src[a]});
    if (rev == arc_of.end())
      throw std::invalid_argument("graph: missing reverse arc (not symmetric)");
    const std::int64_t b = rev->second;
    if (edge_feat_kind == FeatKind::kCategorical) {
      for (std::int64_t j = 0; j < edge_feat_dim; ++j)
        if (edge_feat_cat[a * edge_feat_dim + j] != edge_feat_cat[b * edge_feat_dim + j])
          throw std::invalid_argument("graph: reverse arc carries different edge features");
    } else if (edge_feat_kind == FeatKind::kReal) {
      for (std::int64_t j = 0; j < edge_feat_dim; ++j)
        if (edge_feat_real[a * edge_feat_dim + j] != edge_feat_real[b * edge_feat_dim + j])
          throw std::invalid_argument("graph: reverse arc carries different edge features");
    }
  }

  auto check_len = [](std::size_t got, std::int64_t want, const char* what) {
    if (static_cast<std::int64_t>(got) != want)
      throw std::invalid_argument(std::string("graph: bad feature array length for ") + what);
  };
  if (node_feat_kind == FeatKind::kCategorical)
    check_len(node_feat_cat.size(), num_nodes * node_feat_dim, "nodes");
  if (node_feat_kind == FeatKind::kReal)
    check_len(node_feat_real.size(), num_nodes * node_feat_dim, "nodes");
  if (edge_feat_kind == FeatKind::kCategorical)
    check_len(edge_feat_cat.size(), num_arcs() * edge_feat_dim, "edges");
  if (edge_feat_kind == FeatKind::kReal)
    check_len(edge_feat_real.size(), num_arcs() * edge_feat_dim, "edges");
  if (target_kind == TargetKind::kNodeClasses)
    check_len(target_node_classes.size(), num_nodes, "node targets");
}

std::vector<std::pair<std::int64_t, std::int64_t>> symmetrize_arcs(
    const std::vector<std::pair<std::int64_t, std::int64_t>>& arcs) {
  std::set<std::pair<std::int64_t, std::int64_t>> closed;
  for (auto [u, v] : arcs) {
    closed.emplace(u, v);
    closed.emplace(v, u);
  }
  return {closed.begin(), closed.end()};
}

Graph build_undirected(std::int64_t num_nodes,
                       const std::vector<std::pair<std::int64_t, std::int64_t>>& edges) {
  Graph g;
  g.num_nodes = num_nodes;
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  std::vector<std::pair<std::int64_t, std::int64_t>> arcs;
  arcs.reserve(edges.size() * 2);
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes)
      throw std::invalid_argument("build_undirected: endpoint out of range");
    if (u == v) throw std::invalid_argument("build_undirected: self-loop");
    auto key = std::minmax(u, v);
    if (!seen.emplace(key).second) throw std::invalid_argument("build_undirected: duplicate edge");
    arcs.emplace_back(u, v);
    arcs.emplace_back(v, u);
  }
  std::sort(arcs.begin(), arcs.end());
  g.row_offsets.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
  g.col_indices.reserve(arcs.size());
  for (auto [u, v] : arcs) {
    ++g.row_offsets[static_cast<std::size_t>(u) + 1];
    g.col_indices.push_back(v);
  }
  std::partial_sum(g.row_offsets.begin(), g.row_offsets.end(), g.row_offsets.begin());
  return g;
}

namespace {
std::int64_t gcd64(std::int64_t a, std::int64_t b) { return b == 0 ? a : gcd64(b, a % b); }
}  // namespace

Graph gen_csl(std::int64_t n, std::int64_t s) {
  if (n < 5) throw std::invalid_argument("gen_csl: need at least 5 nodes");
  if (s < 2 || s > n - 2) throw std::invalid_argument("gen_csl: skip length out of range");
  if (2 * s == n) throw std::invalid_argument("gen_csl: skip length n/2 is degenerate");
  if (gcd64(n, s) != 1)
    throw std::invalid_argument("gen_csl: skip length must be coprime with n");
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  for (std::int64_t i = 0; i < n; ++i) {
    edges.emplace_back(i, (i + 1) % n);
    edges.emplace_back(i, (i + s) % n);
  }
  // each undirected edge exactly once
  std::set<std::pair<std::int64_t, std::int64_t>> unique_edges;
  for (auto [u, v] : edges) unique_edges.insert({std::min(u, v), std::max(u, v)});
  Graph g = build_undirected(n, {unique_edges.begin(), unique_edges.end()});
  g.node_feat_kind = FeatKind::kCategorical;
  g.node_feat_dim = 1;
  g.node_feat_cat.assign(static_cast<std::size_t>(n), 0);
  return g;
}

Graph gen_decalin() {
  // 0, 1 are the fusion (bridgehead) carbons; 2-5 and 6-9 are the rings.
  const std::vector<std::pair<std::int64_t, std::int64_t>> edges = {
      {0, 1}, {0, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 1},
      {0, 6}, {6, 7}, {7, 8}, {8, 9}, {9, 1}};
  Graph g = build_undirected(10, edges);
  g.node_feat_kind = FeatKind::kCategorical;
  g.node_feat_dim = 1;
  g.node_feat_cat.assign(10, 0);
  return g;
}

DecalinAnchors decalin_anchors() { return {0, 1, 3, 4}; }

GraphBatch batch_graphs(std::span<const Graph> graphs) {
  if (graphs.empty()) throw std::invalid_argument("batch_graphs: empty sequence");
  const Graph& first = graphs[0];
  GraphBatch b;
  b.num_graphs = static_cast<std::int64_t>(graphs.size());
  b.node_feat_kind = first.node_feat_kind;
  b.node_feat_dim = first.node_feat_dim;
  b.edge_feat_kind = first.edge_feat_kind;
  b.edge_feat_dim = first.edge_feat_dim;
  b.target_kind = first.target_kind;
  b.node_offsets.push_back(0);
  b.arc_offsets.push_back(0);
  b.row_offsets.push_back(0);
  for (std::int64_t gi = 0; gi < b.num_graphs; ++gi) {
    const Graph& g = graphs[gi];
    if (g.node_feat_kind != b.node_feat_kind || g.node_feat_dim != b.node_feat_dim ||
        g.edge_feat_kind != b.edge_feat_kind || g.edge_feat_dim != b.edge_feat_dim ||
        g.target_kind != b.target_kind)
      throw std::invalid_argument("batch_graphs: feature schema mismatch");
    const std::int64_t node_base = b.total_nodes;
    for (std::int64_t u = 0; u < g.num_nodes; ++u) {
      for (std::int64_t a = g.row_offsets[u]; a < g.row_offsets[u + 1]; ++a) {
        b.col_indices.push_back(g.col_indices[a] + node_base);
        b.arc_src.push_back(u + node_base);
        b.arc_dst.push_back(g.col_indices[a] + node_base);
        b.arc_seg.push_back(gi);
      }
      b.row_offsets.push_back(static_cast<std::int64_t>(b.col_indices.size()));
      b.node_seg.push_back(gi);
    }
    b.node_feat_cat.insert(b.node_feat_cat.end(), g.node_feat_cat.begin(), g.node_feat_cat.end());
    b.node_feat_real.insert(b.node_feat_real.end(), g.node_feat_real.begin(),
                            g.node_feat_real.end());
    b.edge_feat_cat.insert(b.edge_feat_cat.end(), g.edge_feat_cat.begin(), g.edge_feat_cat.end());
    b.edge_feat_real.insert(b.edge_feat_real.end(), g.edge_feat_real.begin(),
                            g.edge_feat_real.end());
    switch (g.target_kind) {
      case TargetKind::kScalar:
        b.target_scalars.push_back(g.target_scalar);
        break;
      case TargetKind::kClassIndex:
        b.target_classes.push_back(g.target_class);
        break;
      case TargetKind::kNodeClasses:
        b.target_node_classes.insert(b.target_node_classes.end(), g.target_node_classes.begin(),
                                     g.target_node_classes.end());
        break;
      case TargetKind::kNone:
        break;
    }
    b.total_nodes += g.num_nodes;
    b.total_arcs += g.num_arcs();
    b.node_offsets.push_back(b.total_nodes);
    b.arc_offsets.push_back(b.total_arcs);
  }
  return b;
}

std::vector<Graph> unbatch_graphs(const GraphBatch& b) {
  std::vector<Graph> out;
  out.reserve(static_cast<std::size_t>(b.num_graphs));
  for (std::int64_t gi = 0; gi < b.num_graphs; ++gi) {
    const std::int64_t nb = b.node_offsets[gi], ne = b.node_offsets[gi + 1];
    const std::int64_t ab = b.arc_offsets[gi], ae = b.arc_offsets[gi + 1];
    Graph g;
    g.num_nodes = ne - nb;
    g.row_offsets.resize(static_cast<std::size_t>(g.num_nodes) + 1);
    for (std::int64_t u = 0; u <= g.num_nodes; ++u)
      g.row_offsets[u] = b.row_offsets[nb + u] - ab;
    g.col_indices.reserve(static_cast<std::size_t>(ae - ab));
    for (std::int64_t a = ab; a < ae; ++a) g.col_indices.push_back(b.col_indices[a] - nb);
    g.node_feat_kind = b.node_feat_kind;
    g.node_feat_dim = b.node_feat_dim;
    g.edge_feat_kind = b.edge_feat_kind;
    g.edge_feat_dim = b.edge_feat_dim;
    g.target_kind = b.target_kind;
    auto copy_range = [](const auto& src, std::int64_t beg, std::int64_t end, std::int64_t dim,
                         auto& dst) {
      dst.assign(src.begin() + beg * dim, src.begin() + end * dim);
    };
    if (b.node_feat_kind == FeatKind::kCategorical)
      copy_range(b.node_feat_cat, nb, ne, b.node_feat_dim, g.node_feat_cat);
    if (b.node_feat_kind == FeatKind::kReal)
      copy_range(b.node_feat_real, nb, ne, b.node_feat_dim, g.node_feat_real);
    if (b.edge_feat_kind == FeatKind::kCategorical)
      copy_range(b.edge_feat_cat, ab, ae, b.edge_feat_dim, g.edge_feat_cat);
    if (b.edge_feat_kind == FeatKind::kReal)
      copy_range(b.edge_feat_real, ab, ae, b.edge_feat_dim, g.edge_feat_real);
    switch (b.target_kind) {
      case TargetKind::kScalar:
        g.target_scalar = b.target_scalars[gi];
        break;
      case TargetKind::kClassIndex:
        g.target_class = b.target_classes[gi];
        break;
      case TargetKind::kNodeClasses:
        g.target_node_classes.assign(b.target_node_classes.begin() + nb,
                                     b.target_node_classes.begin() + ne);
        break;
      case TargetKind::kNone:
        break;
    }
    out.push_back(std::move(g));
  }
  return out;
}

Graph permute_graph(const Graph& g, const std::vector<std::int64_t>& perm) {
  if (static_cast<std::int64_t>(perm.size()) != g.num_nodes)
    throw std::invalid_argument("permute_graph: permutation length mismatch");
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  std::vector<std::int64_t> arc_index;  // original arc feeding each new edge
  const auto src = g.arc_sources();
  for (std::int64_t a = 0; a < g.num_arcs(); ++a) {
    const std::int64_t u = perm[src[a]], v = perm[g.col_indices[a]];
    if (u < v) {
      edges.emplace_back(u, v);
      arc_index.push_back(a);
    }
  }
  Graph out = build_undirected(g.num_nodes, edges);
  out.node_feat_kind = g.node_feat_kind;
  out.node_feat_dim = g.node_feat_dim;
  out.edge_feat_kind = g.edge_feat_kind;
  out.edge_feat_dim = g.edge_feat_dim;
  out.target_kind = g.target_kind;
  out.target_scalar = g.target_scalar;
  out.target_class = g.target_class;
  if (g.node_feat_kind == FeatKind::kCategorical) {
    out.node_feat_cat.resize(g.node_feat_cat.size());
    for (std::int64_t u = 0; u < g.num_nodes; ++u)
      for (std::int64_t j = 0; j < g.node_feat_dim; ++j)
        out.node_feat_cat[perm[u] * g.node_feat_dim + j] =
            g.node_feat_cat[u * g.node_feat_dim + j];
  }
  if (g.node_feat_kind == FeatKind::kReal) {
    out.node_feat_real.resize(g.node_feat_real.size());
    for (std::int64_t u = 0; u < g.num_nodes; ++u)
      for (std::int64_t j = 0; j < g.node_feat_dim; ++j)
        out.node_feat_real[perm[u] * g.node_feat_dim + j] =
            g.node_feat_real[u * g.node_feat_dim + j];
  }
  if (g.target_kind == TargetKind::kNodeClasses) {
    out.target_node_classes.resize(g.target_node_classes.size());
    for (std::int64_t u = 0; u < g.num_nodes; ++u)
      out.target_node_classes[perm[u]] = g.target_node_classes[u];
  }
  if (g.edge_feat_kind != FeatKind::kNone) {
    // map each new arc back to the original arc that produced it
    std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> orig;
    for (std::int64_t a = 0; a < g.num_arcs(); ++a)
      orig[{perm[src[a]], perm[g.col_indices[a]]}] = a;
    const auto new_src = out.arc_sources();
    if (g.edge_feat_kind == FeatKind::kCategorical)
      out.edge_feat_cat.resize(g.edge_feat_cat.size());
    else
      out.edge_feat_real.resize(g.edge_feat_real.size());
    for (std::int64_t a = 0; a < out.num_arcs(); ++a) {
      const std::int64_t o = orig.at({new_src[a], out.col_indices[a]});
      for (std::int64_t j = 0; j < g.edge_feat_dim; ++j) {
        if (g.edge_feat_kind == FeatKind::kCategorical)
          out.edge_feat_cat[a * g.edge_feat_dim + j] = g.edge_feat_cat[o * g.edge_feat_dim + j];
        else
          out.edge_feat_real[a * g.edge_feat_dim + j] = g.edge_feat_real[o * g.edge_feat_dim + j];
      }
    }
  }
  return out;
}

}  // namespace gps
