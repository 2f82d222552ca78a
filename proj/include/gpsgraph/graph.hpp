#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gps {

enum class FeatKind { kNone, kCategorical, kReal };
enum class TargetKind { kNone, kScalar, kClassIndex, kNodeClasses };

// Immutable graph topology in CSR form. Undirected inputs are stored as
// symmetric arc pairs: (u,v) and (v,u) are both present with identical
// features, so message passing iterates arcs uniformly.
struct Graph {
  std::int64_t num_nodes = 0;
  std::vector<std::int64_t> row_offsets;  // length num_nodes + 1
  std::vector<std::int64_t> col_indices;  // length num_arcs

  FeatKind node_feat_kind = FeatKind::kNone;
  std::int64_t node_feat_dim = 0;
  std::vector<std::int64_t> node_feat_cat;  // num_nodes * dim
  std::vector<double> node_feat_real;

  FeatKind edge_feat_kind = FeatKind::kNone;
  std::int64_t edge_feat_dim = 0;
  std::vector<std::int64_t> edge_feat_cat;  // num_arcs * dim, aligned with arc order
  std::vector<double> edge_feat_real;

  TargetKind target_kind = TargetKind::kNone;
  double target_scalar = 0.0;
  std::int64_t target_class = 0;
  std::vector<std::int64_t> target_node_classes;

  bool allow_self_loops = false;

  std::int64_t num_arcs() const { return static_cast<std::int64_t>(col_indices.size()); }
  std::int64_t degree(std::int64_t u) const { return row_offsets[u + 1] - row_offsets[u]; }
  std::span<const std::int64_t> neighbors(std::int64_t u) const {
    return {col_indices.data() + row_offsets[u],
            static_cast<std::size_t>(degree(u))};
  }
  // Arc source array (CSR rows expanded); length num_arcs.
  std::vector<std::int64_t> arc_sources() const;

  // Throws std::invalid_argument when a structural invariant fails.
  void validate() const;
};

// Builds CSR from an undirected edge list given once per edge; both arc
// directions are emitted with the edge's features. Rejects self-loops and
// duplicate edges.
Graph build_undirected(std::int64_t num_nodes,
                       const std::vector<std::pair<std::int64_t, std::int64_t>>& edges);

// Sorted symmetric closure of an arc list; applying it twice is a no-op.
std::vector<std::pair<std::int64_t, std::int64_t>> symmetrize_arcs(
    const std::vector<std::pair<std::int64_t, std::int64_t>>& arcs);

// Circular skip-link graph: cycle plus +-s chords, every node degree 4.
// Requires n >= 5, 2 <= s <= n-2, s != n/2 and gcd(n, s) == 1.
Graph gen_csl(std::int64_t n, std::int64_t s);

struct DecalinAnchors {
  std::int64_t a, b;  // bridgehead nodes (degree 3)
  std::int64_t c, d;  // the symmetric middle pair of one ring
};

// Two fused 6-cycles sharing one edge: 10 nodes, 11 undirected edges.
Graph gen_decalin();
DecalinAnchors decalin_anchors();

// Concatenated graphs with a node -> graph segment index.
struct GraphBatch {
  std::int64_t num_graphs = 0;
  std::int64_t total_nodes = 0;
  std::int64_t total_arcs = 0;
  std::vector<std::int64_t> row_offsets;
  std::vector<std::int64_t> col_indices;
  std::vector<std::int64_t> arc_src;  // global arc endpoints
  std::vector<std::int64_t> arc_dst;

  FeatKind node_feat_kind = FeatKind::kNone;
  std::int64_t node_feat_dim = 0;
  std::vector<std::int64_t> node_feat_cat;
  std::vector<double> node_feat_real;
  FeatKind edge_feat_kind = FeatKind::kNone;
  std::int64_t edge_feat_dim = 0;
  std::vector<std::int64_t> edge_feat_cat;
  std::vector<double> edge_feat_real;

  std::vector<std::int64_t> node_seg;      // node -> graph
  std::vector<std::int64_t> arc_seg;       // arc -> graph
  std::vector<std::int64_t> node_offsets;  // length num_graphs + 1
  std::vector<std::int64_t> arc_offsets;

  TargetKind target_kind = TargetKind::kNone;
  std::vector<double> target_scalars;
  std::vector<std::int64_t> target_classes;
  std::vector<std::int64_t> target_node_classes;
};

// Requires a nonempty sequence with a homogeneous feature schema.
GraphBatch batch_graphs(std::span<const Graph> graphs);
std::vector<Graph> unbatch_graphs(const GraphBatch& batch);

// Relabels nodes by perm (new index = perm[old]); features and targets move
// with their nodes. perm must be a permutation of [0, N).
Graph permute_graph(const Graph& g, const std::vector<std::int64_t>& perm);

}  // namespace gps
