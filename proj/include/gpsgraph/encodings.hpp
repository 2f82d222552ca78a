#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpsgraph/graph.hpp"

namespace gps {

// Symmetric normalized Laplacian I - D^{-1/2} A D^{-1/2} as a dense row-major
// matrix; rows/columns of isolated nodes are identity rows.
std::vector<double> normalized_laplacian(const Graph& g);

struct LapPe {
  std::vector<double> eigvals;  // length k, ascending; padding entries are 2.0
  std::vector<double> eigvecs;  // N x k row-major, unit columns, padding zero
  std::int64_t k = 0;
};

// k smallest eigenpairs of the normalized Laplacian. Columns are sign
// canonicalized: the entry of largest magnitude (lowest index on ties) is
// made positive. When k exceeds N the surplus columns are zero with sentinel
// eigenvalue 2.0.
LapPe lap_pe(const Graph& g, std::int64_t k);

// N x m matrix of random-walk return probabilities; column t-1 holds
// diag(P^t) for P = D^{-1} A. Isolated nodes give zero rows. Works in column
// batches of the walk matrix, never forming a dense power.
std::vector<double> rwse(const Graph& g, std::int64_t m);

struct WlResult {
  std::vector<std::int64_t> colors;     // final color per node, canonical
  std::vector<std::int64_t> histogram;  // sorted multiset of class sizes
  std::int64_t iterations = 0;          // refinement rounds until stable
  std::int64_t num_classes = 0;
};

// 1-WL color refinement: hash (own color, sorted neighbor colors) with
// canonical relabeling by first occurrence each round.
WlResult wl_colors(const Graph& g, std::int64_t max_iters);

// Euclidean distance between the node_enc rows of each arc's endpoints.
// node_enc is N x k row-major.
std::vector<double> rel_distances(const Graph& g, const std::vector<double>& node_enc,
                                  std::int64_t k);

// Same distance on explicit (u, v) pairs (virtual arcs).
std::vector<double> pair_distances(const std::vector<double>& node_enc, std::int64_t num_nodes,
                                   std::int64_t k,
                                   const std::vector<std::pair<std::int64_t, std::int64_t>>& pairs);

// Per-graph precomputed encodings consumed by the model input encoders.
struct EncodingSet {
  LapPe lap;
  std::vector<double> rwse_mat;  // N x m
  std::int64_t rwse_m = 0;
  std::vector<double> rel_dist;  // per arc, from lap eigvecs
  bool has_lap = false;
  bool has_rwse = false;
  bool has_rel = false;
};

struct EncodingConfig {
  std::int64_t lap_k = 0;   // 0 disables
  std::int64_t rwse_m = 0;  // 0 disables
  bool rel_dist = false;    // needs lap_k > 0
};

EncodingSet compute_encodings(const Graph& g, const EncodingConfig& cfg);

// Row-stacks per-graph encodings following batch order.
EncodingSet stack_encodings(const std::vector<EncodingSet>& sets, const GraphBatch& batch);

// CLI back end: writes one JSON object per graph with lap_eigvals,
// lap_eigvecs and rwse fields.
void write_encodings_jsonl(const std::string& path, const std::vector<Graph>& graphs,
                           std::int64_t lap_k, std::int64_t rwse_m);

}  // namespace gps
