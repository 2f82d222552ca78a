#include "gpsgraph/encodings.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "gpsgraph/eigensym.hpp"

namespace gps {

std::vector<double> normalized_laplacian(const Graph& g) {
  const std::int64_t n = g.num_nodes;
  std::vector<double> lap(static_cast<std::size_t>(n * n), 0.0);
  std::vector<double> inv_sqrt_deg(static_cast<std::size_t>(n), 0.0);
  for (std::int64_t u = 0; u < n; ++u) {
    lap[u * n + u] = 1.0;  // identity row also covers isolated nodes
    const std::int64_t d = g.degree(u);
    if (d > 0) inv_sqrt_deg[u] = 1.0 / std::sqrt(static_cast<double>(d));
  }
  const auto src = g.arc_sources();
  for (std::int64_t a = 0; a < g.num_arcs(); ++a) {
    const std::int64_t u = src[a], v = g.col_indices[a];
    lap[u * n + v] -= inv_sqrt_deg[u] * inv_sqrt_deg[v];
  }
  return lap;
}

LapPe lap_pe(const Graph& g, std::int64_t k) {
  if (k < 1) throw std::invalid_argument("lap_pe: k must be >= 1");
  const std::int64_t n = g.num_nodes;
  const auto eig = eigen_symmetric(normalized_laplacian(g), n);
  LapPe pe;
  pe.k = k;
  pe.eigvals.assign(static_cast<std::size_t>(k), 2.0);  // sentinel beyond spectrum
  pe.eigvecs.assign(static_cast<std::size_t>(n * k), 0.0);
  const std::int64_t kept = std::min(k, n);
  for (std::int64_t j = 0; j < kept; ++j) {
    pe.eigvals[j] = eig.values[j];
    // sign convention: largest-|entry| component positive, lowest index wins ties
    std::int64_t best = 0;
    double best_abs = -1.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double a = std::fabs(eig.vectors[i * n + j]);
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    const double flip = eig.vectors[best * n + j] < 0.0 ? -1.0 : 1.0;
    for (std::int64_t i = 0; i < n; ++i) pe.eigvecs[i * k + j] = flip * eig.vectors[i * n + j];
  }
  return pe;
}

std::vector<double> rwse(const Graph& g, std::int64_t m) {
  if (m < 1) throw std::invalid_argument("rwse: m must be >= 1");
  const std::int64_t n = g.num_nodes;
  std::vector<double> out(static_cast<std::size_t>(n * m), 0.0);
  const auto src = g.arc_sources();
  // process source nodes in batches; each keeps one walk-distribution column
  constexpr std::int64_t kBatch = 64;
  std::vector<double> cur, next;
  for (std::int64_t beg = 0; beg < n; beg += kBatch) {
    const std::int64_t w = std::min(kBatch, n - beg);
    cur.assign(static_cast<std::size_t>(n * w), 0.0);
    for (std::int64_t c = 0; c < w; ++c) cur[(beg + c) * w + c] = 1.0;
    for (std::int64_t t = 0; t < m; ++t) {
      next.assign(static_cast<std::size_t>(n * w), 0.0);
      for (std::int64_t a = 0; a < g.num_arcs(); ++a) {
        const std::int64_t u = src[a], v = g.col_indices[a];
        const double p = 1.0 / static_cast<double>(g.degree(u));
        for (std::int64_t c = 0; c < w; ++c) next[u * w + c] += p * cur[v * w + c];
      }
      std::swap(cur, next);
      for (std::int64_t c = 0; c < w; ++c) out[(beg + c) * m + t] = cur[(beg + c) * w + c];
    }
  }
  return out;
}

WlResult wl_colors(const Graph& g, std::int64_t max_iters) {
  if (max_iters < 1) throw std::invalid_argument("wl_colors: max_iters must be >= 1");
  const std::int64_t n = g.num_nodes;
  WlResult res;
  res.colors.assign(static_cast<std::size_t>(n), 0);
  // seed colors from node features when present, relabeled canonically
  if (g.node_feat_kind == FeatKind::kCategorical && g.node_feat_dim >= 1) {
    std::map<std::vector<std::int64_t>, std::int64_t> ids;
    for (std::int64_t u = 0; u < n; ++u) {
      std::vector<std::int64_t> key(g.node_feat_cat.begin() + u * g.node_feat_dim,
                                    g.node_feat_cat.begin() + (u + 1) * g.node_feat_dim);
      auto [it, fresh] = ids.emplace(std::move(key), static_cast<std::int64_t>(ids.size()));
      res.colors[u] = it->second;
    }
  }
  auto count_classes = [&]() {
    std::int64_t mx = -1;
    for (std::int64_t c : res.colors) mx = std::max(mx, c);
    return mx + 1;
  };
  std::int64_t classes = count_classes();
  res.iterations = 0;
  for (std::int64_t round = 0; round < max_iters; ++round) {
    std::map<std::pair<std::int64_t, std::vector<std::int64_t>>, std::int64_t> ids;
    std::vector<std::int64_t> next(static_cast<std::size_t>(n));
    for (std::int64_t u = 0; u < n; ++u) {
      std::vector<std::int64_t> nbr;
      nbr.reserve(static_cast<std::size_t>(g.degree(u)));
      for (std::int64_t v : g.neighbors(u)) nbr.push_back(res.colors[v]);
      std::sort(nbr.begin(), nbr.end());
      auto key = std::make_pair(res.colors[u], std::move(nbr));
      auto [it, fresh] = ids.emplace(std::move(key), static_cast<std::int64_t>(ids.size()));
      next[u] = it->second;
    }
    const auto next_classes = static_cast<std::int64_t>(ids.size());
    res.colors = std::move(next);
    if (next_classes == classes) break;  // refinement only splits, so equal count means stable
    classes = next_classes;
    res.iterations = round + 1;
  }
  res.num_classes = classes;
  std::vector<std::int64_t> counts(static_cast<std::size_t>(classes), 0);
  for (std::int64_t c : res.colors) ++counts[static_cast<std::size_t>(c)];
  std::sort(counts.begin(), counts.end());
  res.histogram = std::move(counts);
  return res;
}

std::vector<double> rel_distances(const Graph& g, const std::vector<double>& node_enc,
                                  std::int64_t k) {
  if (static_cast<std::int64_t>(node_enc.size()) != g.num_nodes * k)
    throw std::invalid_argument("rel_distances: encoding row count must equal num_nodes");
  std::vector<std::pair<std::int64_t, std::int64_t>> pairs;
  pairs.reserve(static_cast<std::size_t>(g.num_arcs()));
  const auto src = g.arc_sources();
  for (std::int64_t a = 0; a < g.num_arcs(); ++a) pairs.emplace_back(src[a], g.col_indices[a]);
  return pair_distances(node_enc, g.num_nodes, k, pairs);
}

std::vector<double> pair_distances(
    const std::vector<double>& node_enc, std::int64_t num_nodes, std::int64_t k,
    const std::vector<std::pair<std::int64_t, std::int64_t>>& pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (auto [u, v] : pairs) {
    if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes)
      throw std::out_of_range("pair_distances: node index out of range");
    double acc = 0.0;
    for (std::int64_t j = 0; j < k; ++j) {
      const double diff = node_enc[u * k + j] - node_enc[v * k + j];
      acc += diff * diff;
    }
    out.push_back(std::sqrt(acc));
  }
  return out;
}

EncodingSet compute_encodings(const Graph& g, const EncodingConfig& cfg) {
  EncodingSet set;
  if (cfg.lap_k > 0) {
    set.lap = lap_pe(g, cfg.lap_k);
    set.has_lap = true;
  }
  if (cfg.rwse_m > 0) {
    set.rwse_mat = rwse(g, cfg.rwse_m);
    set.rwse_m = cfg.rwse_m;
    set.has_rwse = true;
  }
  if (cfg.rel_dist) {
    if (!set.has_lap) throw std::invalid_argument("compute_encodings: rel_dist needs lap_k > 0");
    set.rel_dist = rel_distances(g, set.lap.eigvecs, set.lap.k);
    set.has_rel = true;
  }
  return set;
}

EncodingSet stack_encodings(const std::vector<EncodingSet>& sets, const GraphBatch& batch) {
  if (static_cast<std::int64_t>(sets.size()) != batch.num_graphs)
    throw std::invalid_argument("stack_encodings: one encoding set per graph required");
  EncodingSet out;
  if (sets.empty()) return out;
  out.has_lap = sets[0].has_lap;
  out.has_rwse = sets[0].has_rwse;
  out.has_rel = sets[0].has_rel;
  out.lap.k = sets[0].lap.k;
  out.rwse_m = sets[0].rwse_m;
  for (std::int64_t gi = 0; gi < batch.num_graphs; ++gi) {
    const EncodingSet& s = sets[gi];
    if (s.has_lap != out.has_lap || s.has_rwse != out.has_rwse || s.has_rel != out.has_rel ||
        (s.has_lap && s.lap.k != out.lap.k) || (s.has_rwse && s.rwse_m != out.rwse_m))
      throw std::invalid_argument("stack_encodings: heterogeneous encoding configs");
    if (out.has_lap)
      out.lap.eigvecs.insert(out.lap.eigvecs.end(), s.lap.eigvecs.begin(), s.lap.eigvecs.end());
    if (out.has_rwse)
      out.rwse_mat.insert(out.rwse_mat.end(), s.rwse_mat.begin(), s.rwse_mat.end());
    if (out.has_rel)
      out.rel_dist.insert(out.rel_dist.end(), s.rel_dist.begin(), s.rel_dist.end());
  }
  // per-node eigenvalue rows are graph level; expand so row u belongs to u's graph
  if (out.has_lap) {
    out.lap.eigvals.clear();
    for (std::int64_t gi = 0; gi < batch.num_graphs; ++gi) {
      const std::int64_t nodes = batch.node_offsets[gi + 1] - batch.node_offsets[gi];
      for (std::int64_t u = 0; u < nodes; ++u)
        out.lap.eigvals.insert(out.lap.eigvals.end(), sets[gi].lap.eigvals.begin(),
                               sets[gi].lap.eigvals.end());
    }
  }
  return out;
}

void write_encodings_jsonl(const std::string& path, const std::vector<Graph>& graphs,
                           std::int64_t lap_k, std::int64_t rwse_m) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_encodings_jsonl: cannot open " + path);
  for (const Graph& g : graphs) {
    const LapPe pe = lap_pe(g, lap_k);
    const auto rw = rwse(g, rwse_m);
    nlohmann::json j;
    j["lap_eigvals"] = pe.eigvals;
    auto& vecs = j["lap_eigvecs"] = nlohmann::json::array();
    for (std::int64_t u = 0; u < g.num_nodes; ++u) {
      nlohmann::json row = nlohmann::json::array();
      for (std::int64_t c = 0; c < pe.k; ++c) row.push_back(pe.eigvecs[u * pe.k + c]);
      vecs.push_back(row);
    }
    auto& rmat = j["rwse"] = nlohmann::json::array();
    for (std::int64_t u = 0; u < g.num_nodes; ++u) {
      nlohmann::json row = nlohmann::json::array();
      for (std::int64_t t = 0; t < rwse_m; ++t) row.push_back(rw[u * rwse_m + t]);
      rmat.push_back(row);
    }
    os << j.dump() << "\n";
  }
}

}  // namespace gps
