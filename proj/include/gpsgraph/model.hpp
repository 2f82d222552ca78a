#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpsgraph/encodings.hpp"
#include "gpsgraph/graph.hpp"
#include "gpsgraph/ops.hpp"
#include "gpsgraph/param_store.hpp"

namespace gps {

enum class MpnnKind { kNone, kGine, kGatedGcn };
enum class AttnKind { kNone, kTransformer, kPerformer };
enum class PeKind { kNone, kLapPe, kRwse, kSignNetMlp, kSignNetDeepSets, kPegLapEig };
enum class PeEncoderKind { kLinear, kDeepSet };
enum class TaskKind { kGraphRegression, kGraphClassification, kNodeClassification };

struct ModelConfig {
  std::int64_t layers = 10;
  std::int64_t hidden_dim = 64;
  MpnnKind mpnn = MpnnKind::kGine;
  bool peg_gate = false;  // gate MPNN messages with sigmoid(w * dist + b)
  AttnKind attn = AttnKind::kTransformer;
  std::int64_t heads = 4;
  std::int64_t performer_m_feat = 64;
  bool performer_redraw = false;  // redraw random features every epoch
  PeKind pe = PeKind::kNone;
  std::int64_t lap_k = 8;
  std::int64_t rwse_m = 20;
  std::int64_t pe_dim = 28;
  PeEncoderKind pe_encoder = PeEncoderKind::kLinear;
  double dropout = 0.0;
  double attn_dropout = 0.5;
  PoolMode pooling = PoolMode::kSum;
  TaskKind task = TaskKind::kGraphRegression;
  std::int64_t out_dim = 1;
  // input schema
  FeatKind node_feat_kind = FeatKind::kCategorical;
  std::int64_t node_feat_dim = 1;         // columns of raw features
  std::int64_t node_cardinality = 28;     // categorical vocabulary
  FeatKind edge_feat_kind = FeatKind::kCategorical;
  std::int64_t edge_feat_dim = 1;
  std::int64_t edge_cardinality = 3;
  bool lap_sign_flip_augment = true;  // train-time column sign flips

  bool uses_lap() const {
    return pe == PeKind::kLapPe || pe == PeKind::kSignNetMlp || pe == PeKind::kSignNetDeepSets ||
           pe == PeKind::kPegLapEig;
  }
  bool node_pe_active() const {
    return pe == PeKind::kLapPe || pe == PeKind::kRwse || pe == PeKind::kSignNetMlp ||
           pe == PeKind::kSignNetDeepSets;
  }
  bool relative_pe_active() const { return pe == PeKind::kPegLapEig; }
  bool peg_active() const { return peg_gate || relative_pe_active(); }
  EncodingConfig encoding_config() const {
    EncodingConfig ec;
    if (uses_lap()) ec.lap_k = lap_k;
    if (pe == PeKind::kRwse) ec.rwse_m = rwse_m;
    ec.rel_dist = peg_active() || relative_pe_active();
    if (ec.rel_dist && ec.lap_k == 0) ec.lap_k = lap_k;
    return ec;
  }
};

MpnnKind mpnn_kind_from_string(const std::string& s, bool* peg);
AttnKind attn_kind_from_string(const std::string& s);
PeKind pe_kind_from_string(const std::string& s);
PeEncoderKind pe_encoder_from_string(const std::string& s);

// The full network: input encoders with PE/SE fusion, a stack of hybrid
// MPNN + global-attention layers, and a task head. Parameters live in an
// owned ParamStore and are created deterministically from the seed.
class GpsModel {
 public:
  GpsModel(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  std::int64_t param_count() const { return store_.param_count(); }

  // Task output: [G x out_dim] for graph tasks, [N x out_dim] for node tasks.
  Value forward(const GraphBatch& batch, const EncodingSet& enc, Mode mode, RngStream& rng);

  // Node and edge representations after the layer stack.
  struct Trace {
    Value node_repr;
    Value edge_repr;
  };
  Trace forward_trace(const GraphBatch& batch, const EncodingSet& enc, Mode mode, RngStream& rng);

  void redraw_performer_features(RngStream rng);

  void save_checkpoint(const std::string& path, const std::string& config_echo) const;
  std::string load_checkpoint(const std::string& path);

 private:
  Value encode_nodes(const GraphBatch& batch, const EncodingSet& enc, Mode mode, RngStream& rng);
  Value encode_edges(const GraphBatch& batch, const EncodingSet& enc);
  Value pe_features(const std::vector<double>& eigvecs, const EncodingSet& enc, std::int64_t n,
                    Mode mode);
  Value mpnn_branch(std::int64_t layer, const Value& x, const Value& e, const GraphBatch& batch,
                    const EncodingSet& enc, Value* edge_out);
  Value attn_branch(std::int64_t layer, const Value& x, const GraphBatch& batch, Mode mode,
                    RngStream& rng);
  Value run_bn(const std::string& name, const Value& x, Mode mode);
  Value head(const Value& node_repr, const GraphBatch& batch);

  ModelConfig cfg_;
  ParamStore store_;
};

}  // namespace gps
