#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gpsgraph/model.hpp"
#include "gpsgraph/train.hpp"

namespace gps {

// One experiment's hyperparameters; flat key=value on disk with keys equal to
// the field names below.
struct RunConfig {
  std::string dataset_path;
  std::string dataset_kind = "zinc";
  std::int64_t split_train = 1000;
  std::int64_t split_val = 200;
  std::int64_t split_test = 200;
  std::int64_t layers = 10;
  std::int64_t hidden_dim = 64;
  std::string mpnn = "gine";
  std::string attn = "transformer";
  std::int64_t heads = 4;
  std::string pe = "rwse";
  std::int64_t lap_k = 8;
  std::int64_t rwse_m = 20;
  std::int64_t pe_dim = 28;
  std::string pe_encoder = "linear";
  double dropout = 0.0;
  double attn_dropout = 0.5;
  std::string pooling = "sum";
  std::int64_t batch_size = 32;
  double base_lr = 1e-3;
  std::int64_t epochs = 100;
  std::int64_t warmup_epochs = 5;
  double weight_decay = 1e-5;
  std::uint64_t seed = 0;
  std::int64_t performer_m_feat = 64;
  bool performer_redraw = false;
  std::string out_dir = "runs/latest";

  // Canonical serialization; stored byte-exact in every result record.
  std::string echo() const;
};

RunConfig parse_run_config(const std::string& path);
RunConfig parse_run_config_text(const std::string& text);

// Model/schedule derivation shared by the runner and tests.
ModelConfig model_config_from(const RunConfig& rc, const std::vector<Graph>& sample);
TrainSchedule schedule_from(const RunConfig& rc, TaskKind task);

struct RunResult {
  double final_val = 0.0;
  double final_test = 0.0;
  double best_val = 0.0;
  std::int64_t best_epoch = -1;
  double final_train_loss = 0.0;
  double final_train_metric = 0.0;
  std::int64_t param_count = 0;
  double pe_precompute_seconds = 0.0;
  double mean_epoch_seconds = 0.0;
  double mean_eval_seconds = 0.0;
  double total_seconds = 0.0;
  std::string config_echo;
  std::string metric_name;
};

// Full pipeline: load + split, precompute encodings, build, train with
// best-validation selection, write metrics.csv / result.json / checkpoint
// under rc.out_dir.
RunResult run_config(const RunConfig& rc);

// Expressivity demonstrations; prints one PASS/FAIL line per check.
struct ExpressivityReport {
  bool wl_csl_equal = false;       // identical WL histograms on the CSL pair
  bool rwse_csl_separates = false; // RWSE-8 feature multisets differ
  bool lap_csl_separates = false;  // LapPE-8 eigenvalue lists differ
  bool decalin_links = false;      // WL/RWSE tie, LapPE distance splits
  bool all_pass() const {
    return wl_csl_equal && rwse_csl_separates && lap_csl_separates && decalin_links;
  }
};
ExpressivityReport expressivity_suite(bool print = true);

struct AblationRow {
  std::string value;
  double metric_mean = 0.0;
  double metric_sd = 0.0;
  std::int64_t param_count = 0;
  double epoch_seconds = 0.0;
};
// Sweeps one axis (attn | mpnn | pe) over its enum with all else fixed.
// Cells run sequentially unless parallel is set, in which case each cell owns
// its state and runs on its own worker.
std::vector<AblationRow> ablation_grid(const RunConfig& base, const std::string& axis,
                                       std::int64_t seeds, const std::string& out_csv = "",
                                       bool parallel = false);

struct TimingRow {
  std::int64_t n = 0;
  double full_seconds = 0.0;
  double performer_seconds = 0.0;
};
// Median-of-5 single forward of exact vs linear attention on random inputs.
std::vector<TimingRow> timing_benchmark(const std::vector<std::int64_t>& sizes, std::int64_t d,
                                        std::int64_t heads, std::int64_t m_feat);

}  // namespace gps
