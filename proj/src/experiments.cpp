#include "gpsgraph/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "gpsgraph/io.hpp"

namespace gps {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <typename T>
std::string to_str(const T& v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string RunConfig::echo() const {
  std::ostringstream os;
  os << "dataset_path=" << dataset_path << "\n";
  os << "dataset_kind=" << dataset_kind << "\n";
  os << "split_train=" << split_train << "\n";
  os << "split_val=" << split_val << "\n";
  os << "split_test=" << split_test << "\n";
  os << "layers=" << layers << "\n";
  os << "hidden_dim=" << hidden_dim << "\n";
  os << "mpnn=" << mpnn << "\n";
  os << "attn=" << attn << "\n";
  os << "heads=" << heads << "\n";
  os << "pe=" << pe << "\n";
  os << "lap_k=" << lap_k << "\n";
  os << "rwse_m=" << rwse_m << "\n";
  os << "pe_dim=" << pe_dim << "\n";
  os << "pe_encoder=" << pe_encoder << "\n";
  os << "dropout=" << fmt_double(dropout) << "\n";
  os << "attn_dropout=" << fmt_double(attn_dropout) << "\n";
  os << "pooling=" << pooling << "\n";
  os << "batch_size=" << batch_size << "\n";
  os << "base_lr=" << fmt_double(base_lr) << "\n";
  os << "epochs=" << epochs << "\n";
  os << "warmup_epochs=" << warmup_epochs << "\n";
  os << "weight_decay=" << fmt_double(weight_decay) << "\n";
  os << "seed=" << seed << "\n";
  os << "performer_m_feat=" << performer_m_feat << "\n";
  os << "performer_redraw=" << (performer_redraw ? "true" : "false") << "\n";
  os << "out_dir=" << out_dir << "\n";
  return os.str();
}

RunConfig parse_run_config_text(const std::string& text) {
  RunConfig rc;
  std::istringstream is(text);
  std::string line;
  std::int64_t lineno = 0;
  auto to_i64 = [](const std::string& key, const std::string& v) {
    try {
      return static_cast<std::int64_t>(std::stoll(v));
    } catch (...) {
      throw std::invalid_argument("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
  };
  auto to_f64 = [](const std::string& key, const std::string& v) {
    try {
      return std::stod(v);
    } catch (...) {
      throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + v + "'");
    }
  };
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "dataset_path")
      rc.dataset_path = val;
    else if (key == "dataset_kind")
      rc.dataset_kind = val;
    else if (key == "split_train")
      rc.split_train = to_i64(key, val);
    else if (key == "split_val")
      rc.split_val = to_i64(key, val);
    else if (key == "split_test")
      rc.split_test = to_i64(key, val);
    else if (key == "layers")
      rc.layers = to_i64(key, val);
    else if (key == "hidden_dim")
      rc.hidden_dim = to_i64(key, val);
    else if (key == "mpnn")
      rc.mpnn = val;
    else if (key == "attn")
      rc.attn = val;
    else if (key == "heads")
      rc.heads = to_i64(key, val);
    else if (key == "pe")
      rc.pe = val;
    else if (key == "lap_k")
      rc.lap_k = to_i64(key, val);
    else if (key == "rwse_m")
      rc.rwse_m = to_i64(key, val);
    else if (key == "pe_dim")
      rc.pe_dim = to_i64(key, val);
    else if (key == "pe_encoder")
      rc.pe_encoder = val;
    else if (key == "dropout")
      rc.dropout = to_f64(key, val);
    else if (key == "attn_dropout")
      rc.attn_dropout = to_f64(key, val);
    else if (key == "pooling")
      rc.pooling = val;
    else if (key == "batch_size")
      rc.batch_size = to_i64(key, val);
    else if (key == "base_lr")
      rc.base_lr = to_f64(key, val);
    else if (key == "epochs")
      rc.epochs = to_i64(key, val);
    else if (key == "warmup_epochs")
      rc.warmup_epochs = to_i64(key, val);
    else if (key == "weight_decay")
      rc.weight_decay = to_f64(key, val);
    else if (key == "seed")
      rc.seed = static_cast<std::uint64_t>(to_i64(key, val));
    else if (key == "performer_m_feat")
      rc.performer_m_feat = to_i64(key, val);
    else if (key == "performer_redraw")
      rc.performer_redraw = (val == "true" || val == "1");
    else if (key == "out_dir")
      rc.out_dir = val;
    else
      throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  // validate enums eagerly so errors name the key
  bool peg = false;
  try {
    mpnn_kind_from_string(rc.mpnn, &peg);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: invalid value for key 'mpnn': " + rc.mpnn);
  }
  try {
    attn_kind_from_string(rc.attn);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: invalid value for key 'attn': " + rc.attn);
  }
  try {
    pe_kind_from_string(rc.pe);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: invalid value for key 'pe': " + rc.pe);
  }
  try {
    pe_encoder_from_string(rc.pe_encoder);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: invalid value for key 'pe_encoder': " + rc.pe_encoder);
  }
  if (rc.pooling != "sum" && rc.pooling != "mean" && rc.pooling != "max")
    throw std::invalid_argument("config: invalid value for key 'pooling': " + rc.pooling);
  try {
    dataset_kind_from_string(rc.dataset_kind);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: invalid value for key 'dataset_kind': " +
                                rc.dataset_kind);
  }
  return rc;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_run_config_text(ss.str());
}

ModelConfig model_config_from(const RunConfig& rc, const std::vector<Graph>& sample) {
  ModelConfig mc;
  mc.layers = rc.layers;
  mc.hidden_dim = rc.hidden_dim;
  bool peg = false;
  mc.mpnn = mpnn_kind_from_string(rc.mpnn, &peg);
  mc.peg_gate = peg;
  mc.attn = attn_kind_from_string(rc.attn);
  mc.heads = rc.heads;
  mc.performer_m_feat = rc.performer_m_feat;
  mc.performer_redraw = rc.performer_redraw;
  mc.pe = pe_kind_from_string(rc.pe);
  mc.lap_k = rc.lap_k;
  mc.rwse_m = rc.rwse_m;
  mc.pe_dim = rc.pe_dim;
  mc.pe_encoder = pe_encoder_from_string(rc.pe_encoder);
  mc.dropout = rc.dropout;
  mc.attn_dropout = rc.attn_dropout;
  mc.pooling = rc.pooling == "sum" ? PoolMode::kSum
                                   : (rc.pooling == "mean" ? PoolMode::kMean : PoolMode::kMax);
  if (sample.empty()) throw std::invalid_argument("model_config_from: empty dataset");
  const Graph& g0 = sample.front();
  mc.node_feat_kind = g0.node_feat_kind;
  mc.node_feat_dim = std::max<std::int64_t>(g0.node_feat_dim, 1);
  mc.edge_feat_kind = g0.edge_feat_kind;
  mc.edge_feat_dim = std::max<std::int64_t>(g0.edge_feat_dim, 1);
  if (rc.dataset_kind == "zinc") {
    mc.node_cardinality = 28;
    mc.edge_cardinality = 3;
  } else {
    std::int64_t ncard = 1, ecard = 1;
    for (const Graph& g : sample) {
      for (std::int64_t v : g.node_feat_cat) ncard = std::max(ncard, v + 1);
      for (std::int64_t v : g.edge_feat_cat) ecard = std::max(ecard, v + 1);
    }
    mc.node_cardinality = ncard;
    mc.edge_cardinality = ecard;
  }
  switch (g0.target_kind) {
    case TargetKind::kScalar:
      mc.task = TaskKind::kGraphRegression;
      mc.out_dim = 1;
      break;
    case TargetKind::kClassIndex: {
      std::int64_t classes = 1;
      for (const Graph& g : sample) classes = std::max(classes, g.target_class + 1);
      mc.task = TaskKind::kGraphClassification;
      mc.out_dim = classes;
      break;
    }
    case TargetKind::kNodeClasses: {
      std::int64_t classes = 1;
      for (const Graph& g : sample)
        for (std::int64_t c : g.target_node_classes) classes = std::max(classes, c + 1);
      mc.task = TaskKind::kNodeClassification;
      mc.out_dim = classes;
      break;
    }
    case TargetKind::kNone:
      throw std::invalid_argument("model_config_from: dataset has no targets");
  }
  return mc;
}

TrainSchedule schedule_from(const RunConfig& rc, TaskKind task) {
  TrainSchedule s;
  s.batch_size = rc.batch_size;
  s.base_lr = rc.base_lr;
  s.epochs = rc.epochs;
  s.warmup_epochs = rc.warmup_epochs;
  s.weight_decay = rc.weight_decay;
  switch (task) {
    case TaskKind::kGraphRegression:
      s.loss = LossKind::kL1;
      s.metric = MetricKind::kMae;
      break;
    case TaskKind::kGraphClassification:
      s.loss = LossKind::kCrossEntropy;
      s.metric = MetricKind::kAccuracy;
      break;
    case TaskKind::kNodeClassification:
      s.loss = LossKind::kWeightedCrossEntropy;
      s.metric = MetricKind::kAccuracy;
      break;
  }
  return s;
}

RunResult run_config(const RunConfig& rc) {
  const double t_start = now_seconds();
  auto graphs = load_graphs(rc.dataset_path, dataset_kind_from_string(rc.dataset_kind));
  const auto need = rc.split_train + rc.split_val + rc.split_test;
  if (static_cast<std::int64_t>(graphs.size()) < need)
    throw std::invalid_argument("run_config: dataset smaller than requested splits");
  ModelConfig mc = model_config_from(rc, graphs);
  const EncodingConfig enc_cfg = mc.encoding_config();

  const double t_pe0 = now_seconds();
  std::vector<Graph> train_graphs(graphs.begin(), graphs.begin() + rc.split_train);
  std::vector<Graph> val_graphs(graphs.begin() + rc.split_train,
                                graphs.begin() + rc.split_train + rc.split_val);
  std::vector<Graph> test_graphs(graphs.begin() + rc.split_train + rc.split_val,
                                 graphs.begin() + need);
  Dataset train = make_dataset(std::move(train_graphs), enc_cfg);
  Dataset val = make_dataset(std::move(val_graphs), enc_cfg);
  Dataset test = make_dataset(std::move(test_graphs), enc_cfg);
  const double pe_seconds = now_seconds() - t_pe0;

  GpsModel model(mc, rc.seed);
  TrainSchedule sched = schedule_from(rc, mc.task);
  TrainState state(rc.seed);
  const std::int64_t steps_per_epoch =
      (rc.split_train + rc.batch_size - 1) / rc.batch_size;
  const std::int64_t total_steps = steps_per_epoch * rc.epochs;
  const bool lower_better = sched.metric == MetricKind::kMae;

  std::filesystem::create_directories(rc.out_dir);
  std::ofstream csv(rc.out_dir + "/metrics.csv");
  csv << "epoch,lr,train_loss,train_metric,val_metric,test_metric,wall_seconds\n";

  RunResult result;
  result.param_count = model.param_count();
  result.pe_precompute_seconds = pe_seconds;
  result.config_echo = rc.echo();
  result.metric_name = lower_better ? "mae" : "accuracy";

  ModelSnapshot best;
  double epoch_time_sum = 0.0, eval_time_sum = 0.0;
  EpochResult last_epoch;
  for (std::int64_t e = 0; e < rc.epochs; ++e) {
    const double lr_now = warmup_cosine_lr(state.step, rc.base_lr,
                                           sched.warmup_epochs * steps_per_epoch, total_steps);
    const double t0 = now_seconds();
    last_epoch = train_epoch(state, model, train, sched, steps_per_epoch, total_steps);
    const double t1 = now_seconds();
    const double val_metric = evaluate(model, val, sched.metric, sched.eval_batch_size);
    const double test_metric = evaluate(model, test, sched.metric, sched.eval_batch_size);
    const double t2 = now_seconds();
    epoch_time_sum += t1 - t0;
    eval_time_sum += t2 - t1;
    csv << e << "," << fmt_double(lr_now) << "," << fmt_double(last_epoch.mean_train_loss) << ","
        << fmt_double(last_epoch.train_metric) << "," << fmt_double(val_metric) << ","
        << fmt_double(test_metric) << "," << fmt_double(t1 - t0) << "\n";
    csv.flush();
    const bool better = !state.has_best ||
                        (lower_better ? val_metric < state.best_val : val_metric > state.best_val);
    if (better) {
      state.best_val = val_metric;
      state.has_best = true;
      state.best_epoch = e;
      best = snapshot_model(model);
    }
  }
  if (state.has_best) restore_model(model, best);
  result.best_val = state.best_val;
  result.best_epoch = state.best_epoch;
  result.final_val = evaluate(model, val, sched.metric, sched.eval_batch_size);
  result.final_test = evaluate(model, test, sched.metric, sched.eval_batch_size);
  result.final_train_loss = last_epoch.mean_train_loss;
  result.final_train_metric = last_epoch.train_metric;
  result.mean_epoch_seconds = epoch_time_sum / static_cast<double>(rc.epochs);
  result.mean_eval_seconds = eval_time_sum / static_cast<double>(rc.epochs);
  result.total_seconds = now_seconds() - t_start;

  model.save_checkpoint(rc.out_dir + "/checkpoint.bin", rc.echo());
  nlohmann::json j;
  j["config"] = result.config_echo;
  j["param_count"] = result.param_count;
  j["metric"] = result.metric_name;
  j["best_val"] = result.best_val;
  j["best_epoch"] = result.best_epoch;
  j["final_val"] = result.final_val;
  j["final_test"] = result.final_test;
  j["final_train_loss"] = result.final_train_loss;
  j["final_train_metric"] = result.final_train_metric;
  j["pe_precompute_seconds"] = result.pe_precompute_seconds;
  j["mean_epoch_seconds"] = result.mean_epoch_seconds;
  j["mean_eval_seconds"] = result.mean_eval_seconds;
  j["total_seconds"] = result.total_seconds;
  std::ofstream(rc.out_dir + "/result.json") << j.dump(2) << "\n";
  return result;
}

ExpressivityReport expressivity_suite(bool print) {
  constexpr double kEqTol = 1e-9;
  constexpr double kDiffTol = 1e-6;
  ExpressivityReport rep;
  const Graph g2 = gen_csl(11, 2);
  const Graph g3 = gen_csl(11, 3);

  // (1) 1-WL cannot split the CSL pair
  const WlResult w2 = wl_colors(g2, 20);
  const WlResult w3 = wl_colors(g3, 20);
  rep.wl_csl_equal = w2.histogram == w3.histogram;

  // (2) RWSE-8 separates it: compare sorted per-node feature rows
  const auto r2 = rwse(g2, 8);
  const auto r3 = rwse(g3, 8);
  {
    auto rows = [](const std::vector<double>& m, std::int64_t n, std::int64_t k) {
      std::vector<std::vector<double>> out;
      for (std::int64_t u = 0; u < n; ++u)
        out.emplace_back(m.begin() + u * k, m.begin() + (u + 1) * k);
      std::sort(out.begin(), out.end());
      return out;
    };
    const auto a = rows(r2, 11, 8), b = rows(r3, 11, 8);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < a[i].size(); ++j)
        max_diff = std::max(max_diff, std::fabs(a[i][j] - b[i][j]));
    rep.rwse_csl_separates = max_diff > kDiffTol;
  }

  // (3) LapPE-8 eigenvalue lists differ
  {
    const LapPe p2 = lap_pe(g2, 8);
    const LapPe p3 = lap_pe(g3, 8);
    double max_diff = 0.0;
    for (std::int64_t i = 0; i < 8; ++i)
      max_diff = std::max(max_diff, std::fabs(p2.eigvals[i] - p3.eigvals[i]));
    rep.lap_csl_separates = max_diff > kDiffTol;
  }

  // (4) Decalin links (a,d) vs (b,d): tied under WL and RWSE, split by the
  // LapPE relative distance on the virtual arcs
  {
    const Graph dec = gen_decalin();
    const auto anchors = decalin_anchors();
    const WlResult wl = wl_colors(dec, 20);
    const bool wl_tie = wl.colors[anchors.a] == wl.colors[anchors.b];
    const auto rw = rwse(dec, 8);
    double rw_diff = 0.0;
    for (std::int64_t t = 0; t < 8; ++t)
      rw_diff = std::max(rw_diff, std::fabs(rw[anchors.a * 8 + t] - rw[anchors.b * 8 + t]));
    const LapPe pe = lap_pe(dec, 8);
    const auto dist = pair_distances(pe.eigvecs, 10, 8,
                                     {{anchors.a, anchors.d}, {anchors.b, anchors.d}});
    const double lap_gap = std::fabs(dist[0] - dist[1]);
    rep.decalin_links = wl_tie && rw_diff < kEqTol && lap_gap > kDiffTol;
  }

  if (print) {
    std::printf("expressivity checks (equality tol %.0e, difference tol %.0e)\n", kEqTol,
                kDiffTol);
    std::printf(
        "link features: concatenated endpoint node encodings plus the encoding distance on the "
        "virtual arc\n");
    std::printf("[1] WL histograms equal on CSL(11,2)/CSL(11,3): %s\n",
                rep.wl_csl_equal ? "PASS" : "FAIL");
    std::printf("[2] RWSE-8 feature multisets differ on the CSL pair: %s\n",
                rep.rwse_csl_separates ? "PASS" : "FAIL");
    std::printf("[3] LapPE-8 eigenvalue lists differ on the CSL pair: %s\n",
                rep.lap_csl_separates ? "PASS" : "FAIL");
    std::printf("[4] Decalin links (a,d)/(b,d): WL+RWSE tie, LapPE distance splits: %s\n",
                rep.decalin_links ? "PASS" : "FAIL");
  }
  return rep;
}

std::vector<AblationRow> ablation_grid(const RunConfig& base, const std::string& axis,
                                       std::int64_t seeds, const std::string& out_csv,
                                       bool parallel) {
  std::vector<std::string> values;
  if (axis == "attn")
    values = {"none", "transformer", "performer"};
  else if (axis == "mpnn")
    values = {"none", "gine", "gatedgcn", "gatedgcn+peg"};
  else if (axis == "pe")
    values = {"none", "lappe", "rwse", "signnet_mlp", "signnet_deepsets", "peg_lapeig"};
  else
    throw std::invalid_argument("ablation_grid: axis must be attn, mpnn or pe");
  if (seeds < 1) throw std::invalid_argument("ablation_grid: seeds must be >= 1");

  auto run_cell = [&](const std::string& v) {
    RunConfig rc = base;
    if (axis == "attn")
      rc.attn = v;
    else if (axis == "mpnn")
      rc.mpnn = v;
    else
      rc.pe = v;
    std::vector<double> metrics;
    AblationRow row;
    row.value = v;
    for (std::int64_t sidx = 0; sidx < seeds; ++sidx) {
      rc.seed = base.seed + static_cast<std::uint64_t>(sidx);
      rc.out_dir = base.out_dir + "/" + axis + "_" + v + "_seed" + std::to_string(rc.seed);
      const RunResult res = run_config(rc);
      metrics.push_back(res.best_val);
      row.param_count = res.param_count;
      row.epoch_seconds += res.mean_epoch_seconds / static_cast<double>(seeds);
    }
    double mean = 0.0;
    for (double m : metrics) mean += m;
    mean /= static_cast<double>(metrics.size());
    double var = 0.0;
    for (double m : metrics) var += (m - mean) * (m - mean);
    row.metric_mean = mean;
    row.metric_sd =
        metrics.size() > 1 ? std::sqrt(var / static_cast<double>(metrics.size() - 1)) : 0.0;
    return row;
  };

  std::vector<AblationRow> rows;
  if (parallel) {
    std::vector<std::future<AblationRow>> cells;
    cells.reserve(values.size());
    for (const std::string& v : values)
      cells.push_back(std::async(std::launch::async, run_cell, v));
    for (auto& f : cells) rows.push_back(f.get());
  } else {
    for (const std::string& v : values) rows.push_back(run_cell(v));
  }
  if (!out_csv.empty()) {
    std::ofstream os(out_csv);
    os << axis << ",metric_mean,metric_sd,param_count,epoch_seconds\n";
    for (const auto& r : rows)
      os << r.value << "," << fmt_double(r.metric_mean) << "," << fmt_double(r.metric_sd) << ","
         << r.param_count << "," << fmt_double(r.epoch_seconds) << "\n";
  }
  return rows;
}

std::vector<TimingRow> timing_benchmark(const std::vector<std::int64_t>& sizes, std::int64_t d,
                                        std::int64_t heads, std::int64_t m_feat) {
  for (std::size_t i = 1; i < sizes.size(); ++i)
    if (sizes[i] <= sizes[i - 1])
      throw std::invalid_argument("timing_benchmark: sizes must ascend");
  std::vector<TimingRow> rows;
  RngStream rng(0xbe7cll);
  const std::int64_t dh = d / heads;
  std::vector<double> features(static_cast<std::size_t>(heads * m_feat * dh));
  for (auto& v : features) v = rng.normal();
  for (std::int64_t n : sizes) {
    std::vector<double> xq(static_cast<std::size_t>(n * d)), xk(xq.size()), xv(xq.size());
    for (auto& v : xq) v = rng.normal();
    for (auto& v : xk) v = rng.normal();
    for (auto& v : xv) v = rng.normal();
    const Value q = Value::from_data(n, d, xq);
    const Value k = Value::from_data(n, d, xk);
    const Value v = Value::from_data(n, d, xv);
    std::vector<std::int64_t> seg(static_cast<std::size_t>(n), 0);
    RngStream unused(0);

    auto median5 = [](const std::function<void()>& fn) {
      std::vector<double> times;
      for (int rep = 0; rep < 5; ++rep) {
        const double t0 = now_seconds();
        fn();
        times.push_back(now_seconds() - t0);
      }
      std::sort(times.begin(), times.end());
      return times[2];
    };
    TimingRow row;
    row.n = n;
    row.full_seconds = median5([&] {
      RngStream r(0);
      segment_attention(q, k, v, seg, 1, heads, 0.0, Mode::kEval, r);
    });
    row.performer_seconds =
        median5([&] { performer_attention(q, k, v, seg, 1, heads, features, m_feat); });
    rows.push_back(row);
  }
  return rows;
}

}  // namespace gps
