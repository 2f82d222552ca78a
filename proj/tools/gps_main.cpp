#include <cstdio>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gpsgraph/experiments.hpp"
#include "gpsgraph/io.hpp"

namespace {

std::vector<std::int64_t> parse_sizes(const std::string& csv) {
  std::vector<std::int64_t> sizes;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) sizes.push_back(std::stoll(tok));
  return sizes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GPS graph Transformer experiments"};
  app.require_subcommand(1);

  // graphs validate <path>
  auto* graphs_cmd = app.add_subcommand("graphs", "dataset utilities");
  graphs_cmd->require_subcommand(1);
  std::string validate_path;
  auto* validate_cmd = graphs_cmd->add_subcommand("validate", "check invariants and summarize");
  validate_cmd->add_option("path", validate_path, "JSON-lines graph file")->required();
  std::string validate_kind = "generic";
  validate_cmd->add_option("--kind", validate_kind, "dataset kind (zinc|generic)");

  // encode <graphs.jsonl> --lap-k K --rwse-m M --out <enc.jsonl>
  std::string encode_in, encode_out;
  std::int64_t lap_k = 8, rwse_m = 16;
  auto* encode_cmd = app.add_subcommand("encode", "precompute LapPE and RWSE per graph");
  encode_cmd->add_option("graphs", encode_in, "JSON-lines graph file")->required();
  encode_cmd->add_option("--lap-k", lap_k, "number of Laplacian eigenpairs");
  encode_cmd->add_option("--rwse-m", rwse_m, "random-walk steps");
  encode_cmd->add_option("--out", encode_out, "output JSON-lines path")->required();
  std::string encode_kind = "generic";
  encode_cmd->add_option("--kind", encode_kind, "dataset kind (zinc|generic)");

  // train --config <file>
  std::string train_config;
  auto* train_cmd = app.add_subcommand("train", "run one training configuration");
  train_cmd->add_option("--config", train_config, "key=value config file")->required();

  // ablate --config <file> --axis attn|mpnn|pe --seeds K
  std::string ablate_config, ablate_axis;
  std::int64_t ablate_seeds = 1;
  auto* ablate_cmd = app.add_subcommand("ablate", "sweep one module axis");
  ablate_cmd->add_option("--config", ablate_config, "base config file")->required();
  ablate_cmd->add_option("--axis", ablate_axis, "attn | mpnn | pe")->required();
  ablate_cmd->add_option("--seeds", ablate_seeds, "seeds per cell");
  bool ablate_parallel = false;
  ablate_cmd->add_flag("--parallel", ablate_parallel, "one worker per grid cell");

  // expressivity
  auto* expr_cmd = app.add_subcommand("expressivity", "run the encoding expressivity checks");

  // bench-attn --sizes 256,512,...
  std::string bench_sizes = "256,512,1024,2048,4096";
  std::int64_t bench_d = 64, bench_heads = 4, bench_mfeat = 64;
  auto* bench_cmd = app.add_subcommand("bench-attn", "time exact vs linear attention");
  bench_cmd->add_option("--sizes", bench_sizes, "comma-separated node counts");
  bench_cmd->add_option("--dim", bench_d, "feature dim");
  bench_cmd->add_option("--heads", bench_heads, "attention heads");
  bench_cmd->add_option("--m-feat", bench_mfeat, "performer random features");

  // datagen --out file --num-graphs N --seed S
  std::string datagen_out;
  std::int64_t datagen_n = 1400;
  std::uint64_t datagen_seed = 7;
  auto* datagen_cmd =
      app.add_subcommand("datagen", "write a synthetic molecule-like regression dataset");
  datagen_cmd->add_option("--out", datagen_out, "output JSON-lines path")->required();
  datagen_cmd->add_option("--num-graphs", datagen_n, "number of graphs");
  datagen_cmd->add_option("--seed", datagen_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate_cmd) {
      const auto graphs =
          gps::load_graphs(validate_path, gps::dataset_kind_from_string(validate_kind));
      for (const auto& g : graphs) g.validate();
      std::cout << gps::summary_to_string(gps::summarize(graphs));
      std::cout << "all invariants hold\n";
    } else if (*encode_cmd) {
      const auto graphs = gps::load_graphs(encode_in, gps::dataset_kind_from_string(encode_kind));
      gps::write_encodings_jsonl(encode_out, graphs, lap_k, rwse_m);
      std::cout << "wrote encodings for " << graphs.size() << " graphs to " << encode_out << "\n";
    } else if (*train_cmd) {
      const auto rc = gps::parse_run_config(train_config);
      const auto res = gps::run_config(rc);
      std::cout << "parameters: " << res.param_count << "\n";
      std::cout << res.metric_name << " best val: " << res.best_val
                << " (epoch " << res.best_epoch << ")\n";
      std::cout << res.metric_name << " final val: " << res.final_val
                << "  test: " << res.final_test << "\n";
      std::cout << "outputs in " << rc.out_dir << "\n";
    } else if (*ablate_cmd) {
      const auto rc = gps::parse_run_config(ablate_config);
      const auto rows = gps::ablation_grid(rc, ablate_axis, ablate_seeds,
                                           rc.out_dir + "/ablation.csv", ablate_parallel);
      std::printf("%-18s %12s %10s %12s %12s\n", ablate_axis.c_str(), "metric", "sd", "params",
                  "epoch[s]");
      for (const auto& r : rows)
        std::printf("%-18s %12.5f %10.5f %12lld %12.3f\n", r.value.c_str(), r.metric_mean,
                    r.metric_sd, static_cast<long long>(r.param_count), r.epoch_seconds);
    } else if (*expr_cmd) {
      const auto rep = gps::expressivity_suite(true);
      if (!rep.all_pass()) return 1;
    } else if (*bench_cmd) {
      const auto rows =
          gps::timing_benchmark(parse_sizes(bench_sizes), bench_d, bench_heads, bench_mfeat);
      std::printf("%8s %14s %14s\n", "N", "t_full[s]", "t_perf[s]");
      for (const auto& r : rows)
        std::printf("%8lld %14.6f %14.6f\n", static_cast<long long>(r.n), r.full_seconds,
                    r.performer_seconds);
    } else if (*datagen_cmd) {
      gps::SynthConfig cfg;
      cfg.num_graphs = datagen_n;
      cfg.seed = datagen_seed;
      const auto graphs = gps::gen_zinc_like(cfg);
      gps::save_graphs(datagen_out, graphs);
      std::cout << gps::summary_to_string(gps::summarize(graphs));
      std::cout << "wrote " << graphs.size() << " graphs to " << datagen_out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
