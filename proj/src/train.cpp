#include "gpsgraph/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gps {

Dataset make_dataset(std::vector<Graph> graphs, const EncodingConfig& enc_cfg) {
  Dataset ds;
  ds.encodings.reserve(graphs.size());
  for (const Graph& g : graphs) ds.encodings.push_back(compute_encodings(g, enc_cfg));
  ds.graphs = std::move(graphs);
  return ds;
}

ModelSnapshot snapshot_model(const GpsModel& model) {
  ModelSnapshot snap;
  const ParamStore& store = model.params();
  for (const auto& name : store.names()) snap.params.emplace_back(name, store.get(name).data());
  auto& mutable_store = const_cast<ParamStore&>(store);
  for (const auto& name : store.state_names())
    snap.state.emplace_back(name, mutable_store.state(name, 0, 0.0));
  return snap;
}

void restore_model(GpsModel& model, const ModelSnapshot& snap) {
  ParamStore& store = model.params();
  for (const auto& [name, data] : snap.params) store.get(name).mutable_data() = data;
  for (const auto& [name, data] : snap.state)
    store.state(name, static_cast<std::int64_t>(data.size()), 0.0) = data;
}

namespace {

struct BatchViews {
  GraphBatch batch;
  EncodingSet enc;
};

BatchViews assemble(const Dataset& data, const std::vector<std::int64_t>& idx, std::int64_t beg,
                    std::int64_t end) {
  std::vector<Graph> graphs;
  std::vector<EncodingSet> encs;
  graphs.reserve(static_cast<std::size_t>(end - beg));
  for (std::int64_t i = beg; i < end; ++i) {
    graphs.push_back(data.graphs[idx[i]]);
    encs.push_back(data.encodings[idx[i]]);
  }
  BatchViews v{batch_graphs(graphs), {}};
  v.enc = stack_encodings(encs, v.batch);
  return v;
}

double metric_on_batch(const Value& out, const GraphBatch& batch, MetricKind metric,
                       double* weight) {
  if (metric == MetricKind::kMae) {
    const auto n = static_cast<std::int64_t>(batch.target_scalars.size());
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i)
      acc += std::fabs(out.data()[i] - batch.target_scalars[i]);
    *weight = static_cast<double>(n);
    return acc;
  }
  const bool node_level = batch.target_kind == TargetKind::kNodeClasses;
  const auto& labels = node_level ? batch.target_node_classes : batch.target_classes;
  const std::int64_t rows = out.rows(), c = out.cols();
  double correct = 0.0;
  for (std::int64_t i = 0; i < rows; ++i) {
    std::int64_t best = 0;
    for (std::int64_t j = 1; j < c; ++j)
      if (out.data()[i * c + j] > out.data()[i * c + best]) best = j;
    if (best == labels[static_cast<std::size_t>(i)]) correct += 1.0;
  }
  *weight = static_cast<double>(rows);
  return correct;
}

}  // namespace

Value batch_loss(const Value& out, const GraphBatch& batch, LossKind kind,
                 const std::vector<double>* class_weights) {
  switch (kind) {
    case LossKind::kL1:
      if (batch.target_kind != TargetKind::kScalar)
        throw std::invalid_argument("batch_loss: l1 needs scalar targets");
      return l1_loss(out, batch.target_scalars);
    case LossKind::kCrossEntropy:
      if (batch.target_kind == TargetKind::kClassIndex)
        return cross_entropy(out, batch.target_classes);
      if (batch.target_kind == TargetKind::kNodeClasses)
        return cross_entropy(out, batch.target_node_classes);
      throw std::invalid_argument("batch_loss: cross entropy needs class targets");
    case LossKind::kWeightedCrossEntropy:
      if (batch.target_kind != TargetKind::kNodeClasses)
        throw std::invalid_argument("batch_loss: weighted cross entropy is for node tasks");
      return cross_entropy(out, batch.target_node_classes, class_weights);
  }
  throw std::logic_error("unreachable");
}

std::vector<double> inverse_frequency_weights(const Dataset& data, std::int64_t num_classes) {
  std::vector<double> counts(static_cast<std::size_t>(num_classes), 0.0);
  double total = 0.0;
  for (const Graph& g : data.graphs)
    for (std::int64_t c : g.target_node_classes) {
      counts[static_cast<std::size_t>(c)] += 1.0;
      total += 1.0;
    }
  std::vector<double> w(static_cast<std::size_t>(num_classes), 0.0);
  for (std::size_t c = 0; c < w.size(); ++c)
    w[c] = counts[c] > 0.0 ? total / (static_cast<double>(num_classes) * counts[c]) : 0.0;
  return w;
}

double evaluate(GpsModel& model, const Dataset& data, MetricKind metric,
                std::int64_t batch_size) {
  if (data.graphs.empty()) return 0.0;
  std::vector<std::int64_t> idx(data.graphs.size());
  std::iota(idx.begin(), idx.end(), 0);
  double acc = 0.0, weight = 0.0;
  RngStream eval_rng(0);  // eval mode draws nothing
  const auto n = static_cast<std::int64_t>(idx.size());
  for (std::int64_t beg = 0; beg < n; beg += batch_size) {
    const std::int64_t end = std::min(n, beg + batch_size);
    BatchViews v = assemble(data, idx, beg, end);
    Value out = model.forward(v.batch, v.enc, Mode::kEval, eval_rng);
    double w = 0.0;
    acc += metric_on_batch(out, v.batch, metric, &w);
    weight += w;
  }
  return metric == MetricKind::kMae ? acc / weight : acc / weight;
}

EpochResult train_epoch(TrainState& state, GpsModel& model, const Dataset& train,
                        const TrainSchedule& sched, std::int64_t steps_per_epoch,
                        std::int64_t total_steps) {
  if (train.graphs.empty()) throw std::invalid_argument("train_epoch: empty dataset");
  std::vector<std::int64_t> idx(train.graphs.size());
  std::iota(idx.begin(), idx.end(), 0);
  RngStream shuffle_rng = state.root.split("shuffle").split(static_cast<std::uint64_t>(state.epoch));
  for (std::int64_t i = static_cast<std::int64_t>(idx.size()) - 1; i > 0; --i) {
    const auto j = static_cast<std::int64_t>(shuffle_rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(idx[i], idx[j]);
  }

  std::vector<double> class_weights;
  const std::vector<double>* weights_ptr = nullptr;
  if (sched.loss == LossKind::kWeightedCrossEntropy) {
    class_weights = inverse_frequency_weights(train, model.config().out_dim);
    weights_ptr = &class_weights;
  }

  if (model.config().performer_redraw)
    model.redraw_performer_features(
        state.root.split("performer_redraw").split(static_cast<std::uint64_t>(state.epoch)));

  const auto n = static_cast<std::int64_t>(idx.size());
  double loss_sum = 0.0;
  std::int64_t batches = 0;
  for (std::int64_t beg = 0; beg < n; beg += sched.batch_size) {
    const std::int64_t end = std::min(n, beg + sched.batch_size);
    BatchViews v = assemble(train, idx, beg, end);
    RngStream step_rng = state.root.split("step").split(static_cast<std::uint64_t>(state.step));
    model.params().zero_grads();
    Value out = model.forward(v.batch, v.enc, Mode::kTrain, step_rng);
    Value loss = batch_loss(out, v.batch, sched.loss, weights_ptr);
    if (!std::isfinite(loss.item()))
      throw std::runtime_error("train_epoch: non-finite loss at epoch " +
                               std::to_string(state.epoch) + " batch " + std::to_string(batches));
    backward(loss);
    AdamWConfig opt;
    opt.lr = warmup_cosine_lr(state.step, sched.base_lr,
                              sched.warmup_epochs * steps_per_epoch, total_steps);
    opt.weight_decay = sched.weight_decay;
    adamw_step(model.params(), opt);
    loss_sum += loss.item();
    ++batches;
    ++state.step;
  }
  EpochResult res;
  res.mean_train_loss = loss_sum / static_cast<double>(batches);
  res.train_metric = evaluate(model, train, sched.metric, sched.eval_batch_size);
  ++state.epoch;
  return res;
}

}  // namespace gps
