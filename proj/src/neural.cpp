#include "noshow/neural.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "neural_detail.hpp"
#include "noshow/parallel.hpp"
#include "noshow/rng.hpp"

namespace noshow::neural {

MlpModel init_mlp(int n_inputs, int n_hidden, std::uint64_t seed) {
  require(n_inputs >= 1 && n_hidden >= 1, ErrorKind::Validation,
          "init_mlp: need at least one input and one hidden unit");
  Rng rng(seed, {0x1417});
  MlpModel m;
  m.seed = seed;
  const double a1 = std::sqrt(6.0 / (n_inputs + n_hidden));
  const double a2 = std::sqrt(6.0 / (n_hidden + 1));
  m.W1.resize(n_hidden, n_inputs);
  // row-major fill so the draw order matches the persisted layout
  for (int h = 0; h < n_hidden; ++h)
    for (int j = 0; j < n_inputs; ++j) m.W1(h, j) = rng.uniform(-a1, a1);
  m.b1 = Vector::Zero(n_hidden);
  m.W2.resize(n_hidden);
  for (int h = 0; h < n_hidden; ++h) m.W2[h] = rng.uniform(-a2, a2);
  m.b2 = 0.0;
  return m;
}

Forward forward(const MlpModel& model, const Eigen::Ref<const Vector>& x) {
  require(x.size() == model.inputs(), ErrorKind::Dimension,
          "forward: row width " + std::to_string(x.size()) + " != model width " +
              std::to_string(model.inputs()));
  Forward f;
  f.hidden_pre = model.W1 * x + model.b1;
  f.hidden_post = f.hidden_pre.cwiseMax(0.0);
  f.output_pre = model.W2.dot(f.hidden_post) + model.b2;
  f.probability = sigmoid(f.output_pre);
  return f;
}

Vector predict_proba(const MlpModel& model, const Matrix& rows) {
  require(rows.cols() == model.inputs(), ErrorKind::Dimension, "predict_proba: width mismatch");
  Matrix hidden = (rows * model.W1.transpose()).rowwise() + model.b1.transpose();
  hidden = hidden.cwiseMax(0.0);
  const Vector out = (hidden * model.W2).array() + model.b2;
  return sigmoid(out);
}

double loss_and_gradient(const MlpModel& model, const Matrix& X, const Vector& labels,
                         const ClassWeights& weights, MlpGradient* gradient) {
  require(X.cols() == model.inputs(), ErrorKind::Dimension, "loss_and_gradient: width mismatch");
  const Vector w = detail::row_weights(labels, weights);
  return detail::mlp_pass(model, X, labels, w, gradient, nullptr);
}

TrainResult train(const MlpModel& model, const DesignMatrix& X, const TrainConfig& config,
                  const Checkpoint& checkpoint) {
  require(X.size() > 0, ErrorKind::Validation, "train: empty design");
  require(X.width() == model.inputs(), ErrorKind::Dimension, "train: width mismatch");
  require(config.n_iterations >= 0, ErrorKind::Validation, "train: negative iteration count");
  require(config.learning_rate >= 0.0, ErrorKind::Validation, "train: negative learning rate");
  const auto n_pos = (X.labels.array() > 0.5).count();
  require(n_pos > 0 && n_pos < X.size(), ErrorKind::Validation,
          "train: both classes must be present");

  const Eigen::SparseMatrix<double> Xs = X.rows.sparseView();
  const Vector w = detail::row_weights(X.labels, config.weights);

  TrainResult result;
  result.model = model;
  MlpModel& current = result.model;
  detail::Workspace ws;
  MlpGradient grad;
  double loss = detail::mlp_pass(current, Xs, X.labels, w, &grad, nullptr, ws);
  if (!std::isfinite(loss)) throw DivergenceError("train: non-finite initial loss", 0);
  result.loss_trace.reserve(static_cast<std::size_t>(config.n_iterations) + 1);
  result.loss_trace.push_back(loss);

  double lr = config.learning_rate;
  MlpModel proposal = current;
  MlpGradient proposal_grad;
  for (int it = 1; it <= config.n_iterations; ++it) {
    bool accepted = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      proposal.W1.noalias() = current.W1 - lr * grad.W1;
      proposal.b1.noalias() = current.b1 - lr * grad.b1;
      proposal.W2.noalias() = current.W2 - lr * grad.W2;
      proposal.b2 = current.b2 - lr * grad.b2;
      const double next = detail::mlp_pass(proposal, Xs, X.labels, w, &proposal_grad, nullptr, ws);
      if (std::isfinite(next) && next <= loss) {
        std::swap(current, proposal);
        std::swap(grad, proposal_grad);
        loss = next;
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) {
      if (!std::isfinite(loss)) throw DivergenceError("train: non-finite loss", it);
      // no descent step exists at this resolution: stay put
    }
    result.loss_trace.push_back(loss);
    if (checkpoint) checkpoint(it, current);
  }
  return result;
}

std::vector<int> hidden_grid(int n_inputs) {
  require(n_inputs >= 1, ErrorKind::Validation, "hidden_grid: need at least one input");
  const int lo = (n_inputs + 1) / 2;
  const int hi = 2 * n_inputs;
  std::vector<int> out;
  for (int k = 0; k < 10; ++k) {
    const int h = static_cast<int>(std::lround(lo + (hi - lo) * k / 9.0));
    if (out.empty() || out.back() != h) out.push_back(h);
  }
  return out;
}

std::vector<int> iteration_grid() {
  std::vector<int> out;
  for (int i = 100; i <= 1600; i += 100) out.push_back(i);
  return out;
}

NnGrid NnGrid::full(int n_inputs) { return {hidden_grid(n_inputs), iteration_grid()}; }

NnGrid NnGrid::fast(int n_inputs) {
  const auto h = hidden_grid(n_inputs);
  return {{h.front(), h[h.size() / 2]}, {400, 800, 1200, 1600}};
}

NnSearchResult grid_search_nn(const DesignMatrix& X, const ClassWeights& weights, int cv_folds,
                              std::uint64_t seed, const NnGrid& grid, int repetitions,
                              double learning_rate) {
  require(X.size() >= 2 * cv_folds, ErrorKind::Validation,
          "grid_search_nn: need at least 2 * cv_folds rows");
  require(!grid.hidden.empty() && !grid.iterations.empty(), ErrorKind::Validation,
          "grid_search_nn: empty grid");
  std::vector<int> iterations = grid.iterations;
  std::sort(iterations.begin(), iterations.end());
  const int max_iter = iterations.back();

  std::vector<std::vector<int>> assignments(static_cast<std::size_t>(repetitions));
  for (int r = 0; r < repetitions; ++r) {
    assignments[static_cast<std::size_t>(r)] = eval::stratified_folds(
        X.labels, cv_folds, substream_seed(seed, {static_cast<std::uint64_t>(r)}));
  }
  const std::size_t n_fold_cells = static_cast<std::size_t>(cv_folds * repetitions);
  const std::size_t n_iter = iterations.size();
  // auc[h][i][cell]
  std::vector<std::vector<std::vector<double>>> auc(
      grid.hidden.size(), std::vector<std::vector<double>>(n_iter, std::vector<double>(n_fold_cells)));
  std::vector<std::string> failure(grid.hidden.size());

  parallel_for(grid.hidden.size() * n_fold_cells, [&](std::size_t task) {
    const std::size_t hi = task / n_fold_cells;
    const std::size_t cell = task % n_fold_cells;
    const int r = static_cast<int>(cell) / cv_folds;
    const int f = static_cast<int>(cell) % cv_folds;
    auto [train_idx, test_idx] = eval::fold_indices(assignments[static_cast<std::size_t>(r)], f);
    const DesignMatrix train_set = X.subset(train_idx);
    const DesignMatrix test_set = X.subset(test_idx);
    const std::uint64_t fold_seed =
        substream_seed(seed, {static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(f), 0x7a1});
    const MlpModel start = init_mlp(X.width(), grid.hidden[hi], fold_seed);
    TrainConfig config{max_iter, learning_rate, weights};
    std::size_t next = 0;
    train(start, train_set, config, [&](int iteration, const MlpModel& m) {
      if (next < n_iter && iteration == iterations[next]) {
        auc[hi][next][cell] = eval::auroc(predict_proba(m, test_set.rows), test_set.labels);
        ++next;
      }
    });
  });

  NnSearchResult result;
  const NnCell* best = nullptr;
  for (std::size_t hi = 0; hi < grid.hidden.size(); ++hi) {
    for (std::size_t i = 0; i < n_iter; ++i) {
      NnCell cell{grid.hidden[hi], iterations[i],
                  eval::CvReport::from_scores("NN", cv_folds, repetitions, auc[hi][i])};
      result.cells.push_back(std::move(cell));
    }
  }
  for (const auto& cell : result.cells) {
    if (best == nullptr || cell.report.mean > best->report.mean ||
        (cell.report.mean == best->report.mean &&
         (cell.hidden < best->hidden ||
          (cell.hidden == best->hidden && cell.iterations < best->iterations)))) {
      best = &cell;
    }
  }
  result.hidden = best->hidden;
  result.config = {best->iterations, learning_rate, weights};
  result.report = best->report;
  return result;
}

}  // namespace noshow::neural
