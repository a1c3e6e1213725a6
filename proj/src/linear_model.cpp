#include "noshow/linear_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "noshow/evaluation.hpp"
#include "noshow/parallel.hpp"
#include "noshow/rng.hpp"

namespace noshow::linear {

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;

// Problem data in the form the solver iterates on.
struct Problem {
  SparseMatrix X;
  Vector y;
  Vector w;  // per-row class weight
  double inv_n = 0.0;

  Problem(const DesignMatrix& design, const ClassWeights& weights)
      : X(design.rows.sparseView()), y(design.labels), w(design.labels.size()) {
    for (Eigen::Index i = 0; i < y.size(); ++i) w[i] = weights.of(y[i] > 0.5 ? 1 : 0);
    inv_n = 1.0 / static_cast<double>(y.size());
  }

  double loss(const Vector& eta) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) s += w[i] * (softplus(eta[i]) - y[i] * eta[i]);
    return s * inv_n;
  }

  // residual r_i = w_i (sigma(eta_i) - y_i) / n
  Vector residual(const Vector& eta) const {
    Vector r(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) r[i] = w[i] * (sigmoid(eta[i]) - y[i]) * inv_n;
    return r;
  }
};

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

double violation(double g0, const Vector& g, const Vector& beta, double lambda) {
  double worst = std::abs(g0);
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double v = beta[j] == 0.0 ? std::max(0.0, std::abs(g[j]) - lambda)
                                    : std::abs(g[j] + (beta[j] > 0.0 ? lambda : -lambda));
    worst = std::max(worst, v);
  }
  return worst;
}

}  // namespace

FittedLinearModel fit_l1_logistic(const DesignMatrix& X, double lambda,
                                  const ClassWeights& weights, const SolverOptions& options,
                                  const FittedLinearModel* warm_start, SolverTrace* trace) {
  require(X.size() > 0 && X.width() > 0, ErrorKind::Validation, "fit_l1_logistic: empty design");
  require(lambda > 0.0 && std::isfinite(lambda), ErrorKind::Validation,
          "fit_l1_logistic: lambda must be positive");
  const Problem p(X, weights);
  const auto N = X.width();

  double b0 = 0.0;
  Vector beta = Vector::Zero(N);
  if (warm_start != nullptr) {
    require(warm_start->coefficients.size() == N, ErrorKind::Dimension,
            "warm start width mismatch");
    b0 = warm_start->intercept;
    beta = warm_start->coefficients;
  }

  Vector eta = (p.X * beta).array() + b0;
  double smooth = p.loss(eta);
  double F = smooth + lambda * beta.lpNorm<1>();
  double step = 1.0, t = 1.0;
  double b0_prev = b0;
  Vector beta_prev = beta, eta_prev = eta;
  if (trace) trace->objective.assign(1, F);

  // Proximal step from (c0, c) with backtracking on the quadratic upper model.
  struct Candidate {
    double b0 = 0.0, smooth = 0.0;
    Vector beta, eta;
  };
  const auto prox_step = [&](double c0, const Vector& c, const Vector& eta_c) {
    const double smooth_c = p.loss(eta_c);
    const Vector r = p.residual(eta_c);
    const double gc0 = r.sum();
    const Vector gc = p.X.transpose() * r;
    Candidate z;
    z.beta.resize(N);
    for (;;) {
      z.b0 = c0 - step * gc0;
      for (Eigen::Index j = 0; j < N; ++j) z.beta[j] = soft_threshold(c[j] - step * gc[j], step * lambda);
      z.eta = (p.X * z.beta).array() + z.b0;
      z.smooth = p.loss(z.eta);
      const double d0 = z.b0 - c0;
      const Vector d = z.beta - c;
      const double model = smooth_c + gc0 * d0 + gc.dot(d) + (d.squaredNorm() + d0 * d0) / (2.0 * step);
      if (z.smooth <= model + 1e-13 * std::max(1.0, std::abs(smooth_c)) || (d.squaredNorm() + d0 * d0) == 0.0) return z;
      step *= 0.5;
      if (step < 1e-20) throw ConvergenceError("fit_l1_logistic: line search failed", F);
    }
  };

  for (int it = 1; it <= options.max_iter; ++it) {
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double mom = (t - 1.0) / t_next;
    Candidate z = prox_step(b0 + mom * (b0 - b0_prev), beta + mom * (beta - beta_prev), eta + mom * (eta - eta_prev));
    double F_new = z.smooth + lambda * z.beta.lpNorm<1>();
    if (F_new > F) {
      // momentum overshot: restart from the current iterate
      t = 1.0;
      z = prox_step(b0, beta, eta);
      F_new = z.smooth + lambda * z.beta.lpNorm<1>();
    } else {
      t = t_next;
    }
    const double change = std::abs(F - F_new) / std::max(std::abs(F), 1e-300);

    b0_prev = b0;
    beta_prev.swap(beta);
    eta_prev.swap(eta);
    b0 = z.b0;
    beta = std::move(z.beta);
    eta = std::move(z.eta);
    F = F_new;
    if (trace) {
      trace->objective.push_back(F);
      trace->iterations = it;
    }
    if (change < options.tol) {
      const Vector r = p.residual(eta);
      if (violation(r.sum(), p.X.transpose() * r, beta, lambda) <= options.kkt_tol) {
        FittedLinearModel m;
        m.schema = X.schema;
        m.intercept = b0;
        m.coefficients = std::move(beta);
        m.penalty_lambda = lambda;
        return m;
      }
    }
    step *= 1.25;
  }
  throw ConvergenceError("fit_l1_logistic: no convergence within " +
                             std::to_string(options.max_iter) + " iterations (lambda " +
                             std::to_string(lambda) + ")",
                         F);
}

double objective(const DesignMatrix& X, const ClassWeights& weights, double lambda,
                 double intercept, const Vector& coefficients) {
  const Problem p(X, weights);
  const Vector eta = (p.X * coefficients).array() + intercept;
  return p.loss(eta) + lambda * coefficients.lpNorm<1>();
}

Vector smooth_gradient(const DesignMatrix& X, const ClassWeights& weights, double intercept,
                       const Vector& coefficients) {
  const Problem p(X, weights);
  const Vector eta = (p.X * coefficients).array() + intercept;
  const Vector r = p.residual(eta);
  Vector out(coefficients.size() + 1);
  out[0] = r.sum();
  out.tail(coefficients.size()) = p.X.transpose() * r;
  return out;
}

double kkt_violation(const DesignMatrix& X, const ClassWeights& weights,
                     const FittedLinearModel& model) {
  const Vector g = smooth_gradient(X, weights, model.intercept, model.coefficients);
  return violation(g[0], g.tail(model.coefficients.size()), model.coefficients,
                   model.penalty_lambda);
}

double predict_row(const FittedLinearModel& model, const Eigen::Ref<const Vector>& x) {
  require(x.size() == model.coefficients.size(), ErrorKind::Dimension,
          "predict_row: row width " + std::to_string(x.size()) + " != model width " +
              std::to_string(model.coefficients.size()));
  return sigmoid(model.intercept + model.coefficients.dot(x));
}

Vector predict_proba(const FittedLinearModel& model, const Matrix& rows) {
  require(rows.cols() == model.coefficients.size(), ErrorKind::Dimension,
          "predict_proba: width mismatch");
  const Vector eta = (rows * model.coefficients).array() + model.intercept;
  return sigmoid(eta);
}

std::vector<double> penalty_grid() {
  std::vector<double> out;
  const double bounds[4] = {0.0, 0.1, 1.0, 10.0};
  for (int k = 0; k < 3; ++k) {
    const double lo = bounds[k], hi = bounds[k + 1];
    for (int i = 1; i <= 10; ++i) out.push_back(lo + (hi - lo) * i / 10.0);
  }
  return out;
}

PenaltyPath penalty_path(const DesignMatrix& X, const ClassWeights& weights, int cv_folds,
                         std::uint64_t seed, const SolverOptions& options) {
  require(X.size() >= 2 * cv_folds, ErrorKind::Validation,
          "penalty_path: need at least 2 * cv_folds rows");
  const auto grid = penalty_grid();
  const auto folds = eval::stratified_folds(X.labels, cv_folds, substream_seed(seed, {0x1a55}));
  const auto n_grid = grid.size();
  // auc[f][k], nnz[f][k]
  std::vector<std::vector<double>> auc(static_cast<std::size_t>(cv_folds), std::vector<double>(n_grid));
  std::vector<std::vector<double>> nnz(static_cast<std::size_t>(cv_folds), std::vector<double>(n_grid));

  parallel_for(static_cast<std::size_t>(cv_folds), [&](std::size_t f) {
    auto [train_idx, test_idx] = eval::fold_indices(folds, static_cast<int>(f));
    const DesignMatrix train = X.subset(train_idx);
    const DesignMatrix test = X.subset(test_idx);
    FittedLinearModel previous;
    bool have_previous = false;
    for (std::size_t k = n_grid; k-- > 0;) {
      try {
        FittedLinearModel m = fit_l1_logistic(train, grid[k], weights, options,
                                              have_previous ? &previous : nullptr);
        auc[f][k] = eval::auroc(predict_proba(m, test.rows), test.labels);
        nnz[f][k] = m.n_nonzero();
        previous = std::move(m);
        have_previous = true;
      } catch (const Error& e) {
        throw Error(e.kind(), "penalty_path lambda " + std::to_string(grid[k]) + " fold " +
                                  std::to_string(f) + ": " + e.what());
      }
    }
  });

  PenaltyPath path;
  for (std::size_t k = 0; k < n_grid; ++k) {
    PathEntry e;
    e.lambda = grid[k];
    double sum = 0.0, nz = 0.0;
    for (int f = 0; f < cv_folds; ++f) {
      sum += auc[static_cast<std::size_t>(f)][k];
      nz += nnz[static_cast<std::size_t>(f)][k];
    }
    e.mean_cv_auroc = sum / cv_folds;
    e.n_nonzero = nz / cv_folds;
    double ss = 0.0;
    for (int f = 0; f < cv_folds; ++f) {
      const double d = auc[static_cast<std::size_t>(f)][k] - e.mean_cv_auroc;
      ss += d * d;
    }
    e.std_cv_auroc = std::sqrt(ss / cv_folds);
    path.entries.push_back(e);
  }
  return path;
}

double select_penalty(const PenaltyPath& path, double delta) {
  require(!path.entries.empty(), ErrorKind::Validation, "select_penalty: empty path");
  double best_auc = -1.0;
  for (const auto& e : path.entries) best_auc = std::max(best_auc, e.mean_cv_auroc);
  const PathEntry* chosen = nullptr;
  for (const auto& e : path.entries) {
    if (e.mean_cv_auroc < best_auc - delta - 1e-12) continue;
    if (chosen == nullptr || e.n_nonzero < chosen->n_nonzero ||
        (e.n_nonzero == chosen->n_nonzero && e.lambda > chosen->lambda)) {
      chosen = &e;
    }
  }
  return chosen->lambda;
}

OddsRatioTable odds_ratios(std::span<const FittedLinearModel> models) {
  require(!models.empty(), ErrorKind::Validation, "odds_ratios: no models");
  const auto& first = models.front();
  require(first.schema != nullptr, ErrorKind::Schema, "odds_ratios: model without schema");
  Vector sum = Vector::Zero(first.coefficients.size());
  for (const auto& m : models) {
    require(m.schema != nullptr &&
                (m.schema == first.schema || *m.schema == *first.schema) &&
                m.coefficients.size() == first.coefficients.size(),
            ErrorKind::Schema, "odds_ratios: models do not share one feature schema");
    sum += m.coefficients;
  }
  const Vector mean = sum / static_cast<double>(models.size());
  OddsRatioTable table;
  const auto names = first.schema->column_names();
  for (Eigen::Index j = 0; j < mean.size(); ++j) {
    table.rows.push_back({names[static_cast<std::size_t>(j)], mean[j], std::exp(mean[j])});
  }
  return table;
}

}  // namespace noshow::linear
