#include <algorithm>
#include <cmath>

#include <Eigen/QR>

#include "neural_detail.hpp"
#include "noshow/neural.hpp"
#include "noshow/rng.hpp"

namespace noshow::neural {

int EmbeddingSpec::width() const {
  int w = 0;
  for (const auto& t : tables) w += t.dim;
  return w;
}

namespace {

Matrix orthonormal(int levels, int dim, Rng& rng) {
  Matrix g(levels, levels);
  for (int i = 0; i < levels; ++i)
    for (int j = 0; j < levels; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(levels, dim);
  return q;
}

void check_full_one_hot(const data::FeatureSchema& schema) {
  require(!schema.drops_reference() && schema.interactions().empty(), ErrorKind::Schema,
          "embeddings need a full one-hot schema without interactions");
}

}  // namespace

EmbeddingSpec embedding_spec(const data::FeatureSchema& schema, const std::vector<int>& dims,
                             std::uint64_t seed) {
  check_full_one_hot(schema);
  const auto& vars = schema.variables();
  require(dims.size() == vars.size(), ErrorKind::Validation,
          "embedding_spec: one dim per variable required");
  EmbeddingSpec spec;
  for (std::size_t k = 0; k < vars.size(); ++k) {
    EmbeddingTable t;
    t.variable = std::string(data::to_string(vars[k].variable));
    t.levels = static_cast<int>(vars[k].levels.size());
    t.dim = std::clamp(dims[k], 1, std::max(1, t.levels - 1));
    Rng rng(seed, {0xe3b, k});
    t.table = orthonormal(t.levels, t.dim, rng);
    spec.tables.push_back(std::move(t));
  }
  return spec;
}

EmbeddingSpec default_embedding_spec(const data::FeatureSchema& schema, std::uint64_t seed) {
  std::vector<int> dims;
  for (const auto& v : schema.variables()) {
    const int levels = static_cast<int>(v.levels.size());
    dims.push_back(std::max(1, std::min(levels - 1, (levels + 1) / 2)));
  }
  return embedding_spec(schema, dims, seed);
}

Eigen::MatrixXi categorical_codes(const DesignMatrix& X) {
  require(X.schema != nullptr, ErrorKind::Schema, "categorical_codes: design has no schema");
  const auto& schema = *X.schema;
  check_full_one_hot(schema);
  const auto n_vars = static_cast<Eigen::Index>(schema.variables().size());
  Eigen::MatrixXi codes(X.size(), n_vars);
  for (Eigen::Index k = 0; k < n_vars; ++k) {
    const auto [first, last] = schema.block(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < X.size(); ++i) {
      Eigen::Index hot = -1;
      X.rows.row(i).segment(first, last - first).maxCoeff(&hot);
      require(X.rows(i, first + hot) == 1.0, ErrorKind::Encoding,
              "categorical_codes: row " + std::to_string(i) + " has no active level for " +
                  std::string(data::to_string(schema.variables()[k].variable)));
      codes(i, k) = static_cast<int>(hot);
    }
  }
  return codes;
}

Matrix embed(const EmbeddingSpec& spec, const Eigen::MatrixXi& codes) {
  require(codes.cols() == static_cast<Eigen::Index>(spec.tables.size()), ErrorKind::Dimension,
          "embed: code width mismatch");
  Matrix out(codes.rows(), spec.width());
  int offset = 0;
  for (std::size_t k = 0; k < spec.tables.size(); ++k) {
    const auto& t = spec.tables[k];
    for (Eigen::Index i = 0; i < codes.rows(); ++i) {
      const int c = codes(i, static_cast<Eigen::Index>(k));
      require(c >= 0 && c < t.levels, ErrorKind::Encoding,
              "embed: level index out of range for " + t.variable);
      out.row(i).segment(offset, t.dim) = t.table.row(c);
    }
    offset += t.dim;
  }
  return out;
}

Vector predict_proba(const EmbeddingModel& model, const Eigen::MatrixXi& codes) {
  return predict_proba(model.mlp, embed(model.spec, codes));
}

double loss_and_gradient(const EmbeddingModel& model, const Eigen::MatrixXi& codes,
                         const Vector& labels, const ClassWeights& weights,
                         EmbeddingGradient* gradient) {
  const Matrix E = embed(model.spec, codes);
  require(E.cols() == model.mlp.inputs(), ErrorKind::Dimension,
          "loss_and_gradient: embedding width != network inputs");
  const Vector w = detail::row_weights(labels, weights);
  if (gradient == nullptr) return detail::mlp_pass(model.mlp, E, labels, w, nullptr, nullptr);
  Matrix dE;
  const double loss = detail::mlp_pass(model.mlp, E, labels, w, &gradient->mlp, &dE);
  gradient->tables.clear();
  int offset = 0;
  for (std::size_t k = 0; k < model.spec.tables.size(); ++k) {
    const auto& t = model.spec.tables[k];
    Matrix g = Matrix::Zero(t.levels, t.dim);
    for (Eigen::Index i = 0; i < codes.rows(); ++i)
      g.row(codes(i, static_cast<Eigen::Index>(k))) += dE.row(i).segment(offset, t.dim);
    gradient->tables.push_back(std::move(g));
    offset += t.dim;
  }
  return loss;
}

EmbeddingFit fit_embeddings(const DesignMatrix& X, const EmbeddingSpec& dims, int n_hidden,
                            const TrainConfig& config, std::uint64_t seed) {
  const Eigen::MatrixXi codes = categorical_codes(X);
  EmbeddingFit fit;
  fit.model.spec = dims;
  fit.model.mlp = init_mlp(dims.width(), n_hidden, seed);
  EmbeddingModel& current = fit.model;

  EmbeddingGradient grad;
  double loss = loss_and_gradient(current, codes, X.labels, config.weights, &grad);
  if (!std::isfinite(loss)) throw DivergenceError("fit_embeddings: non-finite initial loss", 0);
  fit.loss_trace.push_back(loss);

  double lr = config.learning_rate;
  EmbeddingModel proposal = current;
  EmbeddingGradient proposal_grad;
  for (int it = 1; it <= config.n_iterations; ++it) {
    for (int attempt = 0; attempt < 60; ++attempt) {
      proposal.mlp.W1 = current.mlp.W1 - lr * grad.mlp.W1;
      proposal.mlp.b1 = current.mlp.b1 - lr * grad.mlp.b1;
      proposal.mlp.W2 = current.mlp.W2 - lr * grad.mlp.W2;
      proposal.mlp.b2 = current.mlp.b2 - lr * grad.mlp.b2;
      for (std::size_t k = 0; k < current.spec.tables.size(); ++k)
        proposal.spec.tables[k].table = current.spec.tables[k].table - lr * grad.tables[k];
      const double next = loss_and_gradient(proposal, codes, X.labels, config.weights, &proposal_grad);
      if (std::isfinite(next) && next <= loss) {
        std::swap(current, proposal);
        std::swap(grad, proposal_grad);
        loss = next;
        break;
      }
      lr *= 0.5;
    }
    fit.loss_trace.push_back(loss);
  }
  return fit;
}

}  // namespace noshow::neural
