#include <algorithm>
#include <cmath>

#include "treebench/baselines.hpp"

namespace treebench {

OneHotEncoder::OneHotEncoder(std::vector<FeatureSpec> schema) : schema_(std::move(schema)) {
  for (const auto& f : schema_) {
    offsets_.push_back(width_);
    width_ += static_cast<Eigen::Index>(f.allowed_codes.size()) - 1;
  }
}

VectorXd OneHotEncoder::encode(RowRef row) const {
  if (row.size() != static_cast<Eigen::Index>(schema_.size())) {
    throw UsageError("row has " + std::to_string(row.size()) + " features, model expects " +
                     std::to_string(schema_.size()));
  }
  VectorXd x = VectorXd::Zero(width_);
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    const int k = schema_[j].code_index(row(static_cast<Eigen::Index>(j)));
    if (k > 0) x(offsets_[j] + k - 1) = 1.0;
  }
  return x;
}

MatrixXd OneHotEncoder::encode(const CategoricalTable& data) const {
  MatrixXd X(data.rows(), width_);
  for (Eigen::Index i = 0; i < data.rows(); ++i) X.row(i) = encode(data.row(i)).transpose();
  return X;
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

LogisticModel::LogisticModel(OneHotEncoder encoder, double intercept, VectorXd beta, int iterations,
                             double gradient_norm, std::vector<std::string> warnings)
    : encoder_(std::move(encoder)),
      intercept_(intercept),
      beta_(std::move(beta)),
      iterations_(iterations),
      gradient_norm_(gradient_norm),
      warnings_(std::move(warnings)) {
  if (beta_.size() != encoder_.width()) throw DataError("logistic coefficient count does not match the encoding");
}

double LogisticModel::predict_proba(RowRef row) const {
  return sigmoid(intercept_ + beta_.dot(encoder_.encode(row)));
}

LogisticModel train_logistic(const CategoricalTable& data, const LogisticOptions& options) {
  if (options.max_iterations < 0 || !(options.tolerance > 0.0) || options.l2 < 0.0) {
    throw UsageError("invalid logistic options");
  }
  if (data.rows() == 0) throw UsageError("cannot fit logistic regression on an empty table");
  OneHotEncoder enc(data.schema());
  const Eigen::Index d = enc.width() + 1;
  std::vector<std::string> warnings;
  if (data.rows() < d) {
    warnings.push_back("fewer rows (" + std::to_string(data.rows()) + ") than encoded parameters (" +
                       std::to_string(d) + ")");
  }
  MatrixXd X(data.rows(), d);
  X.col(0).setOnes();
  X.rightCols(d - 1) = enc.encode(data);
  const VectorXd y = data.target().cast<double>();
  VectorXd penalty = VectorXd::Constant(d, options.l2);
  penalty(0) = 0.0;

  auto objective = [&](const VectorXd& w) {
    const VectorXd eta = X * w;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y(i) * eta(i) - softplus(eta(i));
    return ll - 0.5 * (penalty.array() * w.array().square()).sum();
  };

  VectorXd w = VectorXd::Zero(d);
  const double rate = std::clamp(y.mean(), 1e-6, 1.0 - 1e-6);
  w(0) = std::log(rate / (1.0 - rate));
  double f = objective(w);
  double gnorm = 0.0;
  int iter = 0;
  for (;; ++iter) {
    const VectorXd eta = X * w;
    VectorXd p(eta.size());
    VectorXd s(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      p(i) = sigmoid(eta(i));
      s(i) = p(i) * (1.0 - p(i));
    }
    const VectorXd grad = X.transpose() * (y - p) - penalty.cwiseProduct(w);
    gnorm = grad.lpNorm<Eigen::Infinity>();
    if (gnorm < options.tolerance) break;
    if (iter >= options.max_iterations) {
      throw ComputeError("logistic regression did not converge after " + std::to_string(iter) +
                         " iterations (gradient norm " + format_double(gnorm) + ")");
    }
    MatrixXd H = X.transpose() * s.asDiagonal() * X;
    H.diagonal() += penalty;
    const Eigen::LDLT<MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success) throw ComputeError("logistic Hessian factorization failed");
    const VectorXd step = ldlt.solve(grad);
    double t = 1.0;
    VectorXd next = w + step;
    double fn = objective(next);
    while (!(fn >= f - 1e-12 * std::abs(f)) && t > 1e-10) {
      t *= 0.5;
      next = w + t * step;
      fn = objective(next);
    }
    if (!std::isfinite(fn)) throw ComputeError("logistic regression diverged");
    w = std::move(next);
    f = fn;
  }
  return LogisticModel(std::move(enc), w(0), w.tail(d - 1), iter, gnorm, std::move(warnings));
}

}  // namespace treebench
