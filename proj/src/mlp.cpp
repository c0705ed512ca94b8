#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "treebench/baselines.hpp"

namespace treebench {

void MlpOptions::validate() const {
  if (widths.empty()) throw UsageError("MLP needs at least one hidden layer");
  for (int w : widths) {
    if (w < 1) throw UsageError("MLP layer widths must be >= 1");
  }
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be > 0");
  if (epochs < 0) throw UsageError("epochs must be >= 0");
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (patience < 1) throw UsageError("patience must be >= 1");
  if (!(holdout >= 0.0 && holdout < 1.0)) throw UsageError("holdout must lie in [0, 1)");
}

namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

MlpModel::MlpModel(OneHotEncoder encoder, const std::vector<int>& widths, std::uint64_t seed)
    : encoder_(std::move(encoder)) {
  Rng rng(seed);
  Eigen::Index in = encoder_.width();
  std::vector<Eigen::Index> dims(widths.begin(), widths.end());
  dims.push_back(1);
  for (Eigen::Index out : dims) {
    // Glorot uniform
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    MatrixXd W(out, in);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) W(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
    }
    weights_.push_back(std::move(W));
    biases_.push_back(VectorXd::Zero(out));
    in = out;
  }
}

Eigen::Index MlpModel::parameter_count() const {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

VectorXd MlpModel::parameters() const {
  VectorXd theta(parameter_count());
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    theta.segment(k, weights_[l].size()) = weights_[l].reshaped();
    k += weights_[l].size();
    theta.segment(k, biases_[l].size()) = biases_[l];
    k += biases_[l].size();
  }
  return theta;
}

void MlpModel::set_parameters(const VectorXd& theta) {
  if (theta.size() != parameter_count()) throw UsageError("parameter vector has the wrong length");
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    weights_[l].reshaped() = theta.segment(k, weights_[l].size());
    k += weights_[l].size();
    biases_[l] = theta.segment(k, biases_[l].size());
    k += biases_[l].size();
  }
}

VectorXd MlpModel::forward(const MatrixXd& X) const {
  MatrixXd a = X;
  for (std::size_t l = 0; l + 1 < weights_.size(); ++l) {
    a = ((weights_[l] * a).colwise() + biases_[l]).array().tanh().matrix();
  }
  const Eigen::RowVectorXd z = (weights_.back() * a).array() + biases_.back()(0);
  VectorXd p(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) p(i) = sigmoid(z(i));
  return p;
}

double MlpModel::loss_and_gradient(const MatrixXd& X, const VectorXd& y, VectorXd* gradient) const {
  const Eigen::Index batch = X.cols();
  if (batch == 0 || y.size() != batch) throw UsageError("loss_and_gradient: batch shape mismatch");
  const std::size_t L = weights_.size();
  std::vector<MatrixXd> acts;  // acts[l] = input to layer l
  acts.reserve(L);
  acts.push_back(X);
  for (std::size_t l = 0; l + 1 < L; ++l) {
    acts.push_back(((weights_[l] * acts.back()).colwise() + biases_[l]).array().tanh().matrix());
  }
  const Eigen::RowVectorXd z = (weights_.back() * acts.back()).array() + biases_.back()(0);
  double loss = 0.0;
  MatrixXd delta(1, batch);
  for (Eigen::Index i = 0; i < batch; ++i) {
    loss += softplus(z(i)) - y(i) * z(i);
    delta(0, i) = (sigmoid(z(i)) - y(i)) / static_cast<double>(batch);
  }
  loss /= static_cast<double>(batch);
  if (!gradient) return loss;

  std::vector<MatrixXd> dW(L);
  std::vector<VectorXd> db(L);
  for (std::size_t l = L; l-- > 0;) {
    dW[l] = delta * acts[l].transpose();
    db[l] = delta.rowwise().sum();
    if (l == 0) break;
    const MatrixXd back = weights_[l].transpose() * delta;
    delta = back.array() * (1.0 - acts[l].array().square());
  }
  gradient->resize(parameter_count());
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < L; ++l) {
    gradient->segment(k, dW[l].size()) = dW[l].reshaped();
    k += dW[l].size();
    gradient->segment(k, db[l].size()) = db[l];
    k += db[l].size();
  }
  return loss;
}

double MlpModel::predict_proba(RowRef row) const {
  MatrixXd x = encoder_.encode(row);
  return forward(x)(0);
}

MlpModel train_mlp(const CategoricalTable& data, const MlpOptions& options) {
  options.validate();
  if (data.rows() == 0) throw UsageError("cannot train an MLP on an empty table");
  OneHotEncoder enc(data.schema());
  MlpModel model(enc, options.widths, derive_seed(options.seed, "mlp/init"));
  const MatrixXd X = enc.encode(data).transpose();  // inputs x rows
  const VectorXd y = data.target().cast<double>();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(derive_seed(options.seed, "mlp/train"));
  rng.shuffle(order);
  const auto n_val = static_cast<std::size_t>(std::floor(options.holdout * static_cast<double>(order.size())));
  std::vector<Eigen::Index> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<Eigen::Index> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  if (train.empty()) throw UsageError("MLP holdout leaves no training rows");

  const MatrixXd Xv = X(Eigen::all, val);
  const VectorXd yv = y(val);
  const Eigen::Index P = model.parameter_count();
  VectorXd m1 = VectorXd::Zero(P);
  VectorXd m2 = VectorXd::Zero(P);
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  long step = 0;

  VectorXd best = model.parameters();
  double best_loss = std::numeric_limits<double>::infinity();
  int stale = 0;
  int epoch = 0;
  VectorXd grad;
  for (; epoch < options.epochs; ++epoch) {
    rng.shuffle(train);
    for (std::size_t start = 0; start < train.size(); start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t end = std::min(train.size(), start + static_cast<std::size_t>(options.batch_size));
      const std::vector<Eigen::Index> idx(train.begin() + static_cast<std::ptrdiff_t>(start),
                                          train.begin() + static_cast<std::ptrdiff_t>(end));
      const double loss = model.loss_and_gradient(X(Eigen::all, idx), y(idx), &grad);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        throw ComputeError("MLP training diverged at epoch " + std::to_string(epoch));
      }
      ++step;
      m1 = beta1 * m1 + (1.0 - beta1) * grad;
      m2 = beta2 * m2 + (1.0 - beta2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      VectorXd theta = model.parameters();
      theta.array() -= options.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
      model.set_parameters(theta);
    }
    if (val.empty()) continue;
    const double vloss = model.loss_and_gradient(Xv, yv, nullptr);
    if (!std::isfinite(vloss)) throw ComputeError("MLP validation loss is not finite");
    if (vloss < best_loss - 1e-12) {
      best_loss = vloss;
      best = model.parameters();
      stale = 0;
    } else if (++stale >= options.patience) {
      ++epoch;
      break;
    }
  }
  if (!val.empty() && std::isfinite(best_loss)) model.set_parameters(best);
  model.epochs_run_ = epoch;
  return model;
}

}  // namespace treebench
