#include "rotalith/head.hpp"

#include <cmath>
#include <random>

#include "rotalith/errors.hpp"

namespace rotalith {

namespace {

void check_labels(const std::vector<int>& labels, Eigen::Index rows, int n_classes) {
  if (static_cast<Eigen::Index>(labels.size()) != rows) {
    throw ValidationError("label count does not match feature rows");
  }
  for (int l : labels) {
    if (l < 0 || l >= n_classes) {
      throw ValidationError("label " + std::to_string(l) + " outside [0, " +
                            std::to_string(n_classes) + ")");
    }
  }
}

// Logits and, if requested, the rectified hidden activations.
Eigen::MatrixXd forward(const HeadParams& p, const Eigen::MatrixXd& x, Eigen::MatrixXd* hidden) {
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    Eigen::MatrixXd z = a * p.weights[l].transpose();
    z.rowwise() += p.biases[l].transpose();
    if (l + 1 < p.weights.size()) {
      a = z.cwiseMax(0.0);
      if (hidden) *hidden = a;
    } else {
      a = std::move(z);
    }
  }
  return a;
}

Eigen::MatrixXd standardize(const HeadModel& m, const Eigen::MatrixXd& features) {
  if (features.cols() != m.mean.size()) {
    throw ValidationError("head expects " + std::to_string(m.mean.size()) + " features, got " +
                          std::to_string(features.cols()));
  }
  return (features.rowwise() - m.mean).array().rowwise() * m.scale.array();
}

}  // namespace

HeadParams init_head_params(int input_dim, const HeadConfig& cfg, std::uint64_t seed) {
  if (input_dim < 1 || cfg.n_classes < 2 || cfg.hidden < 0) {
    throw ValidationError("invalid head dimensions");
  }
  std::mt19937_64 rng(seed);
  std::vector<int> widths{input_dim};
  if (cfg.hidden > 0) widths.push_back(cfg.hidden);
  widths.push_back(cfg.n_classes);
  HeadParams p;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / widths[l]));
    Eigen::MatrixXd w(widths[l + 1], widths[l]);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(widths[l + 1]));
  }
  return p;
}

double head_loss(const HeadParams& params, const Eigen::MatrixXd& x, const std::vector<int>& labels,
                 HeadParams* gradient) {
  const Eigen::Index n = x.rows();
  if (n == 0) throw ValidationError("no training rows");
  Eigen::MatrixXd hidden;
  const Eigen::MatrixXd logits = forward(params, x, &hidden);
  check_labels(labels, n, static_cast<int>(logits.cols()));

  // Row-wise log-softmax with the max subtracted.
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  Eigen::MatrixXd prob = (logits.colwise() - row_max).array().exp();
  const Eigen::VectorXd z = prob.rowwise().sum();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    loss += std::log(z[i]) + row_max[i] - logits(i, labels[i]);
    prob.row(i) /= z[i];
  }
  loss /= static_cast<double>(n);
  if (!gradient) return loss;

  Eigen::MatrixXd delta = prob;
  for (Eigen::Index i = 0; i < n; ++i) delta(i, labels[i]) -= 1.0;
  delta /= static_cast<double>(n);

  const std::size_t layers = params.weights.size();
  gradient->weights.assign(layers, {});
  gradient->biases.assign(layers, {});
  if (layers == 1) {
    gradient->weights[0] = delta.transpose() * x;
    gradient->biases[0] = delta.colwise().sum().transpose();
    return loss;
  }
  gradient->weights[1] = delta.transpose() * hidden;
  gradient->biases[1] = delta.colwise().sum().transpose();
  Eigen::MatrixXd back = delta * params.weights[1];
  back = back.array() * (hidden.array() > 0.0).cast<double>();
  gradient->weights[0] = back.transpose() * x;
  gradient->biases[0] = back.colwise().sum().transpose();
  return loss;
}

TrainResult train_head(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                       const HeadConfig& cfg, int epochs, double lr, std::uint64_t seed) {
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (!(lr >= 0.0)) throw ValidationError("learning rate must be non-negative");
  check_labels(labels, features.rows(), cfg.n_classes);
  if (features.rows() == 0) throw ValidationError("no training rows");
  if (!features.allFinite()) throw NumericError("training features contain NaN or infinity");

  TrainResult result;
  HeadModel& m = result.model;
  m.cfg = cfg;
  m.mean = features.colwise().mean();
  const Eigen::MatrixXd centered = features.rowwise() - m.mean;
  const Eigen::RowVectorXd sd =
      (centered.array().square().colwise().sum() / static_cast<double>(features.rows())).sqrt();
  m.scale = sd.unaryExpr([](double s) { return s > 1e-12 ? 1.0 / s : 1.0; });
  const Eigen::MatrixXd x = centered.array().rowwise() * m.scale.array();
  m.params = init_head_params(static_cast<int>(features.cols()), cfg, seed);

  HeadParams grad;
  for (int e = 0; e < epochs; ++e) {
    const double loss = head_loss(m.params, x, labels, &grad);
    if (!std::isfinite(loss)) {
      throw NumericError("head training diverged at epoch " + std::to_string(e) +
                         " (loss is not finite); lower the learning rate");
    }
    result.loss.push_back(loss);
    result.accuracy.push_back(accuracy(predict(m, features), labels));
    for (std::size_t l = 0; l < m.params.weights.size(); ++l) {
      m.params.weights[l] -= lr * grad.weights[l];
      m.params.biases[l] -= lr * grad.biases[l];
    }
  }
  return result;
}

Eigen::MatrixXd head_logits(const HeadModel& model, const Eigen::MatrixXd& features) {
  return forward(model.params, standardize(model, features), nullptr);
}

std::vector<int> predict(const HeadModel& model, const Eigen::MatrixXd& features) {
  const Eigen::MatrixXd logits = head_logits(model, features);
  std::vector<int> out(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best;
    logits.row(i).maxCoeff(&best);
    out[i] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels) {
  if (predicted.size() != labels.size()) throw ValidationError("prediction count mismatch");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace rotalith
