#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace rotalith {

struct HeadConfig {
  int n_classes = 2;
  int hidden = 0;  ///< 0: linear softmax head; otherwise one rectified hidden layer
};

/// Layer parameters, input to output. Gradients share the layout.
struct HeadParams {
  std::vector<Eigen::MatrixXd> weights;  // [out x in]
  std::vector<Eigen::VectorXd> biases;
};

struct HeadModel {
  HeadConfig cfg;
  Eigen::RowVectorXd mean;   ///< feature standardization
  Eigen::RowVectorXd scale;  ///< 1 / std, or 1 for constant features
  HeadParams params;
};

struct TrainResult {
  HeadModel model;
  std::vector<double> loss;      ///< per epoch, before the update
  std::vector<double> accuracy;  ///< training accuracy per epoch, before the update
};

HeadParams init_head_params(int input_dim, const HeadConfig& cfg, std::uint64_t seed);

/// Mean softmax cross-entropy on already standardized rows, with its
/// analytic gradient.
double head_loss(const HeadParams& params, const Eigen::MatrixXd& x, const std::vector<int>& labels,
                 HeadParams* gradient = nullptr);

/// Full-batch gradient descent on the cross-entropy. Deterministic for a
/// given seed. Throws NumericError when the loss stops being finite.
TrainResult train_head(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                       const HeadConfig& cfg, int epochs, double lr, std::uint64_t seed);

Eigen::MatrixXd head_logits(const HeadModel& model, const Eigen::MatrixXd& features);
std::vector<int> predict(const HeadModel& model, const Eigen::MatrixXd& features);
double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels);

}  // namespace rotalith
