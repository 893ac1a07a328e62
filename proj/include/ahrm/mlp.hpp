#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <random>
#include <vector>

namespace ahrm::ppo {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// Fully connected network with tanh hidden layers and a linear output.
/// Batches are column-major: one sample per column.
class Mlp {
 public:
  struct Tape {
    // inputs[l] is the input to layer l; the last entry is the network output.
    std::vector<Eigen::MatrixXd> inputs;
  };

  Mlp() = default;

  /// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)). Throws
  /// std::invalid_argument on a non-positive dimension.
  Mlp(int input_dim, const std::vector<int>& hidden, int output_dim, std::mt19937_64& rng);

  int input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().weight.rows()); }
  std::vector<int> hidden_widths() const;

  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Tape& tape) const;

  /// Adds dLoss/dparams to `grads` given dLoss/doutput.
  void backward(const Tape& tape, const Eigen::MatrixXd& grad_output, Mlp& grads) const;

  Mlp zeros_like() const;
  std::size_t num_params() const;

  bool operator==(const Mlp& other) const;

 private:
  std::vector<DenseLayer> layers_;
};

}  // namespace ahrm::ppo
