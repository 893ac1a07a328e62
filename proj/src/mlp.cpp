#include "ahrm/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace ahrm::ppo {

Mlp::Mlp(int input_dim, const std::vector<int>& hidden, int output_dim, std::mt19937_64& rng) {
  std::vector<int> dims{input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(output_dim);
  for (int d : dims) {
    if (d <= 0) throw std::invalid_argument("network layer widths must be positive");
  }
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-scale, scale);
    DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd(fan_out)};
    for (int c = 0; c < fan_in; ++c) {
      for (int r = 0; r < fan_out; ++r) layer.weight(r, c) = u(rng);
    }
    for (int r = 0; r < fan_out; ++r) layer.bias(r) = u(rng);
    layers_.push_back(std::move(layer));
  }
}

std::vector<int> Mlp::hidden_widths() const {
  std::vector<int> widths;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    widths.push_back(static_cast<int>(layers_[l].weight.rows()));
  }
  return widths;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = (layers_[l].weight * h).colwise() + layers_[l].bias;
    h = (l + 1 < layers_.size()) ? Eigen::MatrixXd(z.array().tanh()) : z;
  }
  return h;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Tape& tape) const {
  tape.inputs.clear();
  tape.inputs.push_back(x);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = (layers_[l].weight * tape.inputs.back()).colwise() + layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.array().tanh();
    tape.inputs.push_back(std::move(z));
  }
  return tape.inputs.back();
}

void Mlp::backward(const Tape& tape, const Eigen::MatrixXd& grad_output, Mlp& grads) const {
  Eigen::MatrixXd delta = grad_output;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Eigen::MatrixXd& input = tape.inputs[l];
    grads.layers_[l].weight.noalias() += delta * input.transpose();
    grads.layers_[l].bias += delta.rowwise().sum();
    if (l == 0) break;
    // input is tanh output of the previous layer: d tanh = 1 - tanh^2.
    Eigen::MatrixXd back = layers_[l].weight.transpose() * delta;
    delta = back.array() * (1.0 - input.array().square());
  }
}

Mlp Mlp::zeros_like() const {
  Mlp z;
  for (const auto& layer : layers_) {
    z.layers_.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                         Eigen::VectorXd::Zero(layer.bias.size())});
  }
  return z;
}

std::size_t Mlp::num_params() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

bool Mlp::operator==(const Mlp& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& a = layers_[l];
    const auto& b = other.layers_[l];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols()) return false;
    if (a.weight != b.weight || a.bias != b.bias) return false;
  }
  return true;
}

}  // namespace ahrm::ppo
