#pragma once

#include <string>
#include <vector>

#include "smoothmax/core.hpp"

namespace smoothmax {

enum class Activation { Relu, Softplus, Tanh };

std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

/// Affine layers with an activation between them; the output layer is linear.
/// Parameter layout: for each layer, W (out x in, column-major) then b.
class DenseNet {
 public:
  struct Params {
    std::vector<Matrix> W;
    std::vector<Vector> b;
  };

  /// Inputs and pre-activations recorded by forward() for backward().
  struct Tape {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // W a + b for each layer
  };

  DenseNet(std::vector<int> dims, Activation act);

  const std::vector<int>& dims() const { return dims_; }
  Activation activation() const { return act_; }
  int n_layers() const { return static_cast<int>(dims_.size()) - 1; }
  int n_params() const { return n_params_; }
  int in_dim() const { return dims_.front(); }
  int out_dim() const { return dims_.back(); }

  Params unpack(const Vector& params) const;
  Vector pack(const Params& p) const;

  /// X is in_dim x batch; returns out_dim x batch.
  Matrix forward(const Vector& params, const Matrix& X, Tape* tape = nullptr) const;
  /// Given dL/d(output), accumulates the parameter gradient into *dparams (if
  /// non-null, resized on first use) and writes dL/dX into *dX (if non-null).
  void backward(const Vector& params, const Tape& tape, const Matrix& dout, Vector* dparams, Matrix* dX) const;

  /// W, b ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Vector init_params(const Seed& seed) const;

 private:
  std::vector<int> dims_;
  Activation act_;
  int n_params_ = 0;
  std::vector<int> offsets_;
};

double softplus(double z);
double sigmoid(double z);

}  // namespace smoothmax
