#include "smoothmax/densenet.hpp"

#include <cmath>

namespace smoothmax {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Softplus: return "softplus";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "softplus") return Activation::Softplus;
  if (s == "tanh") return Activation::Tanh;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

Matrix apply(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::Relu: return z.cwiseMax(0.0);
    case Activation::Softplus: return z.unaryExpr([](double v) { return softplus(v); });
    case Activation::Tanh: return z.array().tanh().matrix();
  }
  return z;
}

Matrix derivative(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::Relu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::Softplus: return z.unaryExpr([](double v) { return sigmoid(v); });
    case Activation::Tanh: return (1.0 - z.array().tanh().square()).matrix();
  }
  return Matrix::Ones(z.rows(), z.cols());
}

}  // namespace

DenseNet::DenseNet(std::vector<int> dims, Activation act) : dims_(std::move(dims)), act_(act) {
  if (dims_.size() < 2) throw std::invalid_argument("DenseNet: needs at least input and output sizes");
  for (int d : dims_)
    if (d < 1) throw std::invalid_argument("DenseNet: layer sizes must be positive");
  for (int l = 0; l < n_layers(); ++l) {
    offsets_.push_back(n_params_);
    n_params_ += dims_[l + 1] * dims_[l] + dims_[l + 1];
  }
}

DenseNet::Params DenseNet::unpack(const Vector& params) const {
  if (params.size() != n_params_) throw std::invalid_argument("DenseNet::unpack: wrong parameter count");
  Params p;
  for (int l = 0; l < n_layers(); ++l) {
    const int in = dims_[l], out = dims_[l + 1], off = offsets_[l];
    p.W.push_back(Eigen::Map<const Matrix>(params.data() + off, out, in));
    p.b.push_back(params.segment(off + out * in, out));
  }
  return p;
}

Vector DenseNet::pack(const Params& p) const {
  if (static_cast<int>(p.W.size()) != n_layers() || static_cast<int>(p.b.size()) != n_layers())
    throw std::invalid_argument("DenseNet::pack: wrong layer count");
  Vector v(n_params_);
  for (int l = 0; l < n_layers(); ++l) {
    const int in = dims_[l], out = dims_[l + 1], off = offsets_[l];
    if (p.W[l].rows() != out || p.W[l].cols() != in || p.b[l].size() != out)
      throw std::invalid_argument("DenseNet::pack: layer shape mismatch");
    Eigen::Map<Matrix>(v.data() + off, out, in) = p.W[l];
    v.segment(off + out * in, out) = p.b[l];
  }
  return v;
}

Matrix DenseNet::forward(const Vector& params, const Matrix& X, Tape* tape) const {
  if (params.size() != n_params_) throw std::invalid_argument("DenseNet::forward: wrong parameter count");
  if (X.rows() != in_dim()) throw std::invalid_argument("DenseNet::forward: input has wrong row count");
  if (tape) {
    tape->inputs.clear();
    tape->pre.clear();
  }
  Matrix a = X;
  for (int l = 0; l < n_layers(); ++l) {
    const int in = dims_[l], out = dims_[l + 1], off = offsets_[l];
    const Eigen::Map<const Matrix> W(params.data() + off, out, in);
    const Eigen::Map<const Vector> b(params.data() + off + out * in, out);
    Matrix z = W * a;
    z.colwise() += b;
    if (tape) {
      tape->inputs.push_back(a);
      tape->pre.push_back(z);
    }
    a = l + 1 < n_layers() ? apply(act_, z) : std::move(z);
  }
  return a;
}

void DenseNet::backward(const Vector& params, const Tape& tape, const Matrix& dout, Vector* dparams,
                        Matrix* dX) const {
  if (static_cast<int>(tape.pre.size()) != n_layers()) throw std::invalid_argument("DenseNet::backward: empty tape");
  if (dparams && dparams->size() != n_params_) *dparams = Vector::Zero(n_params_);
  Matrix g = dout;
  for (int l = n_layers() - 1; l >= 0; --l) {
    const int in = dims_[l], out = dims_[l + 1], off = offsets_[l];
    if (l + 1 < n_layers()) g = g.cwiseProduct(derivative(act_, tape.pre[l]));
    if (dparams) {
      Eigen::Map<Matrix>(dparams->data() + off, out, in).noalias() += g * tape.inputs[l].transpose();
      dparams->segment(off + out * in, out) += g.rowwise().sum();
    }
    if (l > 0 || dX) {
      const Eigen::Map<const Matrix> W(params.data() + off, out, in);
      Matrix prev = W.transpose() * g;
      g = std::move(prev);
    }
  }
  if (dX) *dX = std::move(g);
}

Vector DenseNet::init_params(const Seed& seed) const {
  CounterRng rng(seed, Role::AdversaryInit);
  Vector v(n_params_);
  for (int l = 0; l < n_layers(); ++l) {
    const int in = dims_[l], out = dims_[l + 1], off = offsets_[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (int i = 0; i < out * in + out; ++i) v[off + i] = rng.uniform(-bound, bound);
  }
  return v;
}

}  // namespace smoothmax
