#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "smoothmax/densenet.hpp"
#include "smoothmax/gradient.hpp"

namespace smoothmax {

// ---- Dirac-GAN --------------------------------------------------------------------

/// f(theta, omega) = -log(1 + exp(-theta omega)) - log 2, scalar players.
/// Constants are declared for the box [-radius, radius]^2.
class DiracGan : public MinimaxOracle {
 public:
  explicit DiracGan(double radius = 5.0);

  const ProblemMetadata& metadata() const override { return meta_; }
  double value(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  Vector grad_x(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  Vector grad_y(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  FullEval evaluate(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  bool has_analytic_hvp() const override { return true; }
  Vector hvp_yy(const Vector& x, const Vector& y, const Vector& v, Component j = std::nullopt) const override;
  Vector hvp_xy(const Vector& x, const Vector& y, const Vector& v, Component j = std::nullopt) const override;

  double radius() const { return radius_; }

 private:
  double radius_;
  ProblemMetadata meta_;
};

DiracGan make_dirac_gan(double radius = 5.0);

// ---- quadratic games -------------------------------------------------------------

/// f(x, y) = x^T C y + (1/2) y^T Q y. Constants are declared on the ball ||(x, y)|| <= radius.
class QuadraticGame : public MinimaxOracle {
 public:
  QuadraticGame(Matrix C, Matrix Q, double radius = 2.0);

  const ProblemMetadata& metadata() const override { return meta_; }
  double value(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  Vector grad_x(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  Vector grad_y(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  bool has_analytic_hvp() const override { return true; }
  Vector hvp_yy(const Vector& x, const Vector& y, const Vector& v, Component j = std::nullopt) const override;
  Vector hvp_xy(const Vector& x, const Vector& y, const Vector& v, Component j = std::nullopt) const override;

  const Matrix& C() const { return C_; }
  const Matrix& Q() const { return Q_; }
  /// argmax_y f(x, y) = -Q^{-1} C^T x; requires Q negative definite.
  Vector best_response(const Vector& x) const;

 private:
  Matrix C_, Q_;
  ProblemMetadata meta_;
};

/// f = x^T C y - (alpha/2) ||y||^2.
QuadraticGame make_quadratic_game(const Matrix& C, double alpha, double radius = 2.0);
/// Arbitrary symmetric Q; positive eigenvalues make the game nonconcave in y.
QuadraticGame make_general_quadratic(const Matrix& C, const Matrix& Q, double radius = 2.0);

// ---- mixture-of-Gaussians GAN -----------------------------------------------------

struct MixtureSpec {
  int n_modes = 8;
  double sigma2 = 0.05;
  int latent_dim = 16;
  int batch = 64;
  /// Number of pre-drawn minibatches (components).
  int n_components = 1024;
};

/// Mode centres (sin phi, cos phi), phi = k 2 pi / n_modes; one per column.
Matrix mixture_means(const MixtureSpec& spec);

/// f = mean l(D(real)) + mean l(-D(G(z))), l(w) = -log(1 + exp(-w)).
/// x = generator parameters, y = discriminator parameters.
class MogGan : public MinimaxOracle {
 public:
  MogGan(MixtureSpec spec, DenseNet generator, DenseNet discriminator, const Seed& data_seed);

  const ProblemMetadata& metadata() const override { return meta_; }
  double value(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  Vector grad_x(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  Vector grad_y(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  FullEval evaluate(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  Vector default_y0(const Seed& seed) const override;

  const DenseNet& generator() const { return gen_; }
  const DenseNet& discriminator() const { return disc_; }
  const MixtureSpec& spec() const { return spec_; }
  Vector init_generator(const Seed& seed) const;
  /// n generated points (2 x n) from fresh latent draws.
  Matrix sample(const Vector& x, int n, const Seed& seed) const;
  /// Fraction of points nearest to each mode.
  std::vector<double> mode_mass(const Matrix& points) const;
  /// Fraction of points within 3 sigma of their nearest mode.
  double near_mode_fraction(const Matrix& points) const;

 private:
  FullEval eval_component(const Vector& x, const Vector& y, int j, bool need_gx, bool need_gy) const;
  FullEval eval_all(const Vector& x, const Vector& y, bool need_gx, bool need_gy) const;

  MixtureSpec spec_;
  DenseNet gen_, disc_;
  std::vector<Matrix> real_;    // 2 x batch per component
  std::vector<Matrix> latent_;  // latent x batch per component
  ProblemMetadata meta_;
};

MogGan make_mog_gan(const MixtureSpec& spec, const std::vector<int>& gen_layers, const std::vector<int>& disc_layers,
                    Activation activation, const Seed& data_seed = Seed{0, 0, 0});

// ---- adversarial training ----------------------------------------------------------

struct TwoClassData {
  Matrix X;                 // 2 x n
  std::vector<int> labels;  // 0 or 1
  int size() const { return static_cast<int>(labels.size()); }
};

struct TwoClassSpec {
  double robust_shift = 1.0;
  double robust_std = 0.6;
  double fragile_shift = 0.1;
  double fragile_std = 0.02;
};

/// Class c has features (s * robust_shift, s * fragile_shift) + noise with s = 2c - 1.
TwoClassData make_two_class_data(int n, const Seed& seed, const TwoClassSpec& spec = {});
void write_csv(std::ostream& os, const TwoClassData& data);
TwoClassData read_csv(std::istream& is);

/// f_j(theta, delta) = mean over minibatch j of cross-entropy(net(x_i + delta_i), y_i).
/// x = network parameters, y = stacked per-example perturbations (2 * batch).
class AdversarialTraining : public MinimaxOracle {
 public:
  AdversarialTraining(TwoClassData train, DenseNet net, int batch, int n_components, const Seed& batch_seed);

  const ProblemMetadata& metadata() const override { return meta_; }
  double value(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  Vector grad_x(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  Vector grad_y(const Vector& x, const Vector& y, Component j = std::nullopt) const override;
  FullEval evaluate(const Vector& x, const Vector& y, Component j = std::nullopt) const override;

  const DenseNet& net() const { return net_; }
  int batch() const { return batch_; }
  const TwoClassData& train() const { return train_; }
  const std::vector<int>& component_indices(int j) const { return batches_[static_cast<std::size_t>(j)]; }

  /// Mean cross-entropy and its gradients for explicit data.
  static FullEval loss(const DenseNet& net, const Vector& params, const Matrix& X, const std::vector<int>& labels,
                       const Matrix& delta, bool need_gx, bool need_gdelta);

  /// T steps of unprojected ascent on the summed loss, per-example step `step`.
  static Matrix attack(const DenseNet& net, const Vector& params, const Matrix& X, const std::vector<int>& labels,
                       int T, double step);
  static double accuracy(const DenseNet& net, const Vector& params, const Matrix& X, const std::vector<int>& labels,
                         const Matrix& delta);

 private:
  FullEval eval_component(const Vector& x, const Vector& y, int j, bool need_gx, bool need_gy) const;
  FullEval evaluate_parts(const Vector& x, const Vector& y, Component j, bool need_gx, bool need_gy) const;

  TwoClassData train_;
  DenseNet net_;
  int batch_;
  std::vector<std::vector<int>> batches_;
  ProblemMetadata meta_;
};

/// Adversary for the training family: ascent on delta from 0 with per-example
/// step `attack_step` (the oracle averages over the batch, so eta = step * batch).
AlgorithmSpec adversarial_attack_spec(const AdversarialTraining& problem, int T, double attack_step);

AdversarialTraining make_adversarial_training(const TwoClassData& train, const std::vector<int>& net_layers,
                                              Activation activation, int batch, int n_components,
                                              const Seed& batch_seed);

}  // namespace smoothmax
