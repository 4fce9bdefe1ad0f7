#include "smoothmax/problems.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace smoothmax {

namespace {

int pick_component(Component j, int n, const char* who) {
  if (!j) return -1;
  if (*j < 0 || *j >= n) throw std::invalid_argument(std::string(who) + ": component index out of range");
  return *j;
}

// h(w) = -log(1 + exp(-w)) and its derivatives.
double h0(double w) { return -softplus(-w); }
double h1(double w) { return sigmoid(-w); }
double h2(double w) { return -sigmoid(w) * sigmoid(-w); }
double h3(double w) {
  const double s = sigmoid(w);
  return -s * (1.0 - s) * (1.0 - 2.0 * s);
}

}  // namespace

// ---- Dirac-GAN --------------------------------------------------------------------

DiracGan::DiracGan(double radius) : radius_(radius) {
  if (!(radius > 0)) throw std::invalid_argument("DiracGan: radius must be positive");
  const double R = radius;
  // Hessian [[w^2 h'', c], [c, t^2 h'']] with c = h' + t w h''; |h''| <= 1/4.
  double cmax = 0.0;
  const int n = 200000;
  for (int i = 0; i <= n; ++i) {
    const double w = -R * R + 2.0 * R * R * i / n;
    cmax = std::max(cmax, std::abs(h1(w) + w * h2(w)));
  }
  // Frobenius norm of the third-derivative tensor over a grid, with a margin.
  double rho = 0.0;
  const int m = 400;
  for (int i = 0; i <= m; ++i) {
    for (int k = 0; k <= m; ++k) {
      const double t = -R + 2.0 * R * i / m, o = -R + 2.0 * R * k / m, w = t * o;
      const double a = o * o * o * h3(w);
      const double b = 2.0 * o * h2(w) + t * o * o * h3(w);
      const double c = 2.0 * t * h2(w) + t * t * o * h3(w);
      const double d = t * t * t * h3(w);
      rho = std::max(rho, std::sqrt(a * a + 3 * b * b + 3 * c * c + d * d));
    }
  }
  meta_.d1 = 1;
  meta_.d2 = 1;
  meta_.B = 2.0 * std::numbers::ln2 + 0.1;
  meta_.G = std::numbers::sqrt2 * R;
  meta_.L = R * R / 4.0 + cmax + 1e-6;
  meta_.rho = 1.05 * rho;
  meta_.concave_in_y = true;
  meta_.source = ConstantsSource::Declared;
  meta_.validate();
}

double DiracGan::value(const Vector& x, const Vector& y, Component) const {
  check_dims(x, y);
  return h0(x[0] * y[0]) - std::numbers::ln2;
}

Vector DiracGan::grad_x(const Vector& x, const Vector& y, Component) const {
  check_dims(x, y);
  return Vector::Constant(1, y[0] * h1(x[0] * y[0]));
}

Vector DiracGan::grad_y(const Vector& x, const Vector& y, Component) const {
  check_dims(x, y);
  return Vector::Constant(1, x[0] * h1(x[0] * y[0]));
}

FullEval DiracGan::evaluate(const Vector& x, const Vector& y, Component) const {
  check_dims(x, y);
  const double w = x[0] * y[0], s = h1(w);
  return {h0(w) - std::numbers::ln2, Vector::Constant(1, y[0] * s), Vector::Constant(1, x[0] * s)};
}

Vector DiracGan::hvp_yy(const Vector& x, const Vector& y, const Vector& v, Component) const {
  check_dims(x, y);
  return x[0] * x[0] * h2(x[0] * y[0]) * v;
}

Vector DiracGan::hvp_xy(const Vector& x, const Vector& y, const Vector& v, Component) const {
  check_dims(x, y);
  const double w = x[0] * y[0];
  return (h1(w) + w * h2(w)) * v;
}

DiracGan make_dirac_gan(double radius) { return DiracGan(radius); }

// ---- quadratic games -------------------------------------------------------------

QuadraticGame::QuadraticGame(Matrix C, Matrix Q, double radius) : C_(std::move(C)), Q_(std::move(Q)) {
  if (C_.size() == 0) throw std::invalid_argument("QuadraticGame: C must be non-empty");
  if (Q_.rows() != C_.cols() || Q_.cols() != C_.cols())
    throw std::invalid_argument("QuadraticGame: Q must be d2 x d2");
  if ((Q_ - Q_.transpose()).norm() > 1e-12 * (1.0 + Q_.norm()))
    throw std::invalid_argument("QuadraticGame: Q must be symmetric");
  if (!(radius > 0)) throw std::invalid_argument("QuadraticGame: radius must be positive");
  const auto d1 = C_.rows(), d2 = C_.cols();
  Matrix H = Matrix::Zero(d1 + d2, d1 + d2);
  H.topRightCorner(d1, d2) = C_;
  H.bottomLeftCorner(d2, d1) = C_.transpose();
  H.bottomRightCorner(d2, d2) = Q_;
  const Eigen::SelfAdjointEigenSolver<Matrix> joint(H, Eigen::EigenvaluesOnly);
  const double L = joint.eigenvalues().cwiseAbs().maxCoeff();
  const Eigen::SelfAdjointEigenSolver<Matrix> qe(Q_, Eigen::EigenvaluesOnly);
  const double qmax = qe.eigenvalues().maxCoeff();

  meta_.d1 = static_cast<int>(d1);
  meta_.d2 = static_cast<int>(d2);
  meta_.L = L;
  meta_.G = L * radius;
  meta_.B = L * radius * radius / 2.0;
  meta_.rho = 0.0;
  meta_.concave_in_y = qmax <= 0.0;
  if (qmax < 0.0) meta_.alpha = -qmax;
  meta_.source = ConstantsSource::Declared;
  meta_.validate();
}

double QuadraticGame::value(const Vector& x, const Vector& y, Component) const {
  check_dims(x, y);
  return x.dot(C_ * y) + 0.5 * y.dot(Q_ * y);
}

Vector QuadraticGame::grad_x(const Vector& x, const Vector& y, Component) const {
  check_dims(x, y);
  return C_ * y;
}

Vector QuadraticGame::grad_y(const Vector& x, const Vector& y, Component) const {
  check_dims(x, y);
  return C_.transpose() * x + Q_ * y;
}

Vector QuadraticGame::hvp_yy(const Vector& x, const Vector& y, const Vector& v, Component) const {
  check_dims(x, y);
  return Q_ * v;
}

Vector QuadraticGame::hvp_xy(const Vector& x, const Vector& y, const Vector& v, Component) const {
  check_dims(x, y);
  return C_ * v;
}

Vector QuadraticGame::best_response(const Vector& x) const {
  if (!meta_.alpha) throw UnsupportedRegime("best_response: Q is not negative definite");
  return -Q_.ldlt().solve(C_.transpose() * x);
}

QuadraticGame make_quadratic_game(const Matrix& C, double alpha, double radius) {
  if (!(alpha >= 0)) throw std::invalid_argument("make_quadratic_game: alpha must be >= 0");
  return QuadraticGame(C, -alpha * Matrix::Identity(C.cols(), C.cols()), radius);
}

QuadraticGame make_general_quadratic(const Matrix& C, const Matrix& Q, double radius) {
  return QuadraticGame(C, Q, radius);
}

// ---- mixture-of-Gaussians GAN -----------------------------------------------------

Matrix mixture_means(const MixtureSpec& spec) {
  Matrix M(2, spec.n_modes);
  for (int k = 0; k < spec.n_modes; ++k) {
    const double phi = 2.0 * std::numbers::pi * k / spec.n_modes;
    M(0, k) = std::sin(phi);
    M(1, k) = std::cos(phi);
  }
  return M;
}

MogGan::MogGan(MixtureSpec spec, DenseNet generator, DenseNet discriminator, const Seed& data_seed)
    : spec_(spec), gen_(std::move(generator)), disc_(std::move(discriminator)) {
  if (spec_.n_modes < 1 || !(spec_.sigma2 > 0) || spec_.latent_dim < 1 || spec_.batch < 1 || spec_.n_components < 1)
    throw std::invalid_argument("MogGan: invalid mixture spec");
  if (gen_.in_dim() != spec_.latent_dim || gen_.out_dim() != 2)
    throw std::invalid_argument("MogGan: generator must map latent_dim -> 2");
  if (disc_.in_dim() != 2 || disc_.out_dim() != 1) throw std::invalid_argument("MogGan: discriminator must map 2 -> 1");

  const Matrix means = mixture_means(spec_);
  const double sd = std::sqrt(spec_.sigma2);
  for (int j = 0; j < spec_.n_components; ++j) {
    CounterRng rng(data_seed.with_counter(data_seed.counter + static_cast<std::uint64_t>(j)), Role::Data);
    Matrix r(2, spec_.batch), z(spec_.latent_dim, spec_.batch);
    for (int i = 0; i < spec_.batch; ++i) {
      const auto k = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(spec_.n_modes)));
      r(0, i) = means(0, k) + sd * rng.normal();
      r(1, i) = means(1, k) + sd * rng.normal();
    }
    for (int i = 0; i < spec_.batch; ++i)
      for (int a = 0; a < spec_.latent_dim; ++a) z(a, i) = rng.normal();
    real_.push_back(std::move(r));
    latent_.push_back(std::move(z));
  }
  meta_.d1 = gen_.n_params();
  meta_.d2 = disc_.n_params();
  meta_.n_components = spec_.n_components;
  meta_.source = ConstantsSource::Unknown;
  meta_.validate();
}

FullEval MogGan::eval_component(const Vector& x, const Vector& y, int j, bool need_gx, bool need_gy) const {
  const Matrix& r = real_[static_cast<std::size_t>(j)];
  const Matrix& z = latent_[static_cast<std::size_t>(j)];
  const double nb = static_cast<double>(spec_.batch);
  FullEval out;

  DenseNet::Tape gt, dt_real, dt_fake;
  const Matrix fake = gen_.forward(x, z, need_gx ? &gt : nullptr);
  const Matrix d_real = disc_.forward(y, r, &dt_real);
  const Matrix d_fake = disc_.forward(y, fake, &dt_fake);

  // real term l(D), fake term l(-D); l'(w) = sigmoid(-w).
  Matrix g_real(1, spec_.batch), g_fake(1, spec_.batch);
  double v = 0.0;
  for (int i = 0; i < spec_.batch; ++i) {
    v += h0(d_real(0, i)) + h0(-d_fake(0, i));
    g_real(0, i) = h1(d_real(0, i)) / nb;
    g_fake(0, i) = -h1(-d_fake(0, i)) / nb;
  }
  out.value = v / nb;

  if (need_gy) {
    out.gy = Vector::Zero(disc_.n_params());
    disc_.backward(y, dt_real, g_real, &out.gy, nullptr);
    disc_.backward(y, dt_fake, g_fake, &out.gy, nullptr);
  }
  if (need_gx) {
    Matrix dfake;
    disc_.backward(y, dt_fake, g_fake, nullptr, &dfake);
    out.gx = Vector::Zero(gen_.n_params());
    gen_.backward(x, gt, dfake, &out.gx, nullptr);
  }
  return out;
}

FullEval MogGan::eval_all(const Vector& x, const Vector& y, bool need_gx, bool need_gy) const {
  FullEval acc;
  if (need_gx) acc.gx = Vector::Zero(d1());
  if (need_gy) acc.gy = Vector::Zero(d2());
  for (int j = 0; j < spec_.n_components; ++j) {
    const FullEval e = eval_component(x, y, j, need_gx, need_gy);
    acc.value += e.value;
    if (need_gx) acc.gx += e.gx;
    if (need_gy) acc.gy += e.gy;
  }
  const double n = spec_.n_components;
  acc.value /= n;
  if (need_gx) acc.gx /= n;
  if (need_gy) acc.gy /= n;
  return acc;
}

double MogGan::value(const Vector& x, const Vector& y, Component j) const {
  check_dims(x, y);
  const int c = pick_component(j, spec_.n_components, "MogGan");
  return (c < 0 ? eval_all(x, y, false, false) : eval_component(x, y, c, false, false)).value;
}

Vector MogGan::grad_x(const Vector& x, const Vector& y, Component j) const {
  check_dims(x, y);
  const int c = pick_component(j, spec_.n_components, "MogGan");
  return (c < 0 ? eval_all(x, y, true, false) : eval_component(x, y, c, true, false)).gx;
}

Vector MogGan::grad_y(const Vector& x, const Vector& y, Component j) const {
  check_dims(x, y);
  const int c = pick_component(j, spec_.n_components, "MogGan");
  return (c < 0 ? eval_all(x, y, false, true) : eval_component(x, y, c, false, true)).gy;
}

FullEval MogGan::evaluate(const Vector& x, const Vector& y, Component j) const {
  check_dims(x, y);
  const int c = pick_component(j, spec_.n_components, "MogGan");
  return c < 0 ? eval_all(x, y, true, true) : eval_component(x, y, c, true, true);
}

Vector MogGan::default_y0(const Seed& seed) const { return disc_.init_params(seed); }

Vector MogGan::init_generator(const Seed& seed) const { return gen_.init_params(seed.with_stream(~seed.stream)); }

Matrix MogGan::sample(const Vector& x, int n, const Seed& seed) const {
  if (n < 1) throw std::invalid_argument("MogGan::sample: n must be >= 1");
  CounterRng rng(seed, Role::Data);
  Matrix z(spec_.latent_dim, n);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < spec_.latent_dim; ++a) z(a, i) = rng.normal();
  return gen_.forward(x, z);
}

std::vector<double> MogGan::mode_mass(const Matrix& points) const {
  const Matrix means = mixture_means(spec_);
  std::vector<double> mass(static_cast<std::size_t>(spec_.n_modes), 0.0);
  if (points.cols() == 0) return mass;
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    Eigen::Index best = 0;
    (means.colwise() - points.col(i)).colwise().squaredNorm().minCoeff(&best);
    mass[static_cast<std::size_t>(best)] += 1.0;
  }
  for (double& m : mass) m /= static_cast<double>(points.cols());
  return mass;
}

double MogGan::near_mode_fraction(const Matrix& points) const {
  if (points.cols() == 0) return 0.0;
  const Matrix means = mixture_means(spec_);
  const double r2 = 9.0 * spec_.sigma2;
  int near = 0;
  for (Eigen::Index i = 0; i < points.cols(); ++i)
    if ((means.colwise() - points.col(i)).colwise().squaredNorm().minCoeff() <= r2) ++near;
  return static_cast<double>(near) / static_cast<double>(points.cols());
}

MogGan make_mog_gan(const MixtureSpec& spec, const std::vector<int>& gen_layers, const std::vector<int>& disc_layers,
                    Activation activation, const Seed& data_seed) {
  return MogGan(spec, DenseNet(gen_layers, activation), DenseNet(disc_layers, activation), data_seed);
}

// ---- adversarial training ----------------------------------------------------------

TwoClassData make_two_class_data(int n, const Seed& seed, const TwoClassSpec& spec) {
  if (n < 1) throw std::invalid_argument("make_two_class_data: n must be >= 1");
  CounterRng rng(seed, Role::Data);
  TwoClassData d;
  d.X.resize(2, n);
  d.labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int c = static_cast<int>(rng.below(2));
    const double s = 2.0 * c - 1.0;
    d.X(0, i) = s * spec.robust_shift + spec.robust_std * rng.normal();
    d.X(1, i) = s * spec.fragile_shift + spec.fragile_std * rng.normal();
    d.labels[static_cast<std::size_t>(i)] = c;
  }
  return d;
}

void write_csv(std::ostream& os, const TwoClassData& data) {
  os << "x1,x2,label\n";
  os.precision(17);
  for (int i = 0; i < data.size(); ++i)
    os << data.X(0, i) << ',' << data.X(1, i) << ',' << data.labels[static_cast<std::size_t>(i)] << '\n';
}

TwoClassData read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("read_csv: empty input");
  std::vector<double> a, b;
  std::vector<int> labels;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string f1, f2, f3;
    if (!std::getline(ss, f1, ',') || !std::getline(ss, f2, ',') || !std::getline(ss, f3))
      throw std::invalid_argument("read_csv: malformed row '" + line + "'");
    a.push_back(std::stod(f1));
    b.push_back(std::stod(f2));
    labels.push_back(std::stoi(f3));
  }
  TwoClassData d;
  d.X.resize(2, static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    d.X(0, static_cast<Eigen::Index>(i)) = a[i];
    d.X(1, static_cast<Eigen::Index>(i)) = b[i];
  }
  d.labels = std::move(labels);
  return d;
}

AdversarialTraining::AdversarialTraining(TwoClassData train, DenseNet net, int batch, int n_components,
                                         const Seed& batch_seed)
    : train_(std::move(train)), net_(std::move(net)), batch_(batch) {
  const int n = train_.size();
  if (n < 1) throw std::invalid_argument("AdversarialTraining: empty dataset");
  if (batch < 1 || batch > n) throw std::invalid_argument("AdversarialTraining: batch must be in [1, n]");
  if (n_components < 1) throw std::invalid_argument("AdversarialTraining: n_components must be >= 1");
  if (net_.in_dim() != 2 || net_.out_dim() != 2) throw std::invalid_argument("AdversarialTraining: net must map 2 -> 2");
  // Components walk through successive permutations of the training set.
  const int per_epoch = n / batch;
  std::vector<int> perm;
  for (int j = 0; j < n_components; ++j) {
    const int epoch = j / per_epoch, slot = j % per_epoch;
    if (slot == 0)
      perm = draw_permutation(batch_seed.with_counter(batch_seed.counter + static_cast<std::uint64_t>(epoch)), n);
    batches_.emplace_back(perm.begin() + slot * batch, perm.begin() + (slot + 1) * batch);
  }
  meta_.d1 = net_.n_params();
  meta_.d2 = 2 * batch;
  meta_.n_components = n_components;
  meta_.source = ConstantsSource::Unknown;
  meta_.validate();
}

FullEval AdversarialTraining::loss(const DenseNet& net, const Vector& params, const Matrix& X,
                                   const std::vector<int>& labels, const Matrix& delta, bool need_gx,
                                   bool need_gdelta) {
  if (X.rows() != 2 || delta.rows() != X.rows() || delta.cols() != X.cols() ||
      static_cast<std::size_t>(X.cols()) != labels.size())
    throw std::invalid_argument("AdversarialTraining::loss: shape mismatch");
  const Eigen::Index nb = X.cols();
  DenseNet::Tape tape;
  const Matrix logits = net.forward(params, X + delta, &tape);
  Matrix dlogits(logits.rows(), nb);
  double v = 0.0;
  for (Eigen::Index i = 0; i < nb; ++i) {
    const double m = logits.col(i).maxCoeff();
    const Vector e = (logits.col(i).array() - m).exp().matrix();
    const double s = e.sum();
    const auto c = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
    v += m + std::log(s) - logits(c, i);
    dlogits.col(i) = e / s;
    dlogits(c, i) -= 1.0;
  }
  FullEval out;
  out.value = v / static_cast<double>(nb);
  if (need_gx || need_gdelta) {
    dlogits /= static_cast<double>(nb);
    Matrix dX;
    if (need_gx) out.gx = Vector::Zero(net.n_params());
    net.backward(params, tape, dlogits, need_gx ? &out.gx : nullptr, need_gdelta ? &dX : nullptr);
    if (need_gdelta) out.gy = Eigen::Map<const Vector>(dX.data(), dX.size());
  }
  return out;
}

FullEval AdversarialTraining::eval_component(const Vector& x, const Vector& y, int j, bool need_gx,
                                             bool need_gy) const {
  const auto& idx = batches_[static_cast<std::size_t>(j)];
  Matrix X(2, batch_);
  std::vector<int> labels(idx.size());
  for (int i = 0; i < batch_; ++i) {
    X.col(i) = train_.X.col(idx[static_cast<std::size_t>(i)]);
    labels[static_cast<std::size_t>(i)] = train_.labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
  }
  const Eigen::Map<const Matrix> delta(y.data(), 2, batch_);
  return loss(net_, x, X, labels, delta, need_gx, need_gy);
}

namespace {

template <class F>
FullEval average_components(int n, int d1, int d2, bool need_gx, bool need_gy, F&& eval) {
  FullEval acc;
  if (need_gx) acc.gx = Vector::Zero(d1);
  if (need_gy) acc.gy = Vector::Zero(d2);
  for (int j = 0; j < n; ++j) {
    const FullEval e = eval(j);
    acc.value += e.value;
    if (need_gx) acc.gx += e.gx;
    if (need_gy) acc.gy += e.gy;
  }
  acc.value /= n;
  if (need_gx) acc.gx /= n;
  if (need_gy) acc.gy /= n;
  return acc;
}

}  // namespace

double AdversarialTraining::value(const Vector& x, const Vector& y, Component j) const {
  return evaluate_parts(x, y, j, false, false).value;
}

Vector AdversarialTraining::grad_x(const Vector& x, const Vector& y, Component j) const {
  return evaluate_parts(x, y, j, true, false).gx;
}

Vector AdversarialTraining::grad_y(const Vector& x, const Vector& y, Component j) const {
  return evaluate_parts(x, y, j, false, true).gy;
}

FullEval AdversarialTraining::evaluate(const Vector& x, const Vector& y, Component j) const {
  return evaluate_parts(x, y, j, true, true);
}

FullEval AdversarialTraining::evaluate_parts(const Vector& x, const Vector& y, Component j, bool need_gx,
                                             bool need_gy) const {
  check_dims(x, y);
  const int n = meta_.n_components;
  const int c = pick_component(j, n, "AdversarialTraining");
  if (c >= 0) return eval_component(x, y, c, need_gx, need_gy);
  return average_components(n, d1(), d2(), need_gx, need_gy,
                            [&](int k) { return eval_component(x, y, k, need_gx, need_gy); });
}

Matrix AdversarialTraining::attack(const DenseNet& net, const Vector& params, const Matrix& X,
                                   const std::vector<int>& labels, int T, double step) {
  if (T < 0) throw std::invalid_argument("attack: T must be >= 0");
  Matrix delta = Matrix::Zero(X.rows(), X.cols());
  const double nb = static_cast<double>(X.cols());
  for (int t = 0; t < T; ++t) {
    const FullEval e = loss(net, params, X, labels, delta, false, true);
    // loss() averages, so the per-example gradient is nb times the returned one
    delta += step * nb * Eigen::Map<const Matrix>(e.gy.data(), X.rows(), X.cols());
  }
  return delta;
}

double AdversarialTraining::accuracy(const DenseNet& net, const Vector& params, const Matrix& X,
                                     const std::vector<int>& labels, const Matrix& delta) {
  if (X.cols() == 0) return 0.0;
  const Matrix logits = net.forward(params, X + delta);
  int correct = 0;
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    Eigen::Index arg = 0;
    logits.col(i).maxCoeff(&arg);
    if (arg == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(X.cols());
}

AlgorithmSpec adversarial_attack_spec(const AdversarialTraining& problem, int T, double attack_step) {
  AlgorithmSpec spec;
  spec.kind = AlgorithmKind::SGA;
  spec.T = T;
  spec.eta = attack_step * problem.batch();
  spec.init = Initializer::zero();
  return spec;
}

AdversarialTraining make_adversarial_training(const TwoClassData& train, const std::vector<int>& net_layers,
                                              Activation activation, int batch, int n_components,
                                              const Seed& batch_seed) {
  return AdversarialTraining(train, DenseNet(net_layers, activation), batch, n_components, batch_seed);
}

}  // namespace smoothmax
