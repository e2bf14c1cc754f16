#include "hbd/model.hpp"

#include "hbd/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace hbd {

Classifier::Classifier(std::size_t input_dim, std::size_t num_classes, ParameterSet layers)
    : input_dim_(input_dim), num_classes_(num_classes), layers_(std::move(layers)) {
  if (input_dim_ == 0 || num_classes_ == 0 || layers_.empty()) {
    throw std::invalid_argument("Classifier: dimensions must be positive");
  }
  Eigen::Index in = static_cast<Eigen::Index>(input_dim_);
  for (const auto& layer : layers_) {
    if (layer.weight.cols() != in || layer.bias.size() != layer.weight.rows()) {
      throw std::invalid_argument("Classifier: inconsistent layer shapes");
    }
    in = layer.weight.rows();
  }
  if (in != static_cast<Eigen::Index>(num_classes_)) {
    throw std::invalid_argument("Classifier: last layer must have num_classes outputs");
  }
}

std::vector<std::size_t> Classifier::hidden_widths() const {
  std::vector<std::size_t> widths;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) widths.push_back(static_cast<std::size_t>(layers_[l].weight.rows()));
  return widths;
}

Eigen::VectorXd Classifier::logits(const Eigen::VectorXd& x) const {
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    a = layers_[l].weight * a + layers_[l].bias;
    if (l + 1 < layers_.size()) a = a.cwiseMax(0.0);
  }
  return a;
}

Eigen::VectorXd Classifier::probabilities(const Eigen::VectorXd& x) const { return softmax(logits(x)); }

int Classifier::predict(const Eigen::VectorXd& x) const {
  Eigen::Index best = 0;
  logits(x).maxCoeff(&best);
  return static_cast<int>(best);
}

Eigen::MatrixXd Classifier::input_jacobian(const Eigen::VectorXd& x) const {
  Eigen::VectorXd a = x;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(x.size(), x.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Eigen::VectorXd z = layers_[l].weight * a + layers_[l].bias;
    jac = layers_[l].weight * jac;
    if (l + 1 < layers_.size()) {
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        if (!(z[i] > 0.0)) jac.row(i).setZero();
      }
      a = z.cwiseMax(0.0);
    }
  }
  return jac;
}

bool Classifier::operator==(const Classifier& other) const {
  if (input_dim_ != other.input_dim_ || num_classes_ != other.num_classes_ || layers_.size() != other.layers_.size()) {
    return false;
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].weight.rows() != other.layers_[l].weight.rows() ||
        layers_[l].weight.cols() != other.layers_[l].weight.cols() || layers_[l].weight != other.layers_[l].weight ||
        layers_[l].bias != other.layers_[l].bias) {
      return false;
    }
  }
  return true;
}

Classifier init_classifier(std::size_t dim, std::size_t classes, const std::vector<std::size_t>& hidden,
                           std::uint64_t seed) {
  if (dim == 0 || classes == 0) throw std::invalid_argument("init_classifier: dimensions must be positive");
  Rng rng(mix_seed(seed, 0x1417));
  std::normal_distribution<double> normal(0.0, 1.0);
  ParameterSet layers;
  std::size_t in = dim;
  auto make = [&](std::size_t out, double gain) {
    DenseLayer layer{Eigen::MatrixXd(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
                     Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out))};
    const double scale = std::sqrt(gain / static_cast<double>(in));
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) layer.weight(i, j) = scale * normal(rng);
    layers.push_back(std::move(layer));
    in = out;
  };
  for (auto width : hidden) {
    if (width == 0) throw std::invalid_argument("init_classifier: hidden widths must be positive");
    make(width, 2.0);
  }
  make(classes, 1.0);
  return Classifier(dim, classes, std::move(layers));
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (!(grad_clip > 0.0)) throw std::invalid_argument("TrainConfig: grad_clip must be > 0");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
}

namespace {

ParameterSet zeros_like(const ParameterSet& params) {
  ParameterSet out;
  out.reserve(params.size());
  for (const auto& l : params) {
    out.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
  }
  return out;
}

void axpy(double a, const ParameterSet& x, ParameterSet& y) {
  for (std::size_t l = 0; l < x.size(); ++l) {
    y[l].weight += a * x[l].weight;
    y[l].bias += a * x[l].bias;
  }
}

double squared_norm(const ParameterSet& p) {
  double s = 0.0;
  for (const auto& l : p) s += l.weight.squaredNorm() + l.bias.squaredNorm();
  return s;
}

struct ForwardTrace {
  std::vector<Eigen::VectorXd> activations;  // a_0 = x, ..., a_{L-1}
  std::vector<Eigen::VectorXd> masks;        // ReLU masks for hidden layers
  Eigen::VectorXd logits;
};

ForwardTrace forward_trace(const Classifier& model, const Eigen::VectorXd& x) {
  const auto& layers = model.layers();
  ForwardTrace t;
  t.activations.push_back(x);
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::VectorXd z = layers[l].weight * a + layers[l].bias;
    if (l + 1 < layers.size()) {
      Eigen::VectorXd mask = (z.array() > 0.0).cast<double>();
      a = z.cwiseProduct(mask);
      t.masks.push_back(std::move(mask));
      t.activations.push_back(a);
    } else {
      t.logits = std::move(z);
    }
  }
  return t;
}

/// Cross-entropy of one row; accumulates scale * gradient into grad.
double cross_entropy_row(const Classifier& model, const ForwardTrace& t, int label, double scale, ParameterSet* grad) {
  const Eigen::VectorXd p = softmax(t.logits);
  const double m = t.logits.maxCoeff();
  const double lse = m + std::log((t.logits.array() - m).exp().sum());
  const double loss = lse - t.logits[label];
  if (grad) {
    const auto& layers = model.layers();
    Eigen::VectorXd delta = p;
    delta[label] -= 1.0;
    delta *= scale;
    for (std::size_t l = layers.size(); l-- > 0;) {
      (*grad)[l].weight.noalias() += delta * t.activations[l].transpose();
      (*grad)[l].bias += delta;
      if (l > 0) delta = (layers[l].weight.transpose() * delta).cwiseProduct(t.masks[l - 1]);
    }
  }
  return loss;
}

/// lambda_x^-1 |J|_F^2 for one row; accumulates scale * gradient into grad.
/// With the ReLU masks fixed, J = W_L D_{L-1} W_{L-1} ... D_1 W_1 and
///   d|J|^2 / dW_l = 2 A_l^T J B_l^T,
/// A_l = W_L D_{L-1} ... W_{l+1} D_l, B_l = D_{l-1} W_{l-1} ... D_1 W_1.
/// Bias gradients vanish almost everywhere.
double penalty_row(const Classifier& model, const ForwardTrace& t, double inv_lambda, double scale,
                   ParameterSet* grad) {
  const auto& layers = model.layers();
  const std::size_t L = layers.size();
  // left[l] = A_l for l = 0..L-1 (A_{L-1} = I is represented by an empty matrix).
  std::vector<Eigen::MatrixXd> left(L);
  for (std::size_t l = L - 1; l-- > 0;) {
    // A_l = A_{l+1} W_{l+1} D_l
    Eigen::MatrixXd next = (l + 1 == L - 1) ? layers[l + 1].weight : Eigen::MatrixXd(left[l + 1] * layers[l + 1].weight);
    for (Eigen::Index c = 0; c < next.cols(); ++c) {
      if (t.masks[l][c] == 0.0) next.col(c).setZero();
    }
    left[l] = std::move(next);
  }
  const Eigen::MatrixXd jac = (L == 1) ? layers[0].weight : Eigen::MatrixXd(left[0] * layers[0].weight);
  const double value = inv_lambda * jac.squaredNorm();
  if (grad) {
    // R_0 = G, R_{l+1} = R_l W_l^T D_l; dW_l = A_l^T R_l.
    Eigen::MatrixXd r = (2.0 * inv_lambda * scale) * jac;
    for (std::size_t l = 0; l < L; ++l) {
      if (l + 1 == L) {
        (*grad)[l].weight += r;
      } else {
        (*grad)[l].weight.noalias() += left[l].transpose() * r;
        Eigen::MatrixXd next = r * layers[l].weight.transpose();
        for (Eigen::Index c = 0; c < next.cols(); ++c) {
          if (t.masks[l][c] == 0.0) next.col(c).setZero();
        }
        r = std::move(next);
      }
    }
  }
  return value;
}

}  // namespace

LossGradients compute_loss_terms(const Classifier& model, std::span<const BallPoint> points,
                                 std::span<const int> labels, const std::vector<bool>& poisoned,
                                 bool with_gradients) {
  if (points.size() != labels.size() || points.size() != poisoned.size()) {
    throw std::invalid_argument("compute_loss_terms: batch arrays differ in length");
  }
  LossGradients out;
  if (with_gradients) {
    out.clean = zeros_like(model.layers());
    out.backdoor = zeros_like(model.layers());
    out.geometric = zeros_like(model.layers());
  }
  if (points.empty()) return out;
  std::size_t n_poison = 0;
  for (bool b : poisoned) n_poison += b;
  const std::size_t n_clean = points.size() - n_poison;
  const double w_clean = n_clean ? 1.0 / static_cast<double>(n_clean) : 0.0;
  const double w_poison = n_poison ? 1.0 / static_cast<double>(n_poison) : 0.0;
  const double w_all = 1.0 / static_cast<double>(points.size());

  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto trace = forward_trace(model, points[i].coords());
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= model.num_classes()) {
      throw std::invalid_argument("compute_loss_terms: label out of range");
    }
    if (poisoned[i]) {
      out.value.backdoor += w_poison * cross_entropy_row(model, trace, label, w_poison, with_gradients ? &out.backdoor : nullptr);
    } else {
      out.value.clean += w_clean * cross_entropy_row(model, trace, label, w_clean, with_gradients ? &out.clean : nullptr);
    }
    const double inv_lambda = 0.5 * (1.0 - points[i].squared_norm());
    out.value.geometric += w_all * penalty_row(model, trace, inv_lambda, w_all, with_gradients ? &out.geometric : nullptr);
  }
  return out;
}

double geometric_penalty(const Classifier& model, std::span<const BallPoint> batch) {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const auto& x : batch) {
    total += 0.5 * (1.0 - x.squared_norm()) * model.input_jacobian(x.coords()).squaredNorm();
  }
  return total / static_cast<double>(batch.size());
}

Eigen::VectorXd flatten(const ParameterSet& params) {
  Eigen::Index n = 0;
  for (const auto& l : params) n += l.weight.size() + l.bias.size();
  Eigen::VectorXd flat(n);
  Eigen::Index k = 0;
  for (const auto& l : params) {
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) flat[k++] = l.weight(i, j);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) flat[k++] = l.bias[i];
  }
  return flat;
}

void unflatten(const Eigen::VectorXd& flat, ParameterSet& params) {
  Eigen::Index k = 0;
  for (auto& l : params) {
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) l.weight(i, j) = flat[k++];
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = flat[k++];
  }
  if (k != flat.size()) throw std::invalid_argument("unflatten: size mismatch");
}

TrainResult train(Classifier state, const LabeledDataset& data, const std::vector<bool>& poisoned_flags,
                  const TrainConfig& config) {
  config.validate();
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (poisoned_flags.size() != data.size()) throw std::invalid_argument("train: flags not aligned with data");
  if (data.dim() != state.input_dim()) throw std::invalid_argument("train: input dimension mismatch");

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ParameterSet m = zeros_like(state.layers()), v = zeros_like(state.layers());
  Rng rng(mix_seed(config.seed, 0x7a11));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<BallPoint> batch_points;
  std::vector<int> batch_labels;
  std::vector<bool> batch_flags;
  long step = 0;
  TrainResult result;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch_points.clear();
      batch_labels.clear();
      batch_flags.clear();
      for (std::size_t k = start; k < end; ++k) {
        batch_points.push_back(data.point(order[k]));
        batch_labels.push_back(data.label(order[k]));
        batch_flags.push_back(poisoned_flags[order[k]]);
      }
      auto lg = compute_loss_terms(state, batch_points, batch_labels, batch_flags);
      const double loss = lg.value.total(config.lambda1, config.lambda2);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "train: non-finite loss in epoch " << epoch;
        throw TrainingError(msg.str(), epoch);
      }
      ParameterSet grad = std::move(lg.clean);
      axpy(config.lambda1, lg.backdoor, grad);
      axpy(config.lambda2, lg.geometric, grad);
      const double gnorm = std::sqrt(squared_norm(grad));
      if (gnorm > config.grad_clip) {
        for (auto& l : grad) {
          l.weight *= config.grad_clip / gnorm;
          l.bias *= config.grad_clip / gnorm;
        }
      }
      ++step;
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      auto& layers = state.mutable_layers();
      auto update = [&](auto& param, auto& g, auto& mm, auto& vv) {
        g += config.weight_decay * param;
        mm = beta1 * mm + (1.0 - beta1) * g;
        vv = beta2 * vv + (1.0 - beta2) * g.cwiseProduct(g);
        param.array() -= config.learning_rate * (mm.array() / bc1) / ((vv.array() / bc2).sqrt() + eps);
      };
      for (std::size_t l = 0; l < layers.size(); ++l) {
        update(layers[l].weight, grad[l].weight, m[l].weight, v[l].weight);
        update(layers[l].bias, grad[l].bias, m[l].bias, v[l].bias);
      }
    }
    const auto full = compute_loss_terms(state, data.points(), data.labels(), poisoned_flags, false);
    const double epoch_loss = full.value.total(config.lambda1, config.lambda2);
    if (!std::isfinite(epoch_loss)) {
      std::ostringstream msg;
      msg << "train: non-finite loss in epoch " << epoch;
      throw TrainingError(msg.str(), epoch);
    }
    result.loss_history.push_back(epoch_loss);
  }
  result.model = std::move(state);
  return result;
}

std::vector<TriggeredPoint> trigger_non_target(const LabeledDataset& test, const TriggerSpec& spec, int target,
                                               TriggerMode mode, std::uint64_t seed) {
  std::vector<TriggeredPoint> out;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test.label(i) == target) continue;
    out.push_back(trigger_point(test.point(i), spec, mode, mix_seed(seed, i)));
  }
  return out;
}

EvalReport evaluate_triggered(const Classifier& model, const LabeledDataset& clean_test,
                              std::span<const TriggeredPoint> triggered, int target) {
  if (clean_test.empty()) throw std::invalid_argument("evaluate: empty test set");
  EvalReport report;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < clean_test.size(); ++i) {
    correct += model.predict(clean_test.point(i).coords()) == clean_test.label(i);
  }
  report.clean_accuracy = static_cast<double>(correct) / static_cast<double>(clean_test.size());

  std::array<std::size_t, 3> hits{};
  std::size_t total_hits = 0;
  for (const auto& tp : triggered) {
    const bool hit = model.predict(tp.triggered.coords()) == target;
    const auto bin = static_cast<std::size_t>(radial_bin(tp.original).name);
    ++report.per_bin_count[bin];
    hits[bin] += hit;
    total_hits += hit;
  }
  report.attack_rows = triggered.size();
  report.attack_success_rate = triggered.empty() ? 0.0 : static_cast<double>(total_hits) / static_cast<double>(triggered.size());
  for (std::size_t b = 0; b < 3; ++b) {
    if (report.per_bin_count[b] > 0) {
      report.per_bin_asr[b] = static_cast<double>(hits[b]) / static_cast<double>(report.per_bin_count[b]);
    }
  }
  return report;
}

EvalReport evaluate(const Classifier& model, const LabeledDataset& clean_test, const TriggerSpec& spec, int target,
                    TriggerMode mode, std::uint64_t seed) {
  const auto triggered = trigger_non_target(clean_test, spec, target, mode, seed);
  return evaluate_triggered(model, clean_test, triggered, target);
}

namespace {

constexpr char kMagic[8] = {'H', 'B', 'D', 'M', 'L', 'P', '0', '1'};

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(sizeof(T) == 8);
  std::uint64_t bits = 0;
  std::memcpy(&bits, &value, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char buf[8];
  std::memcpy(buf, &bits, 8);
  out.write(buf, 8);
}

template <typename T>
T read_le(std::istream& in) {
  char buf[8];
  if (!in.read(buf, 8)) throw std::runtime_error("load_checkpoint: truncated file");
  std::uint64_t bits = 0;
  std::memcpy(&bits, buf, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  T value;
  std::memcpy(&value, &bits, 8);
  return value;
}

}  // namespace

void save_checkpoint(const Classifier& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_le<std::uint64_t>(out, model.input_dim());
  write_le<std::uint64_t>(out, model.num_classes());
  write_le<std::uint64_t>(out, model.layers().size());
  for (const auto& l : model.layers()) {
    write_le<std::uint64_t>(out, static_cast<std::uint64_t>(l.weight.rows()));
    write_le<std::uint64_t>(out, static_cast<std::uint64_t>(l.weight.cols()));
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) write_le<double>(out, l.weight(i, j));
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) write_le<double>(out, l.bias[i]);
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

Classifier load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
  }
  const auto dim = read_le<std::uint64_t>(in);
  const auto classes = read_le<std::uint64_t>(in);
  const auto count = read_le<std::uint64_t>(in);
  constexpr std::uint64_t kSane = 1u << 20;
  if (dim == 0 || dim > kSane || classes == 0 || classes > kSane || count == 0 || count > 64) {
    throw std::runtime_error("load_checkpoint: implausible header in " + path.string());
  }
  ParameterSet layers;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto rows = read_le<std::uint64_t>(in);
    const auto cols = read_le<std::uint64_t>(in);
    if (rows == 0 || rows > kSane || cols == 0 || cols > kSane) {
      throw std::runtime_error("load_checkpoint: implausible layer shape in " + path.string());
    }
    DenseLayer l{Eigen::MatrixXd(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)),
                 Eigen::VectorXd(static_cast<Eigen::Index>(rows))};
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) l.weight(i, j) = read_le<double>(in);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = read_le<double>(in);
    layers.push_back(std::move(l));
  }
  return Classifier(dim, classes, std::move(layers));
}

}  // namespace hbd
