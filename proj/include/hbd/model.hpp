#pragma once

// Feedforward ReLU classifier over ball coordinates, trained with
//   L = L_clean + lambda1 * L_backdoor + lambda2 * L_geometric.
//
// L_geometric is the mean over rows of lambda_x * |grad_x f|_g^2. With
// g_x = lambda_x^2 g^E and grad_x f = lambda_x^-2 nabla_x f this is
//   lambda_x * lambda_x^2 * lambda_x^-4 |nabla_x f|^2 = lambda_x^-1 |nabla_x f|^2,
// where |nabla_x f|^2 is the squared Frobenius norm of the logit Jacobian.

#include "hbd/dataset.hpp"
#include "hbd/trigger.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace hbd {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

using ParameterSet = std::vector<DenseLayer>;

class Classifier {
 public:
  Classifier() = default;
  Classifier(std::size_t input_dim, std::size_t num_classes, ParameterSet layers);

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::vector<std::size_t> hidden_widths() const;

  const ParameterSet& layers() const noexcept { return layers_; }
  ParameterSet& mutable_layers() noexcept { return layers_; }

  Eigen::VectorXd logits(const Eigen::VectorXd& x) const;
  Eigen::VectorXd probabilities(const Eigen::VectorXd& x) const;
  int predict(const Eigen::VectorXd& x) const;
  /// d logits / d x, num_classes x input_dim.
  Eigen::MatrixXd input_jacobian(const Eigen::VectorXd& x) const;

  bool operator==(const Classifier& other) const;

 private:
  std::size_t input_dim_ = 0;
  std::size_t num_classes_ = 0;
  ParameterSet layers_;
};

/// He-normal weights for ReLU layers, zero biases; bit-identical per seed.
Classifier init_classifier(std::size_t dim, std::size_t classes, const std::vector<std::size_t>& hidden,
                           std::uint64_t seed);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

struct TrainConfig {
  double learning_rate = 0.003;
  double weight_decay = 1e-4;
  int epochs = 15;
  double grad_clip = 5.0;
  double lambda1 = 1.0;
  double lambda2 = 0.01;
  std::uint64_t seed = 0;
  std::size_t batch_size = 64;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct LossTerms {
  double clean = 0.0;     // mean cross-entropy over clean rows
  double backdoor = 0.0;  // mean cross-entropy over poisoned rows
  double geometric = 0.0; // mean lambda_x^-1 |J(x)|_F^2 over all rows

  double total(double lambda1, double lambda2) const { return clean + lambda1 * backdoor + lambda2 * geometric; }
};

struct LossGradients {
  LossTerms value;
  ParameterSet clean;
  ParameterSet backdoor;
  ParameterSet geometric;
};

/// Loss terms on a batch and, if requested, their analytic parameter gradients.
LossGradients compute_loss_terms(const Classifier& model, std::span<const BallPoint> points,
                                 std::span<const int> labels, const std::vector<bool>& poisoned,
                                 bool with_gradients = true);

double geometric_penalty(const Classifier& model, std::span<const BallPoint> batch);

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch) : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

struct TrainResult {
  Classifier model;
  /// Full-data total loss after each epoch.
  std::vector<double> loss_history;
};

/// Adam with coupled L2 weight decay and global-norm gradient clipping.
TrainResult train(Classifier state, const LabeledDataset& data, const std::vector<bool>& poisoned_flags,
                  const TrainConfig& config);

/// Flattened view of parameters in layer order (weights row-major, then bias).
Eigen::VectorXd flatten(const ParameterSet& params);
void unflatten(const Eigen::VectorXd& flat, ParameterSet& params);

struct EvalReport {
  double clean_accuracy = 0.0;
  double attack_success_rate = 0.0;
  std::size_t attack_rows = 0;
  /// Indexed like kRadialBins; empty bins stay nullopt.
  std::array<std::optional<double>, 3> per_bin_asr{};
  std::array<std::size_t, 3> per_bin_count{};
  std::optional<double> detection_rate;
};

/// Triggers every test row whose label differs from target. Row i uses the
/// seed mix_seed(seed, i).
std::vector<TriggeredPoint> trigger_non_target(const LabeledDataset& test, const TriggerSpec& spec, int target,
                                               TriggerMode mode, std::uint64_t seed);

EvalReport evaluate(const Classifier& model, const LabeledDataset& clean_test, const TriggerSpec& spec, int target,
                    TriggerMode mode, std::uint64_t seed = 0);

/// Same as evaluate with pre-triggered non-target rows.
EvalReport evaluate_triggered(const Classifier& model, const LabeledDataset& clean_test,
                              std::span<const TriggeredPoint> triggered, int target);

/// Checkpoint layout (all integers uint64 LE, all reals float64 LE):
///   magic "HBDMLP01", input_dim, num_classes, layer_count,
///   then per layer: rows, cols, weight (row-major), bias (rows values).
void save_checkpoint(const Classifier& model, const std::filesystem::path& path);
Classifier load_checkpoint(const std::filesystem::path& path);

}  // namespace hbd
