#pragma once

#include "imhs/error.hpp"
#include "imhs/label.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace imhs::logreg {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct Model {
  Vector<Scalar> weights;
  Scalar bias = Scalar(0);

  static Model zeros(Eigen::Index dim) { return {Vector<Scalar>::Zero(dim), Scalar(0)}; }
  [[nodiscard]] Eigen::Index dim() const { return weights.size(); }

  /// Weights followed by the bias, the layout Adam updates.
  [[nodiscard]] Vector<Scalar> packed() const {
    Vector<Scalar> p(weights.size() + 1);
    p << weights, bias;
    return p;
  }
  void unpack(const Vector<Scalar>& p) {
    weights = p.head(p.size() - 1);
    bias = p(p.size() - 1);
  }
};

/// Logistic function without overflow for any finite z.
template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

template <typename Scalar, typename Derived>
Scalar predict_proba(const Model<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != model.dim()) {
    throw Error(ErrorKind::DimMismatch,
                "input dim " + std::to_string(x.size()) + " vs model dim " + std::to_string(model.dim()));
  }
  return sigmoid<Scalar>(model.weights.dot(x) + model.bias);
}

/// ImHate iff proba >= threshold.
template <typename Scalar, typename Derived>
Label predict(const Model<Scalar>& model, const Eigen::MatrixBase<Derived>& x, Scalar threshold = Scalar(0.5)) {
  return predict_proba(model, x) >= threshold ? Label::ImHate : Label::NoHate;
}

template <typename Scalar>
struct LossGrad {
  Scalar loss;
  Vector<Scalar> grad_w;
  Scalar grad_b;
};

inline constexpr double kProbClamp = 1e-12;

/// Mean binary cross-entropy (probabilities clamped to [1e-12, 1 - 1e-12])
/// and its gradient. `targets` holds 1 for ImHate, 0 for NoHate.
template <typename Scalar>
LossGrad<Scalar> loss_and_grad(const Model<Scalar>& model, const Matrix<Scalar>& X, const Vector<Scalar>& targets) {
  if (X.rows() == 0 || X.rows() != targets.size()) {
    throw Error(ErrorKind::DimMismatch,
                std::to_string(X.rows()) + " feature rows vs " + std::to_string(targets.size()) + " targets");
  }
  if (X.cols() != model.dim()) {
    throw Error(ErrorKind::DimMismatch,
                "feature dim " + std::to_string(X.cols()) + " vs model dim " + std::to_string(model.dim()));
  }
  const auto n = static_cast<Scalar>(X.rows());
  const Vector<Scalar> z = (X * model.weights).array() + model.bias;
  const Vector<Scalar> p = z.unaryExpr([](Scalar v) { return sigmoid(v); });
  const Scalar lo(kProbClamp);
  const Scalar hi(Scalar(1) - Scalar(kProbClamp));
  const auto pc = p.array().max(lo).min(hi);
  const Scalar loss =
      -(targets.array() * pc.log() + (Scalar(1) - targets.array()) * (Scalar(1) - pc).log()).sum() / n;
  const Vector<Scalar> residual = p - targets;
  return {loss, X.transpose() * residual / n, residual.sum() / n};
}

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
  Vector<Scalar> m;
  Vector<Scalar> v;
  std::int64_t t = 0;

  static AdamState fresh(Eigen::Index size) { return {Vector<Scalar>::Zero(size), Vector<Scalar>::Zero(size), 0}; }
};

/// One bias-corrected Adam update of `params` in place.
template <typename Scalar>
void adam_step(AdamState<Scalar>& state, Vector<Scalar>& params, const Vector<Scalar>& grads,
               const AdamConfig& cfg = {}) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorKind::DimMismatch, "Adam state, parameter and gradient sizes disagree");
  }
  const Scalar b1(cfg.beta1);
  const Scalar b2(cfg.beta2);
  state.t += 1;
  state.m = b1 * state.m + (Scalar(1) - b1) * grads;
  state.v = b2 * state.v + (Scalar(1) - b2) * grads.cwiseAbs2();
  const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(state.t));
  const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(state.t));
  const auto m_hat = state.m.array() / c1;
  const auto v_hat = state.v.array() / c2;
  params.array() -= Scalar(cfg.lr) * m_hat / (v_hat.sqrt() + Scalar(cfg.eps));
}

struct TrainConfig {
  int max_epochs = 200;
  int batch_size = 64;
  /// Epochs without a validation-F1 improvement before stopping.
  int patience = 10;
  std::uint64_t shuffle_seed = 0;
  AdamConfig adam;
  double l2 = 0.0;
};

struct EpochLog {
  int epoch;
  double train_loss;  // full-batch loss after the epoch
  double val_f1;      // -1 when there is no validation set
};

struct TrainResult {
  Model<double> model;
  std::vector<EpochLog> log;
  int best_epoch = 0;
};

/// Mini-batch Adam from a zero model. With a validation set, keeps the
/// best-F1 snapshot and stops early; without one, runs max_epochs.
TrainResult train(const Eigen::MatrixXd& X, const std::vector<Label>& y, const Eigen::MatrixXd& X_val,
                  const std::vector<Label>& y_val, const TrainConfig& cfg);

Eigen::VectorXd targets(const std::vector<Label>& labels);
std::vector<Label> predict_all(const Model<double>& model, const Eigen::MatrixXd& X, double threshold = 0.5);

struct ModelArtifact {
  Model<double> model;
  std::string provider_id;
  std::string strategy;
  std::string combo;
  std::string train_manifest_checksum;
};

std::string artifact_to_json(const ModelArtifact& a);
ModelArtifact artifact_from_json(std::string_view text);
void write_artifact(const ModelArtifact& a, const std::filesystem::path& path);
ModelArtifact read_artifact(const std::filesystem::path& path);

}  // namespace imhs::logreg
