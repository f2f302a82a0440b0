#include "imhs/logreg.hpp"

#include "imhs/metrics.hpp"
#include "imhs/random.hpp"
#include "imhs/text.hpp"

#include <json.hpp>

#include <numeric>
#include <random>

namespace imhs::logreg {

Eigen::VectorXd targets(const std::vector<Label>& labels) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) t(static_cast<Eigen::Index>(i)) = labels[i] == Label::ImHate ? 1.0 : 0.0;
  return t;
}

std::vector<Label> predict_all(const Model<double>& model, const Eigen::MatrixXd& X, double threshold) {
  std::vector<Label> out;
  out.reserve(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) out.push_back(predict(model, X.row(i).transpose(), threshold));
  return out;
}

TrainResult train(const Eigen::MatrixXd& X, const std::vector<Label>& y, const Eigen::MatrixXd& X_val,
                  const std::vector<Label>& y_val, const TrainConfig& cfg) {
  if (X.rows() == 0) {
    throw Error(ErrorKind::EmptyTrainSet, "no training rows");
  }
  if (X.rows() != static_cast<Eigen::Index>(y.size())) {
    throw Error(ErrorKind::DimMismatch, "training rows and labels differ in count");
  }
  const bool has_val = X_val.rows() > 0;
  if (has_val && (X_val.cols() != X.cols() || X_val.rows() != static_cast<Eigen::Index>(y_val.size()))) {
    throw Error(ErrorKind::DimMismatch, "validation matrix does not match the training matrix");
  }
  if (cfg.max_epochs <= 0 || cfg.batch_size <= 0 || cfg.patience <= 0) {
    throw Error(ErrorKind::InvalidConfig, "epochs, batch size and patience must be positive");
  }

  const Eigen::VectorXd t = targets(y);
  auto model = Model<double>::zeros(X.cols());
  auto state = AdamState<double>::fresh(X.cols() + 1);
  Eigen::VectorXd params = model.packed();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(X.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(cfg.shuffle_seed);

  TrainResult result{model, {}, 0};
  double best_f1 = -1.0;
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    seeded_shuffle(std::span(order), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::vector<Eigen::Index> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                            order.begin() + static_cast<std::ptrdiff_t>(end));
      const Eigen::MatrixXd Xb = X(batch, Eigen::all);
      const Eigen::VectorXd tb = t(batch);
      const auto lg = loss_and_grad(model, Xb, tb);
      Eigen::VectorXd grads(params.size());
      grads << lg.grad_w + cfg.l2 * model.weights, lg.grad_b;
      adam_step(state, params, grads, cfg.adam);
      model.unpack(params);
    }

    const double loss = loss_and_grad(model, X, t).loss;
    double val_f1 = -1.0;
    if (has_val) {
      val_f1 = metrics::f1_from_counts(metrics::confusion(predict_all(model, X_val), y_val)).f1_positive;
      if (val_f1 > best_f1) {
        best_f1 = val_f1;
        result.model = model;
        result.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        result.log.push_back({epoch, loss, val_f1});
        break;
      }
    } else {
      result.model = model;
      result.best_epoch = epoch;
    }
    result.log.push_back({epoch, loss, val_f1});
  }
  return result;
}

std::string artifact_to_json(const ModelArtifact& a) {
  nlohmann::ordered_json j;
  j["dim"] = a.model.dim();
  j["weights"] = std::vector<double>(a.model.weights.data(), a.model.weights.data() + a.model.weights.size());
  j["bias"] = a.model.bias;
  j["provider_id"] = a.provider_id;
  j["strategy"] = a.strategy;
  j["combo"] = a.combo;
  j["train_manifest_checksum"] = a.train_manifest_checksum;
  return j.dump(2) + "\n";
}

ModelArtifact artifact_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ModelArtifact a;
    const auto weights = j.at("weights").get<std::vector<double>>();
    if (weights.size() != j.at("dim").get<std::size_t>()) {
      throw Error(ErrorKind::DimMismatch, "model artifact dim disagrees with its weights");
    }
    a.model.weights = Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
    a.model.bias = j.at("bias").get<double>();
    a.provider_id = j.at("provider_id").get<std::string>();
    a.strategy = j.at("strategy").get<std::string>();
    a.combo = j.at("combo").get<std::string>();
    a.train_manifest_checksum = j.at("train_manifest_checksum").get<std::string>();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("model artifact: ") + e.what());
  }
}

void write_artifact(const ModelArtifact& a, const std::filesystem::path& path) { write_file(path, artifact_to_json(a)); }

ModelArtifact read_artifact(const std::filesystem::path& path) { return artifact_from_json(read_file(path)); }

}  // namespace imhs::logreg
