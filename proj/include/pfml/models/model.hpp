#pragma once

// Uniform fit / predict / score surface over the ten classifier kinds.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "pfml/dataset.hpp"
#include "pfml/models/adaboost.hpp"
#include "pfml/models/common.hpp"
#include "pfml/models/ensemble.hpp"
#include "pfml/models/logistic.hpp"
#include "pfml/models/mlp.hpp"
#include "pfml/models/naive_bayes.hpp"
#include "pfml/models/svm.hpp"
#include "pfml/models/tree.hpp"

namespace pfml {

/// Listed from least to most complex, the order reports use.
enum class ModelKind {
  kGaussianNb,
  kLogisticRegression,
  kSvmLinear,
  kSvmPoly,
  kSvmRbf,
  kDecisionTree,
  kRandomForest,
  kAdaBoost,
  kBagging,
  kMlp,
};

inline constexpr std::array<ModelKind, 10> kAllModelKinds{
    ModelKind::kGaussianNb,   ModelKind::kLogisticRegression, ModelKind::kSvmLinear, ModelKind::kSvmPoly,
    ModelKind::kSvmRbf,       ModelKind::kDecisionTree,       ModelKind::kRandomForest, ModelKind::kAdaBoost,
    ModelKind::kBagging,      ModelKind::kMlp};

constexpr std::string_view kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kGaussianNb: return "gaussian_nb";
    case ModelKind::kLogisticRegression: return "logistic_regression";
    case ModelKind::kSvmLinear: return "svm_linear";
    case ModelKind::kSvmPoly: return "svm_poly";
    case ModelKind::kSvmRbf: return "svm_rbf";
    case ModelKind::kDecisionTree: return "decision_tree";
    case ModelKind::kRandomForest: return "random_forest";
    case ModelKind::kAdaBoost: return "adaboost";
    case ModelKind::kBagging: return "bagging";
    case ModelKind::kMlp: return "mlp";
  }
  return "";
}

constexpr std::string_view kind_label(ModelKind k) {
  switch (k) {
    case ModelKind::kGaussianNb: return "Naive Bayes";
    case ModelKind::kLogisticRegression: return "Logistic Regression";
    case ModelKind::kSvmLinear: return "Linear SVM";
    case ModelKind::kSvmPoly: return "Polynomial kernel SVM";
    case ModelKind::kSvmRbf: return "RBF kernel SVM";
    case ModelKind::kDecisionTree: return "Decision Tree";
    case ModelKind::kRandomForest: return "Random Forest";
    case ModelKind::kAdaBoost: return "AdaBoost Classifier";
    case ModelKind::kBagging: return "Bagging Classifier";
    case ModelKind::kMlp: return "Multilayer perceptron";
  }
  return "";
}

inline ModelKind kind_from_name(std::string_view s) {
  for (ModelKind k : kAllModelKinds)
    if (kind_name(k) == s) return k;
  throw Error("unknown model kind '" + std::string(s) + "'");
}

using Hyperparams = std::map<std::string, double>;

/// Complete default hyperparameters per kind. Sentinels: gamma = 0 means
/// 1 / (n_features * mean feature variance); l2 < 0 means 1 / N;
/// max_depth = 0 means unlimited; max_features = 0 means all features
/// (random_forest resolves 0 to ceil(sqrt(d))).
inline Hyperparams default_hyperparams(ModelKind k) {
  switch (k) {
    case ModelKind::kGaussianNb: return {{"var_floor", 1e-9}};
    case ModelKind::kLogisticRegression: return {{"l2", -1.0}, {"tol", 1e-6}, {"max_iter", 5000}};
    case ModelKind::kSvmLinear: return {{"C", 1.0}, {"tol", 1e-3}, {"max_passes", 1e4}};
    case ModelKind::kSvmPoly:
      return {{"C", 1.0}, {"gamma", 0.0}, {"degree", 3.0}, {"coef0", 0.0}, {"tol", 1e-3}, {"max_passes", 1e4}};
    case ModelKind::kSvmRbf: return {{"C", 1.0}, {"gamma", 0.0}, {"tol", 1e-3}, {"max_passes", 1e4}};
    case ModelKind::kDecisionTree: return {{"max_depth", 0}, {"min_samples_split", 2}};
    case ModelKind::kRandomForest:
      return {{"n_estimators", 50}, {"max_features", 0}, {"bootstrap", 1}, {"max_depth", 0}, {"min_samples_split", 2}};
    case ModelKind::kAdaBoost: return {{"n_estimators", 50}};
    case ModelKind::kBagging:
      return {{"n_estimators", 50}, {"bootstrap", 1}, {"max_depth", 0}, {"min_samples_split", 2}};
    case ModelKind::kMlp: return {{"hidden", 100}, {"learning_rate", 1e-3}, {"epochs", 200}, {"batch_size", 32}};
  }
  return {};
}

struct ModelSpec {
  ModelKind kind = ModelKind::kDecisionTree;
  Hyperparams hyperparams;
  std::uint64_t seed = 0;

  /// Overlays `overrides` on the defaults; unknown keys are rejected.
  static ModelSpec make(ModelKind kind, const Hyperparams& overrides = {}, std::uint64_t seed = 0) {
    ModelSpec s{kind, default_hyperparams(kind), seed};
    for (const auto& [key, value] : overrides) {
      auto it = s.hyperparams.find(key);
      if (it == s.hyperparams.end())
        throw Error("unknown hyperparameter '" + key + "' for " + std::string(kind_name(kind)));
      if (!std::isfinite(value)) throw Error("hyperparameter '" + key + "' must be finite");
      it->second = value;
    }
    return s;
  }

  double get(const std::string& key) const {
    auto it = hyperparams.find(key);
    if (it == hyperparams.end()) throw Error("hyperparameter '" + key + "' not set");
    return it->second;
  }
  int get_int(const std::string& key) const { return static_cast<int>(std::lround(get(key))); }
};

namespace detail {

inline models::TreeParams tree_params(const ModelSpec& s) {
  models::TreeParams p;
  p.max_depth = s.get_int("max_depth");
  p.min_samples_split = s.get_int("min_samples_split");
  if (s.hyperparams.count("max_features")) p.max_features = s.get_int("max_features");
  return p;
}

inline models::SvmParams svm_params(const ModelSpec& s, const models::Matrix& x) {
  models::SvmParams p;
  p.kernel.type = s.kind == ModelKind::kSvmLinear ? models::KernelType::kLinear
                  : s.kind == ModelKind::kSvmPoly ? models::KernelType::kPoly
                                                  : models::KernelType::kRbf;
  if (s.kind != ModelKind::kSvmLinear) {
    const double g = s.get("gamma");
    p.kernel.gamma = g > 0.0 ? g : models::auto_gamma(x);
  }
  if (s.kind == ModelKind::kSvmPoly) {
    p.kernel.degree = s.get("degree");
    p.kernel.coef0 = s.get("coef0");
  }
  p.smo.c = s.get("C");
  p.smo.tol = s.get("tol");
  p.smo.max_passes = s.get("max_passes");
  return p;
}

}  // namespace detail

/// A fitted classifier together with the predictor order it was trained on.
class TrainedModel {
 public:
  using Impl = std::variant<models::GaussianNb, models::LogisticRegression, models::Svm, models::DecisionTree,
                            models::TreeEnsemble, models::AdaBoost, models::Mlp>;

  TrainedModel(ModelSpec spec, std::vector<std::string> feature_order, Impl impl)
      : spec_(std::move(spec)), feature_order_(std::move(feature_order)), impl_(std::move(impl)) {}

  ModelKind kind() const noexcept { return spec_.kind; }
  const ModelSpec& spec() const noexcept { return spec_; }
  const std::vector<std::string>& feature_order() const noexcept { return feature_order_; }
  const Impl& impl() const noexcept { return impl_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

  /// Continuous scores in [0, 1]; score >= 0.5 exactly when predict = 1.
  models::Vector score(const models::Matrix& x) const {
    check_dims(x);
    return std::visit(
        [&](const auto& m) -> models::Vector {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, models::DecisionTree>) {
            models::Vector s(x.rows());
            for (Eigen::Index i = 0; i < x.rows(); ++i) s(i) = m.predict_value(x.row(i));
            return s;
          } else {
            return m.score(x);
          }
        },
        impl_);
  }

  /// Hard labels; a score of exactly 0.5 (a tied vote) yields 1.
  std::vector<int> predict(const models::Matrix& x) const {
    const models::Vector s = score(x);
    std::vector<int> out(static_cast<std::size_t>(s.size()));
    for (Eigen::Index i = 0; i < s.size(); ++i) out[static_cast<std::size_t>(i)] = s(i) >= 0.5 ? 1 : 0;
    return out;
  }

  std::vector<int> predict(const Dataset& ds) const { return predict(align(to_matrix(ds), predictor_names())); }
  models::Vector score(const Dataset& ds) const { return score(align(to_matrix(ds), predictor_names())); }

  /// Reorders the columns of `x` (named by `names`) into this model's
  /// training order.
  models::Matrix align(const models::Matrix& x, const std::vector<std::string>& names) const {
    if (names == feature_order_) return x;
    if (names.size() != static_cast<std::size_t>(x.cols())) throw Error("column names do not match matrix width");
    models::Matrix out(x.rows(), static_cast<Eigen::Index>(feature_order_.size()));
    for (std::size_t j = 0; j < feature_order_.size(); ++j) {
      const auto it = std::find(names.begin(), names.end(), feature_order_[j]);
      if (it == names.end()) throw Error("input lacks feature '" + feature_order_[j] + "'");
      out.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(it - names.begin()));
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["kind"] = std::string(kind_name(spec_.kind));
    j["hyperparams"] = spec_.hyperparams;
    j["seed"] = spec_.seed;
    j["feature_order"] = feature_order_;
    j["params"] = std::visit([](const auto& m) { return m.to_json(); }, impl_);
    return j;
  }

  static TrainedModel from_json(const nlohmann::json& j) {
    ModelSpec spec;
    spec.kind = kind_from_name(j.at("kind").get<std::string>());
    spec.hyperparams = j.at("hyperparams").get<Hyperparams>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    auto order = j.at("feature_order").get<std::vector<std::string>>();
    const auto& p = j.at("params");
    Impl impl = [&]() -> Impl {
      switch (spec.kind) {
        case ModelKind::kGaussianNb: return models::GaussianNb::from_json(p);
        case ModelKind::kLogisticRegression: return models::LogisticRegression::from_json(p);
        case ModelKind::kSvmLinear:
        case ModelKind::kSvmPoly:
        case ModelKind::kSvmRbf: return models::Svm::from_json(p);
        case ModelKind::kDecisionTree: return models::DecisionTree::from_json(p);
        case ModelKind::kRandomForest:
        case ModelKind::kBagging: return models::TreeEnsemble::from_json(p);
        case ModelKind::kAdaBoost: return models::AdaBoost::from_json(p);
        case ModelKind::kMlp: return models::Mlp::from_json(p);
      }
      throw Error("unknown model kind");
    }();
    return TrainedModel(std::move(spec), std::move(order), std::move(impl));
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError(path, "cannot open for writing");
    out << to_json().dump(1) << '\n';
    if (!out) throw IoError(path, "write failed");
  }

  static TrainedModel load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path, "cannot open for reading");
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path, std::string("invalid model file: ") + e.what());
    } catch (const Error& e) {
      throw IoError(path, std::string("invalid model file: ") + e.what());
    }
  }

 private:
  static models::Matrix to_matrix(const Dataset& ds) {
    models::Matrix x(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(kPredictorCount));
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto v = predictors(ds.rows[i]);
      for (std::size_t j = 0; j < v.size(); ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
    }
    return x;
  }

  void check_dims(const models::Matrix& x) const {
    if (static_cast<std::size_t>(x.cols()) != feature_order_.size())
      throw Error("dimension mismatch: model expects " + std::to_string(feature_order_.size()) + " features, got " +
                  std::to_string(x.cols()));
  }

  ModelSpec spec_;
  std::vector<std::string> feature_order_;
  Impl impl_;
  std::vector<std::string> warnings_;
};

/// Trains one classifier. Deterministic given spec (including seed) and data.
inline TrainedModel fit(const ModelSpec& spec, const models::Matrix& x, models::Labels y,
                        std::vector<std::string> feature_order) {
  if (static_cast<std::size_t>(x.cols()) != feature_order.size())
    throw Error("dimension mismatch: " + std::to_string(x.cols()) + " columns but " +
                std::to_string(feature_order.size()) + " feature names");
  const std::size_t pos = models::check_training_set(x, y);
  const bool one_class = models::single_class(pos, y.size());
  const auto d = static_cast<int>(x.cols());
  models::SmoResult smo;
  smo.converged = true;

  TrainedModel::Impl impl = [&]() -> TrainedModel::Impl {
    switch (spec.kind) {
      case ModelKind::kGaussianNb: return models::GaussianNb::fit(x, y, spec.get("var_floor"));
      case ModelKind::kLogisticRegression: {
        models::LogisticParams p;
        p.l2 = spec.get("l2");
        p.tol = spec.get("tol");
        p.max_iter = spec.get_int("max_iter");
        return models::LogisticRegression::fit(x, y, p);
      }
      case ModelKind::kSvmLinear:
      case ModelKind::kSvmPoly:
      case ModelKind::kSvmRbf: return models::Svm::fit(x, y, detail::svm_params(spec, x), &smo);
      case ModelKind::kDecisionTree: return models::DecisionTree::fit(x, y, detail::tree_params(spec));
      case ModelKind::kRandomForest:
      case ModelKind::kBagging: {
        models::ForestParams p;
        p.n_estimators = spec.get_int("n_estimators");
        p.bootstrap = spec.get_int("bootstrap") != 0;
        p.tree = detail::tree_params(spec);
        if (spec.kind == ModelKind::kRandomForest && p.tree.max_features == 0)
          p.tree.max_features = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
        return models::TreeEnsemble::fit(x, y, p, spec.seed);
      }
      case ModelKind::kAdaBoost: return models::AdaBoost::fit(x, y, spec.get_int("n_estimators"));
      case ModelKind::kMlp: {
        models::MlpParams p;
        p.hidden = spec.get_int("hidden");
        p.learning_rate = spec.get("learning_rate");
        p.epochs = spec.get_int("epochs");
        p.batch_size = spec.get_int("batch_size");
        return models::Mlp::fit(x, y, p, spec.seed);
      }
    }
    throw Error("unknown model kind");
  }();
  TrainedModel model(spec, std::move(feature_order), std::move(impl));
  if (one_class) model.add_warning("single-class training set; the model predicts a constant label");
  if (!smo.converged) model.add_warning("SMO stopped at the iteration cap before meeting tol");
  return model;
}

inline TrainedModel fit(const ModelSpec& spec, const FeatureTable& t) { return fit(spec, t.x, t.y, t.names); }

inline TrainedModel fit(const ModelSpec& spec, const Dataset& train) { return fit(spec, to_table(train)); }

}  // namespace pfml
