#include "synlungs/labeler.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <Eigen/Dense>
#include <json.hpp>

#include "synlungs/errors.hpp"
#include "synlungs/metrics.hpp"

namespace synlungs {

using nlohmann::json;

const std::array<const char*, kNumEncodedFeatures> kEncodedFeatureNames = {
    "age_std",         "size_std",        "sexM",
    "marginLobulated", "marginSpiculated", "locUpper",
    "locMiddle",       "typePartSolid",   "typeGroundGlass"};

std::string to_string(LobeLocation l) {
  switch (l) {
    case LobeLocation::UpperLobe: return "UpperLobe";
    case LobeLocation::MiddleLobe: return "MiddleLobe";
    case LobeLocation::LowerLobe: return "LowerLobe";
  }
  return "unknown";
}

LobeLocation lobe_from_string(const std::string& s) {
  if (s == "UpperLobe") return LobeLocation::UpperLobe;
  if (s == "MiddleLobe") return LobeLocation::MiddleLobe;
  if (s == "LowerLobe") return LobeLocation::LowerLobe;
  throw ValidationError("unknown lobe location: " + s);
}

std::string to_string(NoduleTypeFeature t) {
  switch (t) {
    case NoduleTypeFeature::Solid: return "Solid";
    case NoduleTypeFeature::PartSolid: return "PartSolid";
    case NoduleTypeFeature::GroundGlass: return "GroundGlass";
  }
  return "unknown";
}

NoduleTypeFeature nodule_type_feature_from_string(const std::string& s) {
  if (s == "Solid") return NoduleTypeFeature::Solid;
  if (s == "PartSolid") return NoduleTypeFeature::PartSolid;
  if (s == "GroundGlass") return NoduleTypeFeature::GroundGlass;
  throw ValidationError("unknown nodule type: " + s);
}

void NoduleFeatures::validate() const {
  if (!(age_years > 0.0)) throw ValidationError("age must be > 0");
  if (!(size_mm > 0.0)) throw ValidationError("size must be > 0");
  if (sex != 'M' && sex != 'F') throw ValidationError("sex must be M or F");
  if (margin != "Smooth" && margin != "Lobulated" && margin != "Spiculated") {
    throw ValidationError("unknown margin: " + margin);
  }
}

void LogisticModel::validate() const {
  if (!(age_std > 0.0) || !(size_std > 0.0)) {
    throw ValidationError("standardization stds must be > 0");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw ValidationError("weights must be finite");
  }
  if (!std::isfinite(intercept)) throw ValidationError("intercept must be finite");
}

void LabeledNodule::validate() const {
  features.validate();
  if (probability < 0.0 || probability > 1.0) {
    throw ValidationError("probability must be in [0,1]");
  }
  if (malignant != (probability >= threshold_used)) {
    throw ValidationError("label inconsistent with threshold");
  }
}

LogisticModel default_model() {
  LogisticModel m;
  m.intercept = -1.2;
  m.weights = {0.45,  // age_std
               1.10,  // size_std
               0.15,  // sexM
               0.35,  // marginLobulated
               0.90,  // marginSpiculated
               0.50,  // locUpper
               0.10,  // locMiddle
               0.40,  // typePartSolid
               -0.20};  // typeGroundGlass
  m.age_mean = 59.0;
  m.age_std = 15.0;
  m.size_mean = 8.0;
  m.size_std = 5.0;
  return m;
}

std::array<double, kNumEncodedFeatures> encode(const NoduleFeatures& f,
                                               const LogisticModel& m) {
  f.validate();
  std::array<double, kNumEncodedFeatures> z{};
  z[0] = (f.age_years - m.age_mean) / m.age_std;
  z[1] = (f.size_mm - m.size_mean) / m.size_std;
  z[2] = f.sex == 'M' ? 1.0 : 0.0;
  z[3] = f.margin == "Lobulated" ? 1.0 : 0.0;
  z[4] = f.margin == "Spiculated" ? 1.0 : 0.0;
  z[5] = f.location == LobeLocation::UpperLobe ? 1.0 : 0.0;
  z[6] = f.location == LobeLocation::MiddleLobe ? 1.0 : 0.0;
  z[7] = f.nodule_type == NoduleTypeFeature::PartSolid ? 1.0 : 0.0;
  z[8] = f.nodule_type == NoduleTypeFeature::GroundGlass ? 1.0 : 0.0;
  return z;
}

namespace {

double sigmoid(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Penalized negative log-likelihood; numerically stable log1p form.
double objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                 const Eigen::VectorXd& theta, double l2) {
  const Eigen::VectorXd eta = x * theta;
  double nll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double t = eta[i];
    // -[y log p + (1-y) log(1-p)] = log(1+e^t) - y t, stabilized.
    nll += (t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t))) -
           y[i] * t;
  }
  double penalty = 0.0;
  for (int j = 0; j < kNumEncodedFeatures; ++j) penalty += theta[j] * theta[j];
  return nll + 0.5 * l2 * penalty;
}

}  // namespace

double predict_probability(const NoduleFeatures& f, const LogisticModel& m) {
  m.validate();
  const auto z = encode(f, m);
  double t = m.intercept;
  for (int j = 0; j < kNumEncodedFeatures; ++j) t += m.weights[j] * z[j];
  return sigmoid(t);
}

LogisticModel fit(const std::vector<std::pair<NoduleFeatures, bool>>& data,
                  double l2) {
  if (l2 < 0.0) throw ValidationError("l2 must be >= 0");
  std::size_t n_pos = 0;
  for (const auto& [f, y] : data) n_pos += y;
  if (n_pos == 0 || n_pos == data.size()) {
    throw DegenerateData("fit requires both outcomes present");
  }

  LogisticModel m;
  // Standardization from the data itself.
  double age_sum = 0.0, size_sum = 0.0;
  for (const auto& [f, y] : data) {
    age_sum += f.age_years;
    size_sum += f.size_mm;
  }
  const double n = static_cast<double>(data.size());
  m.age_mean = age_sum / n;
  m.size_mean = size_sum / n;
  double age_ss = 0.0, size_ss = 0.0;
  for (const auto& [f, y] : data) {
    age_ss += (f.age_years - m.age_mean) * (f.age_years - m.age_mean);
    size_ss += (f.size_mm - m.size_mean) * (f.size_mm - m.size_mean);
  }
  m.age_std = std::max(std::sqrt(age_ss / n), 1e-9);
  m.size_std = std::max(std::sqrt(size_ss / n), 1e-9);

  const int dim = kNumEncodedFeatures + 1;  // + intercept (last column)
  Eigen::MatrixXd x(data.size(), dim);
  Eigen::VectorXd y(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto z = encode(data[i].first, m);
    for (int j = 0; j < kNumEncodedFeatures; ++j) x(i, j) = z[j];
    x(i, kNumEncodedFeatures) = 1.0;
    y(i) = data[i].second ? 1.0 : 0.0;
  }

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim);
  double obj = objective(x, y, theta, l2);
  const auto finish = [&]() {
    LogisticModel out = m;
    for (int j = 0; j < kNumEncodedFeatures; ++j) out.weights[j] = theta[j];
    out.intercept = theta[kNumEncodedFeatures];
    out.validate();
    return out;
  };
  const double eps = std::numeric_limits<double>::epsilon();
  const int max_iters = 200;
  for (int iter = 0; iter < max_iters; ++iter) {
    const Eigen::VectorXd eta = x * theta;
    Eigen::VectorXd p(eta.size()), w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      p[i] = sigmoid(eta[i]);
      w[i] = std::max(p[i] * (1.0 - p[i]), 1e-12);
    }
    Eigen::VectorXd grad = x.transpose() * (p - y);
    for (int j = 0; j < kNumEncodedFeatures; ++j) grad[j] += l2 * theta[j];
    if (grad.lpNorm<Eigen::Infinity>() < 1e-6) return finish();
    Eigen::MatrixXd h = x.transpose() * w.asDiagonal() * x;
    for (int j = 0; j < kNumEncodedFeatures; ++j) h(j, j) += l2;
    // Tiny ridge on the full system guards near-singular Hessians.
    for (int j = 0; j < dim; ++j) h(j, j) += 1e-10;
    const Eigen::VectorXd step = h.ldlt().solve(-grad);

    // Predicted decrease of the Newton step; once it falls below the
    // rounding floor of the objective no further progress is representable.
    const double decrement = -0.5 * grad.dot(step);
    if (decrement <= 16.0 * eps * (1.0 + std::abs(obj))) return finish();

    // Backtracking keeps the objective monotone.
    double t = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      const Eigen::VectorXd cand = theta + t * step;
      const double cand_obj = objective(x, y, cand, l2);
      if (cand_obj <= obj - 1e-4 * t * std::abs(grad.dot(step))) {
        theta = cand;
        obj = cand_obj;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // Line search can stall at machine precision with the gradient already
      // at its numerical floor; treat that as converged.
      if (grad.lpNorm<Eigen::Infinity>() <= std::sqrt(eps) * (1.0 + std::abs(obj))) {
        return finish();
      }
      throw NonConvergence("logistic fit line search stalled");
    }
  }
  throw NonConvergence("logistic fit did not converge in 200 iterations");
}

LabeledNodule assign_label(const NoduleFeatures& f, const LogisticModel& m,
                           double threshold, RandomStream& rng,
                           LabelMode mode) {
  if (threshold < 0.0 || threshold > 1.0) {
    throw ValidationError("threshold must be in [0,1]");
  }
  LabeledNodule out;
  out.features = f;
  out.probability = predict_probability(f, m);
  if (mode == LabelMode::Deterministic) {
    out.threshold_used = threshold;
  } else {
    // Record the sampled uniform as the effective threshold so the
    // label/threshold invariant holds for Bernoulli draws too.
    out.threshold_used = rng.uniform();
  }
  out.malignant = out.probability >= out.threshold_used;
  return out;
}

double evaluate_auc(const LogisticModel& m,
                    const std::vector<std::pair<NoduleFeatures, bool>>& data) {
  std::vector<std::pair<double, bool>> scored;
  scored.reserve(data.size());
  for (const auto& [f, y] : data) {
    scored.emplace_back(predict_probability(f, m), y);
  }
  return auc(scored);
}

void save_model(const LogisticModel& m, const std::string& path) {
  m.validate();
  json j;
  j["encoding"] = json::array();
  for (const char* name : kEncodedFeatureNames) j["encoding"].push_back(name);
  j["reference_levels"] = {{"sex", "F"},
                           {"margin", "Smooth"},
                           {"location", "LowerLobe"},
                           {"nodule_type", "Solid"}};
  j["weights"] = m.weights;
  j["intercept"] = m.intercept;
  j["age_mean"] = m.age_mean;
  j["age_std"] = m.age_std;
  j["size_mean"] = m.size_mean;
  j["size_std"] = m.size_std;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  out << j.dump(2) << "\n";
}

LogisticModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for read: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed model file " + path + ": " + e.what());
  }
  LogisticModel m;
  const auto w = j.at("weights").get<std::vector<double>>();
  if (w.size() != kNumEncodedFeatures) {
    throw IoError("model weight count mismatch in " + path);
  }
  std::copy(w.begin(), w.end(), m.weights.begin());
  m.intercept = j.at("intercept").get<double>();
  m.age_mean = j.at("age_mean").get<double>();
  m.age_std = j.at("age_std").get<double>();
  m.size_mean = j.at("size_mean").get<double>();
  m.size_std = j.at("size_std").get<double>();
  m.validate();
  return m;
}

}  // namespace synlungs
