#pragma once

#include <array>
#include <string>
#include <vector>

#include "synlungs/rng.hpp"

namespace synlungs {

enum class LobeLocation { UpperLobe, MiddleLobe, LowerLobe };
enum class NoduleTypeFeature { Solid, PartSolid, GroundGlass };

std::string to_string(LobeLocation l);
LobeLocation lobe_from_string(const std::string& s);
std::string to_string(NoduleTypeFeature t);
NoduleTypeFeature nodule_type_feature_from_string(const std::string& s);

struct NoduleFeatures {
  double age_years = 60.0;
  char sex = 'F';  // 'M' or 'F'
  double size_mm = 8.0;
  std::string margin = "Smooth";  // Smooth | Lobulated | Spiculated
  LobeLocation location = LobeLocation::LowerLobe;
  NoduleTypeFeature nodule_type = NoduleTypeFeature::Solid;

  void validate() const;
};

// Encoded order (reference levels F / Smooth / LowerLobe / Solid):
//   [age_std, size_std, sexM, marginLobulated, marginSpiculated,
//    locUpper, locMiddle, typePartSolid, typeGroundGlass]
inline constexpr int kNumEncodedFeatures = 9;
extern const std::array<const char*, kNumEncodedFeatures> kEncodedFeatureNames;

struct LogisticModel {
  std::array<double, kNumEncodedFeatures> weights{};
  double intercept = 0.0;
  double age_mean = 59.0, age_std = 15.0;
  double size_mean = 8.0, size_std = 5.0;

  void validate() const;
};

// Default coefficients follow clinical priors in sign (size and age up,
// spiculated and upper-lobe up); the magnitudes are configuration, not a
// fitted ground truth.
LogisticModel default_model();

std::array<double, kNumEncodedFeatures> encode(const NoduleFeatures& f,
                                               const LogisticModel& m);

double predict_probability(const NoduleFeatures& f, const LogisticModel& m);

// Penalized maximum likelihood via damped Newton steps (IRLS with a line
// search); deterministic from zero initialization. l2 penalizes weights,
// not the intercept. Standardization constants are estimated from `data`.
// Throws DegenerateData on single-class data, NonConvergence past the
// iteration cap.
LogisticModel fit(const std::vector<std::pair<NoduleFeatures, bool>>& data,
                  double l2);

enum class LabelMode { Deterministic, Bernoulli };

struct LabeledNodule {
  NoduleFeatures features;
  double probability = 0.0;
  bool malignant = false;
  double threshold_used = 0.5;

  void validate() const;
};

// Deterministic: compare the probability against `threshold`. Bernoulli:
// threshold_used is the sampled uniform, so the label stays consistent with
// the recorded threshold.
LabeledNodule assign_label(const NoduleFeatures& f, const LogisticModel& m,
                           double threshold, RandomStream& rng, LabelMode mode);

double evaluate_auc(const LogisticModel& m,
                    const std::vector<std::pair<NoduleFeatures, bool>>& data);

// UTF-8 JSON round trip of the model (encoding map, standardization,
// weights, intercept).
void save_model(const LogisticModel& m, const std::string& path);
LogisticModel load_model(const std::string& path);

}  // namespace synlungs
