#include "synlungs/materials.hpp"

#include <cmath>

#include "synlungs/errors.hpp"

namespace synlungs {

namespace {

// Mass attenuation coefficients mu/rho in cm^2/g on a keV grid (NIST XCOM
// standard reference data for dry air, lung tissue (ICRU-44), soft tissue
// (ICRU-44), cortical bone (ICRU-44), and liquid water).
constexpr double kEnergiesKev[] = {30.0, 40.0, 50.0, 60.0, 80.0, 100.0, 150.0};
constexpr int kNumEnergies = 7;

struct MassAttenRow {
  const char* name;
  double density;  // g/cm^3
  double mu_rho[kNumEnergies];
};

// Order must match the material label constants.
constexpr MassAttenRow kRows[kMaterialCount] = {
    {"air", 0.001205, {0.3538, 0.2485, 0.2080, 0.1875, 0.1662, 0.1541, 0.1356}},
    {"lung", 0.26, {0.3756, 0.2615, 0.2176, 0.1953, 0.1720, 0.1593, 0.1401}},
    {"soft_tissue", 1.06, {0.3714, 0.2587, 0.2153, 0.1934, 0.1705, 0.1580, 0.1390}},
    {"cortical_bone", 1.92, {0.9609, 0.5168, 0.3481, 0.2737, 0.2083, 0.1800, 0.1490}},
    {"water", 1.0, {0.3756, 0.2683, 0.2269, 0.2059, 0.1837, 0.1707, 0.1505}},
};

double interp_log_log(const double* xs, const double* ys, int n, double x) {
  if (x <= xs[0]) return ys[0];
  if (x >= xs[n - 1]) return ys[n - 1];
  int i = 0;
  while (i + 2 < n && xs[i + 1] < x) ++i;
  const double t = (std::log(x) - std::log(xs[i])) /
                   (std::log(xs[i + 1]) - std::log(xs[i]));
  return std::exp((1.0 - t) * std::log(ys[i]) + t * std::log(ys[i + 1]));
}

}  // namespace

MaterialTable MaterialTable::builtin(double energy_kev) {
  if (energy_kev < kEnergiesKev[0] || energy_kev > kEnergiesKev[kNumEnergies - 1]) {
    throw ValidationError("effective energy must be in [30, 150] keV");
  }
  MaterialTable t;
  t.energy_kev_ = energy_kev;
  t.props_.reserve(kMaterialCount);
  for (const auto& row : kRows) {
    const double mu_rho =
        interp_log_log(kEnergiesKev, row.mu_rho, kNumEnergies, energy_kev);
    MaterialProperties p;
    p.name = row.name;
    p.density_g_cm3 = row.density;
    // cm^2/g * g/cm^3 = 1/cm; divide by 10 for 1/mm.
    p.mu_per_mm = mu_rho * row.density / 10.0;
    t.props_.push_back(std::move(p));
  }
  return t;
}

double MaterialTable::mu_per_mm(std::uint8_t label) const {
  if (label >= props_.size()) {
    throw ValidationError("unknown material label " + std::to_string(label));
  }
  return props_[label].mu_per_mm;
}

const MaterialProperties& MaterialTable::properties(std::uint8_t label) const {
  if (label >= props_.size()) {
    throw ValidationError("unknown material label " + std::to_string(label));
  }
  return props_[label];
}

double MaterialTable::hu(std::uint8_t label) const {
  return mu_to_hu(mu_per_mm(label), mu_water_per_mm());
}

double mu_to_hu(double mu_per_mm, double mu_water_per_mm) {
  return 1000.0 * (mu_per_mm - mu_water_per_mm) / mu_water_per_mm;
}

double hu_to_mu(double hu, double mu_water_per_mm) {
  return mu_water_per_mm * (1.0 + hu / 1000.0);
}

}  // namespace synlungs
