#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace synlungs {

// Material labels stored in phantom volumes.
inline constexpr std::uint8_t kMaterialAir = 0;
inline constexpr std::uint8_t kMaterialLung = 1;
inline constexpr std::uint8_t kMaterialSoft = 2;
inline constexpr std::uint8_t kMaterialBone = 3;
inline constexpr std::uint8_t kMaterialWater = 4;
inline constexpr int kMaterialCount = 5;

struct MaterialProperties {
  std::string name;
  double density_g_cm3 = 0.0;
  double mu_per_mm = 0.0;  // linear attenuation at the table's energy
};

// Linear attenuation coefficients at a single effective energy, derived from
// tabulated mass attenuation data (log-log interpolated between grid points).
class MaterialTable {
 public:
  // Supported effective energies: anything in [30, 150] keV.
  static MaterialTable builtin(double energy_kev = 60.0);

  double energy_kev() const { return energy_kev_; }
  double mu_per_mm(std::uint8_t label) const;
  double mu_water_per_mm() const { return mu_per_mm(kMaterialWater); }
  const MaterialProperties& properties(std::uint8_t label) const;
  int size() const { return static_cast<int>(props_.size()); }

  double hu(std::uint8_t label) const;  // HU of a material at this energy

 private:
  double energy_kev_ = 0.0;
  std::vector<MaterialProperties> props_;
};

// HU <-> linear attenuation (per mm), relative to water at the same energy.
double mu_to_hu(double mu_per_mm, double mu_water_per_mm);
double hu_to_mu(double hu, double mu_water_per_mm);

}  // namespace synlungs
