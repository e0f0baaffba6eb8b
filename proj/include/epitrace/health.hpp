#pragma once

// Infection-probability model.
//
//   z = b0 + (b1 * rssi) * (b2 * dt_b) + (b3 * dt_c) * survival_hours(ms)
//
// The two tensor-product terms are read as scalar products, giving an
// RSSI x contact-duration interaction and a check-in-gap x surface-survival
// interaction. Under StandardLogit p = 1 / (1 + e^-z); AsWritten keeps the
// literal 1 / (1 + e^z), under which risk falls as exposure grows.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace epitrace::health {

enum class HealthErrc { NonFiniteInput, SingularSystem, InvalidDataset, InvalidUpdate };

class HealthError : public std::runtime_error {
 public:
  HealthError(HealthErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  HealthErrc code() const noexcept { return code_; }

 private:
  HealthErrc code_;
};

enum class MaterialSurface : std::uint8_t { Aerosol, Copper, Cardboard, Other, StainlessSteel, Plastic };

inline constexpr std::array<MaterialSurface, 6> kAllSurfaces{
    MaterialSurface::Aerosol, MaterialSurface::Copper,         MaterialSurface::Cardboard,
    MaterialSurface::Other,   MaterialSurface::StainlessSteel, MaterialSurface::Plastic,
};

/// Hours the virus stays active on the surface.
constexpr double beta4(MaterialSurface ms) {
  switch (ms) {
    case MaterialSurface::Aerosol: return 3.0;
    case MaterialSurface::Copper: return 4.0;
    case MaterialSurface::Cardboard: return 24.0;
    case MaterialSurface::Other: return 30.0;
    case MaterialSurface::StainlessSteel: return 48.0;
    case MaterialSurface::Plastic: return 72.0;
  }
  return 0.0;
}

inline const char* to_string(MaterialSurface ms) {
  switch (ms) {
    case MaterialSurface::Aerosol: return "Aerosol";
    case MaterialSurface::Copper: return "Copper";
    case MaterialSurface::Cardboard: return "Cardboard";
    case MaterialSurface::Other: return "Other";
    case MaterialSurface::StainlessSteel: return "StainlessSteel";
    case MaterialSurface::Plastic: return "Plastic";
  }
  return "?";
}

inline std::optional<MaterialSurface> parse_surface(std::string_view s) {
  for (auto ms : kAllSurfaces)
    if (s == to_string(ms)) return ms;
  return std::nullopt;
}

enum class SignConvention : std::uint8_t { AsWritten, StandardLogit };

struct ExposureFeatures {
  double rssi = 0.0;       // dBm
  double delta_t_b = 0.0;  // Bluetooth contact duration, s
  double delta_t_c = 0.0;  // |t_i - t_j| between check-ins, s
  MaterialSurface ms = MaterialSurface::Aerosol;
};

/// Coefficients of the logit. Defaults are illustrative, not fitted.
struct ModelParams {
  double beta0 = -4.0;
  double beta1 = -0.02;
  double beta2 = 0.005;
  double beta3 = -2e-6;
  SignConvention sign = SignConvention::StandardLogit;
};

inline double exposure_logit(const ExposureFeatures& f, const ModelParams& p) {
  return p.beta0 + (p.beta1 * f.rssi) * (p.beta2 * f.delta_t_b) + (p.beta3 * f.delta_t_c) * beta4(f.ms);
}

/// 1 / (1 + e^-x) without overflow for large |x|.
inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double infection_probability(const ExposureFeatures& f, const ModelParams& p) {
  for (double v : {f.rssi, f.delta_t_b, f.delta_t_c, p.beta0, p.beta1, p.beta2, p.beta3})
    if (!std::isfinite(v)) throw HealthError(HealthErrc::NonFiniteInput, "health: non-finite feature or coefficient");
  const double z = exposure_logit(f, p);
  if (!std::isfinite(z)) throw HealthError(HealthErrc::NonFiniteInput, "health: logit overflow");
  return p.sign == SignConvention::StandardLogit ? logistic(z) : logistic(-z);
}

}  // namespace epitrace::health
