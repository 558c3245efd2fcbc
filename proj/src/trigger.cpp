#include "stc/trigger.hpp"

#include <cmath>

#include "stc/errors.hpp"

namespace stc {

std::optional<int> TriggerGrid::index_of(double tau) const {
  if (!(tau_min > 0.0)) return std::nullopt;
  const double ratio = tau / tau_min;
  const long nearest = std::lround(ratio);
  if (nearest < 1 || nearest > count) return std::nullopt;
  if (std::abs(tau - static_cast<double>(nearest) * tau_min) > 1e-9) return std::nullopt;
  return static_cast<int>(nearest - 1);
}

std::vector<double> TriggerGrid::values() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(tau(i));
  return out;
}

void TriggerGrid::validate() const {
  if (!(tau_min > 0.0) || !std::isfinite(tau_min)) {
    throw ConfigError("trigger grid: tau_min must be a positive number");
  }
  if (count < 1) throw ConfigError("trigger grid: count must be >= 1");
}

MsiTracker::MsiTracker(double initial, int window) : value_(initial), window_(window) {
  if (window < 1) throw ConfigError("MSI window must be >= 1");
}

}  // namespace stc
