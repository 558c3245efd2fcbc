#pragma once

#include <optional>
#include <vector>

namespace stc {

/// The admissible inter-sample intervals {tau_min, 2 tau_min, ..., N tau_min}.
/// Intervals are addressed by index 0..N-1 so grid membership is exact.
struct TriggerGrid {
  double tau_min = 0.05;
  int count = 8;

  double tau(int index) const { return static_cast<double>(index + 1) * tau_min; }
  double tau_max() const { return static_cast<double>(count) * tau_min; }
  bool valid_index(int index) const { return index >= 0 && index < count; }
  /// Index of a grid value, matched to 1e-9 s; nullopt when off-grid.
  std::optional<int> index_of(double tau) const;
  std::vector<double> values() const;
  /// Throws ConfigError for tau_min <= 0 or count < 1.
  void validate() const;
};

/// Causal n-point moving average of executed intervals, started at tau_min.
class MsiTracker {
 public:
  explicit MsiTracker(double initial, int window = 5);

  void update(double tau) {
    value_ = (static_cast<double>(window_ - 1) * value_ + tau) / static_cast<double>(window_);
  }
  double value() const { return value_; }
  int window() const { return window_; }

 private:
  double value_;
  int window_;
};

inline MsiTracker msi_update(MsiTracker tracker, double tau) {
  tracker.update(tau);
  return tracker;
}

}  // namespace stc
