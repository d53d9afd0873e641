#pragma once

// Per-signal feature extraction. All functions are pure.
//
// Conventions: moments are population (biased) moments
// m_k = (1/n) * sum (x - mean)^k; skewness g1 = m3 / m2^(3/2); excess
// kurtosis g2 = m4 / m2^2 - 3.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elqa/signal_store.hpp"

namespace elqa {

struct BasicStats {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

enum class Channel { voltage, current };

struct FeatureVector {
  std::string measurement_id;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double skewness = 0.0;
  double kurtosis_excess = 0.0;
  double slope = 0.0;          // V/s
  double slope_stderr = 0.0;   // V/s
  std::optional<double> capacitance_F;

  bool operator==(const FeatureVector&) const = default;
};

/// Largest tolerated fraction of absent values in one channel.
inline constexpr double kMaxMissingFraction = 0.30;
/// Voltage rise below this (volts) makes capacitance undefined.
inline constexpr double kMinVoltageRise = 1e-6;

/// Throws EmptyInput.
BasicStats basic_stats(std::span<const double> values);

/// Needs n >= 3 (EmptyInput otherwise) and m2 > 0 (DegenerateVariance).
double skewness(std::span<const double> values);

/// Needs n >= 4 (EmptyInput otherwise) and m2 > 0 (DegenerateVariance).
double kurtosis_excess(std::span<const double> values);

/// Ordinary least squares of values on times, with
/// slope_stderr = sqrt((SSR / (n - 2)) / Sxx).
/// Throws LengthMismatch, EmptyInput (n < 3), DegenerateTimes (all t equal).
LinearFit ols_fit(std::span<const double> times, std::span<const double> values);

/// Fills gaps in one channel by linear interpolation between the nearest
/// present neighbours; leading and trailing gaps take the nearest present
/// value. Throws AllMissing when nothing is present and MissingDataExcessive
/// when more than 30% of the values are absent.
std::vector<double> interpolate_missing(std::span<const Sample> samples, Channel channel);

/// C = Q / dV over the charge window [first sample, first voltage maximum],
/// Q being the trapezoidal integral of the interpolated current.
/// Throws EmptyInput, FlatVoltage and the interpolation errors.
double capacitance(const Measurement& m);

/// Features of the interpolated voltage channel. Capacitance is set when a
/// current channel is present and `capacitance()` succeeds.
FeatureVector extract_features(const Measurement& m);

/// sqrt(mean((s - ref)^2)). Throws LengthMismatch, EmptyInput.
double rmse_deviation(std::span<const double> series, std::span<const double> reference);

}  // namespace elqa
