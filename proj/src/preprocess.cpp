#include "elqa/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "elqa/error.hpp"

namespace elqa {

namespace {

// Accumulating around the first element keeps the mean of a constant
// sequence exact.
double shifted_mean(std::span<const double> values) {
  const double pivot = values.front();
  double sum = 0.0;
  for (double v : values) sum += v - pivot;
  return pivot + sum / static_cast<double>(values.size());
}

struct CentralMoments {
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
};

CentralMoments central_moments(std::span<const double> values) {
  const double mean = shifted_mean(values);
  CentralMoments m;
  for (double v : values) {
    const double d = v - mean;
    const double d2 = d * d;
    m.m2 += d2;
    m.m3 += d2 * d;
    m.m4 += d2 * d2;
  }
  const auto n = static_cast<double>(values.size());
  m.m2 /= n;
  m.m3 /= n;
  m.m4 /= n;
  return m;
}

std::optional<double> channel_value(const Sample& s, Channel channel) {
  return channel == Channel::voltage ? s.voltage_V : s.current_A;
}

}  // namespace

BasicStats basic_stats(std::span<const double> values) {
  if (values.empty()) throw EmptyInput("basic_stats needs at least one value");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  // Rounding in the mean must not leave it outside [min, max].
  const double mean = std::clamp(shifted_mean(values), *lo, *hi);
  return {mean, *lo, *hi};
}

double skewness(std::span<const double> values) {
  if (values.size() < 3) throw EmptyInput("skewness needs at least 3 values");
  const CentralMoments m = central_moments(values);
  if (!(m.m2 > 0.0)) throw DegenerateVariance("skewness of a constant sequence");
  return m.m3 / std::pow(m.m2, 1.5);
}

double kurtosis_excess(std::span<const double> values) {
  if (values.size() < 4) throw EmptyInput("kurtosis needs at least 4 values");
  const CentralMoments m = central_moments(values);
  if (!(m.m2 > 0.0)) throw DegenerateVariance("kurtosis of a constant sequence");
  return m.m4 / (m.m2 * m.m2) - 3.0;
}

LinearFit ols_fit(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size()) throw LengthMismatch("ols_fit: times and values differ in length");
  if (times.size() < 3) throw EmptyInput("ols_fit needs at least 3 points");
  if (std::all_of(times.begin(), times.end(), [&](double t) { return t == times.front(); })) {
    throw DegenerateTimes("ols_fit: all times are equal");
  }

  const double t_mean = shifted_mean(times);
  const double v_mean = shifted_mean(values);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double dt = times[i] - t_mean;
    sxx += dt * dt;
    sxy += dt * (values[i] - v_mean);
  }
  if (!(sxx > 0.0)) throw DegenerateTimes("ols_fit: time spread underflows");

  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = v_mean - fit.slope * t_mean;
  double ssr = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double r = (values[i] - v_mean) - fit.slope * (times[i] - t_mean);
    ssr += r * r;
  }
  fit.slope_stderr = std::sqrt(ssr / static_cast<double>(times.size() - 2) / sxx);
  return fit;
}

std::vector<double> interpolate_missing(std::span<const Sample> samples, Channel channel) {
  const std::size_t n = samples.size();
  std::vector<std::size_t> present;
  present.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (channel_value(samples[i], channel)) present.push_back(i);
  }
  const char* name = channel == Channel::voltage ? "voltage" : "current";
  if (present.empty()) throw AllMissing(std::string(name) + " channel has no values");
  const std::size_t missing = n - present.size();
  // missing / n > 0.30, in exact integer arithmetic.
  if (missing * 100 > n * static_cast<std::size_t>(kMaxMissingFraction * 100)) {
    throw MissingDataExcessive(std::string(name) + " channel: " + std::to_string(missing) + " of " +
                               std::to_string(n) + " values missing");
  }

  std::vector<double> out(n);
  const double first = *channel_value(samples[present.front()], channel);
  const double last = *channel_value(samples[present.back()], channel);
  for (std::size_t i = 0; i < present.front(); ++i) out[i] = first;
  for (std::size_t i = present.back() + 1; i < n; ++i) out[i] = last;
  for (std::size_t p = 0; p < present.size(); ++p) {
    const std::size_t i = present[p];
    out[i] = *channel_value(samples[i], channel);
    if (p + 1 == present.size()) break;
    const std::size_t j = present[p + 1];
    const double t0 = samples[i].t_s;
    const double t1 = samples[j].t_s;
    const double v0 = out[i];
    const double v1 = *channel_value(samples[j], channel);
    for (std::size_t k = i + 1; k < j; ++k) {
      const double w = (samples[k].t_s - t0) / (t1 - t0);
      out[k] = v0 + w * (v1 - v0);
    }
  }
  return out;
}

double capacitance(const Measurement& m) {
  if (m.samples.empty()) throw EmptyInput("measurement " + m.measurement_id + " has no samples");
  const std::vector<double> voltage = interpolate_missing(m.samples, Channel::voltage);
  const std::vector<double> current = interpolate_missing(m.samples, Channel::current);

  // Ties at the maximum resolve to the earliest index.
  const auto peak = static_cast<std::size_t>(
      std::distance(voltage.begin(), std::max_element(voltage.begin(), voltage.end())));
  const double rise = voltage[peak] - voltage.front();
  if (!(rise > kMinVoltageRise)) {
    throw FlatVoltage("measurement " + m.measurement_id + " has no voltage rise");
  }

  double charge = 0.0;
  for (std::size_t i = 0; i < peak; ++i) {
    charge += 0.5 * (current[i] + current[i + 1]) * (m.samples[i + 1].t_s - m.samples[i].t_s);
  }
  return charge / rise;
}

FeatureVector extract_features(const Measurement& m) {
  if (m.samples.empty()) throw EmptyInput("measurement " + m.measurement_id + " has no samples");
  const auto present_voltage = std::count_if(m.samples.begin(), m.samples.end(),
                                             [](const Sample& s) { return s.voltage_V.has_value(); });
  if (present_voltage < 3) {
    throw EmptyInput("measurement " + m.measurement_id + " has fewer than 3 voltage values");
  }

  const std::vector<double> voltage = interpolate_missing(m.samples, Channel::voltage);
  std::vector<double> times;
  times.reserve(m.samples.size());
  for (const Sample& s : m.samples) times.push_back(s.t_s);

  const BasicStats stats = basic_stats(voltage);
  const LinearFit fit = ols_fit(times, voltage);

  FeatureVector f;
  f.measurement_id = m.measurement_id;
  f.mean = stats.mean;
  f.min = stats.min;
  f.max = stats.max;
  f.skewness = skewness(voltage);
  f.kurtosis_excess = kurtosis_excess(voltage);
  f.slope = fit.slope;
  f.slope_stderr = fit.slope_stderr;

  const bool has_current = std::any_of(m.samples.begin(), m.samples.end(),
                                       [](const Sample& s) { return s.current_A.has_value(); });
  if (has_current) {
    try {
      f.capacitance_F = capacitance(m);
    } catch (const Error&) {
      f.capacitance_F.reset();
    }
  }
  return f;
}

double rmse_deviation(std::span<const double> series, std::span<const double> reference) {
  if (series.size() != reference.size()) throw LengthMismatch("rmse: series and reference differ in length");
  if (series.empty()) throw EmptyInput("rmse of empty series");
  double sum = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double d = series[i] - reference[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(series.size()));
}

}  // namespace elqa
