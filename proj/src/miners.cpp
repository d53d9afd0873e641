#include "elqa/miners.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>

#include "elqa/error.hpp"
#include "elqa/rng.hpp"

namespace elqa {

// --- PointMatrix ------------------------------------------------------------

PointMatrix::PointMatrix(std::vector<std::string> ids, std::vector<std::vector<double>> rows)
    : ids_(std::move(ids)) {
  if (rows.size() != ids_.size()) throw InvalidMatrix("row count differs from id count");
  dims_ = rows.empty() ? 0 : rows.front().size();
  values_.reserve(rows.size() * dims_);
  for (const auto& r : rows) {
    if (r.size() != dims_) throw InvalidMatrix("rows differ in length");
    values_.insert(values_.end(), r.begin(), r.end());
  }
  check();
}

PointMatrix::PointMatrix(std::vector<std::string> ids, std::size_t dims, std::vector<double> values)
    : ids_(std::move(ids)), dims_(dims), values_(std::move(values)) {
  if (values_.size() != ids_.size() * dims_) throw InvalidMatrix("value count is not rows x dims");
  check();
}

void PointMatrix::check() const {
  for (double v : values_) {
    if (!std::isfinite(v)) throw InvalidMatrix("non-finite entry");
  }
  std::set<std::string_view> seen;
  for (const auto& id : ids_) {
    if (!seen.insert(id).second) throw InvalidMatrix("duplicate id " + id);
  }
}

std::size_t ClusterAssignment::cluster_count() const {
  int top = -1;
  for (int l : labels) top = std::max(top, l);
  return static_cast<std::size_t>(top + 1);
}

// --- helpers ----------------------------------------------------------------

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

double inertia(const PointMatrix& m, std::span<const int> labels, const std::vector<std::vector<double>>& centroids) {
  double total = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    total += squared_distance(m.row(i), centroids[static_cast<std::size_t>(labels[i])]);
  }
  return total;
}

PointMatrix standardize(const PointMatrix& m) {
  const std::size_t n = m.rows();
  const std::size_t d = m.dims();
  std::vector<double> out(n * d, 0.0);
  if (n == 0) return PointMatrix(m.ids(), d, std::move(out));
  for (std::size_t j = 0; j < d; ++j) {
    const double pivot = m.at(0, j);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += m.at(i, j) - pivot;
    const double mean = pivot + sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (m.at(i, j) - mean) * (m.at(i, j) - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (sd == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) out[i * d + j] = (m.at(i, j) - mean) / sd;
  }
  return PointMatrix(m.ids(), d, std::move(out));
}

// --- k-means ----------------------------------------------------------------

std::vector<std::size_t> kmeanspp_seeds(const PointMatrix& m, std::size_t k, std::uint64_t seed) {
  const std::size_t n = m.rows();
  if (k < 1 || k > n) throw BadK("k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  SplitMix64 rng(seed);
  std::vector<std::size_t> chosen{static_cast<std::size_t>(rng.below(n))};
  std::vector<double> weight(n);
  for (std::size_t i = 0; i < n; ++i) weight[i] = squared_distance(m.row(i), m.row(chosen[0]));

  while (chosen.size() < k) {
    double total = 0.0;
    for (double w : weight) total += w;
    std::size_t next = n;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double running = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (weight[i] <= 0.0) continue;
        running += weight[i];
        next = i;
        if (running > target) break;
      }
    } else {
      // Every remaining point coincides with a chosen centre.
      for (std::size_t i = 0; i < n && next == n; ++i) {
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) next = i;
      }
    }
    chosen.push_back(next);
    for (std::size_t i = 0; i < n; ++i) {
      weight[i] = std::min(weight[i], squared_distance(m.row(i), m.row(next)));
    }
  }
  return chosen;
}

namespace {

std::vector<int> nearest_labels(const PointMatrix& m, const std::vector<std::vector<double>>& centroids) {
  std::vector<int> labels(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      const double d = squared_distance(m.row(i), centroids[c]);
      if (d < best) {
        best = d;
        best_c = static_cast<int>(c);
      }
    }
    labels[i] = best_c;
  }
  return labels;
}

/// Gives every empty cluster the point farthest from its own centroid and
/// moves that centroid onto it, so the objective cannot increase.
void repair_empty_clusters(const PointMatrix& m, std::vector<int>& labels,
                           std::vector<std::vector<double>>& centroids) {
  const std::size_t k = centroids.size();
  std::vector<std::size_t> sizes(k, 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] != 0) continue;
    double far = -1.0;
    std::size_t far_i = 0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const auto own = static_cast<std::size_t>(labels[i]);
      if (sizes[own] < 2) continue;
      const double d = squared_distance(m.row(i), centroids[own]);
      if (d > far) {
        far = d;
        far_i = i;
      }
    }
    --sizes[static_cast<std::size_t>(labels[far_i])];
    labels[far_i] = static_cast<int>(c);
    sizes[c] = 1;
    const auto row = m.row(far_i);
    centroids[c].assign(row.begin(), row.end());
  }
}

std::vector<std::vector<double>> cluster_means(const PointMatrix& m, const std::vector<int>& labels, std::size_t k) {
  std::vector<std::vector<double>> sums(k, std::vector<double>(m.dims(), 0.0));
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    ++counts[c];
    const auto row = m.row(i);
    for (std::size_t j = 0; j < m.dims(); ++j) sums[c][j] += row[j];
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (double& s : sums[c]) s /= static_cast<double>(counts[c]);
  }
  return sums;
}

}  // namespace

KMeansRun lloyd(const PointMatrix& m, std::vector<std::vector<double>> centroids, std::size_t max_iter, double tol) {
  const std::size_t k = centroids.size();
  if (k < 1 || k > m.rows()) throw BadK("k=" + std::to_string(k) + " outside [1, " + std::to_string(m.rows()) + "]");
  for (const auto& c : centroids) {
    if (c.size() != m.dims()) throw BadParam("centroid dimension differs from data");
  }

  KMeansRun run;
  std::vector<int> labels;
  std::size_t iterations = 0;
  for (std::size_t iter = 1; iter <= max_iter; ++iter) {
    std::vector<int> assigned = nearest_labels(m, centroids);
    repair_empty_clusters(m, assigned, centroids);
    run.inertia_trace.push_back(inertia(m, assigned, centroids));
    iterations = iter;
    if (assigned == labels) break;  // centroids are already the means of these labels
    labels = std::move(assigned);

    auto means = cluster_means(m, labels, k);
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) shift = std::max(shift, std::sqrt(squared_distance(means[c], centroids[c])));
    centroids = std::move(means);
    if (shift < tol) break;
  }

  const double final_inertia = inertia(m, labels, centroids);
  run.inertia_trace.push_back(final_inertia);
  run.result.labels = std::move(labels);
  run.result.centroids = std::move(centroids);
  run.result.inertia = final_inertia;
  run.result.iterations = iterations;
  return run;
}

KMeansRun kmeans_run(const PointMatrix& m, std::size_t k, std::uint64_t seed, std::size_t max_iter, double tol) {
  std::vector<std::vector<double>> centroids;
  for (std::size_t i : kmeanspp_seeds(m, k, seed)) {
    const auto row = m.row(i);
    centroids.emplace_back(row.begin(), row.end());
  }
  return lloyd(m, std::move(centroids), max_iter, tol);
}

ClusterAssignment kmeans(const PointMatrix& m, const KMeansOptions& options) {
  if (options.k < 1 || options.k > m.rows()) {
    throw BadK("k=" + std::to_string(options.k) + " outside [1, " + std::to_string(m.rows()) + "]");
  }
  if (!(options.tol > 0.0) || !std::isfinite(options.tol)) throw BadParam("tol must be > 0");
  if (options.restarts < 1) throw BadParam("restarts must be >= 1");
  if (options.max_iter < 1) throw BadParam("max_iter must be >= 1");

  std::optional<ClusterAssignment> best;
  for (std::size_t r = 0; r < options.restarts; ++r) {
    KMeansRun run = kmeans_run(m, options.k, options.seed + r, options.max_iter, options.tol);
    if (!best || *run.result.inertia < *best->inertia) best = std::move(run.result);
  }
  return *best;
}

// --- DBSCAN -----------------------------------------------------------------

ClusterAssignment dbscan(const PointMatrix& m, double eps, std::size_t min_pts) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw BadParam("eps must be > 0");
  if (min_pts == 0) throw BadParam("min_pts must be >= 1");

  const std::size_t n = m.rows();
  const double eps2 = eps * eps;
  std::vector<std::vector<std::size_t>> neighbours(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (squared_distance(m.row(i), m.row(j)) <= eps2) neighbours[i].push_back(j);
    }
  }
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) core[i] = neighbours[i].size() >= min_pts;

  ClusterAssignment out;
  out.labels.assign(n, kNoise);
  int next_cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || out.labels[i] != kNoise) continue;
    const int cluster = next_cluster++;
    std::deque<std::size_t> frontier{i};
    out.labels[i] = cluster;
    while (!frontier.empty()) {
      const std::size_t p = frontier.front();
      frontier.pop_front();
      for (std::size_t q : neighbours[p]) {
        if (core[q] && out.labels[q] == kNoise) {
          out.labels[q] = cluster;
          frontier.push_back(q);
        }
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    for (std::size_t q : neighbours[i]) {  // ascending index
      if (core[q]) {
        out.labels[i] = out.labels[q];
        break;
      }
    }
  }
  return out;
}

// --- analyser registry ------------------------------------------------------

namespace {

template <typename T>
T param(const nlohmann::json& params, const char* name, std::optional<T> fallback = std::nullopt) {
  if (!params.is_object()) throw BadParam("params must be an object");
  auto it = params.find(name);
  if (it == params.end()) {
    if (fallback) return *fallback;
    throw BadParam(std::string("missing parameter ") + name);
  }
  if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_integer() || (it->is_number_integer() && it->get<long long>() < 0)) {
      throw BadParam(std::string(name) + " must be a non-negative integer");
    }
  } else {
    if (!it->is_number()) throw BadParam(std::string(name) + " must be a number");
  }
  return it->get<T>();
}

ClusterAssignment run_kmeans(const PointMatrix& m, const nlohmann::json& params) {
  KMeansOptions o;
  o.k = param<std::size_t>(params, "k");
  o.seed = param<std::uint64_t>(params, "seed", o.seed);
  o.restarts = param<std::size_t>(params, "restarts", o.restarts);
  o.max_iter = param<std::size_t>(params, "max_iter", o.max_iter);
  o.tol = param<double>(params, "tol", o.tol);
  return kmeans(m, o);
}

ClusterAssignment run_dbscan(const PointMatrix& m, const nlohmann::json& params) {
  return dbscan(m, param<double>(params, "eps"), param<std::size_t>(params, "min_pts"));
}

}  // namespace

AnalyserRegistry AnalyserRegistry::with_defaults() {
  AnalyserRegistry r;
  r.add("kmeans", run_kmeans);
  r.add("dbscan", run_dbscan);
  return r;
}

void AnalyserRegistry::add(std::string method, Analyser analyser) {
  if (analysers_.contains(method)) throw BadParam("analyser already registered: " + method);
  analysers_.emplace(std::move(method), std::move(analyser));
}

std::vector<std::string> AnalyserRegistry::methods() const {
  std::vector<std::string> out;
  for (const auto& [name, fn] : analysers_) out.push_back(name);
  return out;
}

ClusterAssignment AnalyserRegistry::analyse(const PointMatrix& m, const AnalyserSpec& spec) const {
  auto it = analysers_.find(spec.method);
  if (it == analysers_.end()) throw UnknownMethod(spec.method);
  return it->second(m, spec.params);
}

ClusterAssignment analyse(const PointMatrix& m, const AnalyserSpec& spec) {
  static const AnalyserRegistry registry = AnalyserRegistry::with_defaults();
  return registry.analyse(m, spec);
}

}  // namespace elqa
