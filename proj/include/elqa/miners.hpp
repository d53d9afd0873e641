#pragma once

// The analyser layer: clustering over feature vectors.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace elqa {

/// n points x d features, row-major, with one id per row.
class PointMatrix {
 public:
  PointMatrix() = default;
  /// Throws InvalidMatrix unless rows are rectangular, finite and ids unique.
  PointMatrix(std::vector<std::string> ids, std::vector<std::vector<double>> rows);
  PointMatrix(std::vector<std::string> ids, std::size_t dims, std::vector<double> values);

  std::size_t rows() const { return ids_.size(); }
  std::size_t dims() const { return dims_; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * dims_, dims_}; }
  double at(std::size_t i, std::size_t j) const { return values_[i * dims_ + j]; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<double>& values() const { return values_; }

  bool operator==(const PointMatrix&) const = default;

 private:
  void check() const;

  std::vector<std::string> ids_;
  std::size_t dims_ = 0;
  std::vector<double> values_;
};

inline constexpr int kNoise = -1;

struct ClusterAssignment {
  std::vector<int> labels;
  std::optional<std::vector<std::vector<double>>> centroids;  // k-means only
  std::optional<double> inertia;
  std::optional<std::size_t> iterations;

  std::size_t cluster_count() const;
  bool operator==(const ClusterAssignment&) const = default;
};

struct KMeansOptions {
  std::size_t k = 2;
  std::uint64_t seed = 0;
  std::size_t restarts = 10;
  std::size_t max_iter = 300;
  double tol = 1e-9;
};

/// One Lloyd run, with the objective recorded after every assignment step.
struct KMeansRun {
  ClusterAssignment result;
  std::vector<double> inertia_trace;
};

/// Per-column z-score with population standard deviation; zero-variance
/// columns become all zeros.
PointMatrix standardize(const PointMatrix& m);

double squared_distance(std::span<const double> a, std::span<const double> b);

/// k-means++ seeding from SplitMix64(seed). The first centre is row
/// floor(u * n); each further centre is the first row whose running sum of
/// D^2 weights exceeds u * total.
std::vector<std::size_t> kmeanspp_seeds(const PointMatrix& m, std::size_t k, std::uint64_t seed);

/// Lloyd iterations from explicit starting centroids. Stops when the largest
/// centroid displacement drops below `tol`, when an assignment repeats, or
/// after `max_iter` assignment steps. An empty cluster seizes the point
/// farthest from its current centroid (taken from a cluster with more than
/// one member).
KMeansRun lloyd(const PointMatrix& m, std::vector<std::vector<double>> centroids, std::size_t max_iter,
                double tol);

/// Single seeded run: k-means++ seeding followed by `lloyd`.
KMeansRun kmeans_run(const PointMatrix& m, std::size_t k, std::uint64_t seed, std::size_t max_iter, double tol);

/// Best of `restarts` runs with seeds seed, seed+1, ...; ties keep the lowest
/// seed. Throws BadK unless 1 <= k <= n, BadParam for tol <= 0 or zero
/// restarts.
ClusterAssignment kmeans(const PointMatrix& m, const KMeansOptions& options);

/// Sum of squared distances from each point to its labelled centroid.
double inertia(const PointMatrix& m, std::span<const int> labels, const std::vector<std::vector<double>>& centroids);

/// Density-based clustering. Neighbourhoods are closed Euclidean balls that
/// include the point itself; a point is core when its neighbourhood holds at
/// least `min_pts` points. Clusters are numbered in order of their
/// lowest-index core point; a border point joins the cluster of its
/// lowest-index core neighbour. Throws BadParam for eps <= 0 or min_pts = 0.
ClusterAssignment dbscan(const PointMatrix& m, double eps, std::size_t min_pts);

/// Method name plus JSON parameters, e.g.
/// `{"method":"dbscan","params":{"eps":1.5,"min_pts":2}}`.
struct AnalyserSpec {
  std::string method;
  nlohmann::json params = nlohmann::json::object();
};

using Analyser = std::function<ClusterAssignment(const PointMatrix&, const nlohmann::json&)>;

/// Name -> analyser table. The default registry knows "kmeans" and "dbscan".
class AnalyserRegistry {
 public:
  static AnalyserRegistry with_defaults();

  /// Throws BadParam when the name is taken.
  void add(std::string method, Analyser analyser);
  bool contains(const std::string& method) const { return analysers_.contains(method); }
  std::vector<std::string> methods() const;

  /// Throws UnknownMethod, BadParam for malformed parameters, and whatever
  /// the analyser throws.
  ClusterAssignment analyse(const PointMatrix& m, const AnalyserSpec& spec) const;

 private:
  std::map<std::string, Analyser> analysers_;
};

/// Dispatch through the default registry.
ClusterAssignment analyse(const PointMatrix& m, const AnalyserSpec& spec);

}  // namespace elqa
