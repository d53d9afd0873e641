// elqa: command-line front end (gen, features, cluster, serve).

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "elqa/cleansing_app.hpp"
#include "elqa/error.hpp"
#include "elqa/feature_table.hpp"
#include "elqa/http_server.hpp"
#include "elqa/miners.hpp"
#include "elqa/preprocess.hpp"
#include "elqa/session_manager.hpp"
#include "elqa/signal_store.hpp"
#include "elqa/synth_gen.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kDefaultActivityTemplate = "http://localhost/elqa/activities/{measurement_id}";

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw elqa::IoError("cannot write " + path.string());
  out << bytes;
  if (!out.flush()) throw elqa::IoError("cannot write " + path.string());
}

int run_gen(const elqa::GenConfig& config, const fs::path& out_dir) {
  const elqa::GenReport report = elqa::generate(config, out_dir);
  std::cout << report.to_json() << "\n";
  return 0;
}

int run_features(const fs::path& data_dir, const fs::path& out_path) {
  const elqa::Repository repo = elqa::ingest_csv(data_dir);
  std::vector<elqa::FeatureVector> features;
  for (const auto& m : repo.measurements()) {
    try {
      features.push_back(elqa::extract_features(m));
    } catch (const elqa::Error& e) {
      std::cerr << "warning: skipped " << m.measurement_id << ": " << e.code() << " " << e.detail() << "\n";
    }
  }
  write_file(out_path, elqa::features_csv(features));
  return 0;
}

int run_cluster(const fs::path& features_path, const fs::path& out_path, const std::string& method,
                std::optional<std::size_t> k, std::optional<double> eps, std::optional<std::size_t> min_pts,
                std::uint64_t seed) {
  const elqa::PointMatrix m = elqa::standardize(elqa::feature_matrix(elqa::read_features_csv(features_path)));
  elqa::AnalyserSpec spec{method, nlohmann::json::object()};
  if (method == "kmeans") {
    if (!k) throw elqa::BadParam("--k is required for kmeans");
    spec.params = {{"k", *k}, {"seed", seed}};
  } else if (method == "dbscan") {
    if (!eps || !min_pts) throw elqa::BadParam("--eps and --min-pts are required for dbscan");
    spec.params = {{"eps", *eps}, {"min_pts", *min_pts}};
  }
  const elqa::ClusterAssignment assignment = elqa::analyse(m, spec);
  write_file(out_path, elqa::labels_csv(m, assignment));
  return 0;
}

int run_serve(const fs::path& data_dir, const elqa::ServerOptions& options, std::string url_template,
              const std::optional<fs::path>& journal) {
  if (const char* env = std::getenv("ELQA_ACTIVITY_URL"); env != nullptr && *env != '\0') url_template = env;

  auto repo = std::make_shared<elqa::Repository>(elqa::ingest_csv(data_dir));
  const fs::path journal_path = journal.value_or(data_dir / "annotations.jsonl");
  if (fs::exists(journal_path)) {
    const std::size_t applied = repo->replay_journal(journal_path);
    std::cerr << "replayed " << applied << " annotations from " << journal_path.string() << "\n";
  }
  repo->set_journal(journal_path);
  auto context = elqa::CleansingContext::make(repo, url_template);

  elqa::SessionManager sessions;
  sessions.register_dashboard("cleansing", [context] { return elqa::build_cleansing_dashboard(context); });

  elqa::HttpServer server(sessions, options);
  server.start();
  std::cout << "listening on " << options.address << ":" << server.port() << std::endl;

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  server.wait();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Electrical quality-assurance signal toolkit"};
  app.require_subcommand(1);

  elqa::GenConfig gen_config;
  fs::path gen_out;
  auto* gen = app.add_subcommand("gen", "Write a synthetic CSV bundle and print its report");
  gen->add_option("--seed", gen_config.seed, "RNG seed");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--circuits", gen_config.n_circuits, "Number of circuits");
  gen->add_option("--missing-rate", gen_config.missing_rate, "Fraction of absent values per channel");
  gen->add_option("--noise-rate", gen_config.tp4_noise_rate, "Fraction of anomalous measurements");

  fs::path features_data;
  fs::path features_out = "features.csv";
  auto* features = app.add_subcommand("features", "Extract one feature row per measurement");
  features->add_option("--data", features_data, "Bundle directory")->required();
  features->add_option("--out", features_out, "Output CSV");

  fs::path cluster_features;
  fs::path cluster_out = "labels.csv";
  std::string cluster_method;
  std::optional<std::size_t> cluster_k;
  std::optional<double> cluster_eps;
  std::optional<std::size_t> cluster_min_pts;
  std::uint64_t cluster_seed = 0;
  auto* cluster = app.add_subcommand("cluster", "Cluster a feature table");
  cluster->add_option("--features", cluster_features, "Feature CSV")->required();
  cluster->add_option("--method", cluster_method, "kmeans or dbscan")->required();
  cluster->add_option("--k", cluster_k, "Number of clusters (kmeans)");
  cluster->add_option("--eps", cluster_eps, "Neighbourhood radius (dbscan)");
  cluster->add_option("--min-pts", cluster_min_pts, "Core threshold (dbscan)");
  cluster->add_option("--seed", cluster_seed, "Seed (kmeans)");
  cluster->add_option("--out", cluster_out, "Output CSV");

  fs::path serve_data;
  elqa::ServerOptions serve_options;
  std::string serve_template = kDefaultActivityTemplate;
  long long serve_ttl = elqa::kDefaultSessionTtl.count();
  std::optional<fs::path> serve_journal;
  auto* serve = app.add_subcommand("serve", "Serve the cleansing dashboard");
  serve->add_option("--data", serve_data, "Bundle directory")->required();
  serve->add_option("--port", serve_options.port, "TCP port (0 = ephemeral)")->required();
  serve->add_option("--address", serve_options.address, "Bind address");
  serve->add_option("--activity-url-template", serve_template, "Activity page URL with {measurement_id}");
  serve->add_option("--session-ttl", serve_ttl, "Idle seconds before a session expires (0 = never)")
      ->check(CLI::NonNegativeNumber);
  serve->add_option("--static-dir", serve_options.static_dir, "Client bundle directory");
  serve->add_option("--journal", serve_journal, "Annotation journal (default DATA/annotations.jsonl)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return run_gen(gen_config, gen_out);
    if (*features) return run_features(features_data, features_out);
    if (*cluster) {
      return run_cluster(cluster_features, cluster_out, cluster_method, cluster_k, cluster_eps, cluster_min_pts,
                         cluster_seed);
    }
    if (*serve) {
      serve_options.session_ttl = std::chrono::seconds(serve_ttl);
      return run_serve(serve_data, serve_options, serve_template, serve_journal);
    }
  } catch (const elqa::Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.detail() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
