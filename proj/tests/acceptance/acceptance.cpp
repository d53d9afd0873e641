// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Usage: acceptance <path-to-elqa-cli>

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "elqa/cleansing_app.hpp"
#include "elqa/error.hpp"
#include "elqa/miners.hpp"
#include "elqa/preprocess.hpp"
#include "elqa/rng.hpp"
#include "elqa/synth_gen.hpp"
#include "event_gen.hpp"
#include "fixtures.hpp"
#include "headless_client.hpp"
#include "oracles.hpp"

using namespace elqa;
namespace ids = cleansing_ids;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++g_failures;
  std::printf("%s  %-34s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double rel_err(double got, long double want) {
  const long double diff = std::abs(static_cast<long double>(got) - want);
  return static_cast<double>(want == 0 ? diff : diff / std::abs(want));
}

// --- moments / OLS -------------------------------------------------------------

Outcome moments_and_ols() {
  SplitMix64 rng(2024);
  double worst = 0.0;
  std::string worst_field;
  double smallest_skew = INFINITY, smallest_kurt = INFINITY;
  std::size_t with_capacitance = 0;
  bool presence_ok = true;
  for (int i = 0; i < 1000; ++i) {
    const Measurement m = fixtures::random_skewed_measurement(rng, "s" + std::to_string(i));
    const FeatureVector f = extract_features(m);

    std::vector<double> t;
    std::vector<std::optional<double>> v, c;
    for (const auto& s : m.samples) {
      t.push_back(s.t_s);
      v.push_back(s.voltage_V);
      c.push_back(s.current_A);
    }
    const auto volts = oracle::fill(t, v);
    const auto amps = oracle::fill(t, c);
    const oracle::Fit fit = oracle::ols(t, volts);
    const auto cap = oracle::capacitance(t, volts, amps);
    const long double skew = oracle::skewness(volts);
    const long double kurt = oracle::kurtosis_excess(volts);
    smallest_skew = std::min(smallest_skew, static_cast<double>(std::abs(skew)));
    smallest_kurt = std::min(smallest_kurt, static_cast<double>(std::abs(kurt)));

    const std::pair<const char*, double> errs[] = {
        {"mean", rel_err(f.mean, oracle::mean(volts))},
        {"min", rel_err(f.min, *std::min_element(volts.begin(), volts.end()))},
        {"max", rel_err(f.max, *std::max_element(volts.begin(), volts.end()))},
        {"skewness", rel_err(f.skewness, skew)},
        {"kurtosis_excess", rel_err(f.kurtosis_excess, kurt)},
        {"slope", rel_err(f.slope, fit.slope)},
        {"slope_stderr", rel_err(f.slope_stderr, fit.stderr_slope)},
        {"capacitance_F", f.capacitance_F && cap ? rel_err(*f.capacitance_F, *cap) : 0.0},
    };
    for (const auto& [field, e] : errs) {
      if (e > worst) {
        worst = e;
        worst_field = field;
      }
    }
    if (f.capacitance_F.has_value() != cap.has_value()) presence_ok = false;
    if (cap) ++with_capacitance;
  }
  const double fixed_skew = std::abs(skewness(std::vector<double>{0, 0, 0, 1}) - 2.0 / std::sqrt(3.0));
  const double fixed_se =
      std::abs(ols_fit(std::vector<double>{0, 1, 2}, std::vector<double>{0, 1, 1}).slope_stderr - std::sqrt(1.0 / 12));
  const bool pass = worst <= 1e-9 && presence_ok && fixed_skew <= 1e-12 && fixed_se <= 1e-12;
  return {pass, "max rel err " + fmt(worst) + " (" + worst_field + "), min |skew| " + fmt(smallest_skew) +
                    ", min |kurt| " + fmt(smallest_kurt) + ", capacitance " + std::to_string(with_capacitance) +
                    "/1000" + (presence_ok ? "" : " PRESENCE MISMATCH") + ", fixed cases err " + fmt(fixed_skew) +
                    " / " + fmt(fixed_se)};
}

// --- capacitance recovery ----------------------------------------------------------

// Largest relative deviation of the recovered capacitance from the circuit's
// drawn value, over every measurement of a generated bundle.
double recovery_error(const GenConfig& cfg) {
  fixtures::TempDir dir("recover");
  const GenReport report = generate(cfg, dir.path());
  const Repository repo = ingest_csv(dir.path());
  double worst = 0;
  for (const auto& m : repo.measurements()) {
    const double truth = report.circuit_capacitance_F.at(m.circuit_id);
    worst = std::max(worst, std::abs(capacitance(m) - truth) / truth);
  }
  return worst;
}

Outcome capacitance_recovery() {
  GenConfig clean;
  clean.nominal_capacitance_F = 100e-9;
  clean.tp4_noise_rate = 0.0;
  const double clean_err = recovery_error(clean);

  GenConfig gappy = clean;
  gappy.missing_rate = 0.10;
  const double gappy_err = recovery_error(gappy);

  // Above the cap: every measurement must raise, identically on a rerun.
  const auto heavy_outcomes = [&clean] {
    std::vector<std::string> out;
    for (double rate : {0.31, 0.5}) {
      GenConfig heavy = clean;
      heavy.missing_rate = rate;
      fixtures::TempDir dir("heavy");
      generate(heavy, dir.path());
      const Repository repo = ingest_csv(dir.path());
      for (const auto& m : repo.measurements()) {
        try {
          capacitance(m);
          out.push_back(m.measurement_id + " no error");
        } catch (const Error& e) {
          out.push_back(e.code() + ": " + e.detail());
        }
      }
    }
    return out;
  };
  const auto first_run = heavy_outcomes();
  const auto second_run = heavy_outcomes();
  std::string excessive = "all " + std::to_string(first_run.size()) + " measurements raise MissingDataExcessive";
  bool all_raise = !first_run.empty();
  for (const auto& o : first_run) {
    if (o.rfind("MissingDataExcessive", 0) != 0) {
      all_raise = false;
      excessive = "got " + o;
    }
  }
  const bool deterministic = first_run == second_run;
  const bool pass = clean_err <= 0.01 && gappy_err <= 0.05 && all_raise && deterministic;
  return {pass, "clean max rel err " + fmt(clean_err) + " (<= 1%), missing 0.10 max rel err " + fmt(gappy_err) +
                    " (<= 5%), missing > 0.30: " + excessive + (deterministic ? ", deterministic" : ", NOT deterministic")};
}

// --- k-means ---------------------------------------------------------------------

PointMatrix to_matrix(const oracle::Points& p) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < p.size(); ++i) names.push_back("p" + std::to_string(i));
  return PointMatrix(names, p);
}

oracle::Points blobs(SplitMix64& rng, std::size_t n, std::size_t d) {
  const std::size_t centres = 1 + rng.below(5);
  oracle::Points c(centres, std::vector<double>(d));
  for (auto& row : c)
    for (auto& x : row) x = rng.uniform(-10, 10);
  oracle::Points p(n, std::vector<double>(d));
  for (auto& row : p) {
    const auto& centre = c[rng.below(centres)];
    for (std::size_t j = 0; j < d; ++j) row[j] = centre[j] + rng.uniform(-2, 2);
  }
  return p;
}

Outcome kmeans_monotone() {
  SplitMix64 rng(7);
  std::size_t bad_runs = 0, steps = 0;
  for (int r = 0; r < 100; ++r) {
    const auto p = blobs(rng, 10 + rng.below(200), 1 + rng.below(5));
    const std::size_t k = 1 + rng.below(8);
    const KMeansRun run = kmeans_run(to_matrix(p), k, static_cast<std::uint64_t>(r), 300, 1e-9);
    steps += run.inertia_trace.size();
    for (std::size_t i = 1; i < run.inertia_trace.size(); ++i) {
      if (run.inertia_trace[i] > run.inertia_trace[i - 1]) {
        ++bad_runs;
        break;
      }
    }
  }
  return {bad_runs == 0, std::to_string(bad_runs) + "/100 runs with an increase, " + std::to_string(steps) +
                             " inertia values checked"};
}

Outcome kmeans_local_optimum() {
  SplitMix64 rng(8);
  std::size_t violations = 0, moves = 0;
  for (int r = 0; r < 100; ++r) {
    const auto p = blobs(rng, 10 + rng.below(200), 1 + rng.below(5));
    const std::size_t k = 1 + rng.below(8);
    const ClusterAssignment a = kmeans(to_matrix(p), {.k = k, .seed = static_cast<std::uint64_t>(r)});
    const auto& cents = *a.centroids;
    // Moving point i from its centroid to centroid c changes the objective by
    // |x - c|^2 - |x - own|^2; a local optimum admits no negative change.
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double own = oracle::dist2(p[i], cents[a.labels[i]]);
      for (std::size_t c = 0; c < cents.size(); ++c) {
        if (static_cast<int>(c) == a.labels[i]) continue;
        ++moves;
        if (oracle::dist2(p[i], cents[c]) < own) ++violations;
      }
    }
  }
  return {violations == 0, std::to_string(violations) + " improving moves among " + std::to_string(moves) +
                               " single-point reassignments over 100 solutions"};
}

Outcome kmeans_brute_force() {
  SplitMix64 rng(9);
  int matches = 0;
  for (int r = 0; r < 100; ++r) {
    const std::size_t n = 2 + rng.below(7);  // 2..8
    oracle::Points p(n, std::vector<double>(2));
    for (auto& row : p)
      for (auto& x : row) x = rng.uniform(0, 10);
    const ClusterAssignment a = kmeans(to_matrix(p), {.k = 2, .seed = static_cast<std::uint64_t>(r), .restarts = 10});
    const long double best = oracle::best_two_partition(p);
    if (std::abs(*a.inertia - best) <= 1e-9L * std::max(1.0L, best)) ++matches;
  }
  return {matches >= 90, std::to_string(matches) + "/100 instances reach the optimal 2-partition (need >= 90)"};
}

// --- DBSCAN ----------------------------------------------------------------------

Outcome dbscan_reference() {
  SplitMix64 rng(10);
  int equal = 0, exact = 0, clusters = 0, noise = 0;
  for (int r = 0; r < 200; ++r) {
    const std::size_t n = 1 + rng.below(50);
    const std::size_t d = 1 + rng.below(3);
    const auto p = blobs(rng, n, d);
    const double eps = rng.uniform(0.2, 4.0);
    const std::size_t min_pts = 1 + rng.below(6);
    const auto got = dbscan(to_matrix(p), eps, min_pts).labels;
    const auto want = oracle::dbscan(p, eps, min_pts);
    if (oracle::same_up_to_renumbering(got, want)) ++equal;
    if (got == want) ++exact;
    clusters += *std::max_element(want.begin(), want.end()) + 1;
    noise += static_cast<int>(std::count(want.begin(), want.end(), -1));
  }
  return {equal == 200, std::to_string(equal) + "/200 equivalent up to renumbering (" + std::to_string(exact) +
                            " identical), " + std::to_string(clusters) + " clusters and " + std::to_string(noise) +
                            " noise points in total"};
}

// --- document round trip -----------------------------------------------------------

Outcome document_round_trip() {
  fixtures::TempDir dir("roundtrip");
  GenConfig cfg;
  cfg.missing_rate = 0.05;
  generate(cfg, dir.path());
  auto repo = std::make_shared<Repository>(ingest_csv(dir.path()));
  auto ctx = CleansingContext::make(repo, "https://act/{measurement_id}");
  std::vector<std::string> all;
  for (const auto& m : repo->measurements()) all.push_back(m.measurement_id);

  SplitMix64 rng(11);
  std::size_t sequences_ok = 0, events = 0, revision_faults = 0, handler_faults = 0;
  for (int s = 0; s < 1000; ++s) {
    auto dash = build_cleansing_dashboard(ctx);
    Document client = deserialize_document(Value::parse(serialize_document(dash->document()).dump()));
    const std::size_t length = 1 + rng.below(30);
    bool ok = true;
    for (std::size_t e = 0; e < length; ++e) {
      const std::uint64_t before = dash->document().revision;
      const Patch patch = dash->input_change(event_gen::random_event(rng, client, all));
      ++events;
      if (patch.revision != before + 1 || dash->document().revision != before + 1 || client.revision != before) {
        ++revision_faults;
        ok = false;
      }
      client = apply_patch(client, patch_from_json(Value::parse(patch_to_json(patch).dump())));
      if (canonical_document_text(client) != canonical_document_text(dash->document())) ok = false;
    }
    if (dash->handler_calls() != length) {
      ++handler_faults;
      ok = false;
    }
    if (ok) ++sequences_ok;
  }
  return {sequences_ok == 1000, std::to_string(sequences_ok) + "/1000 sequences reproduce the server document, " +
                                    std::to_string(events) + " events, " + std::to_string(revision_faults) +
                                    " revision faults, " + std::to_string(handler_faults) + " handler-count faults"};
}

// --- wire-level e2e ----------------------------------------------------------------

class ServerProcess {
 public:
  ServerProcess(const std::string& cli, const std::filesystem::path& data) {
    int fds[2];
    if (pipe(fds) != 0) throw std::runtime_error("pipe failed");
    pid_ = fork();
    if (pid_ == 0) {
      dup2(fds[1], STDOUT_FILENO);
      close(fds[0]);
      close(fds[1]);
      execl(cli.c_str(), cli.c_str(), "serve", "--data", data.c_str(), "--port", "0", "--address", "127.0.0.1",
            "--activity-url-template", "https://act/{measurement_id}", static_cast<char*>(nullptr));
      _exit(127);
    }
    close(fds[1]);
    out_ = fdopen(fds[0], "r");
    char line[256];
    if (!std::fgets(line, sizeof line, out_)) throw std::runtime_error("server did not start");
    const std::string text = line;  // "listening on ADDR:PORT"
    port_ = static_cast<unsigned short>(std::stoi(text.substr(text.rfind(':') + 1)));
  }
  ~ServerProcess() {
    kill(pid_, SIGTERM);
    int status = 0;
    waitpid(pid_, &status, 0);
    if (out_) std::fclose(out_);
  }
  unsigned short port() const { return port_; }

 private:
  pid_t pid_ = -1;
  FILE* out_ = nullptr;
  unsigned short port_ = 0;
};

std::vector<std::string> strings(const Value& column) {
  std::vector<std::string> out;
  for (const auto& v : column) out.push_back(v.get<std::string>());
  return out;
}

const Value* op_value(const Value& patch, const std::string& model, const std::string& prop) {
  for (const auto& op : patch.at("ops"))
    if (op.at("model") == model && op.at("prop") == prop) return &op.at("value");
  return nullptr;
}

// Circuit ids of the given type, read straight from circuits.csv.
std::vector<std::string> scan_circuits_csv(const std::filesystem::path& file, const std::string& type) {
  std::istringstream in(fixtures::read_file(file));
  std::string line;
  std::getline(in, line);
  std::vector<std::string> out;
  while (std::getline(in, line)) {
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    if (line.substr(a + 1, b - a - 1) == type) out.push_back(line.substr(0, a));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome wire_e2e(const std::string& cli) {
  fixtures::TempDir dir("e2e");
  generate(GenConfig{}, dir.path());  // synth seed 0
  const Repository repo = ingest_csv(dir.path());
  ServerProcess server(cli, dir.path());
  std::vector<std::string> notes;
  bool pass = true;

  if (headless::request(server.port(), headless::http::verb::get, "/healthz").status != 200) {
    pass = false;
    notes.push_back("healthz failed");
  }
  headless::Client client(server.port(), "cleansing");

  // 1. value_change "RB" -> table source holds exactly the RB circuits.
  client.send({ids::kTypeSelect, EventKind::value_change, "RB"});
  Value patch = client.receive_and_apply();
  const Value* table = op_value(patch, ids::kCircuitsSource, "data");
  const auto rb = scan_circuits_csv(dir / "circuits.csv", "RB");
  const bool filter_ok = table && !rb.empty() && strings(table->at("circuit_id")) == rb &&
                         strings(table->at("circuit_type")) == std::vector<std::string>(rb.size(), "RB");
  pass = pass && filter_ok;
  notes.push_back("RB filter " + std::string(filter_ok ? "ok" : "WRONG") + " (" + std::to_string(rb.size()) +
                  " circuits)");

  // 2. select a circuit -> plot source carries both variant series.
  client.send({ids::kCircuitsTable, EventKind::select, Value::array({0})});
  patch = client.receive_and_apply();
  const Value* plot = op_value(patch, ids::kCapacitanceSource, "data");
  const auto set = capacitance_series(repo, rb.at(0));
  bool series_ok = plot != nullptr && !set.series[0].points.empty() && !set.series[1].points.empty();
  std::size_t row = 0;
  for (const auto& s : set.series) {
    for (const auto& p : s.points) {
      if (!series_ok || row >= plot->at("measurement_id").size()) {
        series_ok = false;
        break;
      }
      series_ok = plot->at("measurement_id")[row] == p.measurement_id &&
                  plot->at("variant")[row] == to_string(s.variant) &&
                  plot->at("capacitance_F")[row].get<double>() == p.capacitance_F &&
                  plot->at("performed_at")[row] == format_timestamp(p.performed_at);
      ++row;
    }
  }
  series_ok = series_ok && row == plot->at("measurement_id").size();
  pass = pass && series_ok;
  notes.push_back("series " + std::string(series_ok ? "ok" : "WRONG") + " (M1 " +
                  std::to_string(set.series[0].points.size()) + ", M2 " + std::to_string(set.series[1].points.size()) +
                  " points)");

  // 3. test_only verdict on a plotted point -> gone from the next patch.
  const std::string victim = set.series[1].points.front().measurement_id;
  client.send({ids::kVerdictSelect, EventKind::value_change,
               Value{{"measurement_id", victim}, {"verdict", "test_only"}, {"author", "acceptance"}, {"note", ""}}});
  patch = client.receive_and_apply();
  const Value* after = op_value(patch, ids::kCapacitanceSource, "data");
  const auto remaining = after ? strings(after->at("measurement_id")) : std::vector<std::string>{};
  const bool removed = after && std::find(remaining.begin(), remaining.end(), victim) == remaining.end() &&
                       remaining.size() + 1 == row;
  pass = pass && removed;
  notes.push_back("verdict removal " + std::string(removed ? "ok" : "WRONG"));

  const auto server_doc = headless::request(server.port(), headless::http::verb::get,
                                            "/api/session/document?session=" + client.session_id());
  const bool mirrored = Value::parse(server_doc.body).at("document") == serialize_document(client.local()) &&
                        client.local().revision == 3;
  pass = pass && mirrored;
  notes.push_back(std::string("client mirror ") + (mirrored ? "equal" : "DIFFERS") + " at revision " +
                  std::to_string(client.local().revision));

  std::string detail;
  for (const auto& n : notes) detail += (detail.empty() ? "" : "; ") + n;
  return {pass, detail};
}

// --- determinism -------------------------------------------------------------------

int run(const std::string& command) { return std::system((command + " > /dev/null 2>&1").c_str()); }

Outcome determinism(const std::string& cli) {
  fixtures::TempDir a("det-a"), b("det-b");
  std::vector<std::string> mismatches;
  const char* files[] = {"circuits.csv", "campaigns.csv", "measurements.csv", "samples.csv"};
  for (auto* dir : {&a, &b}) {
    if (run(cli + " gen --seed 0 --out " + (*dir / "data").string()) != 0) mismatches.push_back("gen failed");
    if (run(cli + " features --data " + (*dir / "data").string() + " --out " + (*dir / "features.csv").string()) != 0)
      mismatches.push_back("features failed");
    if (run(cli + " cluster --features " + (*dir / "features.csv").string() + " --method kmeans --k 3 --seed 5 --out " +
            (*dir / "kmeans.csv").string()) != 0)
      mismatches.push_back("kmeans failed");
    if (run(cli + " cluster --features " + (*dir / "features.csv").string() +
            " --method dbscan --eps 1.0 --min-pts 3 --out " + (*dir / "dbscan.csv").string()) != 0)
      mismatches.push_back("dbscan failed");
  }
  std::size_t bytes = 0;
  for (const char* f : files) {
    const std::string x = fixtures::read_file(a / "data" / f);
    bytes += x.size();
    if (x.empty() || x != fixtures::read_file(b / "data" / f)) mismatches.push_back(f);
  }
  for (const char* f : {"features.csv", "kmeans.csv", "dbscan.csv"}) {
    const std::string x = fixtures::read_file(a / f);
    if (x.empty() || x != fixtures::read_file(b / f)) mismatches.push_back(f);
  }
  std::string detail = "gen bundle " + std::to_string(bytes) + " bytes; features, kmeans and dbscan outputs";
  if (mismatches.empty()) return {true, detail + " byte-identical across two runs"};
  for (const auto& m : mismatches) detail += "; differs: " + m;
  return {false, detail};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <elqa-cli>\n";
    return 2;
  }
  const std::string cli = argv[1];
  report("moment/OLS oracle suite", moments_and_ols);
  report("capacitance recovery", capacitance_recovery);
  report("k-means monotone inertia", kmeans_monotone);
  report("k-means local optimum", kmeans_local_optimum);
  report("k-means brute-force optimum", kmeans_brute_force);
  report("DBSCAN naive reference", dbscan_reference);
  report("document round trip", document_round_trip);
  report("wire-level headless e2e", [&] { return wire_e2e(cli); });
  report("determinism", [&] { return determinism(cli); });
  std::printf("%d criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
