#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "elqa/error.hpp"
#include "elqa/rng.hpp"
#include "elqa/signal_store.hpp"
#include "elqa/text.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace elqa;

namespace {

const char* kCircuitsHeader = "circuit_id,circuit_type,sector,magnet_position,manufacturer\n";
const char* kCampaignsHeader = "campaign_id,label,machine_state,started_at\n";
const char* kMeasurementsHeader =
    "measurement_id,circuit_id,campaign_id,test_type,variant,operator,performed_at,tunnel_temperature_C,"
    "tunnel_humidity_pct\n";
const char* kSamplesHeader = "measurement_id,t_s,voltage_V,current_A\n";

void write_bundle(const fixtures::TempDir& dir, const std::string& circuits, const std::string& campaigns,
                  const std::string& measurements, const std::string& samples) {
  fixtures::write_file(dir / "circuits.csv", kCircuitsHeader + circuits);
  fixtures::write_file(dir / "campaigns.csv", kCampaignsHeader + campaigns);
  fixtures::write_file(dir / "measurements.csv", kMeasurementsHeader + measurements);
  fixtures::write_file(dir / "samples.csv", kSamplesHeader + samples);
}

Timestamp ts(const char* text) { return *parse_timestamp(text); }

// A random repository built through the public API.
Repository random_repo(SplitMix64& rng, std::size_t n_measurements) {
  static const char* kTypes[] = {"RB", "RQ", "RCS", "RQD"};
  Repository repo;
  const std::size_t n_circuits = 1 + rng.below(12);
  for (std::size_t i = 0; i < n_circuits; ++i) {
    repo.add_circuit({"C" + std::to_string(i), kTypes[rng.below(4)], static_cast<Sector>(rng.below(8)), "A1L1",
                      "ASG"});
  }
  const std::size_t n_campaigns = 1 + rng.below(4);
  for (std::size_t i = 0; i < n_campaigns; ++i) {
    repo.add_campaign({"K" + std::to_string(i), "L", MachineState::cold, ts("2013-01-01T00:00:00Z")});
  }
  for (std::size_t i = 0; i < n_measurements; ++i) {
    Measurement m;
    m.measurement_id = "m" + std::to_string(i);
    m.circuit_id = "C" + std::to_string(rng.below(n_circuits));
    m.campaign_id = "K" + std::to_string(rng.below(n_campaigns));
    m.test_type = static_cast<TestType>(rng.below(4));
    m.variant = static_cast<Variant>(rng.below(2));
    // Few distinct timestamps so ties exercise the id tie-break.
    m.performed_at = ts("2013-01-01T00:00:00Z") + std::chrono::hours(rng.below(5));
    m.samples = {{0.0, 1.0, 1.0}};
    repo.add_measurement(std::move(m));
  }
  return repo;
}

}  // namespace

TEST_CASE("timestamps round trip and reject malformed text") {
  CHECK(format_timestamp(ts("2013-02-14T08:00:00Z")) == "2013-02-14T08:00:00Z");
  CHECK(parse_timestamp("2013-02-14T08:00:00+00:00") == parse_timestamp("2013-02-14T08:00:00Z"));
  CHECK_FALSE(parse_timestamp("2013-02-30T08:00:00Z"));
  CHECK_FALSE(parse_timestamp("2013-02-14 08:00:00Z"));
  CHECK_FALSE(parse_timestamp("2013-02-14T08:00:00+01:00"));
}

TEST_CASE("csv records split with quoting and doubles round trip") {
  CHECK(*split_csv_record("a,\"b,c\",,\"d\"\"e\"\r") == std::vector<std::string>{"a", "b,c", "", "d\"e"});
  CHECK_FALSE(split_csv_record("\"open"));
  CHECK(join_csv_record({"x", "y,z", "q\""}) == "x,\"y,z\",\"q\"\"\"");
  SplitMix64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(rng.uniform(-1, 1), static_cast<int>(rng.below(200)) - 100);
    CHECK(*parse_double(format_double(v)) == v);
  }
  CHECK_FALSE(parse_double("nan"));
  CHECK_FALSE(parse_double("1.0x"));
  CHECK(percent_encode("m 7/ä") == "m%207%2F%C3%A4");
}

TEST_CASE("ingest: empty-but-headered files give an empty repository") {
  fixtures::TempDir dir("empty");
  write_bundle(dir, "", "", "", "");
  const Repository repo = ingest_csv(dir.path());
  CHECK(repo.circuit_count() == 0);
  CHECK(repo.campaign_count() == 0);
  CHECK(repo.measurement_count() == 0);
}

TEST_CASE("ingest: identity load of a tiny bundle") {
  fixtures::TempDir dir("tiny");
  write_bundle(dir, "C1,RB,S12,A12L1,ASG\n", "K1,LS1,cold,2013-02-14T08:00:00Z\n",
               "m1,C1,K1,HVQ,M1,op,2013-02-14T09:00:00Z,,45.5\n", "m1,0,0,1e-6\nm1,0.5,,1e-6\nm1,1,2,\n");
  const Repository repo = ingest_csv(dir.path());
  CHECK(repo.circuit_count() == 1);
  CHECK(repo.campaign_count() == 1);
  CHECK(repo.measurement_count() == 1);
  const auto m = *repo.find_measurement("m1");
  REQUIRE(m.samples.size() == 3);
  CHECK_FALSE(m.samples[1].voltage_V);
  CHECK_FALSE(m.samples[2].current_A);
  CHECK_FALSE(m.tunnel_temperature_C);
  CHECK(*m.tunnel_humidity_pct == 45.5);
  CHECK(m.variant == Variant::M1);
}

TEST_CASE("ingest: errors name the offending location") {
  fixtures::TempDir dir("bad");
  SUBCASE("dangling circuit") {
    write_bundle(dir, "C1,RB,S12,A,ASG\n", "K1,LS1,cold,2013-02-14T08:00:00Z\n",
                 "m1,X9,K1,HVQ,M1,op,2013-02-14T09:00:00Z,,\n", "");
    try {
      ingest_csv(dir.path());
      FAIL("expected DanglingReference");
    } catch (const DanglingReference& e) {
      CHECK(e.detail() == "X9");
    }
  }
  SUBCASE("bad sector names file and line") {
    write_bundle(dir, "C1,RB,S12,A,ASG\nC2,RB,S99,A,ASG\n", "", "", "");
    try {
      ingest_csv(dir.path());
      FAIL("expected MalformedRow");
    } catch (const MalformedRow& e) {
      CHECK(e.detail().find("circuits.csv:3") != std::string::npos);
    }
  }
  SUBCASE("sample for unknown measurement") {
    write_bundle(dir, "", "", "", "m404,0,1,1\n");
    CHECK_THROWS_AS(ingest_csv(dir.path()), DanglingReference);
  }
  SUBCASE("non-increasing times") {
    write_bundle(dir, "C1,RB,S12,A,ASG\n", "K1,LS1,cold,2013-02-14T08:00:00Z\n",
                 "m1,C1,K1,HVQ,M1,op,2013-02-14T09:00:00Z,,\n", "m1,0,1,1\nm1,0,2,1\n");
    CHECK_THROWS_AS(ingest_csv(dir.path()), MalformedRow);
  }
  SUBCASE("missing file") {
    fixtures::write_file(dir / "circuits.csv", kCircuitsHeader);
    CHECK_THROWS_AS(ingest_csv(dir.path()), MissingFile);
  }
}

TEST_CASE("query_measurements equals a linear scan on 500 random repositories") {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const Repository repo = random_repo(rng, rng.below(60));
    const auto all = repo.measurements();
    MeasurementFilter f;
    if (rng.below(2)) f.circuit_type = std::vector<std::string>{"RB", "RQ", "RCS", "RQD"}[rng.below(4)];
    if (rng.below(3) == 0) f.circuit_id = "C" + std::to_string(rng.below(12));
    if (rng.below(2)) f.test_type = static_cast<TestType>(rng.below(4));
    if (rng.below(2)) f.campaign_id = "K" + std::to_string(rng.below(4));

    std::vector<Measurement> expected;
    for (const auto& m : all) {
      const auto c = repo.find_circuit(m.circuit_id);
      if (f.circuit_type && c->circuit_type != *f.circuit_type) continue;
      if (f.circuit_id && m.circuit_id != *f.circuit_id) continue;
      if (f.test_type && m.test_type != *f.test_type) continue;
      if (f.campaign_id && m.campaign_id != *f.campaign_id) continue;
      expected.push_back(m);
    }
    std::sort(expected.begin(), expected.end(), [](const Measurement& a, const Measurement& b) {
      return std::tie(a.performed_at, a.measurement_id) < std::tie(b.performed_at, b.measurement_id);
    });
    const auto got = repo.query_measurements(f);
    REQUIRE(got == expected);
    CHECK(got.size() <= repo.query_measurements({}).size());
  }
}

TEST_CASE("distinct_values equals scan-and-dedupe on a 1000-row repository") {
  SplitMix64 rng(12);
  const Repository repo = random_repo(rng, 1000);
  const auto circuits = repo.circuits();
  const auto measurements = repo.measurements();
  CHECK(repo.distinct_values(DistinctField::circuit_type) ==
        oracle::scan_distinct(circuits, [](const Circuit& c) { return c.circuit_type; }));
  CHECK(repo.distinct_values(DistinctField::sector) ==
        oracle::scan_distinct(circuits, [](const Circuit& c) { return std::string(to_string(c.sector)); }));
  CHECK(repo.distinct_values("test_type") ==
        oracle::scan_distinct(measurements, [](const Measurement& m) { return std::string(to_string(m.test_type)); }));
  CHECK(repo.distinct_values("campaign_id") ==
        oracle::scan_distinct(measurements, [](const Measurement& m) { return m.campaign_id; }));
  CHECK_THROWS_AS(repo.distinct_values("operator"), UnknownField);
  CHECK(Repository().distinct_values(DistinctField::circuit_type).empty());
}

TEST_CASE("annotate: read-your-write, last write wins, journal replay") {
  fixtures::TempDir dir("journal");
  SplitMix64 rng(5);
  Repository repo = random_repo(rng, 5);
  repo.set_journal(dir / "annotations.jsonl");
  repo.annotate("m1", {Verdict::suspect, "ana", "spiky", ts("2014-01-01T00:00:00Z")});
  const Measurement m = repo.annotate("m1", {Verdict::test_only, "bo", "", ts("2014-01-02T00:00:00Z")});
  CHECK(m.annotation->verdict == Verdict::test_only);
  CHECK(repo.query_measurements({.circuit_id = m.circuit_id}).size() >= 1);
  CHECK(repo.find_measurement("m1")->annotation->author == "bo");
  CHECK_THROWS_AS(repo.annotate("nope", {}), UnknownMeasurement);

  SplitMix64 rng2(5);
  Repository fresh = random_repo(rng2, 5);
  CHECK(fresh.replay_journal(dir / "annotations.jsonl") == 2);
  CHECK(fresh.annotation_of("m1") == repo.annotation_of("m1"));
  const std::string journal = fixtures::read_file(dir / "annotations.jsonl");
  CHECK(std::count(journal.begin(), journal.end(), '\n') == 2);
}
