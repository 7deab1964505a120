#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ame/error.hpp"
#include "ame/pipeline.hpp"
#include "ame/report.hpp"
#include "support.hpp"

using namespace ame;

namespace {

LoadOptions opts() {
  LoadOptions o;
  o.treatment_col = "t";
  o.outcome_col = "y";
  return o;
}

std::string sample_csv(std::uint64_t seed, std::size_t n, double missing_rate = 0.0) {
  std::mt19937_64 rng(seed);
  std::string csv = "x1,x2,x3,t,y\n";
  const char* levels[] = {"a", "b", "c"};
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t v[3];
    for (auto& c : v) c = uniform_below(rng, 3);
    const int t = static_cast<int>(uniform_below(rng, 2));
    const double y = 2.0 * static_cast<double>(v[0]) + t + 0.1 * standard_normal(rng);
    for (int j = 0; j < 3; ++j) {
      csv += uniform_unit(rng) < missing_rate ? std::string("NA") : std::string(levels[v[j]]);
      csv += ",";
    }
    csv += std::to_string(t) + "," + format_double(y) + "\n";
  }
  return csv;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("format_double round-trips") {
  for (double v : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 1e-300, 123456789.125}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(2.0) == "2");
}

TEST_CASE("matched.csv stars columns outside the main-group set and omits unmatched units") {
  // Two covariates: units 0,1 match exactly; units 2,3 only on x1; unit 4 never.
  const EncodedDataset ds = encode_table(parse_csv("x1,x2,t,y\na,p,1,1\na,p,0,2\nb,p,1,3\nb,q,0,4\nc,q,1,5\n"), opts());
  MatchState state(ds.n_units(), false);
  match_on_set(state, ds, CovariateSet::full(2), 0);
  match_on_set(state, ds, CovariateSet::single(0), 1);
  const std::string csv = render_matched_csv(ds, state);
  CHECK(csv ==
        "unit_id,x1,x2,t,y,group_id,iteration\n"
        "0,a,p,1,1,0,0\n"
        "1,a,p,0,2,0,0\n"
        "2,b,*,1,3,1,1\n"
        "3,b,*,0,4,1,1\n");
}

TEST_CASE("groups.json round trip rebuilds the state and reproduces effects exactly") {
  PipelineOptions options;
  options.algo.algorithm = Algorithm::kDame;
  options.holdout.fraction = 0.2;
  for (bool replacement : {false, true}) {
    options.algo.with_replacement = replacement;
    const EncodedDataset input = encode_table(parse_csv(sample_csv(3, 400)), opts());
    const PipelineResult result = run_pipeline(input, nullptr, options);
    const RunOutput& run = result.runs.front();
    const std::string json = render_groups_json(run.matching, run.run.state);
    const MatchState back = state_from_groups_json(json, run.matching);
    REQUIRE(back.groups().size() == run.run.state.groups().size());
    for (std::size_t g = 0; g < back.groups().size(); ++g) {
      CHECK(back.groups()[g].members == run.run.state.groups()[g].members);
      CHECK(back.groups()[g].on_set == run.run.state.groups()[g].on_set);
      CHECK(back.groups()[g].iteration == run.run.state.groups()[g].iteration);
    }
    for (std::size_t u = 0; u < run.matching.n_units(); ++u) CHECK(back.main_group(u) == run.run.state.main_group(u));
    const auto y = run.matching.outcome();
    const auto t = run.matching.treatment();
    const auto doc = nlohmann::json::parse(render_effects_json(result));
    CHECK(ate(back, y, t).value == doc["ate"].get<double>());
    CHECK(att(back, y, t).value == doc["att"].get<double>());
    CHECK(doc["n_units"].get<std::size_t>() == back.n_matched());
    CHECK(render_groups_json(run.matching, back) == json);
  }
}

TEST_CASE("every star in matched.csv is exactly a column outside the main-group set") {
  const EncodedDataset input = encode_table(parse_csv(sample_csv(8, 300)), opts());
  PipelineOptions options;
  const PipelineResult result = run_pipeline(input, nullptr, options);
  const RunOutput& run = result.runs.front();
  const CsvTable table = parse_csv(render_matched_csv(run.matching, run.run.state));
  const auto doc = nlohmann::json::parse(render_groups_json(run.matching, run.run.state));
  for (const auto& row : table.rows) {
    const std::size_t gid = std::stoul(row[6]);
    std::set<std::string> on_set;
    for (const auto& name : doc[gid]["on_set"]) on_set.insert(name.get<std::string>());
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK((row[1 + j] == "*") == (on_set.count(table.header[1 + j]) == 0));
    }
  }
}

TEST_CASE("iterations.csv has one row per record with the documented columns") {
  const EncodedDataset input = encode_table(parse_csv(sample_csv(5, 300)), opts());
  PipelineOptions options;
  options.algo.algorithm = Algorithm::kDame;
  options.algo.stopping.max_iterations = 3;
  const PipelineResult result = run_pipeline(input, nullptr, options);
  const CsvTable t = parse_csv(render_iterations_csv(result.runs.front().matching, result.runs.front().run));
  CHECK(t.header == std::vector<std::string>{"iteration", "phase", "dropped", "pe", "bf", "mq", "n_newly_matched",
                                             "cumulative_matched"});
  CHECK(t.rows.size() == result.runs.front().run.records.size());
  CHECK(t.rows.size() <= 4);
  CHECK(t.rows[0][1] == "exact");
  CHECK(t.rows[0][2].empty());
}

TEST_CASE("write_outputs writes the four files and reports unwritable directories") {
  const EncodedDataset input = encode_table(parse_csv(sample_csv(6, 200)), opts());
  const PipelineResult result = run_pipeline(input, nullptr, PipelineOptions{});
  const auto dir = std::filesystem::temp_directory_path() / "ame_report_test";
  std::filesystem::remove_all(dir);
  write_outputs(dir, result);
  for (const char* f : {"matched.csv", "groups.json", "iterations.csv", "effects.json"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  CHECK(slurp(dir / "effects.json") == render_effects_json(result));
  std::filesystem::remove_all(dir);
  try {
    write_outputs("/proc/ame/not/here", result);
    FAIL("expected WriteFailed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kWriteFailed);
  }
}

TEST_CASE("multiple imputation averages effects with equal weight") {
  const EncodedDataset input = encode_table(parse_csv(sample_csv(9, 400, 0.05)), opts());
  PipelineOptions options;
  options.missing.mode = MissingMode::kImpute;
  options.missing.impute_count = 3;
  const PipelineResult result = run_pipeline(input, nullptr, options);
  REQUIRE(result.runs.size() == 3);
  double sum = 0.0;
  for (const auto& r : result.runs) sum += r.ate->value;
  CHECK(*result.ate == doctest::Approx(sum / 3.0).epsilon(1e-12));
  const auto doc = nlohmann::json::parse(render_effects_json(result));
  CHECK(doc["imputations"].size() == 3);
}

TEST_CASE("Matcher: predict before fit is Unfitted; fit then predict equals the pipeline on the same tables") {
  PipelineOptions options;
  Matcher matcher(options);
  const CsvTable matching = parse_csv(sample_csv(10, 300));
  const CsvTable holdout = parse_csv(sample_csv(11, 80));
  CHECK_FALSE(matcher.fitted());
  try {
    matcher.predict(matching, opts());
    FAIL("expected Unfitted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnfitted);
  }
  matcher.fit(holdout, opts());
  CHECK(matcher.fitted());
  const PipelineResult a = matcher.predict(matching, opts());
  const EncodedDataset in = encode_table(matching, opts());
  const EncodedDataset hold = encode_table(holdout, opts(), &in);
  const PipelineResult b = run_pipeline(in, &hold, options);
  CHECK(render_groups_json(a.runs[0].matching, a.runs[0].run.state) ==
        render_groups_json(b.runs[0].matching, b.runs[0].run.state));
  CHECK(*a.ate == *b.ate);
}

TEST_CASE("Matcher: holdout lacking an arm is rejected at fit") {
  Matcher matcher(PipelineOptions{});
  try {
    matcher.fit(parse_csv("x,t,y\na,1,1\nb,1,2\n"), opts());
    FAIL("expected EmptyArm");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyArm);
  }
  CHECK_FALSE(matcher.fitted());
}
