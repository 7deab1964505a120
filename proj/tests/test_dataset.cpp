#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "ame/csv.hpp"
#include "ame/dataset.hpp"
#include "ame/error.hpp"
#include "support.hpp"

using namespace ame;

namespace {

LoadOptions opts(std::string t = "t", std::string y = "y") {
  LoadOptions o;
  o.treatment_col = std::move(t);
  o.outcome_col = std::move(y);
  return o;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an ame::Error");
  return ErrorCode::kInvalidArgument;
}

EncodedDataset encode(std::string_view csv, const LoadOptions& o = opts()) { return encode_table(parse_csv(csv), o); }

}  // namespace

TEST_CASE("csv parsing handles quotes, CRLF, BOM and blank lines") {
  const CsvTable t = parse_csv("\xEF\xBB\xBF" "a,b\r\n\"x,1\",\"say \"\"hi\"\"\"\r\n\r\n2,\n");
  REQUIRE(t.header == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0] == std::vector<std::string>{"x,1", "say \"hi\""});
  CHECK(t.rows[1] == std::vector<std::string>{"2", ""});
}

TEST_CASE("csv field count mismatch is malformed") {
  CHECK(code_of([] { parse_csv("a,b\n1,2,3\n"); }) == ErrorCode::kMalformedCsv);
  CHECK(code_of([] { parse_csv("a,b\n\"open\n"); }) == ErrorCode::kMalformedCsv);
}

TEST_CASE("csv_escape quotes only when needed") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("q\"") == "\"q\"\"\"");
  const CsvTable back = parse_csv("h\n" + csv_escape("x,\"y\"\nz") + "\n");
  CHECK(back.rows.at(0).at(0) == "x,\"y\"\nz");
}

TEST_CASE("first-appearance encoding: [a,b,a] -> [0,1,0], cardinality 2") {
  const EncodedDataset ds = encode("x,t,y\na,1,1\nb,0,2\na,1,3\n");
  CHECK(ds.n_units() == 3);
  CHECK(ds.cardinality(0) == 2);
  CHECK(std::vector<std::uint32_t>(ds.column(0).begin(), ds.column(0).end()) == std::vector<std::uint32_t>{0, 1, 0});
  CHECK(ds.decode(1, 0) == "b");
  CHECK(ds.unit_ids() == std::vector<std::string>{"0", "1", "2"});
}

TEST_CASE("treatment value 2 is NonBinaryTreatment") {
  CHECK(code_of([] { encode("x,t,y\na,2,1\nb,0,2\n"); }) == ErrorCode::kNonBinaryTreatment);
}

TEST_CASE("five rows with x1 in {0,1} and x2 in {0,1,2} give cardinalities [2,3]") {
  const EncodedDataset ds = encode("x1,x2,t,y\n0,0,1,1\n1,1,0,1\n0,2,1,1\n1,0,0,1\n0,1,1,1\n");
  const auto schema = ds.schema();
  std::vector<std::uint32_t> cards;
  for (const auto& c : schema) {
    if (c.kind == ColumnKind::kCovariate) cards.push_back(c.cardinality);
  }
  CHECK(cards == std::vector<std::uint32_t>{2, 3});
  CHECK(std::count_if(schema.begin(), schema.end(), [](const ColumnSchema& c) { return c.kind == ColumnKind::kTreatment; }) == 1);
  CHECK(std::count_if(schema.begin(), schema.end(), [](const ColumnSchema& c) { return c.kind == ColumnKind::kOutcome; }) == 1);
}

TEST_CASE("load errors name the offending column and row") {
  CHECK(code_of([] { encode("x,t,y\na,1,1\n", opts("treat")); }) == ErrorCode::kMissingColumn);
  CHECK(code_of([] { encode("x,t,y\na,1,1\n", opts("t", "z")); }) == ErrorCode::kMissingColumn);
  try {
    encode("x,t,y\na,1,1\nb,0,oops\n");
    FAIL("expected UnparseableOutcome");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnparseableOutcome);
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("'y'") != std::string::npos);
  }
  CHECK(code_of([] { encode("x,t,y\na,1,inf\n"); }) == ErrorCode::kUnparseableOutcome);
  CHECK(code_of([] { encode("x,t,y\n"); }) == ErrorCode::kEmptyTable);
}

TEST_CASE("id column and NA tokens") {
  LoadOptions o = opts();
  o.id_col = "id";
  o.na_token = "?";
  const EncodedDataset ds = encode("id,x,z,t,y\nu1,a,?,1,1\nu2,,p,0,2\nu3,b,p,1,3\n", o);
  CHECK(ds.unit_ids() == std::vector<std::string>{"u1", "u2", "u3"});
  CHECK(ds.covariate_names() == std::vector<std::string>{"x", "z"});
  CHECK(ds.missing_cells() == std::vector<MissingCell>{{0, 1}, {1, 0}});
  CHECK(ds.code(0, 1) == kUnresolvedCode);
  CHECK(ds.cardinality(0) == 2);
  CHECK(ds.cardinality(1) == 1);
}

TEST_CASE("encoding is a bijection between labels and codes") {
  const EncodedDataset ds = encode("x,w,t,y\nq,1,1,0\nr,2,0,0\ns,1,1,0\nq,3,0,0\nr,1,1,0\n");
  const CsvTable raw = parse_csv("x,w,t,y\nq,1,1,0\nr,2,0,0\ns,1,1,0\nq,3,0,0\nr,1,1,0\n");
  for (std::size_t j = 0; j < 2; ++j) {
    std::set<std::string> labels(ds.labels(j).begin(), ds.labels(j).end());
    CHECK(labels.size() == ds.cardinality(j));
    for (std::size_t u = 0; u < ds.n_units(); ++u) {
      CHECK(ds.code(u, j) < ds.cardinality(j));
      CHECK(ds.decode(u, j) == raw.rows[u][j]);
    }
  }
}

TEST_CASE("reference encoding shares codes and extends label tables") {
  const EncodedDataset ref = encode("x,t,y\na,1,1\nb,0,2\n");
  const EncodedDataset other = encode_table(parse_csv("t,x,y\n0,b,1\n1,c,2\n"), opts(), &ref);
  CHECK(other.code(0, 0) == 1);
  CHECK(other.code(1, 0) == 2);
  CHECK(other.labels(0) == std::vector<std::string>{"a", "b", "c"});
  CHECK(code_of([&] { encode_table(parse_csv("x,z,t,y\na,1,1,1\n"), opts(), &ref); }) == ErrorCode::kSchemaMismatch);
}

TEST_CASE("drop mode removes rows {1,3} and keeps survivors intact") {
  const EncodedDataset ds = encode("x,z,t,y\na,p,1,1\nNA,p,0,2\nb,q,1,3\nb,,0,4\na,q,0,5\n");
  const auto out = apply_missing_policy(ds, MissingPolicy{});
  REQUIRE(out.size() == 1);
  const EncodedDataset& d = out.front();
  CHECK(d.n_units() == 3);
  CHECK(d.unit_ids() == std::vector<std::string>{"0", "2", "4"});
  CHECK_FALSE(d.has_unresolved_missing());
  const std::vector<std::size_t> kept{0, 2, 4};
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t j = 0; j < 2; ++j) CHECK(d.decode(i, j) == ds.decode(kept[i], j));
    CHECK(d.outcome()[i] == ds.outcome()[kept[i]]);
  }
}

TEST_CASE("drop mode with every row missing is AllRowsDropped") {
  const EncodedDataset ds = encode("x,z,t,y\nNA,p,1,1\na,,0,2\n");
  CHECK(code_of([&] { apply_missing_policy(ds, MissingPolicy{}); }) == ErrorCode::kAllRowsDropped);
}

TEST_CASE("sentinel mode: two missing cells in one column get codes k and k+1") {
  const EncodedDataset ds = encode("x,t,y\na,1,1\nNA,0,2\nb,1,3\nNA,0,4\n");
  MissingPolicy policy;
  policy.mode = MissingMode::kSentinel;
  const EncodedDataset d = apply_missing_policy(ds, policy).front();
  const std::uint32_t k = d.cardinality(0);
  CHECK(k == 2);
  CHECK(d.code(1, 0) == k);
  CHECK(d.code(3, 0) == k + 1);
  CHECK(d.code(1, 0) != d.code(3, 0));
  CHECK(d.effective_cardinality(0) == k + 2);
  CHECK(d.is_sentinel(1, 0));
  CHECK_FALSE(d.is_sentinel(0, 0));
  CHECK_FALSE(d.has_unresolved_missing());
}

TEST_CASE("sentinel codes never equal any other code in their column") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::string csv = "a,b,c,t,y\n";
    for (int r = 0; r < 30; ++r) {
      for (int j = 0; j < 3; ++j) {
        csv += uniform_unit(rng) < 0.2 ? "NA" : std::to_string(uniform_below(rng, 3));
        csv += ",";
      }
      csv += std::to_string(r % 2) + ",1\n";
    }
    const EncodedDataset ds = encode(csv);
    MissingPolicy policy;
    policy.mode = MissingMode::kSentinel;
    const EncodedDataset d = apply_missing_policy(ds, policy).front();
    for (const MissingCell& m : ds.missing_cells()) {
      for (std::size_t v = 0; v < d.n_units(); ++v) {
        if (v != m.row) CHECK(d.code(v, m.column) != d.code(m.row, m.column));
      }
    }
  }
}

TEST_CASE("impute mode: constant column [0,0,0,NA] imputes 0") {
  const EncodedDataset ds = encode("x,z,t,y\n0,a,1,1\n0,b,0,2\n0,a,1,3\nNA,b,0,4\n");
  MissingPolicy policy;
  policy.mode = MissingMode::kImpute;
  policy.impute_sweeps = 5;
  const auto out = apply_missing_policy(ds, policy);
  REQUIRE(out.size() == 1);
  CHECK(out.front().decode(3, 0) == "0");
  CHECK_FALSE(out.front().has_unresolved_missing());
}

TEST_CASE("imputation with a single observed category always imputes it, even with noise") {
  const EncodedDataset ds = encode("x,z,t,y\nk,a,1,1\nNA,b,0,2\nk,a,1,3\nNA,c,0,4\nk,c,1,5\n");
  MissingPolicy policy;
  policy.mode = MissingMode::kImpute;
  policy.impute_count = 4;
  policy.seed = 3;
  const auto out = apply_missing_policy(ds, policy);
  REQUIRE(out.size() == 4);
  for (const auto& d : out) {
    CHECK(d.decode(1, 0) == "k");
    CHECK(d.decode(3, 0) == "k");
  }
}

TEST_CASE("imputation is deterministic given the seed and codes stay in range") {
  std::string csv = "a,b,c,t,y\n";
  std::mt19937_64 rng(5);
  for (int r = 0; r < 60; ++r) {
    const auto a = uniform_below(rng, 3);
    const auto b = uniform_unit(rng) < 0.25 ? std::string("NA") : std::to_string((a + uniform_below(rng, 2)) % 3);
    csv += std::to_string(a) + "," + b + "," + std::to_string(uniform_below(rng, 2)) + "," + std::to_string(r % 2) + ",1\n";
  }
  const EncodedDataset ds = encode(csv);
  MissingPolicy policy;
  policy.mode = MissingMode::kImpute;
  policy.impute_count = 3;
  policy.seed = 9;
  const auto first = apply_missing_policy(ds, policy);
  const auto second = apply_missing_policy(ds, policy);
  REQUIRE(first.size() == 3);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t j = 0; j < 3; ++j) {
      const auto c1 = first[r].column(j);
      const auto c2 = second[r].column(j);
      CHECK(std::equal(c1.begin(), c1.end(), c2.begin(), c2.end()));
      for (std::uint32_t c : c1) CHECK(c < first[r].cardinality(j));
    }
  }
  for (const MissingCell& m : ds.missing_cells()) CHECK(first[0].code(m.row, m.column) != kUnresolvedCode);
}

TEST_CASE("holdout split n=10, fraction 0.2, seed 7: 2 and 8 rows, disjoint, deterministic") {
  std::vector<std::vector<std::uint32_t>> rows;
  std::vector<std::uint8_t> t;
  for (std::uint32_t i = 0; i < 10; ++i) {
    rows.push_back({i % 3});
    t.push_back(static_cast<std::uint8_t>(i % 2));
  }
  const EncodedDataset ds = test::make_dataset(rows, t);
  HoldoutSpec spec;
  spec.fraction = 0.2;
  spec.seed = 7;
  const HoldoutSplit a = split_holdout(ds, spec);
  const HoldoutSplit b = split_holdout(ds, spec);
  CHECK(a.holdout.n_units() == 2);
  CHECK(a.matching.n_units() == 8);
  std::set<std::string> ids(a.holdout.unit_ids().begin(), a.holdout.unit_ids().end());
  ids.insert(a.matching.unit_ids().begin(), a.matching.unit_ids().end());
  CHECK(ids.size() == 10);
  CHECK(a.holdout.unit_ids() == b.holdout.unit_ids());
  CHECK(a.matching.unit_ids() == b.matching.unit_ids());
  CHECK(std::is_sorted(a.matching.unit_ids().begin(), a.matching.unit_ids().end()));
}

TEST_CASE("holdout split sizes follow ceil(fraction * n) and different seeds differ") {
  std::mt19937_64 rng(1);
  const EncodedDataset ds = test::random_dataset(rng, {.n = 37, .p = 3});
  bool any_difference = false;
  HoldoutSpec spec;
  spec.fraction = 0.3;
  const auto base = split_holdout(ds, spec);
  CHECK(base.holdout.n_units() == 12);
  for (std::uint64_t seed = 1; seed < 6; ++seed) {
    spec.seed = seed;
    any_difference = any_difference || split_holdout(ds, spec).holdout.unit_ids() != base.holdout.unit_ids();
  }
  CHECK(any_difference);
}

TEST_CASE("holdout too small or too large") {
  std::mt19937_64 rng(2);
  const EncodedDataset ds = test::random_dataset(rng, {.n = 10, .p = 2});
  HoldoutSpec spec;
  spec.fraction = 0.1;
  CHECK(code_of([&] { split_holdout(ds, spec); }) == ErrorCode::kHoldoutTooSmall);
  spec.fraction = 0.95;
  CHECK(code_of([&] { split_holdout(ds, spec); }) == ErrorCode::kHoldoutTooSmall);
}

TEST_CASE("external holdout missing covariate x2 is SchemaMismatch") {
  const EncodedDataset ds = encode("x1,x2,t,y\na,p,1,1\nb,q,0,2\n");
  const EncodedDataset hold = encode("x1,t,y\na,1,1\nb,0,2\n");
  HoldoutSpec spec;
  spec.source = HoldoutSource::kExternal;
  CHECK(code_of([&] { split_holdout(ds, spec, &hold); }) == ErrorCode::kSchemaMismatch);
  const EncodedDataset good = encode_table(parse_csv("x1,x2,t,y\nb,q,1,1\na,p,0,2\n"), opts(), &ds);
  const HoldoutSplit s = split_holdout(ds, spec, &good);
  CHECK(s.matching.n_units() == 2);
  CHECK(s.holdout.n_units() == 2);
}
