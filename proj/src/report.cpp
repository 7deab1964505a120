#include "ame/report.hpp"

#include <charconv>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "ame/effects.hpp"
#include "ame/error.hpp"

namespace ame {

using Json = nlohmann::ordered_json;

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error(ErrorCode::kInvalidArgument, "cannot format number");
  return std::string(buf, ptr);
}

namespace {

std::string joined_names(const EncodedDataset& ds, CovariateSet s, char sep) {
  std::string out;
  for (std::size_t j : s.columns()) {
    if (!out.empty()) out.push_back(sep);
    out += ds.covariate_names()[j];
  }
  return out;
}

Json effect_json(const std::optional<EffectEstimate>& e) { return e ? Json(e->value) : Json(nullptr); }

}  // namespace

std::string render_matched_csv(const EncodedDataset& ds, const MatchState& state) {
  std::string out = "unit_id";
  for (const auto& name : ds.covariate_names()) out += "," + csv_escape(name);
  out += "," + csv_escape(ds.treatment_name()) + "," + csv_escape(ds.outcome_name()) + ",group_id,iteration\n";
  for (std::size_t u = 0; u < ds.n_units(); ++u) {
    const auto main = state.main_group(u);
    if (!main) continue;
    const MatchedGroup& g = state.groups()[*main];
    out += csv_escape(ds.unit_ids()[u]);
    for (std::size_t j = 0; j < ds.n_covariates(); ++j) {
      out.push_back(',');
      out += g.on_set.contains(j) ? csv_escape(ds.decode(u, j)) : std::string("*");
    }
    out += "," + std::to_string(ds.treatment()[u]) + "," + format_double(ds.outcome()[u]) + "," +
           std::to_string(*main) + "," + std::to_string(g.iteration) + "\n";
  }
  return out;
}

std::string render_groups_json(const EncodedDataset& ds, const MatchState& state) {
  Json groups = Json::array();
  const std::vector<double> cates = group_cates(state, ds.outcome(), ds.treatment());
  for (std::size_t id = 0; id < state.groups().size(); ++id) {
    const MatchedGroup& g = state.groups()[id];
    Json on_set = Json::array();
    Json signature = Json::object();
    for (const auto& [j, code] : g.signature_values) {
      on_set.push_back(ds.covariate_names()[j]);
      signature[ds.covariate_names()[j]] = ds.decode(g.members.front(), j);
    }
    Json members = Json::array();
    for (std::size_t u : g.members) members.push_back(ds.unit_ids()[u]);
    groups.push_back(Json{{"group_id", id},
                          {"iteration", g.iteration},
                          {"on_set", std::move(on_set)},
                          {"signature", std::move(signature)},
                          {"members", std::move(members)},
                          {"n_treated", g.n_treated},
                          {"n_control", g.n_control},
                          {"cate", cates[id]}});
  }
  return groups.dump(2) + "\n";
}

std::string render_iterations_csv(const EncodedDataset& ds, const MatchRun& run) {
  std::string out = "iteration,phase,dropped,pe,bf,mq,n_newly_matched,cumulative_matched\n";
  for (const IterationRecord& r : run.records) {
    out += std::to_string(r.iteration) + "," + std::string(phase_name(r.phase)) + "," +
           csv_escape(joined_names(ds, r.dropped, ';')) + "," + format_double(r.pe) + "," + format_double(r.bf) + "," +
           (r.mq ? format_double(*r.mq) : std::string()) + "," + std::to_string(r.n_newly_matched) + "," +
           std::to_string(r.cumulative_matched) + "\n";
  }
  return out;
}

std::string render_effects_json(const PipelineResult& result) {
  if (result.runs.empty()) throw Error(ErrorCode::kInvalidArgument, "no runs to report");
  const RunOutput& first = result.runs.front();
  Json doc;
  doc["ate"] = result.ate ? Json(*result.ate) : Json(nullptr);
  doc["att"] = result.att ? Json(*result.att) : Json(nullptr);
  doc["n_units"] = first.ate ? first.ate->n_units : 0;
  doc["n_groups"] = first.ate ? first.ate->n_groups : 0;
  doc["n_treated_units"] = first.att ? first.att->n_units : 0;
  if (result.runs.size() > 1) {
    Json per_run = Json::array();
    for (const RunOutput& r : result.runs) {
      per_run.push_back(Json{{"ate", effect_json(r.ate)},
                             {"att", effect_json(r.att)},
                             {"n_units", r.ate ? r.ate->n_units : 0},
                             {"n_groups", r.ate ? r.ate->n_groups : 0}});
    }
    doc["imputations"] = std::move(per_run);
  }
  return doc.dump(2) + "\n";
}

MatchState state_from_groups_json(std::string_view json, const EncodedDataset& ds) {
  Json doc;
  try {
    doc = Json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("groups JSON does not parse: ") + e.what());
  }
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t u = 0; u < ds.n_units(); ++u) row_of.emplace(ds.unit_ids()[u], u);

  std::vector<MatchedGroup> groups;
  bool repeats = false;
  std::vector<std::uint8_t> seen(ds.n_units(), 0);
  try {
    for (const Json& item : doc) {
      MatchedGroup g;
      g.iteration = item.at("iteration").get<int>();
      for (const Json& name : item.at("on_set")) {
        const auto j = ds.covariate_index(name.get<std::string>());
        if (!j) throw Error(ErrorCode::kSchemaMismatch, "unknown covariate " + name.get<std::string>());
        g.on_set = g.on_set.with(*j);
      }
      for (const Json& id : item.at("members")) {
        const auto it = row_of.find(id.get<std::string>());
        if (it == row_of.end()) throw Error(ErrorCode::kSchemaMismatch, "unknown unit id " + id.get<std::string>());
        g.members.push_back(it->second);
        repeats = repeats || seen[it->second];
        seen[it->second] = 1;
        (ds.treatment()[it->second] ? g.n_treated : g.n_control) += 1;
      }
      if (g.members.empty()) throw Error(ErrorCode::kInvalidArgument, "group without members");
      for (std::size_t j : g.on_set.columns()) g.signature_values.emplace_back(j, ds.code(g.members.front(), j));
      groups.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("groups JSON has the wrong shape: ") + e.what());
  }
  MatchState state(ds.n_units(), repeats);
  state.add_groups(std::move(groups));
  return state;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kWriteFailed, "cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kWriteFailed, "failed writing '" + path.string() + "'");
}

void write_outputs(const std::filesystem::path& dir, const PipelineResult& result) {
  if (result.runs.empty()) throw Error(ErrorCode::kInvalidArgument, "no runs to write");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kWriteFailed, "cannot create '" + dir.string() + "': " + ec.message());
  const RunOutput& first = result.runs.front();
  write_text_file(dir / "matched.csv", render_matched_csv(first.matching, first.run.state));
  write_text_file(dir / "groups.json", render_groups_json(first.matching, first.run.state));
  write_text_file(dir / "iterations.csv", render_iterations_csv(first.matching, first.run));
  write_text_file(dir / "effects.json", render_effects_json(result));
}

}  // namespace ame
