#include "cp/io.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cp::io {

using nlohmann::json;

namespace {

constexpr const char* kCheckpointFormat = "cplab-checkpoint";
constexpr const char* kFisherFormat = "cplab-fisher";
constexpr int kFormatVersion = 1;
constexpr const char* kSnapshotHeader =
    "# cplab-snapshots v1\ntask_id,concept_id,x...,snapshot_task";

json values_to_json(const std::vector<double>& v) {
  json arr = json::array();
  for (double x : v) arr.push_back(format_double(x));
  return arr;
}

std::vector<double> values_from_json(const json& arr) {
  std::vector<double> v;
  v.reserve(arr.size());
  for (const auto& e : arr) v.push_back(std::stod(e.get<std::string>()));
  return v;
}

json read_json_file(const std::string& path, const char* expected_format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("corrupt file " + path + ": " + e.what());
  }
  if (!j.contains("format") || j["format"] != expected_format) {
    throw std::runtime_error(path + ": unexpected format header");
  }
  if (!j.contains("version") || j["version"].get<int>() != kFormatVersion) {
    throw std::runtime_error(path + ": unsupported version");
  }
  return j;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_checkpoint(DenoiserModel& model, const std::string& path) {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kFormatVersion;
  json params = json::object();
  for (auto& p : model.parameters()) {
    params[p.name] = {{"shape", p.tensor.shape()},
                      {"values", values_to_json(p.tensor.values())}};
  }
  j["params"] = params;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump();
}

void load_checkpoint(DenoiserModel& model, const std::string& path) {
  const json j = read_json_file(path, kCheckpointFormat);
  const json& params = j.at("params");
  for (auto& p : model.parameters()) {
    if (!params.contains(p.name)) {
      throw std::runtime_error("checkpoint missing parameter " + p.name);
    }
    const auto vals = values_from_json(params[p.name].at("values"));
    if (vals.size() != p.tensor.size()) {
      throw std::runtime_error("checkpoint shape mismatch for " + p.name);
    }
    p.tensor.values() = vals;
  }
}

void save_fisher(const FisherState& state, const std::string& path) {
  json j;
  j["format"] = kFisherFormat;
  j["version"] = kFormatVersion;
  j["decay"] = format_double(state.decay);
  j["rho"] = format_double(state.rho);
  json fisher = json::object(), anchor = json::object();
  for (const auto& [name, v] : state.fisher) fisher[name] = values_to_json(v);
  for (const auto& [name, v] : state.anchor) anchor[name] = values_to_json(v);
  j["fisher"] = fisher;
  j["anchor"] = anchor;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump();
}

FisherState load_fisher(const std::string& path) {
  const json j = read_json_file(path, kFisherFormat);
  FisherState s;
  s.decay = std::stod(j.at("decay").get<std::string>());
  s.rho = std::stod(j.at("rho").get<std::string>());
  for (const auto& [name, v] : j.at("fisher").items())
    s.fisher[name] = values_from_json(v);
  for (const auto& [name, v] : j.at("anchor").items())
    s.anchor[name] = values_from_json(v);
  return s;
}

void save_snapshots(const SnapshotStore& store, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kSnapshotHeader << "\n";
  auto write_set = [&](int task_id, int concept_id, int snapshot_task,
                       const SampleSet& set) {
    for (const auto& pt : set) {
      out << task_id << "," << concept_id;
      for (double v : pt) out << "," << format_double(v);
      out << "," << snapshot_task << "\n";
    }
  };
  for (const auto& [j, set] : store.targets) write_set(j, j, -1, set);
  for (const auto& [key, set] : store.cells)
    write_set(key.second, key.second, key.first, set);
}

SnapshotStore load_snapshots(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line1, line2;
  std::getline(in, line1);
  std::getline(in, line2);
  if (line1 + "\n" + line2 != kSnapshotHeader) {
    throw std::runtime_error(path + ": bad snapshot header");
  }
  SnapshotStore store;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() < 4) {
      throw std::runtime_error(path + ": malformed snapshot row");
    }
    const int concept_id = std::stoi(fields[1]);
    const int snapshot_task = std::stoi(fields.back());
    std::vector<double> pt;
    for (std::size_t i = 2; i + 1 < fields.size(); ++i)
      pt.push_back(std::stod(fields[i]));
    if (snapshot_task < 0) {
      store.targets[concept_id].push_back(std::move(pt));
    } else {
      store.cells[{snapshot_task, concept_id}].push_back(std::move(pt));
    }
  }
  return store;
}

}  // namespace cp::io
