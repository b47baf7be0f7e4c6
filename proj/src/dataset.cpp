#include "codiff/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace codiff {

using json = nlohmann::ordered_json;

const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw data_error("unknown split: " + s);
}

bool DatasetRecord::operator==(const DatasetRecord& o) const {
  auto meta_eq = [](const std::optional<GraphMeta>& a, const std::optional<GraphMeta>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    return a->generator == b->generator && a->params == b->params && a->seed == b->seed;
  };
  return graph == o.graph && problem_kind == o.problem_kind && split == o.split &&
         oracle_energy == o.oracle_energy && meta_eq(graph.meta, o.graph.meta);
}

std::string record_to_json_line(const DatasetRecord& rec) {
  json j;
  j["n"] = rec.graph.num_nodes;
  json edges = json::array();
  for (auto [a, b] : rec.graph.edges) edges.push_back({a, b});
  j["edges"] = std::move(edges);
  j["kind"] = to_string(rec.problem_kind);
  j["split"] = to_string(rec.split);
  if (rec.graph.meta) {
    json m;
    m["generator"] = rec.graph.meta->generator;
    json params;
    for (const auto& [k, v] : rec.graph.meta->params) params[k] = v;
    m["params"] = std::move(params);
    m["seed"] = rec.graph.meta->seed;
    j["meta"] = std::move(m);
  } else {
    j["meta"] = nullptr;
  }
  if (rec.oracle_energy)
    j["oracle_energy"] = *rec.oracle_energy;
  else
    j["oracle_energy"] = nullptr;
  return j.dump();
}

void write_dataset(const std::vector<DatasetRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open for writing: " + path);
  out << "# codiff dataset v1\n";
  for (const auto& rec : records) out << record_to_json_line(rec) << '\n';
  if (!out) throw data_error("write failed: " + path);
}

std::vector<DatasetRecord> read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open: " + path);
  std::vector<DatasetRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    json j;
    try {
      j = json::parse(line);
      DatasetRecord rec;
      rec.graph.num_nodes = j.at("n").get<int>();
      for (const auto& e : j.at("edges"))
        rec.graph.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
      normalize_edges(rec.graph.num_nodes, rec.graph.edges);
      rec.problem_kind = problem_kind_from_string(j.at("kind").get<std::string>());
      rec.split = split_from_string(j.at("split").get<std::string>());
      if (j.contains("meta") && !j["meta"].is_null()) {
        GraphMeta m;
        m.generator = j["meta"].value("generator", std::string{});
        if (j["meta"].contains("params"))
          for (auto it = j["meta"]["params"].begin(); it != j["meta"]["params"].end(); ++it)
            m.params.emplace_back(it.key(), it.value().get<double>());
        m.seed = j["meta"].value("seed", std::uint64_t{0});
        rec.graph.meta = std::move(m);
      }
      if (j.contains("oracle_energy") && !j["oracle_energy"].is_null())
        rec.oracle_energy = j["oracle_energy"].get<double>();
      records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << path << ":" << lineno << ": malformed record: " << e.what();
      throw data_error(msg.str());
    }
  }
  return records;
}

std::vector<DatasetRecord> filter_split(const std::vector<DatasetRecord>& records, Split s) {
  std::vector<DatasetRecord> out;
  for (const auto& r : records)
    if (r.split == s) out.push_back(r);
  return out;
}

}  // namespace codiff
