#pragma once

#include <optional>
#include <string>
#include <vector>

#include "codiff/graph.hpp"

namespace codiff {

enum class Split { Train, Val, Test };

const char* to_string(Split s);
Split split_from_string(const std::string& s);

struct DatasetRecord {
  Graph graph;
  ProblemKind problem_kind = ProblemKind::MIS;
  Split split = Split::Train;
  std::optional<double> oracle_energy;

  bool operator==(const DatasetRecord& o) const;
};

/// JSON-lines dataset file, one record per line:
///   {"n": int, "edges": [[i,j],...], "kind": str, "split": str,
///    "meta": {...}|null, "oracle_energy": float|null}
/// Writing is byte-stable: rewriting unchanged records reproduces the file.
void write_dataset(const std::vector<DatasetRecord>& records, const std::string& path);
std::vector<DatasetRecord> read_dataset(const std::string& path);

std::string record_to_json_line(const DatasetRecord& rec);

std::vector<DatasetRecord> filter_split(const std::vector<DatasetRecord>& records, Split s);

}  // namespace codiff
