#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "stmgnn/data_ingest.hpp"
#include "stmgnn/graph_spatial.hpp"
#include "stmgnn/model.hpp"
#include "stmgnn/training.hpp"

namespace stmgnn {

/// Flat key-value run configuration. Every key has a registered default;
/// unknown keys are rejected. The canonical echo (sorted keys, resolved
/// values) is what gets hashed and written next to every run's outputs,
/// and a run can be re-executed from its echo alone.
class RunConfig {
 public:
  RunConfig();  // defaults only

  static RunConfig from_stream(std::istream& is);
  static RunConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool get_flag(const std::string& key) const;
  long long get_int(const std::string& key) const;
  double get_real(const std::string& key) const;

  std::uint64_t seed() const;
  void override_seed(std::uint64_t seed);

  GridSpec grid() const;
  AdjacencyScheme adjacency() const;
  bool self_loops() const;
  /// Region and category counts come from the data tensor at hand.
  ModelConfig model(int n_regions, int categories) const;
  TrainConfig train() const;
  IngestSchema ingest() const;
  SynthConfig synth() const;
  int val_days() const;
  /// "none", "hv" or "hv_weekday".
  const std::string& baseline() const;

  /// Sorted `key value` lines with all defaults resolved.
  std::string canonical_echo() const;
  /// FNV-1a 64 hash of the canonical echo, as 16 hex digits.
  std::string content_hash() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Comma-separated list helpers shared with the serializers.
std::vector<std::string> split_csv_list(const std::string& s);
std::string join_csv_list(const std::vector<std::string>& items);
std::vector<int> parse_int_list(const std::string& s);

}  // namespace stmgnn
