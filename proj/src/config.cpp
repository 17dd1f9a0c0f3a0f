#include "stmgnn/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "stmgnn/errors.hpp"
#include "stmgnn/rng.hpp"
#include "stmgnn/text_format.hpp"

namespace stmgnn {

namespace {

const std::map<std::string, std::string>& default_values() {
  static const std::map<std::string, std::string> defaults = {
      {"seed", "42"},
      // model
      {"head", "zinb"},
      {"window", "30"},
      {"horizon", "1"},
      {"dgcn_hidden", "64"},
      {"dgcn_activation", "tanh"},
      {"dgcn_bias", "off"},
      {"mtcn_hidden_widths", "8"},
      {"gate", "on"},
      {"prob_clamp", "1e-6"},
      {"pos_floor", "1e-6"},
      // grid / graph
      {"rows", "8"},
      {"cols", "8"},
      {"cell_km", "3"},
      {"origin_lat", "0"},
      {"origin_lon", "0"},
      {"adjacency", "queen8"},
      {"self_loops", "on"},
      // training
      {"learning_rate", "0.001"},
      {"epochs", "100"},
      {"batch_size", "32"},
      {"patience", "10"},
      {"clip_norm", "5"},
      {"optimizer", "adam"},
      {"loss_reduction", "mean"},
      {"val_days", "30"},
      // evaluation
      {"baseline", "none"},
      // ingestion
      {"col_timestamp", "timestamp"},
      {"col_lat", "latitude"},
      {"col_lon", "longitude"},
      {"col_category", "category"},
      {"delimiter", ","},
      {"category_mode", "strict"},
      {"categories", ""},
      {"span_start", "2014-01-01"},
      {"span_end", "2015-12-31"},
      // synthesis
      {"synth_rows", "8"},
      {"synth_cols", "8"},
      {"synth_days", "1000"},
      {"synth_categories", "2"},
      {"synth_pi_center", "0.2"},
      {"synth_pi_edge", "0.8"},
      {"synth_p_center", "0.5"},
      {"synth_p_edge", "0.45"},
      {"synth_r_center", "3"},
      {"synth_r_edge", "2"},
      {"synth_category_shift", "0.05"},
  };
  return defaults;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

bool flag_value(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw UsageError("config key '" + key + "' expects on/off, got '" + v + "'");
}

}  // namespace

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  while (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

std::string join_csv_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out.push_back(',');
    out += items[i];
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const std::string& item : split_csv_list(s)) {
    out.push_back(static_cast<int>(parse_int(item)));
  }
  return out;
}

RunConfig::RunConfig() : values_(default_values()) {}

RunConfig RunConfig::from_stream(std::istream& is) {
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    // A key on its own sets the empty value; unknown keys still throw.
    const auto space = line.find_first_of(" \t");
    if (space == std::string::npos) {
      cfg.set(line, "");
    } else {
      cfg.set(line.substr(0, space), trim(line.substr(space + 1)));
    }
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config file: " + path);
  return from_stream(is);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (default_values().find(key) == default_values().end()) {
    throw UsageError("unknown config key: '" + key + "'");
  }
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key: '" + key + "'");
  return it->second;
}

bool RunConfig::get_flag(const std::string& key) const {
  return flag_value(key, get(key));
}

long long RunConfig::get_int(const std::string& key) const {
  try {
    return parse_int(get(key));
  } catch (const std::invalid_argument& e) {
    throw UsageError("config key '" + key + "': " + e.what());
  }
}

double RunConfig::get_real(const std::string& key) const {
  try {
    return parse_double(get(key));
  } catch (const std::invalid_argument& e) {
    throw UsageError("config key '" + key + "': " + e.what());
  }
}

std::uint64_t RunConfig::seed() const {
  return static_cast<std::uint64_t>(get_int("seed"));
}

void RunConfig::override_seed(std::uint64_t seed) {
  values_["seed"] = std::to_string(seed);
}

GridSpec RunConfig::grid() const {
  GridSpec g;
  g.rows = static_cast<int>(get_int("rows"));
  g.cols = static_cast<int>(get_int("cols"));
  g.cell_km = get_real("cell_km");
  g.origin_lat = get_real("origin_lat");
  g.origin_lon = get_real("origin_lon");
  g.validate();
  return g;
}

AdjacencyScheme RunConfig::adjacency() const {
  return adjacency_scheme_from_string(get("adjacency"));
}

bool RunConfig::self_loops() const { return get_flag("self_loops"); }

ModelConfig RunConfig::model(int n_regions, int categories) const {
  ModelConfig m;
  m.n_regions = n_regions;
  m.categories = categories;
  m.window = static_cast<int>(get_int("window"));
  m.horizon = static_cast<int>(get_int("horizon"));
  m.head = head_kind_from_string(get("head"));
  m.dgcn_hidden = parse_int_list(get("dgcn_hidden"));
  m.dgcn_activation = activation_from_string(get("dgcn_activation"));
  m.dgcn_bias = get_flag("dgcn_bias");
  m.mtcn_hidden_widths = parse_int_list(get("mtcn_hidden_widths"));
  m.gate = get_flag("gate");
  m.prob_clamp = get_real("prob_clamp");
  m.pos_floor = get_real("pos_floor");
  m.validate();
  return m;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.learning_rate = get_real("learning_rate");
  t.epochs = static_cast<int>(get_int("epochs"));
  t.batch_size = static_cast<int>(get_int("batch_size"));
  t.patience = static_cast<int>(get_int("patience"));
  t.clip_norm = get_real("clip_norm");
  t.optimizer = optimizer_from_string(get("optimizer"));
  const std::string& reduction = get("loss_reduction");
  if (reduction == "sum") {
    t.sum_reduction = true;
  } else if (reduction == "mean") {
    t.sum_reduction = false;
  } else {
    throw UsageError("loss_reduction must be 'mean' or 'sum'");
  }
  t.seed = seed();
  t.validate();
  return t;
}

IngestSchema RunConfig::ingest() const {
  IngestSchema s;
  s.col_timestamp = get("col_timestamp");
  s.col_lat = get("col_lat");
  s.col_lon = get("col_lon");
  s.col_category = get("col_category");
  const std::string& d = get("delimiter");
  if (d.size() != 1) throw UsageError("delimiter must be a single character");
  s.delimiter = d[0];
  const std::string& mode = get("category_mode");
  if (mode == "lenient") {
    s.lenient = true;
  } else if (mode == "strict") {
    s.lenient = false;
  } else {
    throw UsageError("category_mode must be 'strict' or 'lenient'");
  }
  s.vocabulary = split_csv_list(get("categories"));
  if (s.vocabulary.empty()) {
    throw UsageError("ingestion requires a non-empty 'categories' list");
  }
  s.span_start = parse_date(get("span_start"));
  s.span_end = parse_date(get("span_end"));
  return s;
}

SynthConfig RunConfig::synth() const {
  SynthConfig s;
  s.rows = static_cast<int>(get_int("synth_rows"));
  s.cols = static_cast<int>(get_int("synth_cols"));
  s.days = static_cast<int>(get_int("synth_days"));
  s.categories = static_cast<int>(get_int("synth_categories"));
  s.cell_km = get_real("cell_km");
  s.pi_center = get_real("synth_pi_center");
  s.pi_edge = get_real("synth_pi_edge");
  s.p_center = get_real("synth_p_center");
  s.p_edge = get_real("synth_p_edge");
  s.r_center = get_real("synth_r_center");
  s.r_edge = get_real("synth_r_edge");
  s.category_shift = get_real("synth_category_shift");
  return s;
}

int RunConfig::val_days() const { return static_cast<int>(get_int("val_days")); }

const std::string& RunConfig::baseline() const {
  const std::string& b = get("baseline");
  if (b != "none" && b != "hv" && b != "hv_weekday") {
    throw UsageError("baseline must be none, hv or hv_weekday");
  }
  return b;
}

std::string RunConfig::canonical_echo() const {
  std::ostringstream os;
  for (const auto& [key, value] : values_) {
    os << key << " " << value << "\n";
  }
  return os.str();
}

std::string RunConfig::content_hash() const {
  const std::uint64_t h = fnv1a64(canonical_echo());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace stmgnn
