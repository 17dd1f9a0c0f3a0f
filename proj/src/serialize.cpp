#include "stmgnn/serialize.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "stmgnn/errors.hpp"
#include "stmgnn/text_format.hpp"

namespace stmgnn {

namespace {

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw DataError("cannot open for writing: " + path);
  return os;
}

std::ifstream open_in(const std::string& path, bool binary = false) {
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) throw DataError("cannot open: " + path);
  return is;
}

std::string expect_line(std::istream& is, const char* what) {
  std::string line;
  if (!std::getline(is, line)) {
    throw DataError(std::string("unexpected end of file while reading ") + what);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::pair<std::string, std::string> split_kv(const std::string& line) {
  const auto space = line.find(' ');
  if (space == std::string::npos) return {line, ""};
  return {line.substr(0, space), line.substr(space + 1)};
}

std::string expect_kv(std::istream& is, const std::string& key) {
  const auto [k, v] = split_kv(expect_line(is, key.c_str()));
  if (k != key) throw DataError("expected '" + key + "' line, got '" + k + "'");
  return v;
}

void write_le_double(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
}

double read_le_double(std::istream& is) {
  std::uint64_t bits;
  is.read(reinterpret_cast<char*>(&bits), sizeof bits);
  if (!is) throw DataError("weights file truncated inside the data section");
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

const char* param_activation_name(ParamKind kind) {
  switch (kind) {
    case ParamKind::Probability: return "sigmoid";
    case ParamKind::Positive: return "softplus";
    case ParamKind::Real: return "identity";
  }
  return "identity";
}

}  // namespace

// ---------------------------------------------------------------------------
// Count tensor.
// ---------------------------------------------------------------------------

void save_count_tensor(std::ostream& os, const CountTensor& tensor) {
  os << "stmgnn-counts v1\n";
  os << "rows " << tensor.grid.rows << "\n";
  os << "cols " << tensor.grid.cols << "\n";
  os << "cell_km " << format_double(tensor.grid.cell_km) << "\n";
  os << "origin_lat " << format_double(tensor.grid.origin_lat) << "\n";
  os << "origin_lon " << format_double(tensor.grid.origin_lon) << "\n";
  os << "start_date " << format_date(tensor.start) << "\n";
  os << "days " << tensor.days() << "\n";
  os << "categories " << join_csv_list(tensor.categories) << "\n";
  os << "data\n";
  for (int n = 0; n < tensor.n_regions(); ++n) {
    for (int t = 0; t < tensor.days(); ++t) {
      for (int c = 0; c < tensor.n_categories(); ++c) {
        if (c) os << ' ';
        os << tensor.counts(n, t, c);
      }
      os << '\n';
    }
    os << '\n';
  }
}

CountTensor load_count_tensor(std::istream& is) {
  if (expect_line(is, "magic") != "stmgnn-counts v1") {
    throw DataError("not a count tensor file");
  }
  CountTensor tensor;
  tensor.grid.rows = static_cast<int>(parse_int(expect_kv(is, "rows")));
  tensor.grid.cols = static_cast<int>(parse_int(expect_kv(is, "cols")));
  tensor.grid.cell_km = parse_double(expect_kv(is, "cell_km"));
  tensor.grid.origin_lat = parse_double(expect_kv(is, "origin_lat"));
  tensor.grid.origin_lon = parse_double(expect_kv(is, "origin_lon"));
  tensor.start = parse_date(expect_kv(is, "start_date"));
  const int days = static_cast<int>(parse_int(expect_kv(is, "days")));
  tensor.categories = split_csv_list(expect_kv(is, "categories"));
  if (expect_line(is, "data") != "data") throw DataError("expected 'data' line");
  tensor.grid.validate();
  if (days <= 0 || tensor.categories.empty()) {
    throw DataError("count tensor header has an empty span or vocabulary");
  }
  tensor.counts = ITensor3(tensor.grid.n_regions(), days,
                           static_cast<int>(tensor.categories.size()));
  for (int n = 0; n < tensor.n_regions(); ++n) {
    for (int t = 0; t < days; ++t) {
      std::istringstream row(expect_line(is, "count row"));
      for (int c = 0; c < tensor.n_categories(); ++c) {
        long long v;
        if (!(row >> v) || v < 0) throw DataError("bad count row in tensor file");
        tensor.counts(n, t, c) = v;
      }
    }
    expect_line(is, "region separator");
  }
  return tensor;
}

void save_count_tensor_file(const std::string& path, const CountTensor& tensor) {
  auto os = open_out(path);
  save_count_tensor(os, tensor);
}

CountTensor load_count_tensor_file(const std::string& path) {
  auto is = open_in(path);
  return load_count_tensor(is);
}

// ---------------------------------------------------------------------------
// Weights.
// ---------------------------------------------------------------------------

void save_weights_file(const std::string& path, const ModelWeights& weights,
                       const ModelConfig& mcfg, const RunConfig& cfg) {
  auto os = open_out(path, true);
  os << "stmgnn-weights v1\n";
  os << "seed " << cfg.seed() << "\n";
  os << "config_hash " << cfg.content_hash() << "\n";
  os << "config_begin\n" << cfg.canonical_echo() << "config_end\n";
  os << "n_regions " << mcfg.n_regions << "\n";
  os << "categories " << mcfg.categories << "\n";
  const DistributionHead& head = head_family(mcfg.head);
  for (int k = 0; k < head.param_count(); ++k) {
    os << "param " << head.param_name(k) << " "
       << param_activation_name(head.param_kind(k)) << "\n";
  }
  ModelWeights& mutable_weights = const_cast<ModelWeights&>(weights);
  const auto refs = enumerate_arrays(mutable_weights, mcfg);
  os << "arrays " << refs.size() << "\n";
  for (const ArrayRef& ref : refs) {
    std::string role = ref.role;
    for (char& c : role) {
      if (c == ' ') c = '_';
    }
    os << "array " << ref.name << " " << role << " " << ref.rows << " "
       << ref.cols << "\n";
  }
  os << "data\n";
  for (const ArrayRef& ref : refs) {
    Eigen::Map<const Eigen::MatrixXd> m(ref.data, ref.rows, ref.cols);
    for (int i = 0; i < ref.rows; ++i) {
      for (int j = 0; j < ref.cols; ++j) write_le_double(os, m(i, j));
    }
  }
}

ModelWeights load_weights_file(const std::string& path, const ModelConfig& mcfg,
                               const RunConfig& cfg) {
  auto is = open_in(path, true);
  if (expect_line(is, "magic") != "stmgnn-weights v1") {
    throw DataError("not a weights file: " + path);
  }
  expect_kv(is, "seed");
  const std::string stored_hash = expect_kv(is, "config_hash");
  if (expect_line(is, "config_begin") != "config_begin") {
    throw DataError("weights file: expected config_begin");
  }
  std::string stored_echo;
  for (;;) {
    const std::string line = expect_line(is, "config echo");
    if (line == "config_end") break;
    stored_echo += line;
    stored_echo += '\n';
  }
  if (stored_echo != cfg.canonical_echo() || stored_hash != cfg.content_hash()) {
    throw DataError(
        "weights file was produced under a different config; refusing to load");
  }
  const int stored_regions = static_cast<int>(parse_int(expect_kv(is, "n_regions")));
  const int stored_categories =
      static_cast<int>(parse_int(expect_kv(is, "categories")));
  if (stored_regions != mcfg.n_regions || stored_categories != mcfg.categories) {
    std::ostringstream os;
    os << "weights were trained for " << stored_regions << " regions and "
       << stored_categories << " categories, data has " << mcfg.n_regions
       << " and " << mcfg.categories;
    throw DataError(os.str());
  }
  const DistributionHead& head = head_family(mcfg.head);
  for (int k = 0; k < head.param_count(); ++k) expect_kv(is, "param");

  ModelWeights weights = zero_weights(mcfg);
  const auto refs = enumerate_arrays(weights, mcfg);
  const auto count = parse_int(expect_kv(is, "arrays"));
  if (count != static_cast<long long>(refs.size())) {
    throw DataError("weights file: array count does not match the model config");
  }
  for (const ArrayRef& ref : refs) {
    const auto [key, rest] = split_kv(expect_line(is, "array manifest"));
    if (key != "array") throw DataError("weights file: expected array line");
    std::istringstream fields(rest);
    std::string name, role;
    int rows = 0, cols = 0;
    fields >> name >> role >> rows >> cols;
    if (name != ref.name || rows != ref.rows || cols != ref.cols) {
      throw DataError("weights file: array '" + name +
                      "' does not match the expected manifest entry '" + ref.name +
                      "'");
    }
  }
  if (expect_line(is, "data") != "data") throw DataError("expected 'data' line");
  for (const ArrayRef& ref : refs) {
    Eigen::Map<Eigen::MatrixXd> m(ref.data, ref.rows, ref.cols);
    for (int i = 0; i < ref.rows; ++i) {
      for (int j = 0; j < ref.cols; ++j) m(i, j) = read_le_double(is);
    }
  }
  return weights;
}

// ---------------------------------------------------------------------------
// History, metrics, predictions, surfaces.
// ---------------------------------------------------------------------------

void save_history_file(const std::string& path, const TrainHistory& history) {
  auto os = open_out(path);
  os << "epoch train_nll val_nll seconds\n";
  char seconds[32];
  for (const EpochRecord& e : history.epochs) {
    std::snprintf(seconds, sizeof seconds, "%.3f", e.seconds);
    os << e.epoch << " " << format_double(e.train_nll) << " "
       << format_double(e.val_nll) << " " << seconds << "\n";
  }
  os << "# best_epoch " << history.best_epoch << "\n";
  if (history.best_epoch > 0) {
    os << "# best_val_nll " << format_double(history.best_val_nll) << "\n";
  }
  os << "# early_stopped " << (history.early_stopped ? "true" : "false") << "\n";
  if (history.diverged) {
    os << "# diverged " << history.divergence_message << "\n";
  }
}

void save_metrics_report(std::ostream& os, const MetricsReport& report) {
  os << "# stmgnn metrics report\n";
  os << "# cells " << report.cells << "\n";
  for (const auto& [key, value] : report.metadata) {
    os << "# " << key << " " << value << "\n";
  }
  os << "mae " << format_sig6(report.mae) << "\n";
  os << "kl_divergence " << format_sig6(report.kl_divergence) << "\n";
  if (report.picp) os << "picp " << format_sig6(*report.picp) << "\n";
  if (report.mpiw) os << "mpiw " << format_sig6(*report.mpiw) << "\n";
  os << "f1 " << format_sig6(report.f1) << "\n";
  if (report.true_zero_rate) {
    os << "true_zero_rate " << format_sig6(*report.true_zero_rate) << "\n";
  }
}

void save_metrics_report_file(const std::string& path, const MetricsReport& report) {
  auto os = open_out(path);
  save_metrics_report(os, report);
}

void save_predictions_file(
    const std::string& path,
    const std::vector<std::pair<int, std::vector<PredictionRow>>>& blocks,
    HeadKind head_kind) {
  auto os = open_out(path);
  const DistributionHead& head = head_family(head_kind);
  os << "region,step,category";
  for (int k = 0; k < head.param_count(); ++k) os << "," << head.param_name(k);
  os << ",mean,q10,q90\n";
  for (const auto& [window_target, rows] : blocks) {
    os << "# window " << window_target << "\n";
    for (const PredictionRow& row : rows) {
      os << row.region << "," << row.step << "," << row.category;
      for (double p : row.params) os << "," << format_double(p);
      os << "," << format_double(row.mean) << "," << format_double(row.q10) << ","
         << format_double(row.q90) << "\n";
    }
  }
}

void save_point_predictions_file(
    const std::string& path,
    const std::vector<std::pair<int, std::vector<PredictionRow>>>& blocks) {
  auto os = open_out(path);
  os << "region,step,category,mean\n";
  for (const auto& [window_target, rows] : blocks) {
    os << "# window " << window_target << "\n";
    for (const PredictionRow& row : rows) {
      os << row.region << "," << row.step << "," << row.category << ","
         << format_double(row.mean) << "\n";
    }
  }
}

void save_surface_file(const std::string& path, const GridSpec& grid,
                       const Eigen::VectorXd& values) {
  if (values.size() != grid.n_regions()) {
    throw NumericError("surface values do not match the grid size");
  }
  auto os = open_out(path);
  os << "# surface rows " << grid.rows << " cols " << grid.cols << "\n";
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      if (c) os << ' ';
      os << format_double(values(grid.region_index(r, c)));
    }
    os << '\n';
  }
}

Eigen::VectorXd load_surface_file(const std::string& path, int* rows_out,
                                  int* cols_out) {
  auto is = open_in(path);
  const std::string header = expect_line(is, "surface header");
  int rows = 0, cols = 0;
  if (std::sscanf(header.c_str(), "# surface rows %d cols %d", &rows, &cols) != 2 ||
      rows <= 0 || cols <= 0) {
    throw DataError("bad surface header in " + path);
  }
  Eigen::VectorXd values(rows * cols);
  for (int r = 0; r < rows; ++r) {
    std::istringstream line(expect_line(is, "surface row"));
    for (int c = 0; c < cols; ++c) {
      if (!(line >> values(r * cols + c))) {
        throw DataError("bad surface row in " + path);
      }
    }
  }
  if (rows_out != nullptr) *rows_out = rows;
  if (cols_out != nullptr) *cols_out = cols;
  return values;
}

void save_field_file(const std::string& path, const GridSpec& grid,
                     const Eigen::MatrixXd& field,
                     const std::vector<std::string>& categories) {
  if (field.rows() != grid.n_regions() ||
      field.cols() != static_cast<long>(categories.size())) {
    throw NumericError("field shape does not match grid and vocabulary");
  }
  auto os = open_out(path);
  for (std::size_t c = 0; c < categories.size(); ++c) {
    os << "# category " << categories[c] << "\n";
    for (int r = 0; r < grid.rows; ++r) {
      for (int col = 0; col < grid.cols; ++col) {
        if (col) os << ' ';
        os << format_double(field(grid.region_index(r, col), c));
      }
      os << '\n';
    }
  }
}

void write_stats_block(std::ostream& os, const DatasetStats& stats) {
  os << "regions " << stats.regions << "\n";
  os << "days " << stats.days << "\n";
  os << "start_date " << format_date(stats.start) << "\n";
  os << "category count zero_rate\n";
  for (const CategoryStats& cs : stats.per_category) {
    os << cs.name << " " << cs.count << " " << format_sig6(cs.zero_rate) << "\n";
  }
}

void save_config_echo(const std::string& path, const RunConfig& cfg) {
  auto os = open_out(path);
  os << "# resolved run configuration\n";
  os << "# config_hash " << cfg.content_hash() << "\n";
  os << cfg.canonical_echo();
}

}  // namespace stmgnn
