#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "stmgnn/graph_spatial.hpp"
#include "stmgnn/tensor.hpp"

namespace stmgnn {

// ---------------------------------------------------------------------------
// Calendar support (proleptic Gregorian, daily resolution).
// ---------------------------------------------------------------------------

struct CivilDate {
  int y = 1970;
  int m = 1;
  int d = 1;
  friend bool operator==(const CivilDate&, const CivilDate&) = default;
};

long long days_from_civil(const CivilDate& date);
CivilDate civil_from_days(long long days);
/// Accepts ISO-8601 dates, ignoring any time-of-day suffix.
CivilDate parse_date(const std::string& s);
std::string format_date(const CivilDate& date);
/// 0 = Sunday ... 6 = Saturday.
int weekday_of(const CivilDate& date, int day_offset = 0);

// ---------------------------------------------------------------------------
// Event ingestion.
// ---------------------------------------------------------------------------

/// A parsed incident, already mapped onto the dataset span and vocabulary.
struct EventRecord {
  int day = 0;  // days since span start
  double lat = 0.0;
  double lon = 0.0;
  int category = 0;
};

struct IngestSchema {
  std::string col_timestamp = "timestamp";
  std::string col_lat = "latitude";
  std::string col_lon = "longitude";
  std::string col_category = "category";
  char delimiter = ',';
  /// Strict mode counts unknown categories as malformed; lenient mode maps
  /// them to an extra trailing "other" category.
  bool lenient = false;
  std::vector<std::string> vocabulary;
  CivilDate span_start;
  CivilDate span_end;  // inclusive

  int span_days() const;
  /// Vocabulary plus "other" when lenient.
  std::vector<std::string> effective_vocabulary() const;
};

struct IngestResult {
  std::vector<EventRecord> events;
  long long malformed_rows = 0;
  long long out_of_span = 0;
};

/// Parses a delimited event log. Malformed rows are counted, never silently
/// dropped from the report. Throws DataError on a missing header column.
IngestResult load_events(std::istream& is, const IngestSchema& schema);
IngestResult load_events_file(const std::string& path, const IngestSchema& schema);

// ---------------------------------------------------------------------------
// The count tensor.
// ---------------------------------------------------------------------------

struct CountTensor {
  ITensor3 counts;  // (region, day, category)
  GridSpec grid;
  CivilDate start;
  std::vector<std::string> categories;

  int n_regions() const { return counts.dim0(); }
  int days() const { return counts.dim1(); }
  int n_categories() const { return counts.dim2(); }
};

struct RasterizeResult {
  CountTensor tensor;
  long long out_of_bounds = 0;
};

/// Bins each event into its (region, day, category) cell via the local
/// equirectangular projection around the grid origin (111.32 km per degree
/// of latitude, scaled by cos(origin latitude) for longitude). Cell
/// membership is half-open so boundary events land in exactly one cell.
RasterizeResult rasterize(const std::vector<EventRecord>& events,
                          const GridSpec& grid, const CivilDate& start,
                          int span_days,
                          const std::vector<std::string>& categories);

// ---------------------------------------------------------------------------
// Chronological split: train:test = 7:1 of the span, validation = last 30
// days of train.
// ---------------------------------------------------------------------------

struct SplitSpec {
  int t_total = 0;
  int train_end = 0;   // train days = [0, train_end), validation tail included
  int val_begin = 0;   // validation days = [val_begin, train_end)
  int test_begin = 0;  // test days = [test_begin, t_total)

  int val_days() const { return train_end - val_begin; }
  int test_days() const { return t_total - test_begin; }
};

/// Throws DataError when t_total < 8 * (window + horizon).
SplitSpec chrono_split(int t_total, int window, int horizon, int val_days = 30);

// ---------------------------------------------------------------------------
// Table-1-style dataset statistics.
// ---------------------------------------------------------------------------

struct CategoryStats {
  std::string name;
  long long count = 0;
  double zero_rate = 0.0;  // fraction of (region, day) cells with zero count
};

struct DatasetStats {
  std::vector<CategoryStats> per_category;
  int regions = 0;
  int days = 0;
  CivilDate start;
};

DatasetStats dataset_stats(const CountTensor& tensor);

// ---------------------------------------------------------------------------
// Synthetic ZINB data with known smooth radial parameter fields.
// ---------------------------------------------------------------------------

struct SynthConfig {
  int rows = 8;
  int cols = 8;
  int days = 1000;
  int categories = 2;
  double cell_km = 3.0;
  // Radial interpolation from the grid centre outwards; the "downtown"
  // centre carries more activity, i.e. lower pi and a heavier count tail.
  double pi_center = 0.2;
  double pi_edge = 0.8;
  double p_center = 0.5;
  double p_edge = 0.45;
  double r_center = 3.0;
  double r_edge = 2.0;
  /// Interpolation offset per category so categories differ smoothly.
  double category_shift = 0.05;
};

struct SynthResult {
  CountTensor tensor;
  // Ground-truth fields, one value per (region, category).
  Eigen::MatrixXd pi_true;
  Eigen::MatrixXd p_true;
  Eigen::MatrixXd r_true;
};

SynthResult synthesize(const SynthConfig& cfg, std::uint64_t seed);

}  // namespace stmgnn
