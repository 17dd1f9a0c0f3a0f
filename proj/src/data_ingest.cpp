#include "stmgnn/data_ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "stmgnn/count_distributions.hpp"
#include "stmgnn/errors.hpp"
#include "stmgnn/rng.hpp"

namespace stmgnn {

namespace {
constexpr double kKmPerDegree = 111.32;
constexpr double kPi = 3.141592653589793;
}  // namespace

// Howard Hinnant's civil-days algorithms.
long long days_from_civil(const CivilDate& date) {
  int y = date.y;
  const unsigned m = static_cast<unsigned>(date.m);
  const unsigned d = static_cast<unsigned>(date.d);
  y -= m <= 2;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long long>(doe) - 719468;
}

CivilDate civil_from_days(long long days) {
  days += 719468;
  const long long era = (days >= 0 ? days : days - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(days - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long long y = static_cast<long long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return CivilDate{static_cast<int>(y + (m <= 2)), static_cast<int>(m),
                   static_cast<int>(d)};
}

CivilDate parse_date(const std::string& s) {
  int y = 0, m = 0, d = 0;
  if (std::sscanf(s.c_str(), "%d-%d-%d", &y, &m, &d) != 3 || m < 1 || m > 12 ||
      d < 1 || d > 31) {
    throw DataError("cannot parse ISO date: '" + s + "'");
  }
  return CivilDate{y, m, d};
}

std::string format_date(const CivilDate& date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", date.y, date.m, date.d);
  return buf;
}

int weekday_of(const CivilDate& date, int day_offset) {
  const long long z = days_from_civil(date) + day_offset;
  return static_cast<int>(((z % 7) + 11) % 7);  // 1970-01-01 was a Thursday
}

int IngestSchema::span_days() const {
  const long long n = days_from_civil(span_end) - days_from_civil(span_start) + 1;
  if (n <= 0) throw DataError("ingest span is empty");
  return static_cast<int>(n);
}

std::vector<std::string> IngestSchema::effective_vocabulary() const {
  std::vector<std::string> vocab = vocabulary;
  if (lenient) vocab.push_back("other");
  return vocab;
}

namespace {

/// Splits one delimited line, honouring double-quoted fields.
std::vector<std::string> split_row(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delim) {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

bool parse_real(const std::string& s, double* out) {
  char* end = nullptr;
  *out = std::strtod(s.c_str(), &end);
  return end != s.c_str() && *end == '\0' && std::isfinite(*out);
}

}  // namespace

IngestResult load_events(std::istream& is, const IngestSchema& schema) {
  std::string header;
  if (!std::getline(is, header)) throw DataError("event file is empty");
  const std::vector<std::string> cols = split_row(header, schema.delimiter);
  auto find_col = [&](const std::string& name) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (cols[i] == name) return static_cast<int>(i);
    }
    throw DataError("event file is missing column '" + name + "'");
  };
  const int c_time = find_col(schema.col_timestamp);
  const int c_lat = find_col(schema.col_lat);
  const int c_lon = find_col(schema.col_lon);
  const int c_cat = find_col(schema.col_category);

  std::unordered_map<std::string, int> category_index;
  for (std::size_t i = 0; i < schema.vocabulary.size(); ++i) {
    category_index[schema.vocabulary[i]] = static_cast<int>(i);
  }
  const int other_index = static_cast<int>(schema.vocabulary.size());
  const long long start_day = days_from_civil(schema.span_start);
  const int span = schema.span_days();

  IngestResult result;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_row(line, schema.delimiter);
    const int needed = std::max({c_time, c_lat, c_lon, c_cat});
    if (static_cast<int>(fields.size()) <= needed) {
      ++result.malformed_rows;
      continue;
    }
    EventRecord ev;
    long long day;
    try {
      day = days_from_civil(parse_date(fields[c_time])) - start_day;
    } catch (const DataError&) {
      ++result.malformed_rows;
      continue;
    }
    if (!parse_real(fields[c_lat], &ev.lat) || !parse_real(fields[c_lon], &ev.lon)) {
      ++result.malformed_rows;
      continue;
    }
    const auto it = category_index.find(fields[c_cat]);
    if (it == category_index.end()) {
      if (!schema.lenient) {
        ++result.malformed_rows;
        continue;
      }
      ev.category = other_index;
    } else {
      ev.category = it->second;
    }
    if (day < 0 || day >= span) {
      ++result.out_of_span;
      continue;
    }
    ev.day = static_cast<int>(day);
    result.events.push_back(ev);
  }
  return result;
}

IngestResult load_events_file(const std::string& path, const IngestSchema& schema) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open event file: " + path);
  return load_events(is, schema);
}

RasterizeResult rasterize(const std::vector<EventRecord>& events,
                          const GridSpec& grid, const CivilDate& start,
                          int span_days,
                          const std::vector<std::string>& categories) {
  grid.validate();
  if (span_days <= 0) throw DataError("rasterize: span must be positive");
  if (categories.empty()) throw DataError("rasterize: empty category vocabulary");

  RasterizeResult result;
  result.tensor.counts =
      ITensor3(grid.n_regions(), span_days, static_cast<int>(categories.size()));
  result.tensor.grid = grid;
  result.tensor.start = start;
  result.tensor.categories = categories;

  const double lon_scale = kKmPerDegree * std::cos(grid.origin_lat * kPi / 180.0);
  for (const EventRecord& ev : events) {
    if (ev.day < 0 || ev.day >= span_days ||
        ev.category >= static_cast<int>(categories.size())) {
      throw DataError("rasterize: event outside declared span or vocabulary");
    }
    const double y_km = (ev.lat - grid.origin_lat) * kKmPerDegree;
    const double x_km = (ev.lon - grid.origin_lon) * lon_scale;
    const int row = static_cast<int>(std::floor(y_km / grid.cell_km));
    const int col = static_cast<int>(std::floor(x_km / grid.cell_km));
    if (row < 0 || row >= grid.rows || col < 0 || col >= grid.cols) {
      ++result.out_of_bounds;
      continue;
    }
    ++result.tensor.counts(grid.region_index(row, col), ev.day, ev.category);
  }
  return result;
}

SplitSpec chrono_split(int t_total, int window, int horizon, int val_days) {
  if (t_total < 8 * (window + horizon)) {
    std::ostringstream os;
    os << "span of " << t_total << " days is too short; need at least "
       << 8 * (window + horizon);
    throw DataError(os.str());
  }
  SplitSpec s;
  s.t_total = t_total;
  s.test_begin = t_total - t_total / 8;
  s.train_end = s.test_begin;
  s.val_begin = s.train_end - val_days;
  if (s.val_begin <= window) {
    throw DataError("train span leaves no room before the validation tail");
  }
  return s;
}

DatasetStats dataset_stats(const CountTensor& tensor) {
  DatasetStats stats;
  stats.regions = tensor.n_regions();
  stats.days = tensor.days();
  stats.start = tensor.start;
  const double cells = static_cast<double>(tensor.n_regions()) * tensor.days();
  for (int c = 0; c < tensor.n_categories(); ++c) {
    CategoryStats cs;
    cs.name = tensor.categories[c];
    long long zeros = 0;
    for (int n = 0; n < tensor.n_regions(); ++n) {
      for (int t = 0; t < tensor.days(); ++t) {
        const auto v = tensor.counts(n, t, c);
        cs.count += v;
        if (v == 0) ++zeros;
      }
    }
    cs.zero_rate = cells > 0 ? zeros / cells : 1.0;
    stats.per_category.push_back(std::move(cs));
  }
  return stats;
}

SynthResult synthesize(const SynthConfig& cfg, std::uint64_t seed) {
  if (cfg.rows <= 0 || cfg.cols <= 0 || cfg.days <= 0 || cfg.categories <= 0) {
    throw UsageError("synth config: dimensions must be positive");
  }
  const int n = cfg.rows * cfg.cols;

  SynthResult result;
  result.tensor.counts = ITensor3(n, cfg.days, cfg.categories);
  result.tensor.grid = GridSpec{cfg.rows, cfg.cols, cfg.cell_km, 0.0, 0.0};
  result.tensor.start = CivilDate{2014, 1, 1};
  for (int c = 0; c < cfg.categories; ++c) {
    result.tensor.categories.push_back("cat" + std::to_string(c));
  }
  result.pi_true.resize(n, cfg.categories);
  result.p_true.resize(n, cfg.categories);
  result.r_true.resize(n, cfg.categories);

  const double cr = (cfg.rows - 1) / 2.0;
  const double cc = (cfg.cols - 1) / 2.0;
  const double max_dist = std::max(std::hypot(cr, cc), 1e-12);
  for (int row = 0; row < cfg.rows; ++row) {
    for (int col = 0; col < cfg.cols; ++col) {
      const int region = row * cfg.cols + col;
      const double t = std::hypot(row - cr, col - cc) / max_dist;
      for (int c = 0; c < cfg.categories; ++c) {
        const double tc = std::clamp(t + cfg.category_shift * c, 0.0, 1.0);
        result.pi_true(region, c) = std::clamp(
            cfg.pi_center + (cfg.pi_edge - cfg.pi_center) * tc, 0.01, 0.99);
        result.p_true(region, c) = std::clamp(
            cfg.p_center + (cfg.p_edge - cfg.p_center) * tc, 0.01, 0.99);
        result.r_true(region, c) =
            std::max(cfg.r_center + (cfg.r_edge - cfg.r_center) * tc, 0.05);
      }
    }
  }

  RngStream rng(seed, "synth");
  for (int region = 0; region < n; ++region) {
    for (int day = 0; day < cfg.days; ++day) {
      for (int c = 0; c < cfg.categories; ++c) {
        const ZinbParams params{result.pi_true(region, c), result.p_true(region, c),
                                result.r_true(region, c)};
        result.tensor.counts(region, day, c) = zinb_sample(params, rng);
      }
    }
  }
  return result;
}

}  // namespace stmgnn
