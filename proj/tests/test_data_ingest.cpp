#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "stmgnn/count_distributions.hpp"
#include "stmgnn/data_ingest.hpp"
#include "stmgnn/errors.hpp"
#include "support/oracles.hpp"

using namespace stmgnn;

namespace {

IngestSchema nyc_schema() {
  IngestSchema s;
  s.vocabulary = {"Robbery", "Larceny"};
  s.span_start = {2014, 1, 1};
  s.span_end = {2014, 12, 31};
  return s;
}

}  // namespace

TEST_CASE("civil date round trips and weekday") {
  CHECK(days_from_civil({1970, 1, 1}) == 0);
  CHECK(days_from_civil({2014, 1, 1}) == 16071);
  for (long long d : {0LL, 16071LL, -1000LL, 738000LL}) {
    CHECK(days_from_civil(civil_from_days(d)) == d);
  }
  CHECK(weekday_of({1970, 1, 1}) == 4);   // Thursday
  CHECK(weekday_of({2014, 1, 1}) == 3);   // Wednesday
  CHECK(weekday_of({2014, 1, 1}, 4) == 0);  // Sunday

  CHECK(parse_date("2014-07-09") == CivilDate{2014, 7, 9});
  CHECK(parse_date("2014-07-09 13:45:00") == CivilDate{2014, 7, 9});
  CHECK_THROWS_AS(parse_date("07/09/2014"), DataError);
  CHECK(format_date({2014, 7, 9}) == "2014-07-09");
}

TEST_CASE("load_events parses, counts malformed rows, honours modes") {
  IngestSchema schema = nyc_schema();

  std::istringstream empty("timestamp,latitude,longitude,category\n");
  const IngestResult none = load_events(empty, schema);
  CHECK(none.events.empty());
  CHECK(none.malformed_rows == 0);

  std::istringstream one(
      "timestamp,latitude,longitude,category\n"
      "2014-01-03,40.71,-74.00,Robbery\n");
  const IngestResult single = load_events(one, schema);
  CHECK(single.events.size() == 1);
  CHECK(single.events[0].day == 2);
  CHECK(single.events[0].category == 0);

  const std::string mixed =
      "timestamp,latitude,longitude,category\n"
      "2014-01-03,40.71,-74.00,Robbery\n"
      "2014-01-04,40.71,-74.00,Arson\n"       // unknown category
      "not-a-date,40.71,-74.00,Larceny\n"      // bad date
      "2014-01-05,bogus,-74.00,Larceny\n"      // bad number
      "2015-06-01,40.71,-74.00,Larceny\n";     // outside span
  std::istringstream strict_in(mixed);
  const IngestResult strict = load_events(strict_in, schema);
  CHECK(strict.events.size() == 1);
  CHECK(strict.malformed_rows == 3);
  CHECK(strict.out_of_span == 1);

  schema.lenient = true;
  std::istringstream lenient_in(mixed);
  const IngestResult lenient = load_events(lenient_in, schema);
  CHECK(lenient.events.size() == 2);  // the Arson row maps to "other"
  CHECK(lenient.malformed_rows == 2);
  CHECK(lenient.events[1].category == 2);
  CHECK(schema.effective_vocabulary().back() == "other");

  std::istringstream missing("timestamp,latitude,category\nx,y,z\n");
  CHECK_THROWS_AS(load_events(missing, nyc_schema()), DataError);
}

TEST_CASE("rasterize bins events and preserves totals") {
  GridSpec grid{2, 2, 3.0, 40.0, -74.0};

  const RasterizeResult empty = rasterize({}, grid, {2014, 1, 1}, 3, {"a"});
  long long total = 0;
  for (int n = 0; n < 4; ++n)
    for (int t = 0; t < 3; ++t) total += empty.tensor.counts(n, t, 0);
  CHECK(total == 0);

  // One event near the middle of cell (row 0, col 0).
  // 3 km of latitude is 3/111.32 degrees.
  EventRecord ev;
  ev.day = 0;
  ev.lat = 40.0 + 1.5 / 111.32;
  ev.lon = -74.0 + 1.5 / (111.32 * std::cos(40.0 * 3.141592653589793 / 180.0));
  ev.category = 0;
  const RasterizeResult one = rasterize({ev}, grid, {2014, 1, 1}, 3, {"a"});
  CHECK(one.tensor.counts(0, 0, 0) == 1);
  CHECK(one.out_of_bounds == 0);

  // A random batch: in-bounds cells sum to the kept-event count.
  std::vector<EventRecord> batch;
  std::mt19937 gen(61);
  std::uniform_real_distribution<double> ulat(39.99, 40.08);
  std::uniform_real_distribution<double> ulon(-74.01, -73.92);
  std::uniform_int_distribution<int> uday(0, 2);
  for (int i = 0; i < 500; ++i) {
    batch.push_back({uday(gen), ulat(gen), ulon(gen), 0});
  }
  const RasterizeResult r = rasterize(batch, grid, {2014, 1, 1}, 3, {"a"});
  long long binned = 0;
  for (int n = 0; n < 4; ++n)
    for (int t = 0; t < 3; ++t) binned += r.tensor.counts(n, t, 0);
  CHECK(binned + r.out_of_bounds == 500);
  CHECK(r.out_of_bounds > 0);  // the sampling box deliberately overhangs
}

TEST_CASE("chrono_split follows the 7:1 protocol") {
  const SplitSpec s = chrono_split(800, 30, 1);
  CHECK(s.t_total == 800);
  CHECK(s.test_days() == 100);
  CHECK(s.train_end == 700);
  CHECK(s.val_begin == 670);
  CHECK(s.val_days() == 30);

  // Boundaries are disjoint and exhaustive.
  CHECK(s.val_begin > 0);
  CHECK(s.train_end == s.test_begin);
  CHECK(s.test_begin + s.test_days() == s.t_total);

  CHECK_THROWS_AS(chrono_split(100, 30, 1), DataError);
  // Long enough for windows but the validation tail swallows the train span.
  CHECK_THROWS_AS(chrono_split(24, 2, 1), DataError);
}

TEST_CASE("dataset statistics") {
  CountTensor t;
  t.counts = ITensor3(2, 2, 1);
  t.grid = {1, 2};
  t.start = {2014, 1, 1};
  t.categories = {"a"};
  const DatasetStats all_zero = dataset_stats(t);
  CHECK(all_zero.per_category[0].zero_rate == 1.0);
  CHECK(all_zero.per_category[0].count == 0);

  t.counts(0, 0, 0) = 1;
  const DatasetStats one = dataset_stats(t);
  CHECK(one.per_category[0].zero_rate == 0.75);
  CHECK(one.per_category[0].count == 1);
}

TEST_CASE("synthesize: determinism, fields, and the zero-branch oracle") {
  SynthConfig cfg;
  cfg.rows = 4;
  cfg.cols = 4;
  cfg.days = 2000;
  cfg.categories = 2;

  const SynthResult a = synthesize(cfg, 99);
  const SynthResult b = synthesize(cfg, 99);
  CHECK(a.tensor.counts == b.tensor.counts);
  const SynthResult c = synthesize(cfg, 100);
  CHECK_FALSE(a.tensor.counts == c.tensor.counts);

  // Near-certain structural zeros produce an (almost surely) empty tensor.
  SynthConfig zcfg = cfg;
  zcfg.days = 50;
  zcfg.pi_center = zcfg.pi_edge = 0.99;
  const SynthResult z = synthesize(zcfg, 1);
  long long nonzero = 0;
  for (int n = 0; n < 16; ++n)
    for (int t = 0; t < 50; ++t)
      for (int k = 0; k < 2; ++k)
        if (z.tensor.counts(n, t, k) > 0) ++nonzero;
  CHECK(nonzero < 100);  // 1600 cells/category at p(zero) ~ 0.995

  // Empirical zero fraction matches pi + (1-pi)(1-p)^r within 3 sigma, and
  // empirical means match the analytic ZINB mean (moment convergence).
  for (int region : {0, 5, 10}) {
    for (int k = 0; k < 2; ++k) {
      const ZinbParams q{a.pi_true(region, k), a.p_true(region, k),
                         a.r_true(region, k)};
      const double p0 = zinb_pmf(0, q);
      long long zeros = 0;
      double sum = 0.0;
      for (int t = 0; t < cfg.days; ++t) {
        const auto v = a.tensor.counts(region, t, k);
        if (v == 0) ++zeros;
        sum += static_cast<double>(v);
      }
      const double frac = zeros / static_cast<double>(cfg.days);
      const double se0 = std::sqrt(p0 * (1.0 - p0) / cfg.days);
      CHECK(std::abs(frac - p0) < 3.0 * se0 + 1e-9);

      // Var(Y) for the ZINB mixture, from the truncated moment oracle.
      const double mean = zinb_mean(q);
      double second = 0.0;
      const auto ts = oracles::truncated_pmf_sum(q.pi, q.p, q.r, 1e-12);
      for (long long y = 0; y <= ts.y_star; ++y) {
        second += static_cast<double>(y) * y * oracles::zinb_term(y, q.pi, q.p, q.r);
      }
      const double sd = std::sqrt(second - mean * mean);
      CHECK(std::abs(sum / cfg.days - mean) < 3.0 * sd / std::sqrt(cfg.days) + 1e-9);
    }
  }

  // The radial fields run from the centre values outwards.
  const int center_region = 1 * 4 + 1;  // near the middle
  const int corner_region = 0;
  CHECK(a.pi_true(center_region, 0) < a.pi_true(corner_region, 0));
  CHECK(a.r_true(center_region, 0) > a.r_true(corner_region, 0));
}

TEST_CASE("true-parameter intervals attain their exact discrete coverage") {
  // Coverage of the generative parameters' own [q10, q90] intervals,
  // against the exactly computable P(q10 <= Y <= q90).
  SynthConfig cfg;
  cfg.rows = 4;
  cfg.cols = 4;
  cfg.days = 1500;
  cfg.categories = 2;
  const SynthResult synth = synthesize(cfg, 202);

  long long covered = 0, cells = 0;
  double exact = 0.0;
  for (int region = 0; region < 16; ++region) {
    for (int c = 0; c < 2; ++c) {
      const ZinbParams q{synth.pi_true(region, c), synth.p_true(region, c),
                         synth.r_true(region, c)};
      const long long lo = zinb_quantile(q, 0.10);
      const long long hi = zinb_quantile(q, 0.90);
      double mass = 0.0;
      for (long long y = lo; y <= hi; ++y) mass += zinb_pmf(y, q);
      exact += mass * cfg.days;
      for (int t = 0; t < cfg.days; ++t) {
        const auto v = synth.tensor.counts(region, t, c);
        if (v >= lo && v <= hi) ++covered;
        ++cells;
      }
    }
  }
  const double empirical = covered / static_cast<double>(cells);
  const double nominal = exact / static_cast<double>(cells);
  // Discrete quantiles over-cover the nominal 80% band.
  CHECK(nominal >= 0.8);
  const double se = std::sqrt(nominal * (1.0 - nominal) / cells);
  CHECK(std::abs(empirical - nominal) < 3.0 * se + 1e-9);
}
