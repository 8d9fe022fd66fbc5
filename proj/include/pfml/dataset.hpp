#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <charconv>
#include <climits>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pfml/error.hpp"
#include "pfml/features.hpp"
#include "pfml/rng.hpp"

namespace pfml {

// ---------------------------------------------------------------------------
// Processing parameters and coupons

struct ProcessingParams {
  double laser_power = 0.0;      // W
  double laser_speed = 0.0;      // mm/s
  double hatch_spacing = 0.0;    // mm
  double layer_thickness = 0.0;  // mm
  double laser_focus = 0.0;      // spot size, mm

  static constexpr std::size_t kCount = 5;

  std::array<double, kCount> values() const {
    return {laser_power, laser_speed, hatch_spacing, layer_thickness, laser_focus};
  }
  static ProcessingParams from_values(const std::array<double, kCount>& v) {
    return {v[0], v[1], v[2], v[3], v[4]};
  }

  bool all_positive() const {
    const auto v = values();
    return std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
  }

  friend bool operator==(const ProcessingParams&, const ProcessingParams&) = default;
};

/// The discrete values used for the physical build.
struct ParamGrid {
  static constexpr std::array<double, 12> kPower{10, 12, 13, 14, 16, 18, 19, 20, 22, 24, 25, 30};
  static constexpr std::array<double, 6> kSpeed{300, 350, 400, 450, 500, 700};
  static constexpr std::array<double, 4> kHatch{0.01, 0.02, 0.025, 0.0375};
  static constexpr std::array<double, 2> kLayer{0.1, 0.15};
  static constexpr std::array<double, 2> kFocus{0.030, 0.257};
};

inline bool on_process_grid(const ProcessingParams& p) {
  auto in = [](const auto& grid, double v) {
    return std::any_of(grid.begin(), grid.end(), [v](double g) { return std::abs(g - v) < 1e-12; });
  };
  return in(ParamGrid::kPower, p.laser_power) && in(ParamGrid::kSpeed, p.laser_speed) &&
         in(ParamGrid::kHatch, p.hatch_spacing) && in(ParamGrid::kLayer, p.layer_thickness) &&
         in(ParamGrid::kFocus, p.laser_focus);
}

/// CSV / JSON column keys of the processing parameters.
inline constexpr std::array<std::string_view, ProcessingParams::kCount> kParamColumns{
    "power_W", "speed_mm_s", "hatch_mm", "layer_mm", "focus_mm"};

/// Human-readable labels used in importance reports.
inline constexpr std::array<std::string_view, ProcessingParams::kCount> kParamLabels{
    "Power (W)", "Speed (mm/s)", "Hatch (mm)", "Layer (mm)", "Laser Focus (mm)"};

struct CouponRecord {
  std::string coupon_id;
  ProcessingParams params;
  double power_factor = 0.0;  // mW/(m K^2) at 77 C

  friend bool operator==(const CouponRecord&, const CouponRecord&) = default;
};

// ---------------------------------------------------------------------------
// Dataset

struct SampleRow {
  std::string coupon_id;
  int layer_index = 0;
  ProcessingParams params;
  LayerFeatures features;
  double power_factor = 0.0;
  std::optional<int> label;

  friend bool operator==(const SampleRow&, const SampleRow&) = default;
};

inline constexpr std::size_t kPredictorCount = ProcessingParams::kCount + LayerFeatures::kCount;

/// The 35 predictor names: parameter columns then canonical feature names.
inline const std::vector<std::string>& predictor_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (auto c : kParamColumns) n.emplace_back(c);
    for (const auto& f : feature_names()) n.push_back(f);
    return n;
  }();
  return names;
}

/// Report label for a predictor ("power_W" -> "Power (W)"); feature names
/// are already human-readable and pass through.
inline std::string display_name(std::string_view predictor) {
  for (std::size_t i = 0; i < kParamColumns.size(); ++i)
    if (kParamColumns[i] == predictor) return std::string(kParamLabels[i]);
  return std::string(predictor);
}

inline std::array<double, kPredictorCount> predictors(const SampleRow& r) {
  std::array<double, kPredictorCount> out{};
  const auto p = r.params.values();
  const auto f = r.features.values();
  std::copy(p.begin(), p.end(), out.begin());
  std::copy(f.begin(), f.end(), out.begin() + ProcessingParams::kCount);
  return out;
}

inline void set_predictors(SampleRow& r, const std::array<double, kPredictorCount>& v) {
  std::array<double, ProcessingParams::kCount> p{};
  std::array<double, LayerFeatures::kCount> f{};
  std::copy(v.begin(), v.begin() + ProcessingParams::kCount, p.begin());
  std::copy(v.begin() + ProcessingParams::kCount, v.end(), f.begin());
  r.params = ProcessingParams::from_values(p);
  r.features = LayerFeatures::from_values(f);
}

struct Dataset {
  std::vector<SampleRow> rows;

  const std::vector<std::string>& feature_order() const { return predictor_names(); }
  std::size_t size() const noexcept { return rows.size(); }
  bool empty() const noexcept { return rows.empty(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Dense predictor matrix plus labels, the form the models consume.
struct FeatureTable {
  std::vector<std::string> names;
  Eigen::MatrixXd x;
  std::vector<int> y;

  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index cols() const { return x.cols(); }
};

inline FeatureTable to_table(const Dataset& ds) {
  FeatureTable t;
  t.names = predictor_names();
  t.x.resize(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(kPredictorCount));
  t.y.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto v = predictors(ds.rows[i]);
    for (std::size_t j = 0; j < kPredictorCount; ++j)
      t.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
    if (!ds.rows[i].label) throw Error("row " + std::to_string(i) + " has no label; binarize first");
    t.y[i] = *ds.rows[i].label;
  }
  return t;
}

using LayerKey = std::pair<std::string, int>;

/// Joins coupon-level parameters and labels with per-layer features. Rows
/// follow the order of `coupons`, layers ascending. Layer counts may differ
/// between coupons.
inline Dataset assemble(const std::vector<CouponRecord>& coupons,
                        const std::map<LayerKey, LayerFeatures>& layer_feats) {
  std::map<std::string, const CouponRecord*> by_id;
  for (const auto& c : coupons) {
    if (!by_id.emplace(c.coupon_id, &c).second) throw Error("duplicate coupon id '" + c.coupon_id + "'");
  }
  std::set<std::string> orphans;
  for (const auto& [key, _] : layer_feats)
    if (!by_id.count(key.first)) orphans.insert(key.first);
  if (!orphans.empty()) {
    std::string msg = "layers reference unknown coupons:";
    for (const auto& id : orphans) msg += " " + id;
    throw Error(msg);
  }
  Dataset ds;
  for (const auto& c : coupons) {
    auto it = layer_feats.lower_bound({c.coupon_id, INT_MIN});
    for (; it != layer_feats.end() && it->first.first == c.coupon_id; ++it) {
      SampleRow r;
      r.coupon_id = c.coupon_id;
      r.layer_index = it->first.second;
      r.params = c.params;
      r.features = it->second;
      r.power_factor = c.power_factor;
      ds.rows.push_back(std::move(r));
    }
  }
  return ds;
}

struct BinarizeResult {
  Dataset dataset;
  double median = 0.0;
  std::size_t ties = 0;  // rows whose power factor equals the median
  bool degenerate = false;  // every row has the same power factor
};

/// Labels rows 1 when power_factor >= median, 0 otherwise. Values equal to
/// the median are labelled 1.
inline BinarizeResult binarize_labels(const Dataset& ds) {
  if (ds.empty()) throw Error("cannot binarize an empty dataset");
  std::vector<double> pf;
  pf.reserve(ds.size());
  for (const auto& r : ds.rows) pf.push_back(r.power_factor);
  BinarizeResult out;
  out.median = median_of(pf);
  out.dataset = ds;
  const auto [lo, hi] = std::minmax_element(pf.begin(), pf.end());
  out.degenerate = *lo == *hi;
  for (auto& r : out.dataset.rows) {
    r.label = r.power_factor >= out.median ? 1 : 0;
    if (r.power_factor == out.median) ++out.ties;
  }
  return out;
}

enum class SplitMode { kRow, kCoupon };

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Row mode: |test| = round(test_frac * N) rows drawn uniformly. Coupon
/// mode: whole coupons are moved to the test side in shuffled order until
/// it holds at least that many rows. Index lists are returned sorted.
inline SplitIndices split_indices(const Dataset& ds, double test_frac, std::uint64_t seed,
                                  SplitMode mode = SplitMode::kRow) {
  if (!(test_frac > 0.0 && test_frac < 1.0)) throw Error("test fraction must lie in (0, 1)");
  const std::size_t n = ds.size();
  if (n < 2) throw Error("need at least 2 rows to split");
  const auto n_test = static_cast<std::size_t>(std::llround(test_frac * static_cast<double>(n)));
  Rng rng = make_rng(derive_seed(seed, "split"));
  SplitIndices out;
  std::vector<char> is_test(n, 0);
  if (mode == SplitMode::kRow) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < n_test; ++i) is_test[idx[i]] = 1;
  } else {
    std::vector<std::string> ids;
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n; ++i) {
      auto& m = members[ds.rows[i].coupon_id];
      if (m.empty()) ids.push_back(ds.rows[i].coupon_id);
      m.push_back(i);
    }
    shuffle(ids.begin(), ids.end(), rng);
    std::size_t taken = 0;
    for (const auto& id : ids) {
      if (taken >= n_test) break;
      for (std::size_t i : members[id]) is_test[i] = 1;
      taken += members[id].size();
    }
  }
  for (std::size_t i = 0; i < n; ++i) (is_test[i] ? out.test : out.train).push_back(i);
  return out;
}

inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& idx) {
  Dataset out;
  out.rows.reserve(idx.size());
  for (std::size_t i : idx) out.rows.push_back(ds.rows.at(i));
  return out;
}

inline std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double test_frac, std::uint64_t seed,
                                                    SplitMode mode = SplitMode::kRow) {
  const auto s = split_indices(ds, test_frac, seed, mode);
  return {subset(ds, s.train), subset(ds, s.test)};
}

// ---------------------------------------------------------------------------
// Min-max scaling

enum class ScaleFit { kTrainOnly, kAll };

/// Per-predictor affine map x -> (x - min) / (max - min). Constant
/// predictors map to 0. Values outside the fitted range are not clipped.
struct Scaler {
  std::array<double, kPredictorCount> min{};
  std::array<double, kPredictorCount> max{};

  static Scaler fit(std::initializer_list<const Dataset*> sets) {
    Scaler s;
    s.min.fill(std::numeric_limits<double>::infinity());
    s.max.fill(-std::numeric_limits<double>::infinity());
    bool any = false;
    for (const Dataset* ds : sets) {
      for (const auto& r : ds->rows) {
        const auto v = predictors(r);
        for (std::size_t j = 0; j < kPredictorCount; ++j) {
          s.min[j] = std::min(s.min[j], v[j]);
          s.max[j] = std::max(s.max[j], v[j]);
        }
        any = true;
      }
    }
    if (!any) throw Error("cannot fit a scaler on an empty dataset");
    return s;
  }

  double apply(std::size_t j, double v) const {
    const double range = max[j] - min[j];
    return range > 0.0 ? (v - min[j]) / range : 0.0;
  }

  Dataset transform(const Dataset& ds) const {
    Dataset out = ds;
    for (auto& r : out.rows) {
      auto v = predictors(r);
      for (std::size_t j = 0; j < kPredictorCount; ++j) v[j] = apply(j, v[j]);
      set_predictors(r, v);
    }
    return out;
  }
};

struct ScaledSplit {
  Dataset train;
  Dataset test;
  Scaler scaler;
};

inline ScaledSplit minmax_scale(const Dataset& train, const Dataset& test, ScaleFit fit_on = ScaleFit::kTrainOnly) {
  if (train.empty()) throw Error("cannot scale an empty training set");
  const Scaler s = fit_on == ScaleFit::kAll ? Scaler::fit({&train, &test}) : Scaler::fit({&train});
  return {s.transform(train), s.transform(test), s};
}

// ---------------------------------------------------------------------------
// CSV

namespace csv {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline double parse_double(const std::string& cell, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* end = cell.data() + cell.size();
  const auto res = std::from_chars(cell.data(), end, v);
  if (cell.empty() || res.ec != std::errc{} || res.ptr != end)
    throw Error("row " + std::to_string(row) + ", column '" + column + "': not a number: '" + cell + "'");
  return v;
}

inline void check_id(const std::string& id) {
  if (id.find_first_of(",\"\r\n") != std::string::npos)
    throw Error("coupon id '" + id + "' contains a CSV delimiter");
}

// Reads a header and body; returns the column index of every required name.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> body;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open for reading");
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw IoError(path, "empty CSV file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_line(line);
  std::set<std::string> seen;
  for (const auto& h : t.header)
    if (!seen.insert(h).second) throw IoError(path, "duplicate column '" + h + "'");
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size())
      throw IoError(path, "row " + std::to_string(row) + ": expected " + std::to_string(t.header.size()) +
                              " cells, found " + std::to_string(cells.size()));
    t.body.push_back(std::move(cells));
  }
  return t;
}

}  // namespace csv

/// Column order: coupon_id, layer_index, five parameter columns, the 30
/// canonical feature names, power_factor, label (empty when unset).
inline std::vector<std::string> dataset_columns() {
  std::vector<std::string> cols{"coupon_id", "layer_index"};
  for (const auto& n : predictor_names()) cols.push_back(n);
  cols.emplace_back("power_factor");
  cols.emplace_back("label");
  return cols;
}

inline void write_dataset_csv(const Dataset& ds, std::ostream& out) {
  const auto cols = dataset_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : ds.rows) {
    csv::check_id(r.coupon_id);
    out << r.coupon_id << ',' << r.layer_index;
    for (double v : predictors(r)) out << ',' << csv::format_double(v);
    out << ',' << csv::format_double(r.power_factor) << ',';
    if (r.label) out << *r.label;
    out << '\n';
  }
}

inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open for writing");
  write_dataset_csv(ds, out);
  if (!out) throw IoError(path, "write failed");
}

/// Columns are matched by name, so any header order is accepted.
inline Dataset load_csv(const std::string& path) {
  const csv::Table t = csv::read(path);
  const auto cols = dataset_columns();
  std::vector<std::size_t> at;
  try {
    for (const auto& c : cols) at.push_back(t.column(c));
  } catch (const Error& e) {
    throw IoError(path, e.what());
  }
  Dataset ds;
  ds.rows.reserve(t.body.size());
  try {
    for (std::size_t i = 0; i < t.body.size(); ++i) {
      const auto& cells = t.body[i];
      const std::size_t row = i + 1;
      SampleRow r;
      r.coupon_id = cells[at[0]];
      const double layer = csv::parse_double(cells[at[1]], row, cols[1]);
      if (layer != std::floor(layer) || layer < 0)
        throw Error("row " + std::to_string(row) + ", column 'layer_index': not a non-negative integer");
      r.layer_index = static_cast<int>(layer);
      std::array<double, kPredictorCount> v{};
      for (std::size_t j = 0; j < kPredictorCount; ++j) v[j] = csv::parse_double(cells[at[2 + j]], row, cols[2 + j]);
      set_predictors(r, v);
      r.power_factor = csv::parse_double(cells[at[2 + kPredictorCount]], row, "power_factor");
      const std::string& lab = cells[at[3 + kPredictorCount]];
      if (!lab.empty()) {
        if (lab != "0" && lab != "1")
          throw Error("row " + std::to_string(row) + ", column 'label': expected 0 or 1, got '" + lab + "'");
        r.label = lab == "1" ? 1 : 0;
      }
      ds.rows.push_back(std::move(r));
    }
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw IoError(path, e.what());
  }
  return ds;
}

/// Per-layer features file produced by extraction:
/// coupon_id, layer_index, <30 canonical feature names>.
inline void save_features_csv(const std::map<LayerKey, LayerFeatures>& feats, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open for writing");
  out << "coupon_id,layer_index";
  for (const auto& n : feature_names()) out << ',' << n;
  out << '\n';
  for (const auto& [key, f] : feats) {
    csv::check_id(key.first);
    out << key.first << ',' << key.second;
    for (double v : f.values()) out << ',' << csv::format_double(v);
    out << '\n';
  }
  if (!out) throw IoError(path, "write failed");
}

inline std::map<LayerKey, LayerFeatures> load_features_csv(const std::string& path) {
  const csv::Table t = csv::read(path);
  std::map<LayerKey, LayerFeatures> out;
  try {
    const std::size_t id_col = t.column("coupon_id");
    const std::size_t layer_col = t.column("layer_index");
    std::vector<std::size_t> at;
    for (const auto& n : feature_names()) at.push_back(t.column(n));
    for (std::size_t i = 0; i < t.body.size(); ++i) {
      const auto& cells = t.body[i];
      std::array<double, LayerFeatures::kCount> v{};
      for (std::size_t j = 0; j < v.size(); ++j) v[j] = csv::parse_double(cells[at[j]], i + 1, feature_names()[j]);
      const double layer = csv::parse_double(cells[layer_col], i + 1, "layer_index");
      if (layer != std::floor(layer) || layer < 0)
        throw Error("row " + std::to_string(i + 1) + ", column 'layer_index': not a non-negative integer");
      LayerKey key{cells[id_col], static_cast<int>(layer)};
      if (!out.emplace(key, LayerFeatures::from_values(v)).second)
        throw Error("duplicate layer " + key.first + "/" + std::to_string(key.second));
    }
  } catch (const Error& e) {
    throw IoError(path, e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Coupon metadata JSON

inline nlohmann::json coupons_to_json(const std::vector<CouponRecord>& coupons) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : coupons) {
    nlohmann::json j;
    j["coupon_id"] = c.coupon_id;
    const auto v = c.params.values();
    for (std::size_t i = 0; i < v.size(); ++i) j[std::string(kParamColumns[i])] = v[i];
    j["power_factor"] = c.power_factor;
    arr.push_back(std::move(j));
  }
  return arr;
}

/// Validates the schema: every key present and numeric, parameters > 0,
/// power factor >= 0, ids unique. With `require_grid` the parameters must
/// also lie on the physical build's value grid.
inline std::vector<CouponRecord> coupons_from_json(const nlohmann::json& arr, bool require_grid = false) {
  if (!arr.is_array()) throw Error("coupon metadata must be a JSON array");
  std::vector<CouponRecord> out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& j = arr[i];
    const std::string where = "coupon entry " + std::to_string(i);
    if (!j.is_object()) throw Error(where + ": not an object");
    if (!j.contains("coupon_id") || !j["coupon_id"].is_string()) throw Error(where + ": missing string 'coupon_id'");
    CouponRecord c;
    c.coupon_id = j["coupon_id"].get<std::string>();
    csv::check_id(c.coupon_id);
    std::array<double, ProcessingParams::kCount> v{};
    for (std::size_t k = 0; k < v.size(); ++k) {
      const std::string key(kParamColumns[k]);
      if (!j.contains(key) || !j[key].is_number()) throw Error(where + ": missing numeric '" + key + "'");
      v[k] = j[key].get<double>();
    }
    c.params = ProcessingParams::from_values(v);
    if (!c.params.all_positive()) throw Error(where + ": processing parameters must be positive");
    if (require_grid && !on_process_grid(c.params)) throw Error(where + ": parameters are off the build grid");
    if (!j.contains("power_factor") || !j["power_factor"].is_number())
      throw Error(where + ": missing numeric 'power_factor'");
    c.power_factor = j["power_factor"].get<double>();
    if (c.power_factor < 0.0) throw Error(where + ": power factor must be non-negative");
    if (!ids.insert(c.coupon_id).second) throw Error(where + ": duplicate coupon id '" + c.coupon_id + "'");
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace pfml
