#include "monosurf/confounders.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "monosurf/error.hpp"
#include "monosurf/stats.hpp"

namespace monosurf {
namespace {

constexpr int kSplineOrder = 4;  // cubic

// All order-k B-spline values (or their `deriv`-th derivative) at x, for the
// augmented knot vector t. Length t.size() - k. x must lie in [t[k-1], t[n]].
std::vector<double> bspline_values(const std::vector<double>& t, int k, double x, int deriv) {
  const int n_knots = static_cast<int>(t.size());
  std::vector<double> b(static_cast<std::size_t>(n_knots - 1), 0.0);

  int span = -1;
  for (int i = 0; i < n_knots - 1; ++i) {
    if (t[i] <= x && x < t[i + 1]) {
      span = i;
      break;
    }
  }
  if (span < 0) {
    // x at the right boundary: the last non-degenerate interval is closed.
    for (int i = n_knots - 2; i >= 0; --i)
      if (t[i] < t[i + 1]) {
        span = i;
        break;
      }
  }
  b[span] = 1.0;

  const int value_order = k - deriv;
  for (int m = 2; m <= value_order; ++m) {
    for (int i = 0; i < n_knots - m; ++i) {
      const double d1 = t[i + m - 1] - t[i];
      const double d2 = t[i + m] - t[i + 1];
      const double left = d1 > 0.0 ? (x - t[i]) / d1 * b[i] : 0.0;
      const double right = d2 > 0.0 ? (t[i + m] - x) / d2 * b[i + 1] : 0.0;
      b[i] = left + right;
    }
  }
  for (int m = value_order + 1; m <= k; ++m) {
    for (int i = 0; i < n_knots - m; ++i) {
      const double d1 = t[i + m - 1] - t[i];
      const double d2 = t[i + m] - t[i + 1];
      const double left = d1 > 0.0 ? b[i] / d1 : 0.0;
      const double right = d2 > 0.0 ? b[i + 1] / d2 : 0.0;
      b[i] = (m - 1) * (left - right);
    }
  }
  b.resize(static_cast<std::size_t>(n_knots - k));
  return b;
}

}  // namespace

NaturalSplineBasis::NaturalSplineBasis(std::span<const double> x, int df) : df_(df) {
  if (df < 1) throw ConfigError("natural spline needs df >= 1");
  std::vector<double> finite;
  finite.reserve(x.size());
  for (double v : x)
    if (std::isfinite(v)) finite.push_back(v);
  std::sort(finite.begin(), finite.end());
  const std::set<double> uniq(finite.begin(), finite.end());
  if (static_cast<int>(uniq.size()) < df + 1) {
    throw ConfigError("natural spline with df=" + std::to_string(df) + " needs at least " + std::to_string(df + 1) +
                      " distinct values, got " + std::to_string(uniq.size()));
  }
  lower_ = finite.front();
  upper_ = finite.back();
  for (int j = 1; j < df; ++j) interior_.push_back(quantile_sorted(finite, static_cast<double>(j) / df));

  knots_.assign(kSplineOrder, lower_);
  knots_.insert(knots_.end(), interior_.begin(), interior_.end());
  knots_.insert(knots_.end(), kSplineOrder, upper_);

  const int n_bspline = static_cast<int>(knots_.size()) - kSplineOrder;  // df + 3
  Eigen::MatrixXd constraint(n_bspline - 1, 2);
  const auto lo2 = bspline_values(knots_, kSplineOrder, lower_, 2);
  const auto hi2 = bspline_values(knots_, kSplineOrder, upper_, 2);
  for (int i = 1; i < n_bspline; ++i) {
    constraint(i - 1, 0) = lo2[i];
    constraint(i - 1, 1) = hi2[i];
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(constraint);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n_bspline - 1, n_bspline - 1);
  projection_ = q.rightCols(df);
}

Eigen::RowVectorXd NaturalSplineBasis::bspline_row(double x, int derivative) const {
  const auto vals = bspline_values(knots_, kSplineOrder, x, derivative);
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(vals.size()) - 1);
  for (std::size_t i = 1; i < vals.size(); ++i) row(static_cast<Eigen::Index>(i) - 1) = vals[i];
  return row;
}

Eigen::MatrixXd NaturalSplineBasis::design(std::span<const double> x, int derivative) const {
  if (derivative < 0 || derivative > 2) throw ConfigError("natural spline derivative must be 0, 1 or 2");
  const Eigen::Index n_cols = projection_.rows();
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(x.size()), n_cols);
  for (std::size_t r = 0; r < x.size(); ++r) {
    const double v = x[r];
    const auto row = static_cast<Eigen::Index>(r);
    if (v >= lower_ && v <= upper_) {
      raw.row(row) = bspline_row(v, derivative);
    } else {
      // Linear continuation beyond the boundary knots.
      const double edge = v < lower_ ? lower_ : upper_;
      if (derivative == 2) {
        raw.row(row).setZero();
      } else if (derivative == 1) {
        raw.row(row) = bspline_row(edge, 1);
      } else {
        raw.row(row) = bspline_row(edge, 0) + (v - edge) * bspline_row(edge, 1);
      }
    }
  }
  return raw * projection_;
}

Eigen::MatrixXd natural_cubic_spline_basis(std::span<const double> x, int df) {
  return NaturalSplineBasis(x, df).design(x);
}

std::vector<double> running_mean(std::span<const double> x, int window) {
  if (window < 1) throw ConfigError("running mean window must be >= 1");
  std::vector<double> out(x.size(), kMissing);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double sum = 0.0;
    int count = 0;
    const std::size_t first = t + 1 >= static_cast<std::size_t>(window) ? t + 1 - window : 0;
    for (std::size_t s = first; s <= t; ++s) {
      if (!is_missing(x[s])) {
        sum += x[s];
        ++count;
      }
    }
    if (count > 0) out[t] = sum / count;
  }
  return out;
}

std::vector<double> running_mean(std::span<const Date> dates, std::span<const double> x, int window) {
  if (window < 1) throw ConfigError("running mean window must be >= 1");
  if (dates.size() != x.size()) throw ConfigError("running mean: dates and values differ in length");
  std::vector<double> out(x.size(), kMissing);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double sum = 0.0;
    int count = 0;
    for (std::size_t s = t + 1; s-- > 0;) {
      if ((dates[t] - dates[s]).count() >= window) break;
      if (!is_missing(x[s])) {
        sum += x[s];
        ++count;
      }
    }
    if (count > 0) out[t] = sum / count;
  }
  return out;
}

double years_of_data(const CityData& city) {
  if (city.days.empty()) return 0.0;
  const auto span_days = (city.days.back().date - city.days.front().date).count() + 1;
  return static_cast<double>(span_days) / 365.25;
}

int time_spline_df(const CityData& city, const ConfounderConfig& cfg) {
  const double raw = cfg.time_df_per_year * years_of_data(city);
  return std::max(cfg.min_time_df, static_cast<int>(std::nearbyint(raw)));
}

std::vector<Eigen::Index> dependent_columns(const Eigen::MatrixXd& x, double threshold) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(threshold);
  std::vector<Eigen::Index> out;
  const auto rank = qr.rank();
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index i = rank; i < x.cols(); ++i) out.push_back(perm(i));
  std::sort(out.begin(), out.end());
  return out;
}

ConfounderDesign build_confounder_design(const CityData& city, const ConfounderConfig& cfg) {
  using namespace std::chrono;
  const auto n = static_cast<Eigen::Index>(city.days.size());
  if (n == 0) throw ConfigError("city " + city.city_id + ": no days to build a confounder design from");
  for (const auto& d : city.days) {
    if (!d.complete()) {
      throw SchemaError("city " + city.city_id + ": confounder design needs complete rows (missing value on " +
                        format_date(d.date) + ")");
    }
  }

  std::vector<double> time(static_cast<std::size_t>(n)), temp, temp_rm, dew, dew_rm;
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& d = city.days[static_cast<std::size_t>(t)];
    time[static_cast<std::size_t>(t)] = static_cast<double>((d.date - city.days.front().date).count());
    temp.push_back(d.temp);
    temp_rm.push_back(d.temp_rm);
    dew.push_back(d.dewpoint);
    dew_rm.push_back(d.dewpoint_rm);
  }

  struct Block {
    std::string name;
    Eigen::MatrixXd values;  // n x df, shared by all age groups
  };
  const int time_df = time_spline_df(city, cfg);
  const Eigen::MatrixXd time_basis = natural_cubic_spline_basis(time, time_df);
  std::vector<Block> weather;
  if (cfg.temp_df > 0) weather.push_back({"temp", natural_cubic_spline_basis(temp, cfg.temp_df)});
  weather.push_back({"temp_rm", natural_cubic_spline_basis(temp_rm, cfg.temp_rm_df)});
  weather.push_back({"dewpoint", natural_cubic_spline_basis(dew, cfg.dewpoint_df)});
  weather.push_back({"dewpoint_rm", natural_cubic_spline_basis(dew_rm, cfg.dewpoint_rm_df)});

  static constexpr std::array<const char*, 7> kDayNames = {"Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"};
  std::vector<unsigned> dow_levels;
  for (unsigned w = 0; w < 7; ++w)
    if (w != cfg.reference_day.c_encoding()) dow_levels.push_back(w);

  Eigen::Index p = kAgeGroups + static_cast<Eigen::Index>(dow_levels.size()) + kAgeGroups * time_df;
  for (const auto& b : weather) p += b.values.cols();

  ConfounderDesign design;
  design.matrix = Eigen::MatrixXd::Zero(kAgeGroups * n, p);
  Eigen::Index col = 0;

  for (int a = 0; a < kAgeGroups; ++a) {
    design.matrix.block(a * n, col + a, n, 1).setOnes();
    design.column_labels.push_back(std::string("age_") + kAgeGroupLabels[a]);
  }
  col += kAgeGroups;
  design.df_map.emplace_back("age_intercept", kAgeGroups);

  for (std::size_t l = 0; l < dow_levels.size(); ++l) {
    for (Eigen::Index t = 0; t < n; ++t) {
      const weekday wd{city.days[static_cast<std::size_t>(t)].date};
      if (wd.c_encoding() == dow_levels[l])
        for (int a = 0; a < kAgeGroups; ++a) design.matrix(a * n + t, col + static_cast<Eigen::Index>(l)) = 1.0;
    }
    design.column_labels.push_back(std::string("dow_") + kDayNames[dow_levels[l]]);
  }
  col += static_cast<Eigen::Index>(dow_levels.size());
  design.df_map.emplace_back("day_of_week", static_cast<int>(dow_levels.size()));

  for (int a = 0; a < kAgeGroups; ++a) {
    design.matrix.block(a * n, col, n, time_df) = time_basis;
    for (int j = 0; j < time_df; ++j)
      design.column_labels.push_back(std::string("time_") + kAgeGroupLabels[a] + "_" + std::to_string(j + 1));
    design.df_map.emplace_back(std::string("time_") + kAgeGroupLabels[a], time_df);
    col += time_df;
  }

  for (const auto& b : weather) {
    const auto df = b.values.cols();
    for (int a = 0; a < kAgeGroups; ++a) design.matrix.block(a * n, col, n, df) = b.values;
    for (Eigen::Index j = 0; j < df; ++j) design.column_labels.push_back(b.name + "_" + std::to_string(j + 1));
    design.df_map.emplace_back(b.name, static_cast<int>(df));
    col += df;
  }

  const auto dependent = cfg.check_rank ? dependent_columns(design.matrix) : std::vector<Eigen::Index>{};
  if (!dependent.empty()) {
    std::vector<std::string> labels;
    std::string msg = "city " + city.city_id + ": confounder design is rank deficient; dependent columns:";
    for (auto i : dependent) {
      labels.push_back(design.column_labels[static_cast<std::size_t>(i)]);
      msg += " " + labels.back();
    }
    throw FitError(msg, labels);
  }
  return design;
}

}  // namespace monosurf
