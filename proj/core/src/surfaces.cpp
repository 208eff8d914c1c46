#include "monosurf/surfaces.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "monosurf/error.hpp"
#include "monosurf/format.hpp"
#include "monosurf/stats.hpp"

namespace monosurf {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kTempBlock = 16;

Summary masked_summary() { return {kNaN, kNaN, kNaN, kNaN, kNaN}; }

// Rows: grid values; columns: basis functions of the given order. Values
// outside the basis interval give a zero row.
Eigen::MatrixXd basis_rows(const BernsteinBasis1D& basis, int order, std::span<const double> xs) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(xs.size()), order + 1);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!basis.contains(xs[i])) continue;
    out.row(static_cast<Eigen::Index>(i)) = bernstein_unit(order, basis.rescale(xs[i])).transpose();
  }
  return out;
}

// Theta as a p1 x p2 matrix mapped to the coefficient array that multiplies
// the reduced-order bases for the requested derivative, with the native-unit
// scale folded in.
Eigen::MatrixXd derivative_coeffs(const PosteriorSample& post, const Eigen::VectorXd& theta, SurfaceKind kind) {
  const int m1 = post.m1, m2 = post.m2;
  const Eigen::Map<const Eigen::MatrixXd> th(theta.data(), m1 + 1, m2 + 1);
  const Eigen::MatrixXd d1 = th.bottomRows(m1);  // psi_{j+1,k} - psi_{j,k}
  const double s1 = kLogRrScale * m1 / post.ozone.range();
  if (kind == SurfaceKind::LogRr) return s1 * d1;
  const double s2 = static_cast<double>(m2) / post.temp.range();
  return (s1 * s2) * (d1.rightCols(m2) - d1.leftCols(m2));
}

struct GridBases {
  Eigen::MatrixXd ozone;  // n_ozone x (reduced order + 1)
  Eigen::MatrixXd temp;   // n_temp x (...)
  std::vector<char> inside;
  bool zero = false;
};

GridBases grid_bases(const PosteriorSample& post, const GridSpec& grid, SurfaceKind kind) {
  GridBases gb;
  gb.zero = post.m1 == 0 || (kind == SurfaceKind::Interaction && post.m2 == 0);
  const int o_order = std::max(post.m1 - 1, 0);
  const int t_order = kind == SurfaceKind::LogRr ? post.m2 : std::max(post.m2 - 1, 0);
  gb.ozone = basis_rows(post.ozone, o_order, grid.ozone);
  gb.temp = basis_rows(post.temp, t_order, grid.temp);
  gb.inside.resize(grid.size());
  for (std::size_t k = 0; k < grid.temp.size(); ++k)
    for (std::size_t i = 0; i < grid.ozone.size(); ++i)
      gb.inside[i + grid.ozone.size() * k] = post.ozone.contains(grid.ozone[i]) && post.temp.contains(grid.temp[k]);
  return gb;
}

// Values for temp columns [k0, k1): (n_ozone * (k1 - k0)) x draws.
Eigen::MatrixXd block_draws(const PosteriorSample& post, Eigen::Index city, const GridBases& gb, SurfaceKind kind,
                            std::size_t k0, std::size_t k1) {
  const auto n_o = gb.ozone.rows();
  const auto width = static_cast<Eigen::Index>(k1 - k0);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_o * width, static_cast<Eigen::Index>(post.n_draws()));
  if (gb.zero) return out;
  const auto bt = gb.temp.middleRows(static_cast<Eigen::Index>(k0), width);
  for (std::size_t d = 0; d < post.n_draws(); ++d) {
    const Eigen::VectorXd theta = post.theta[d].col(city);
    const Eigen::MatrixXd vals = gb.ozone * derivative_coeffs(post, theta, kind) * bt.transpose();
    out.col(static_cast<Eigen::Index>(d)) = Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size());
  }
  return out;
}

SurfaceGrid empty_grid(const GridSpec& grid, std::string label) {
  SurfaceGrid g;
  g.label = std::move(label);
  g.ozone_grid = grid.ozone;
  g.temp_grid = grid.temp;
  g.support.assign(grid.size(), 0);
  g.values.assign(grid.size(), masked_summary());
  return g;
}

SurfaceGrid city_surface(const PosteriorSample& post, Eigen::Index city, const GridSpec& grid,
                         const Support& support, SurfaceKind kind) {
  if (post.n_draws() == 0) throw ConfigError("posterior sample has no draws");
  const std::string tag = kind == SurfaceKind::LogRr ? "log_rr" : "interaction";
  SurfaceGrid out = empty_grid(grid, tag + ":" + post.city_ids.at(static_cast<std::size_t>(city)));
  const GridBases gb = grid_bases(post, grid, kind);
  const std::size_t n_o = grid.ozone.size();
  for (std::size_t k0 = 0; k0 < grid.temp.size(); k0 += kTempBlock) {
    const std::size_t k1 = std::min(grid.temp.size(), k0 + kTempBlock);
    const Eigen::MatrixXd block = block_draws(post, city, gb, kind, k0, k1);
    for (std::size_t k = k0; k < k1; ++k)
      for (std::size_t i = 0; i < n_o; ++i) {
        const std::size_t p = i + n_o * k;
        if (!gb.inside[p] || !support.contains(grid.ozone[i], grid.temp[k])) continue;
        out.support[p] = 1;
        const Eigen::VectorXd row = block.row(static_cast<Eigen::Index>(i + n_o * (k - k0)));
        out.values[p] = summarize(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
      }
  }
  return out;
}

// Linear functional on theta (global basis) giving 1000 * dfdx1 at a point.
Eigen::RowVectorXd log_rr_functional(const PosteriorSample& post, double ozone, double temp) {
  const int m1 = post.m1, m2 = post.m2;
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero((m1 + 1) * (m2 + 1));
  if (m1 == 0) return row;
  const Eigen::VectorXd b1 = bernstein_unit(m1 - 1, post.ozone.rescale(ozone));
  const Eigen::VectorXd b2 = bernstein_unit(m2, post.temp.rescale(temp));
  const double scale = kLogRrScale * m1 / post.ozone.range();
  for (int k = 0; k <= m2; ++k)
    for (int j = 0; j < m1; ++j) row(j + 1 + (m1 + 1) * k) = scale * b1(j) * b2(k);
  return row;
}

// Linear functional on theta giving f at a point: b(x)' T^{-1}.
Eigen::RowVectorXd surface_functional(const PosteriorSample& post, double ozone, double temp) {
  const int m1 = post.m1, m2 = post.m2;
  const Eigen::VectorXd b1 = bernstein_unit(m1, post.ozone.rescale(ozone));
  const Eigen::VectorXd b2 = bernstein_unit(m2, post.temp.rescale(temp));
  Eigen::RowVectorXd row((m1 + 1) * (m2 + 1));
  for (int k = 0; k <= m2; ++k) {
    double tail = 0.0;  // sum_{j >= l} b1_j
    for (int l = m1; l >= 0; --l) {
      tail += b1(l);
      row(l + (m1 + 1) * k) = tail * b2(k);
    }
  }
  return row;
}

std::vector<double> apply_functional(const PosteriorSample& post, Eigen::Index city, const Eigen::RowVectorXd& f) {
  std::vector<double> out(post.n_draws());
  for (std::size_t d = 0; d < post.n_draws(); ++d) out[d] = f.dot(post.theta[d].col(city));
  return out;
}

Summary finite_summary(std::span<const double> draws, double threshold) {
  std::vector<double> ok;
  for (double v : draws)
    if (std::isfinite(v)) ok.push_back(v);
  if (ok.empty()) return masked_summary();
  return summarize(ok, threshold);
}

}  // namespace

Rectangle Rectangle::of(std::span<const double> ozone, std::span<const double> temp) {
  if (ozone.empty() || temp.empty()) throw ConfigError("Rectangle::of needs at least one point");
  const auto [olo, ohi] = std::minmax_element(ozone.begin(), ozone.end());
  const auto [tlo, thi] = std::minmax_element(temp.begin(), temp.end());
  return {*olo, *ohi, *tlo, *thi};
}

Rectangle Rectangle::hull(const Rectangle& o) const {
  return {std::min(ozone_lo, o.ozone_lo), std::max(ozone_hi, o.ozone_hi), std::min(temp_lo, o.temp_lo),
          std::max(temp_hi, o.temp_hi)};
}

Support Support::rectangle(const Rectangle& r) {
  Support s;
  s.rect_ = r;
  return s;
}

Support Support::of(std::span<const double> ozone, std::span<const double> temp, const SupportRule& rule) {
  if (ozone.size() != temp.size()) throw ConfigError("Support::of: ozone and temperature lengths differ");
  if (!(rule.radius >= 0.0) || rule.min_days < 0) throw ConfigError("support radius and day count must be nonnegative");
  Support s;
  s.rect_ = Rectangle::of(ozone, temp);
  s.h_ozone_ = rule.radius * (s.rect_.ozone_hi - s.rect_.ozone_lo);
  s.h_temp_ = rule.radius * (s.rect_.temp_hi - s.rect_.temp_lo);
  s.min_days_ = rule.min_days;
  s.days_.reserve(ozone.size());
  for (std::size_t i = 0; i < ozone.size(); ++i) s.days_.emplace_back(ozone[i], temp[i]);
  std::sort(s.days_.begin(), s.days_.end());
  return s;
}

bool Support::contains(double ozone, double temp) const {
  if (!rect_.contains(ozone, temp)) return false;
  if (min_days_ == 0) return true;
  auto it = std::lower_bound(days_.begin(), days_.end(), std::pair{ozone - h_ozone_, -std::numeric_limits<double>::infinity()});
  int count = 0;
  for (; it != days_.end() && it->first <= ozone + h_ozone_; ++it)
    if (std::abs(it->second - temp) <= h_temp_ && ++count >= min_days_) return true;
  return false;
}

GridSpec GridSpec::over(const Rectangle& r, int n_ozone, int n_temp) {
  if (n_ozone < 2 || n_temp < 2) throw ConfigError("grid needs at least two points per axis");
  GridSpec g;
  for (int i = 0; i < n_ozone; ++i)
    g.ozone.push_back(i == n_ozone - 1 ? r.ozone_hi : r.ozone_lo + (r.ozone_hi - r.ozone_lo) * i / (n_ozone - 1));
  for (int k = 0; k < n_temp; ++k)
    g.temp.push_back(k == n_temp - 1 ? r.temp_hi : r.temp_lo + (r.temp_hi - r.temp_lo) * k / (n_temp - 1));
  return g;
}

Summary summarize(std::span<const double> draws, double threshold) {
  if (draws.empty()) return masked_summary();
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  Summary s;
  s.mean = mean(draws);
  s.sd = stddev(draws);
  s.q025 = quantile_sorted(sorted, 0.025);
  s.q975 = quantile_sorted(sorted, 0.975);
  const auto above = std::count_if(draws.begin(), draws.end(), [&](double v) { return v > threshold; });
  s.pr_gt0 = static_cast<double>(above) / static_cast<double>(draws.size());
  return s;
}

Eigen::MatrixXd surface_draws(const PosteriorSample& post, Eigen::Index city, const GridSpec& grid, SurfaceKind kind) {
  const GridBases gb = grid_bases(post, grid, kind);
  return block_draws(post, city, gb, kind, 0, grid.temp.size());
}

SurfaceGrid log_rr_surface(const PosteriorSample& post, Eigen::Index city, const GridSpec& grid,
                           const Support& support) {
  return city_surface(post, city, grid, support, SurfaceKind::LogRr);
}

SurfaceGrid interaction_surface(const PosteriorSample& post, Eigen::Index city, const GridSpec& grid,
                                const Support& support) {
  return city_surface(post, city, grid, support, SurfaceKind::Interaction);
}

std::vector<double> precision_weights(std::span<const double> variances) {
  if (variances.empty()) return {};
  std::vector<double> w(variances.size(), 0.0);
  const auto zeros = std::count_if(variances.begin(), variances.end(), [](double v) { return !(v > 0.0); });
  if (zeros > 0) {
    for (std::size_t i = 0; i < w.size(); ++i)
      if (!(variances[i] > 0.0)) w[i] = 1.0 / static_cast<double>(zeros);
    return w;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += (w[i] = 1.0 / variances[i]);
  for (auto& x : w) x /= total;
  return w;
}

NationalDraws national_draws(const PosteriorSample& post, std::span<const Eigen::Index> cities,
                             std::span<const Support> supports, const GridSpec& grid, SurfaceKind kind) {
  if (cities.size() != supports.size()) throw ConfigError("national_surface: one support per city");
  if (post.n_draws() == 0) throw ConfigError("posterior sample has no draws");
  const GridBases gb = grid_bases(post, grid, kind);
  const std::size_t n_o = grid.ozone.size();
  const auto n_draws = static_cast<Eigen::Index>(post.n_draws());
  NationalDraws out;
  out.support.assign(grid.size(), 0);
  out.draws = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.size()), n_draws);

  for (std::size_t k0 = 0; k0 < grid.temp.size(); k0 += kTempBlock) {
    const std::size_t k1 = std::min(grid.temp.size(), k0 + kTempBlock);
    std::vector<Eigen::MatrixXd> blocks;
    for (auto c : cities) blocks.push_back(block_draws(post, c, gb, kind, k0, k1));
    for (std::size_t k = k0; k < k1; ++k)
      for (std::size_t i = 0; i < n_o; ++i) {
        const std::size_t p = i + n_o * k;
        if (!gb.inside[p]) continue;
        const auto r = static_cast<Eigen::Index>(i + n_o * (k - k0));
        std::vector<std::size_t> members;
        std::vector<double> vars;
        for (std::size_t c = 0; c < cities.size(); ++c) {
          if (!supports[c].contains(grid.ozone[i], grid.temp[k])) continue;
          const Eigen::VectorXd row = blocks[c].row(r);
          members.push_back(c);
          vars.push_back(n_draws > 1 ? (row.array() - row.mean()).square().sum() / static_cast<double>(n_draws - 1)
                                     : 0.0);
        }
        if (members.empty()) continue;
        const auto w = precision_weights(vars);
        auto pooled = out.draws.row(static_cast<Eigen::Index>(p));
        for (std::size_t m = 0; m < members.size(); ++m) pooled += w[m] * blocks[members[m]].row(r);
        out.support[p] = 1;
      }
  }
  return out;
}

SurfaceGrid national_surface(const PosteriorSample& post, std::span<const Eigen::Index> cities,
                             std::span<const Support> supports, const GridSpec& grid, SurfaceKind kind) {
  const std::string tag = kind == SurfaceKind::LogRr ? "log_rr" : "interaction";
  SurfaceGrid out = empty_grid(grid, tag + ":national");
  const NationalDraws nd = national_draws(post, cities, supports, grid, kind);
  std::vector<double> row(static_cast<std::size_t>(nd.draws.cols()));
  for (std::size_t p = 0; p < grid.size(); ++p) {
    if (!nd.support[p]) continue;
    Eigen::Map<Eigen::RowVectorXd>(row.data(), nd.draws.cols()) = nd.draws.row(static_cast<Eigen::Index>(p));
    out.support[p] = 1;
    out.values[p] = summarize(row);
  }
  return out;
}

StratifiedComparison stratified_ratio(const PosteriorSample& post, Eigen::Index city, std::span<const double> ozone,
                                      std::span<const double> temp, const StratifiedConfig& cfg) {
  if (ozone.size() != temp.size() || ozone.empty()) throw ConfigError("stratified_ratio: need paired exposures");
  StratifiedComparison out;
  out.city_id = post.city_ids.at(static_cast<std::size_t>(city));
  out.high_window = {quantile(temp, cfg.high_lo), quantile(temp, cfg.high_hi)};
  out.moderate_window = {quantile(temp, cfg.moderate_lo), quantile(temp, cfg.moderate_hi)};

  struct Window {
    std::vector<std::size_t> days;
    std::pair<double, double> ozone_range;
  };
  auto select = [&](std::pair<double, double> tw) {
    std::vector<double> oz;
    std::vector<std::size_t> idx;
    for (std::size_t t = 0; t < temp.size(); ++t)
      if (temp[t] >= tw.first && temp[t] <= tw.second) {
        idx.push_back(t);
        oz.push_back(ozone[t]);
      }
    if (idx.empty()) throw DomainError("city " + out.city_id + ": a temperature window holds no days");
    Window w;
    w.ozone_range = {quantile(oz, cfg.trim_lo), quantile(oz, cfg.trim_hi)};
    for (auto t : idx)
      if (ozone[t] >= w.ozone_range.first && ozone[t] <= w.ozone_range.second) w.days.push_back(t);
    return w;
  };
  const Window high = select(out.high_window);
  const Window moderate = select(out.moderate_window);
  out.high_ozone = high.ozone_range;
  out.moderate_ozone = moderate.ozone_range;
  out.n_high = high.days.size();
  out.n_moderate = moderate.days.size();

  auto mean_functional = [&](const std::vector<std::size_t>& days) {
    Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero((post.m1 + 1) * (post.m2 + 1));
    for (auto t : days) f += log_rr_functional(post, ozone[t], temp[t]);
    return Eigen::RowVectorXd(f / static_cast<double>(days.size()));
  };
  out.high_observed = apply_functional(post, city, mean_functional(high.days));
  out.moderate_observed = apply_functional(post, city, mean_functional(moderate.days));
  for (std::size_t d = 0; d < post.n_draws(); ++d)
    out.ratio_observed_draws.push_back(out.high_observed[d] / out.moderate_observed[d]);
  out.ratio_observed = finite_summary(out.ratio_observed_draws, 1.0);
  out.pr_ratio_observed_gt1 = out.ratio_observed.pr_gt0;

  const double lo = std::max(high.ozone_range.first, moderate.ozone_range.first);
  const double hi = std::min(high.ozone_range.second, moderate.ozone_range.second);
  if (lo <= hi) {
    auto within = [&](const std::vector<std::size_t>& days) {
      std::vector<std::size_t> kept;
      for (auto t : days)
        if (ozone[t] >= lo && ozone[t] <= hi) kept.push_back(t);
      return kept;
    };
    const auto hc = within(high.days);
    const auto mc = within(moderate.days);
    out.n_high_common = hc.size();
    out.n_moderate_common = mc.size();
    if (!hc.empty() && !mc.empty()) {
      out.common_range = std::make_pair(lo, hi);
      out.high_common = apply_functional(post, city, mean_functional(hc));
      out.moderate_common = apply_functional(post, city, mean_functional(mc));
      for (std::size_t d = 0; d < post.n_draws(); ++d)
        out.ratio_common_draws.push_back(out.high_common[d] / out.moderate_common[d]);
      out.ratio_common = finite_summary(out.ratio_common_draws, 1.0);
      out.pr_ratio_common_gt1 = out.ratio_common->pr_gt0;
    }
  }
  return out;
}

ExcessMortality excess_mortality(const PosteriorSample& post, Eigen::Index city, std::span<const double> ozone,
                                 std::span<const double> temp) {
  if (ozone.size() != temp.size() || ozone.empty()) throw ConfigError("excess_mortality: need paired exposures");
  ExcessMortality out;
  out.city_id = post.city_ids.at(static_cast<std::size_t>(city));
  out.ozone_q50 = quantile(ozone, 0.5);
  out.ozone_q95 = quantile(ozone, 0.95);
  out.temp_q50 = quantile(temp, 0.5);
  out.temp_q95 = quantile(temp, 0.95);
  const Eigen::RowVectorXd diff =
      surface_functional(post, out.ozone_q95, out.temp_q95) - surface_functional(post, out.ozone_q50, out.temp_q50);
  for (double v : apply_functional(post, city, diff)) out.draws.push_back(100.0 * std::expm1(v));
  out.summary = summarize(out.draws);
  return out;
}

PooledSummary pool_draws(const std::string& group, std::span<const std::vector<double>> draws) {
  PooledSummary out;
  out.group = group;
  out.n_cities = draws.size();
  if (draws.empty()) {
    out.summary = masked_summary();
    return out;
  }
  const std::size_t n = draws.front().size();
  std::vector<double> vars;
  for (const auto& d : draws) {
    if (d.size() != n) throw ConfigError("pool_draws: draw vectors differ in length");
    vars.push_back(stddev(d) * stddev(d));
  }
  out.weights = precision_weights(vars);
  std::vector<double> pooled(n, 0.0);
  for (std::size_t c = 0; c < draws.size(); ++c)
    for (std::size_t i = 0; i < n; ++i) pooled[i] += out.weights[c] * draws[c][i];
  out.summary = summarize(pooled);
  return out;
}

void write_surface_csv(const SurfaceGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "ozone,temp,supported,mean,sd,q2.5,q97.5,pr_gt0\n";
  const std::size_t n_o = grid.ozone_grid.size();
  for (std::size_t k = 0; k < grid.temp_grid.size(); ++k)
    for (std::size_t i = 0; i < n_o; ++i) {
      const std::size_t p = i + n_o * k;
      const auto& v = grid.values[p];
      out << format_number(grid.ozone_grid[i]) << ',' << format_number(grid.temp_grid[k]) << ','
          << (grid.support[p] ? 1 : 0) << ',' << format_number(v.mean) << ',' << format_number(v.sd) << ','
          << format_number(v.q025) << ',' << format_number(v.q975) << ',' << format_number(v.pr_gt0) << '\n';
    }
}

}  // namespace monosurf
