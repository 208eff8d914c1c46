#include "monosurf/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "monosurf/error.hpp"
#include "monosurf/format.hpp"

namespace monosurf {
namespace {

using json = nlohmann::ordered_json;

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  if (static_cast<Eigen::Index>(j.size()) != rows) throw SchemaError("matrix has the wrong number of rows");
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw SchemaError("matrix row has the wrong length");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json basis_json(const BernsteinBasis1D& b) {
  return {{"name", b.name()}, {"order", b.order()}, {"lo", b.lo()}, {"range", b.range()}};
}

BernsteinBasis1D basis_from(const json& j) {
  return {j.at("order").get<int>(), j.at("lo").get<double>(), j.at("range").get<double>(),
          j.at("name").get<std::string>()};
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

double parse_cell(const std::string& s, const std::filesystem::path& file, std::size_t line) {
  if (s == "NA") return std::numeric_limits<double>::quiet_NaN();
  if (s == "Inf") return std::numeric_limits<double>::infinity();
  if (s == "-Inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw SchemaError(file.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

void save_stage1(const Stage1Batch& batch, const std::filesystem::path& path) {
  json j;
  j["format"] = "monosurf-stage1";
  j["version"] = 1;
  j["m1"] = batch.m1;
  j["m2"] = batch.m2;
  j["ranges"] = {{"ozone_lo", batch.ranges.ozone_lo},
                 {"ozone_range", batch.ranges.ozone_range},
                 {"temp_lo", batch.ranges.temp_lo},
                 {"temp_range", batch.ranges.temp_range}};
  json fits = json::array();
  for (const auto& f : batch.fits) {
    json r;
    r["city_id"] = f.city_id;
    r["lat"] = f.location.lat;
    r["lon"] = f.location.lon;
    r["region"] = f.region;
    r["population"] = f.population;
    r["n_days"] = f.n_days;
    r["log_offset"] = f.log_offset;
    r["dispersion"] = f.dispersion;
    r["deviance"] = f.deviance;
    r["iterations"] = f.iterations;
    r["local_ozone"] = basis_json(f.local_ozone);
    r["local_temp"] = basis_json(f.local_temp);
    r["beta_hat"] = vector_json(f.beta_hat);
    r["gamma_hat"] = vector_json(f.gamma_hat);
    r["gamma_labels"] = f.gamma_labels;
    r["v11"] = matrix_json(f.v.v11);
    r["v12"] = matrix_json(f.v.v12);
    r["v22"] = matrix_json(f.v.v22);
    r["ozone"] = f.ozone;
    r["temp"] = f.temp;
    fits.push_back(std::move(r));
  }
  j["fits"] = std::move(fits);
  json failures = json::array();
  for (const auto& f : batch.failures) failures.push_back({{"city_id", f.city_id}, {"reason", f.reason}});
  j["failures"] = std::move(failures);
  write_json(j, path);
}

Stage1Batch load_stage1(const std::filesystem::path& path) {
  const json j = read_json(path);
  try {
    if (j.at("format") != "monosurf-stage1") throw SchemaError(path.string() + ": not a stage-1 file");
    Stage1Batch b;
    b.m1 = j.at("m1").get<int>();
    b.m2 = j.at("m2").get<int>();
    const auto& r = j.at("ranges");
    b.ranges = {r.at("ozone_lo").get<double>(), r.at("ozone_range").get<double>(), r.at("temp_lo").get<double>(),
                r.at("temp_range").get<double>()};
    for (const auto& f : j.at("fits")) {
      Stage1Fit fit;
      fit.city_id = f.at("city_id").get<std::string>();
      fit.location = {f.at("lat").get<double>(), f.at("lon").get<double>()};
      fit.region = f.at("region").get<std::string>();
      fit.population = f.at("population").get<std::int64_t>();
      fit.n_days = f.at("n_days").get<std::int64_t>();
      fit.log_offset = f.at("log_offset").get<double>();
      fit.dispersion = f.at("dispersion").get<double>();
      fit.deviance = f.at("deviance").get<double>();
      fit.iterations = f.at("iterations").get<int>();
      fit.local_ozone = basis_from(f.at("local_ozone"));
      fit.local_temp = basis_from(f.at("local_temp"));
      fit.beta_hat = vector_from(f.at("beta_hat"));
      fit.gamma_hat = vector_from(f.at("gamma_hat"));
      fit.gamma_labels = f.at("gamma_labels").get<std::vector<std::string>>();
      const auto nb = fit.beta_hat.size();
      const auto ng = fit.gamma_hat.size();
      fit.v.v11 = matrix_from(f.at("v11"), nb, nb);
      fit.v.v12 = ng > 0 ? matrix_from(f.at("v12"), nb, ng) : Eigen::MatrixXd(nb, 0);
      fit.v.v21 = fit.v.v12.transpose();
      fit.v.v22 = matrix_from(f.at("v22"), ng, ng);
      fit.ozone = f.at("ozone").get<std::vector<double>>();
      fit.temp = f.at("temp").get<std::vector<double>>();
      b.fits.push_back(std::move(fit));
    }
    for (const auto& f : j.at("failures"))
      b.failures.push_back({f.at("city_id").get<std::string>(), f.at("reason").get<std::string>()});
    return b;
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void save_truth(std::span<const CityTruth> truth, const std::filesystem::path& path) {
  json j;
  j["format"] = "monosurf-truth";
  j["version"] = 1;
  json cities = json::array();
  for (const auto& t : truth) {
    json c;
    c["city_id"] = t.city_id;
    c["family"] = to_string(t.family);
    c["multiplier"] = t.multiplier;
    c["ozone"] = basis_json(t.surface.ozone);
    c["temp"] = basis_json(t.surface.temp);
    c["coeffs"] = vector_json(t.surface.coeffs);
    c["daily_rate"] = t.daily_rate;
    c["dow_effect"] = t.dow_effect;
    c["season_amplitude"] = t.season_amplitude;
    c["dewpoint_effect"] = t.dewpoint_effect;
    cities.push_back(std::move(c));
  }
  j["cities"] = std::move(cities);
  write_json(j, path);
}

std::vector<CityTruth> load_truth(const std::filesystem::path& path) {
  const json j = read_json(path);
  try {
    std::vector<CityTruth> out;
    for (const auto& c : j.at("cities")) {
      CityTruth t;
      t.city_id = c.at("city_id").get<std::string>();
      t.family = parse_truth_family(c.at("family").get<std::string>());
      t.multiplier = c.at("multiplier").get<double>();
      t.surface = SurfaceSpec(basis_from(c.at("ozone")), basis_from(c.at("temp")), vector_from(c.at("coeffs")));
      t.daily_rate = c.at("daily_rate").get<std::array<double, kAgeGroups>>();
      t.dow_effect = c.at("dow_effect").get<std::array<double, 7>>();
      t.season_amplitude = c.at("season_amplitude").get<double>();
      t.dewpoint_effect = c.at("dewpoint_effect").get<double>();
      out.push_back(std::move(t));
    }
    return out;
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void save_posterior(const PosteriorSample& post, const std::filesystem::path& stem) {
  auto csv_path = stem;
  csv_path += ".csv";
  auto json_path = stem;
  json_path += ".json";
  std::ofstream out(csv_path);
  if (!out) throw ConfigError("cannot write " + csv_path.string());
  const int p = (post.m1 + 1) * (post.m2 + 1);
  out << "draw,city_id";
  for (int i = 0; i < p; ++i) out << ",theta_" << i;
  out << ",mu0,tau,rho,log_lik\n";
  for (std::size_t d = 0; d < post.n_draws(); ++d)
    for (Eigen::Index c = 0; c < post.n_cities(); ++c) {
      out << d << ',' << post.city_ids[static_cast<std::size_t>(c)];
      for (int i = 0; i < p; ++i) out << ',' << format_number(post.theta[d](i, c));
      out << ',' << format_number(post.mu0[d]) << ',' << format_number(post.tau[d]) << ','
          << format_number(post.rho[d]) << ',' << format_number(post.log_likelihood[d]) << '\n';
    }

  json j;
  j["format"] = "monosurf-posterior";
  j["version"] = 1;
  j["m1"] = post.m1;
  j["m2"] = post.m2;
  j["ozone"] = basis_json(post.ozone);
  j["temp"] = basis_json(post.temp);
  j["city_ids"] = post.city_ids;
  j["iterations"] = post.iterations;
  j["burn_in"] = post.burn_in;
  j["thin"] = post.thin;
  j["seed"] = post.seed;
  j["spatial"] = post.spatial;
  j["truncate"] = post.truncate;
  j["n_draws"] = post.n_draws();
  j["rho_acceptance"] = post.rho_acceptance;
  j["final_log_rho_step"] = post.final_log_rho_step;
  j["counters"] = {{"mixture_underflow", post.counters.mixture_underflow},
                   {"iw_jitter", post.counters.iw_jitter},
                   {"rho_proposed", post.counters.rho_proposed},
                   {"rho_accepted", post.counters.rho_accepted},
                   {"rho_cholesky_rejects", post.counters.rho_cholesky_rejects},
                   {"block_proposed", post.counters.block_proposed},
                   {"block_accepted", post.counters.block_accepted}};
  json mu = json::array();
  for (const auto& m : post.mu) mu.push_back(vector_json(m));
  j["mu"] = std::move(mu);
  write_json(j, json_path);
}

PosteriorSample load_posterior(const std::filesystem::path& stem) {
  auto csv_path = stem;
  csv_path += ".csv";
  auto json_path = stem;
  json_path += ".json";
  const json j = read_json(json_path);
  PosteriorSample post;
  try {
    post.m1 = j.at("m1").get<int>();
    post.m2 = j.at("m2").get<int>();
    post.ozone = basis_from(j.at("ozone"));
    post.temp = basis_from(j.at("temp"));
    post.city_ids = j.at("city_ids").get<std::vector<std::string>>();
    post.iterations = j.at("iterations").get<int>();
    post.burn_in = j.at("burn_in").get<int>();
    post.thin = j.at("thin").get<int>();
    post.seed = j.at("seed").get<std::uint64_t>();
    post.spatial = j.at("spatial").get<bool>();
    post.truncate = j.at("truncate").get<bool>();
    post.rho_acceptance = j.at("rho_acceptance").is_null() ? std::nan("") : j.at("rho_acceptance").get<double>();
    post.final_log_rho_step = j.at("final_log_rho_step").get<double>();
    const auto& c = j.at("counters");
    post.counters = {c.at("mixture_underflow").get<std::int64_t>(), c.at("iw_jitter").get<std::int64_t>(),
                     c.at("rho_proposed").get<std::int64_t>(), c.at("rho_accepted").get<std::int64_t>(),
                     c.at("rho_cholesky_rejects").get<std::int64_t>(), c.at("block_proposed").get<std::int64_t>(),
                     c.at("block_accepted").get<std::int64_t>()};
    for (const auto& m : j.at("mu")) post.mu.push_back(vector_from(m));
  } catch (const json::exception& e) {
    throw SchemaError(json_path.string() + ": " + e.what());
  }

  std::ifstream in(csv_path);
  if (!in) throw ConfigError("cannot open " + csv_path.string());
  const int p = (post.m1 + 1) * (post.m2 + 1);
  const auto n_c = static_cast<Eigen::Index>(post.city_ids.size());
  std::string line;
  std::getline(in, line);
  std::size_t line_no = 1;
  Eigen::Index c = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != p + 6) {
      throw SchemaError(csv_path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(p + 6) +
                        " columns");
    }
    if (cells[1] != post.city_ids[static_cast<std::size_t>(c)]) {
      throw SchemaError(csv_path.string() + ":" + std::to_string(line_no) + ": unexpected city " + cells[1]);
    }
    if (c == 0) post.theta.emplace_back(p, n_c);
    for (int i = 0; i < p; ++i) post.theta.back()(i, c) = parse_cell(cells[2 + static_cast<std::size_t>(i)], csv_path, line_no);
    if (c == 0) {
      post.mu0.push_back(parse_cell(cells[static_cast<std::size_t>(p) + 2], csv_path, line_no));
      post.tau.push_back(parse_cell(cells[static_cast<std::size_t>(p) + 3], csv_path, line_no));
      post.rho.push_back(parse_cell(cells[static_cast<std::size_t>(p) + 4], csv_path, line_no));
      post.log_likelihood.push_back(parse_cell(cells[static_cast<std::size_t>(p) + 5], csv_path, line_no));
    }
    c = (c + 1) % n_c;
  }
  if (c != 0) throw SchemaError(csv_path.string() + ": truncated draw");
  return post;
}

}  // namespace monosurf
