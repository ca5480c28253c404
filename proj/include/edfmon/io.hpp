#pragma once

// CSV and JSON formats used by the command-line tool.
//
// CSV input is headerless numeric columns, one observation per row. With a
// header line, a column named "index" is dropped. JSON schemas:
//
//   quantile table  {"eta", "entries": [{"p","alpha","q"}], "interp": [{"alpha","beta1","beta2","beta3"}]}
//   scenario        {"model", "m", "n_post", "seed", "change"}
//   experiment      {"id", "scenario", "reps", "alpha", "eta", "gamma", "epsilon", "q",
//                    "p", "r", "kappa", "count_rule", "lrv_kernel", "lrv_bandwidth"}

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "edfmon/calibrate.hpp"
#include "edfmon/copula.hpp"
#include "edfmon/errors.hpp"
#include "edfmon/experiments.hpp"
#include "edfmon/genmodels.hpp"
#include "edfmon/lrcov.hpp"
#include "edfmon/matrix.hpp"

namespace edfmon {

using Json = nlohmann::json;

// --- CSV ---

/// Shortest decimal representation that round-trips.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  for (;;) {
    const auto pos = line.find(',');
    out.push_back(trim(line.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    line.remove_prefix(pos + 1);
  }
  return out;
}

inline double parse_double(std::string_view field, std::size_t line_no) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line_no) + ": '" + std::string(field) +
                     "' is not a finite number (header line? use --header)");
  }
  return v;
}

}  // namespace detail

/// Row-at-a-time reader so that monitoring can consume an unbounded stream.
class CsvReader {
 public:
  CsvReader(std::istream& in, bool header) : in_(in) {
    if (header) {
      std::string line;
      if (!next_line(line)) return;
      const auto names = detail::split_fields(line);
      names_.assign(names.begin(), names.end());
      for (std::size_t c = 0; c < names.size(); ++c) {
        if (names[c] == "index") index_col_ = c;
      }
    }
  }

  /// Column names after dropping "index"; empty without a header.
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (std::size_t c = 0; c < names_.size(); ++c)
      if (!index_col_ || c != *index_col_) out.push_back(names_[c]);
    return out;
  }

  std::size_t line() const noexcept { return line_; }

  std::optional<std::vector<double>> next() {
    std::string line;
    if (!next_line(line)) return std::nullopt;
    const auto fields = detail::split_fields(line);
    const std::size_t expected = width_ ? *width_ : (names_.empty() ? fields.size() : names_.size());
    if (fields.size() != expected) {
      throw ParseError("line " + std::to_string(line_) + ": expected " + std::to_string(expected) +
                       " fields, found " + std::to_string(fields.size()));
    }
    width_ = expected;
    std::vector<double> row;
    row.reserve(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (index_col_ && c == *index_col_) continue;
      row.push_back(detail::parse_double(fields[c], line_));
    }
    return row;
  }

 private:
  bool next_line(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_;
      if (!detail::trim(line).empty()) return true;
    }
    return false;
  }

  std::istream& in_;
  std::size_t line_ = 0;
  std::vector<std::string> names_;
  std::optional<std::size_t> index_col_;
  std::optional<std::size_t> width_;
};

inline Matrix read_csv(std::istream& in, bool header) {
  CsvReader reader(in, header);
  Matrix out;
  while (auto row = reader.next()) out.append_row(*row);
  return out;
}

inline void write_csv_row(std::ostream& out, std::span<const double> row) {
  for (std::size_t c = 0; c < row.size(); ++c) {
    if (c) out << ',';
    out << format_double(row[c]);
  }
  out << '\n';
}

/// log(x_i / x_{i-1}) per column.
inline Matrix log_returns(const Matrix& closes) {
  if (closes.rows() < 2) throw TooFewObservations("log-returns need at least 2 rows");
  Matrix out(closes.rows() - 1, closes.cols());
  for (std::size_t i = 1; i < closes.rows(); ++i)
    for (std::size_t j = 0; j < closes.cols(); ++j) {
      const double a = closes(i - 1, j), b = closes(i, j);
      if (!(a > 0.0 && b > 0.0)) throw ParseError("log-returns need positive values");
      out(i - 1, j) = std::log(b / a);
    }
  return out;
}

// --- JSON ---

namespace detail {

inline void check_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                       std::string_view context) {
  if (!j.is_object()) throw ParseError(std::string(context) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ParseError("unknown key '" + key + "' in " + std::string(context));
  }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <class T>
T get_req(const Json& j, const char* key, std::string_view context) {
  if (!j.contains(key)) {
    throw ParseError("missing key '" + std::string(key) + "' in " + std::string(context));
  }
  return get_or<T>(j, key, T{});
}

}  // namespace detail

inline Json to_json(const QuantileTable& t) {
  Json j;
  j["eta"] = t.eta;
  j["entries"] = Json::array();
  for (const auto& e : t.entries) j["entries"].push_back({{"p", e.p}, {"alpha", e.alpha}, {"q", e.q}});
  j["interp"] = Json::array();
  for (const auto& r : t.interp) {
    j["interp"].push_back(
        {{"alpha", r.alpha}, {"beta1", r.beta1}, {"beta2", r.beta2}, {"beta3", r.beta3}});
  }
  return j;
}

inline QuantileTable quantile_table_from_json(const Json& j) {
  detail::check_keys(j, {"eta", "entries", "interp"}, "quantile table");
  QuantileTable t;
  t.eta = detail::get_req<double>(j, "eta", "quantile table");
  for (const auto& e : j.value("entries", Json::array())) {
    detail::check_keys(e, {"p", "alpha", "q"}, "quantile table entry");
    t.entries.push_back({detail::get_req<std::size_t>(e, "p", "entry"),
                         detail::get_req<double>(e, "alpha", "entry"),
                         detail::get_req<double>(e, "q", "entry")});
  }
  for (const auto& r : j.value("interp", Json::array())) {
    detail::check_keys(r, {"alpha", "beta1", "beta2", "beta3"}, "interpolation row");
    t.interp.push_back({detail::get_req<double>(r, "alpha", "interp"),
                        detail::get_req<double>(r, "beta1", "interp"),
                        detail::get_req<double>(r, "beta2", "interp"),
                        detail::get_req<double>(r, "beta3", "interp")});
  }
  t.validate();
  return t;
}

/// Models M1-M9 of the simulation study.
inline Model named_model(std::string_view name) {
  if (name == "M1") return Ar1Model{0.0};
  if (name == "M2") return Ar1Model{0.1};
  if (name == "M3") return Ar1Model{0.3};
  if (name == "M4") return Ar1Model{0.5};
  if (name == "M5") return Ar1Model{0.7};
  if (name == "M6") return Ar1Model{-0.7};
  if (name == "M7") return Garch11Model{};
  if (name == "M8") return SinArModel{};
  if (name == "M9") return ExpArModel{};
  throw ParseError("unknown model '" + std::string(name) + "' (expected M1..M9 or an object)");
}

inline Json to_json(const CopulaSpec& c) {
  return {{"family", std::string(to_string(c.family))}, {"tau", c.tau}, {"d", c.d}};
}

inline CopulaSpec copula_from_json(const Json& j, std::size_t d) {
  detail::check_keys(j, {"family", "tau", "d"}, "copula");
  CopulaSpec c;
  c.family = copula_family_from_string(detail::get_req<std::string>(j, "family", "copula"));
  c.tau = detail::get_or<double>(j, "tau", 0.0);
  c.d = detail::get_or<std::size_t>(j, "d", d);
  validate(c);
  return c;
}

inline Json to_json(const Model& model) {
  return std::visit(
      [](const auto& m) -> Json {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Ar1Model>) return {{"type", "AR1"}, {"beta", m.beta}};
        if constexpr (std::is_same_v<M, Garch11Model>) {
          return {{"type", "GARCH11"}, {"omega", m.omega}, {"alpha", m.alpha}, {"beta", m.beta}};
        }
        if constexpr (std::is_same_v<M, SinArModel>) return {{"type", "SinAR"}};
        if constexpr (std::is_same_v<M, ExpArModel>) return {{"type", "ExpAR"}};
        if constexpr (std::is_same_v<M, MvAr1Model>) {
          return {{"type", "MVAR1"}, {"d", m.d}, {"beta", m.beta}, {"copula", to_json(m.copula)}};
        }
      },
      model);
}

inline Model model_from_json(const Json& j) {
  if (j.is_string()) return named_model(j.get<std::string>());
  const auto type = detail::get_req<std::string>(j, "type", "model");
  if (type == "AR1") {
    detail::check_keys(j, {"type", "beta"}, "AR1 model");
    return Ar1Model{detail::get_or<double>(j, "beta", 0.0)};
  }
  if (type == "GARCH11") {
    detail::check_keys(j, {"type", "omega", "alpha", "beta"}, "GARCH11 model");
    Garch11Model g;
    g.omega = detail::get_or<double>(j, "omega", g.omega);
    g.alpha = detail::get_or<double>(j, "alpha", g.alpha);
    g.beta = detail::get_or<double>(j, "beta", g.beta);
    return g;
  }
  if (type == "SinAR") {
    detail::check_keys(j, {"type"}, "SinAR model");
    return SinArModel{};
  }
  if (type == "ExpAR") {
    detail::check_keys(j, {"type"}, "ExpAR model");
    return ExpArModel{};
  }
  if (type == "MVAR1") {
    detail::check_keys(j, {"type", "d", "beta", "copula"}, "MVAR1 model");
    MvAr1Model mv;
    mv.d = detail::get_or<std::size_t>(j, "d", 2);
    if (mv.d < 2) throw ParseError("MVAR1 needs d >= 2");
    mv.beta = detail::get_or<double>(j, "beta", 0.0);
    mv.copula = j.contains("copula") ? copula_from_json(j.at("copula"), mv.d) : CopulaSpec{};
    mv.copula.d = mv.d;
    return mv;
  }
  throw ParseError("unknown model type '" + type + "'");
}

inline Json to_json(const ChangeSpec& c) {
  Json j = std::visit(
      [](const auto& k) -> Json {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, MeanOffset>) return {{"type", "MeanOffset"}, {"delta", k.delta}};
        if constexpr (std::is_same_v<K, FirstComponentOffset>) {
          return {{"type", "FirstComponentOffset"}, {"delta", k.delta}};
        }
        if constexpr (std::is_same_v<K, VarianceScale>) {
          return {{"type", "VarianceScale"}, {"sigma", k.sigma}};
        }
        if constexpr (std::is_same_v<K, MarginTDof>) {
          return {{"type", "MarginTDof"},
                  {"nu_pre", k.nu_pre},
                  {"nu_post", k.nu_post},
                  {"component", k.component}};
        }
        if constexpr (std::is_same_v<K, CopulaSwap>) {
          return {{"type", "CopulaSwap"}, {"copula", to_json(k.post)}};
        }
        if constexpr (std::is_same_v<K, TauChange>) return {{"type", "TauChange"}, {"tau_post", k.tau_post}};
      },
      c.kind);
  j["at"] = c.at;
  return j;
}

inline ChangeSpec change_from_json(const Json& j, std::size_t d) {
  ChangeSpec c;
  const auto type = detail::get_req<std::string>(j, "type", "change");
  c.at = detail::get_or<std::size_t>(j, "at", 0);
  if (type == "MeanOffset" || type == "FirstComponentOffset") {
    detail::check_keys(j, {"type", "at", "delta"}, "change");
    const double delta = detail::get_req<double>(j, "delta", "change");
    if (type == "MeanOffset") {
      c.kind = MeanOffset{delta};
    } else {
      c.kind = FirstComponentOffset{delta};
    }
  } else if (type == "VarianceScale") {
    detail::check_keys(j, {"type", "at", "sigma"}, "change");
    c.kind = VarianceScale{detail::get_req<double>(j, "sigma", "change")};
  } else if (type == "MarginTDof") {
    detail::check_keys(j, {"type", "at", "nu_pre", "nu_post", "component"}, "change");
    MarginTDof t;
    t.nu_pre = detail::get_or<double>(j, "nu_pre", t.nu_pre);
    t.nu_post = detail::get_or<double>(j, "nu_post", t.nu_post);
    t.component = detail::get_or<std::size_t>(j, "component", 0);
    c.kind = t;
  } else if (type == "CopulaSwap") {
    detail::check_keys(j, {"type", "at", "copula"}, "change");
    if (!j.contains("copula")) throw ParseError("CopulaSwap needs 'copula'");
    c.kind = CopulaSwap{copula_from_json(j.at("copula"), d)};
  } else if (type == "TauChange") {
    detail::check_keys(j, {"type", "at", "tau_post"}, "change");
    c.kind = TauChange{detail::get_req<double>(j, "tau_post", "change")};
  } else {
    throw ParseError("unknown change type '" + type + "'");
  }
  return c;
}

inline Json to_json(const ScenarioSpec& s) {
  Json j{{"model", to_json(s.model)}, {"m", s.m}, {"n_post", s.n_post}, {"seed", s.seed}};
  if (s.change) j["change"] = to_json(*s.change);
  return j;
}

inline ScenarioSpec scenario_from_json(const Json& j) {
  detail::check_keys(j, {"model", "m", "n_post", "seed", "change"}, "scenario");
  ScenarioSpec s;
  if (!j.contains("model")) throw ParseError("scenario needs 'model'");
  s.model = model_from_json(j.at("model"));
  s.m = detail::get_or<std::size_t>(j, "m", s.m);
  s.n_post = detail::get_or<std::size_t>(j, "n_post", s.n_post);
  s.seed = detail::get_or<std::uint64_t>(j, "seed", s.seed);
  if (j.contains("change")) s.change = change_from_json(j.at("change"), model_dim(s.model));
  return s;
}

inline Kernel kernel_from_string(std::string_view s) {
  if (s == "qs") return Kernel::QuadraticSpectral;
  if (s == "bartlett") return Kernel::Bartlett;
  throw ParseError("unknown kernel '" + std::string(s) + "' (expected qs or bartlett)");
}

inline ExperimentSpec experiment_from_json(const Json& j) {
  detail::check_keys(j,
                     {"id", "scenario", "reps", "alpha", "eta", "gamma", "epsilon", "q", "p", "r",
                      "kappa", "count_rule", "lrv_kernel", "lrv_bandwidth"},
                     "experiment");
  ExperimentSpec e;
  e.id = detail::get_or<std::string>(j, "id", "");
  if (!j.contains("scenario")) throw ParseError("experiment needs 'scenario'");
  e.scenario = scenario_from_json(j.at("scenario"));
  e.reps = detail::get_or<std::size_t>(j, "reps", e.reps);
  e.monitor.alpha = detail::get_or<double>(j, "alpha", e.monitor.alpha);
  e.monitor.eta = detail::get_or<double>(j, "eta", e.monitor.eta);
  e.monitor.gamma = detail::get_or<double>(j, "gamma", e.monitor.gamma);
  e.monitor.epsilon = detail::get_or<double>(j, "epsilon", e.monitor.epsilon);
  e.monitor.q = detail::get_or<double>(j, "q", 0.0);
  e.p = detail::get_or<std::size_t>(j, "p", e.p);
  e.r = detail::get_or<std::size_t>(j, "r", model_dim(e.scenario.model) >= 3 ? 3 : 4);
  e.kappa = detail::get_or<double>(j, "kappa", e.kappa);
  const auto rule = detail::get_or<std::string>(j, "count_rule", "AnyExceedance");
  if (rule == "AnyExceedance") {
    e.count_rule = CountRule::AnyExceedance;
  } else if (rule == "PostChangeOnly") {
    e.count_rule = CountRule::PostChangeOnly;
  } else {
    throw ParseError("unknown count_rule '" + rule + "'");
  }
  e.lrv.kernel = kernel_from_string(detail::get_or<std::string>(j, "lrv_kernel", "qs"));
  if (j.contains("lrv_bandwidth")) {
    const auto& b = j.at("lrv_bandwidth");
    if (b.is_number()) {
      e.lrv.fixed_bandwidth = b.get<double>();
    } else if (!(b.is_string() && b.get<std::string>() == "andrews")) {
      throw ParseError("lrv_bandwidth must be \"andrews\" or a number");
    }
  }
  e.validate();
  return e;
}

/// Accepts a single experiment object or an array of them.
inline std::vector<ExperimentSpec> experiments_from_json(const Json& j) {
  std::vector<ExperimentSpec> out;
  if (j.is_array()) {
    for (const auto& e : j) out.push_back(experiment_from_json(e));
  } else {
    out.push_back(experiment_from_json(j));
  }
  return out;
}

inline Json parse_json(std::istream& in, std::string_view source) {
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string(source) + ": " + e.what());
  }
}

// --- results ---

inline std::string describe(const Model& model) {
  return std::visit(
      [](const auto& m) -> std::string {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Ar1Model>) return "AR1(" + format_double(m.beta) + ")";
        if constexpr (std::is_same_v<M, Garch11Model>) {
          return "GARCH11(" + format_double(m.omega) + ";" + format_double(m.alpha) + ";" +
                 format_double(m.beta) + ")";
        }
        if constexpr (std::is_same_v<M, SinArModel>) return "SinAR";
        if constexpr (std::is_same_v<M, ExpArModel>) return "ExpAR";
        if constexpr (std::is_same_v<M, MvAr1Model>) {
          return "MVAR1(" + std::to_string(m.d) + ";" + format_double(m.beta) + ";" +
                 std::string(to_string(m.copula.family)) + ";" + format_double(m.copula.tau) + ")";
        }
      },
      model);
}

inline std::string describe(const ChangeKind& kind) {
  return std::visit(
      [](const auto& k) -> std::string {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, MeanOffset>) return "MeanOffset(" + format_double(k.delta) + ")";
        if constexpr (std::is_same_v<K, FirstComponentOffset>) {
          return "FirstComponentOffset(" + format_double(k.delta) + ")";
        }
        if constexpr (std::is_same_v<K, VarianceScale>) {
          return "VarianceScale(" + format_double(k.sigma) + ")";
        }
        if constexpr (std::is_same_v<K, MarginTDof>) {
          return "MarginTDof(" + format_double(k.nu_pre) + ";" + format_double(k.nu_post) + ";" +
                 std::to_string(k.component) + ")";
        }
        if constexpr (std::is_same_v<K, CopulaSwap>) {
          return "CopulaSwap(" + std::string(to_string(k.post.family)) + ";" +
                 format_double(k.post.tau) + ")";
        }
        if constexpr (std::is_same_v<K, TauChange>) return "TauChange(" + format_double(k.tau_post) + ")";
      },
      kind);
}

inline void write_results_header(std::ostream& out) {
  out << "id,model,m,horizon,change,change_at,seed,alpha,eta,gamma,p,r,kappa,count_rule,"
         "reps,reps_failed,reps_detected,rejection_pct,mean_delay,p_bar\n";
}

inline void write_result_row(std::ostream& out, const ExperimentSpec& spec, const ResultRow& row) {
  const auto& s = spec.scenario;
  const bool uni = model_dim(s.model) == 1;
  out << row.id << ',' << describe(s.model) << ',' << s.m << ',' << s.n_post << ','
      << (s.change ? describe(s.change->kind) : "none") << ','
      << (s.change ? std::to_string(s.change->at) : "") << ',' << s.seed << ','
      << format_double(spec.monitor.alpha) << ',' << format_double(spec.monitor.eta) << ','
      << format_double(spec.monitor.gamma) << ',' << (uni ? std::to_string(spec.p) : "") << ','
      << (uni ? "" : std::to_string(spec.r)) << ',' << (uni ? "" : format_double(spec.kappa))
      << ',' << (spec.count_rule == CountRule::PostChangeOnly ? "PostChangeOnly" : "AnyExceedance")
      << ',' << row.reps << ',' << row.reps_failed << ',' << row.reps_detected << ','
      << format_double(row.rejection_pct) << ','
      << (row.mean_delay ? format_double(*row.mean_delay) : "") << ','
      << format_double(row.p_bar) << '\n';
}

}  // namespace edfmon
