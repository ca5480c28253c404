// edfmon: open-end monitoring of the contemporary distribution function.
//
//   edfmon monitor LEARNING [STREAM]     stream a trace, exit 10 on alarm
//   edfmon select-points LEARNING        evaluation points chosen from a learning sample
//   edfmon calibrate                     Monte Carlo quantile table (JSON)
//   edfmon simulate                      data from a scenario (CSV)
//   edfmon experiment --grid FILE        rejection percentages (CSV)
//
// Exit status: 0 no alarm, 10 alarm, 1 usage error, 2 data error.

#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "edfmon/edfmon.hpp"

namespace {

using namespace edfmon;

constexpr int kExitOk = 0;
constexpr int kExitAlarm = 10;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputFile {
  std::ifstream file;
  std::istream* stream = &std::cin;

  explicit InputFile(const std::string& path) {
    if (path == "-") return;
    file.open(path);
    if (!file) throw ParseError("cannot open '" + path + "'");
    stream = &file;
  }
};

struct OutputFile {
  std::ofstream file;
  std::ostream* stream = &std::cout;

  explicit OutputFile(const std::string& path) {
    if (path.empty() || path == "-") return;
    file.open(path);
    if (!file) throw ParseError("cannot write '" + path + "'");
    stream = &file;
  }
};

std::size_t default_workers() {
  return std::max(1u, std::thread::hardware_concurrency());
}

// --- shared option groups ---

struct MonitorFlags {
  double alpha = 0.05;
  double eta = 0.001;
  double gamma = 0.0;
  double epsilon = 1e-10;
  std::optional<double> q;
  std::string quantile_table;

  void add(CLI::App* cmd) {
    cmd->add_option("--alpha", alpha, "Significance level")->capture_default_str();
    cmd->add_option("--eta", eta, "Threshold exponent offset")->capture_default_str();
    cmd->add_option("--gamma", gamma, "Early-stage damping exponent")->capture_default_str();
    cmd->add_option("--epsilon", epsilon, "Damping floor")->capture_default_str();
    cmd->add_option("--q", q, "Threshold quantile (overrides the quantile table)");
    cmd->add_option("--quantile-table", quantile_table, "Quantile table JSON");
  }

  MonitorConfig config() const {
    MonitorConfig c;
    c.alpha = alpha;
    c.eta = eta;
    c.gamma = gamma;
    c.epsilon = epsilon;
    c.q = q.value_or(0.0);
    return c;
  }

  QuantileTable table() const {
    if (quantile_table.empty()) return default_quantile_table();
    InputFile in(quantile_table);
    return quantile_table_from_json(parse_json(*in.stream, quantile_table));
  }
};

struct LrvFlags {
  std::string kernel = "qs";
  std::string bandwidth = "andrews";

  void add(CLI::App* cmd) {
    cmd->add_option("--lrv-kernel", kernel, "Long-run covariance kernel")
        ->check(CLI::IsMember({"qs", "bartlett"}))
        ->capture_default_str();
    cmd->add_option("--lrv-bandwidth", bandwidth, "'andrews' or a fixed bandwidth")
        ->capture_default_str();
  }

  LrcovSpec spec() const {
    LrcovSpec s;
    s.kernel = kernel_from_string(kernel);
    if (bandwidth != "andrews") {
      try {
        std::size_t used = 0;
        s.fixed_bandwidth = std::stod(bandwidth, &used);
        if (used != bandwidth.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw UsageError("--lrv-bandwidth must be 'andrews' or a number, got '" + bandwidth + "'");
      }
    }
    s.validate();
    return s;
  }
};

struct PointFlags {
  std::optional<std::size_t> p;
  std::optional<std::size_t> r;
  std::optional<double> kappa;
  std::string points_file;

  void add(CLI::App* cmd, bool allow_file) {
    auto* op = cmd->add_option("--p", p, "Number of quantile points (univariate data)");
    auto* orr = cmd->add_option("--r", r, "Grid resolution (multivariate data)");
    auto* ok = cmd->add_option("--kappa", kappa, "Grid retention factor (> 1)");
    op->excludes(orr)->excludes(ok);
    if (allow_file) {
      auto* of = cmd->add_option("--points-file", points_file, "CSV of evaluation points");
      of->excludes(op)->excludes(orr)->excludes(ok);
    }
  }

  EvalPoints select(const Matrix& learning) const {
    const std::size_t d = learning.cols();
    if (!points_file.empty()) return read_points(points_file, d);
    if (d == 1) {
      if (r || kappa) throw UsageError("--r/--kappa apply to multivariate data; use --p");
      return select_univariate(learning, p.value_or(5));
    }
    if (p) throw UsageError("--p applies to univariate data; use --r/--kappa");
    return select_multivariate(learning, r.value_or(d == 2 ? 4 : 3), kappa.value_or(1.5));
  }

  // Headerless coordinates, or a header where columns named u* hold
  // probabilities and are ignored.
  static EvalPoints read_points(const std::string& path, std::size_t d) {
    InputFile in(path);
    std::stringstream buffer;
    buffer << in.stream->rdbuf();
    const std::string text = buffer.str();
    std::istringstream first(text);
    std::string line;
    std::getline(first, line);
    bool header = false;
    try {
      std::istringstream probe(line);
      (void)read_csv(probe, false);
    } catch (const ParseError&) {
      header = true;
    }
    std::istringstream body(text);
    CsvReader reader(body, header);
    std::vector<std::size_t> keep;
    const auto names = reader.names();
    for (std::size_t c = 0; c < names.size(); ++c)
      if (names[c].empty() || names[c][0] != 'u') keep.push_back(c);
    Matrix pts;
    while (auto row = reader.next()) {
      if (!header) {
        pts.append_row(*row);
        continue;
      }
      std::vector<double> sel;
      for (std::size_t c : keep) sel.push_back((*row)[c]);
      pts.append_row(sel);
    }
    if (pts.cols() != d) {
      throw DimensionMismatch("points file has " + std::to_string(pts.cols()) +
                              " coordinates, data has " + std::to_string(d));
    }
    return EvalPoints::user(std::move(pts));
  }
};

Matrix read_matrix(const std::string& path, bool header) {
  InputFile in(path);
  Matrix m = read_csv(*in.stream, header);
  if (m.rows() == 0) throw EmptySample("'" + path + "' contains no observations");
  return m;
}

// --- monitor ---

struct MonitorCmd {
  std::string learning;
  std::string stream;
  std::optional<std::size_t> m;
  bool header = false;
  bool log_returns = false;
  std::optional<std::size_t> max_horizon;
  std::string out;
  std::uint64_t seed = 1;
  MonitorFlags mon;
  LrvFlags lrv;
  PointFlags pts;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("monitor", "Monitor a stream against a learning sample");
    cmd->add_option("learning", learning, "Learning sample CSV ('-' for stdin)")->required();
    cmd->add_option("stream", stream, "Monitoring stream CSV (default: stdin)");
    cmd->add_option("--m", m, "Use the first M rows of LEARNING as learning sample, the rest as stream");
    cmd->add_flag("--header", header, "Input CSVs start with a header line");
    cmd->add_flag("--log-returns", log_returns, "Convert positive levels to log-returns first");
    cmd->add_option("--max-horizon", max_horizon, "Stop after this many monitoring steps");
    cmd->add_option("--out", out, "Trace CSV (default: stdout)");
    cmd->add_option("--seed", seed, "Accepted for uniformity; monitoring is deterministic");
    mon.add(cmd);
    lrv.add(cmd);
    pts.add(cmd, true);
    cmd->callback([this] { run = [this] { return execute(); }; });
  }

  std::function<int()> run;

  int execute() {
    Matrix train;
    std::unique_ptr<InputFile> stream_in;
    std::unique_ptr<CsvReader> reader;
    Matrix rest;
    std::size_t rest_pos = 0;
    std::optional<std::vector<double>> last_level;

    if (m) {
      if (!stream.empty()) throw UsageError("--m splits one file; do not also give STREAM");
      Matrix all = read_matrix(learning, header);
      if (log_returns) all = log_returns_of(all);
      if (*m > all.rows()) throw TooFewObservations("--m exceeds the number of rows");
      train = all.slice_rows(0, *m);
      rest = all.slice_rows(*m, all.rows() - *m);
    } else {
      Matrix levels = read_matrix(learning, header);
      if (log_returns) {
        last_level.emplace(levels.row(levels.rows() - 1).begin(), levels.row(levels.rows() - 1).end());
        levels = log_returns_of(levels);
      }
      train = std::move(levels);
      stream_in = std::make_unique<InputFile>(stream.empty() ? "-" : stream);
      reader = std::make_unique<CsvReader>(*stream_in->stream, header);
    }
    if (train.rows() < 2) throw TooFewObservations("learning sample needs at least 2 rows");

    EvalPoints points = pts.select(train);
    MonitorConfig cfg = mon.config();
    if (!mon.q) {
      const QuantileTable table = mon.table();
      if (!same_alpha(table.eta, cfg.eta)) {
        throw UsageError("quantile table is for eta=" + format_double(table.eta) +
                         "; pass a matching --eta, another --quantile-table, or --q");
      }
      cfg.q = resolve_quantile(points.p(), cfg.alpha, table);
    }
    Monitor monitor(train, std::move(points), lrv.spec(), cfg);
    if (max_horizon) monitor.set_max_horizon(monitor.m() + *max_horizon);
    std::cerr << "m=" << monitor.m() << " d=" << train.cols() << " p=" << monitor.p()
              << " q=" << format_double(cfg.q) << "\n";

    OutputFile o(out);
    std::ostream& os = *o.stream;
    os << "k,detector,scaled,threshold,alarm\n" << std::flush;

    auto next_row = [&]() -> std::optional<std::vector<double>> {
      if (!reader) {
        if (rest_pos >= rest.rows()) return std::nullopt;
        const auto r = rest.row(rest_pos++);
        return std::vector<double>(r.begin(), r.end());
      }
      auto row = reader->next();
      if (!row || !log_returns) return row;
      std::vector<double> ret(row->size());
      if (row->size() != last_level->size()) {
        throw DimensionMismatch("stream row width differs from the learning sample");
      }
      for (std::size_t j = 0; j < row->size(); ++j) {
        if (!((*row)[j] > 0.0)) throw ParseError("log-returns need positive values");
        ret[j] = std::log((*row)[j] / (*last_level)[j]);
      }
      *last_level = *row;
      return ret;
    };

    while (auto row = next_row()) {
      StepResult r;
      try {
        r = monitor.step(*row);
      } catch (const HorizonExceeded&) {
        std::cerr << "maximum horizon reached without alarm\n";
        return kExitOk;
      }
      os << r.k << ',' << format_double(r.detector) << ',' << format_double(r.scaled) << ','
         << format_double(r.threshold) << ',' << (r.alarm ? 1 : 0) << '\n'
         << std::flush;
      if (r.alarm) {
        std::cerr << "alarm at k=" << r.k << "\n";
        return kExitAlarm;
      }
    }
    std::cerr << "stream exhausted without alarm at k=" << monitor.k() << "\n";
    return kExitOk;
  }

  static Matrix log_returns_of(const Matrix& levels) { return edfmon::log_returns(levels); }
};

// --- select-points ---

struct SelectPointsCmd {
  std::string learning;
  bool header = false;
  bool log_returns = false;
  std::string out;
  std::uint64_t seed = 1;
  PointFlags pts;
  std::function<int()> run;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("select-points", "Choose evaluation points from a learning sample");
    cmd->add_option("learning", learning, "Learning sample CSV ('-' for stdin)")->required();
    cmd->add_flag("--header", header, "Input CSV starts with a header line");
    cmd->add_flag("--log-returns", log_returns, "Convert positive levels to log-returns first");
    cmd->add_option("--out", out, "Points CSV (default: stdout)");
    cmd->add_option("--seed", seed, "Accepted for uniformity; selection is deterministic");
    pts.add(cmd, false);
    cmd->callback([this] { run = [this] { return execute(); }; });
  }

  int execute() {
    Matrix data = read_matrix(learning, header);
    if (log_returns) data = edfmon::log_returns(data);
    const EvalPoints ep = pts.select(data);
    OutputFile o(out);
    std::ostream& os = *o.stream;
    const std::size_t d = ep.d;
    for (std::size_t j = 0; j < d; ++j) os << (j ? "," : "") << 'x' << j + 1;
    for (std::size_t j = 0; j < d; ++j) os << ",u" << j + 1;
    os << '\n';
    for (std::size_t i = 0; i < ep.p(); ++i) {
      std::vector<double> row(ep.points.row(i).begin(), ep.points.row(i).end());
      row.insert(row.end(), ep.probs.row(i).begin(), ep.probs.row(i).end());
      write_csv_row(os, row);
    }
    std::cerr << "selected " << ep.p() << " points\n";
    return kExitOk;
  }
};

// --- calibrate ---

struct CalibrateCmd {
  std::vector<std::size_t> ps{2, 5, 10, 20};
  std::vector<double> alphas{0.01, 0.05, 0.10};
  double eta = 0.001;
  std::size_t m = 500;
  int max_exp = 16;
  std::size_t traj = 10000;
  std::string cov = "estimated";
  std::uint64_t seed = 1;
  std::size_t workers = default_workers();
  std::string out;
  LrvFlags lrv;
  std::function<int()> run;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("calibrate", "Estimate threshold quantiles by simulation");
    cmd->add_option("--p", ps, "Point counts, e.g. 2,5,10,20")->delimiter(',')->capture_default_str();
    cmd->add_option("--alpha", alphas, "Levels, e.g. 0.01,0.05,0.1")->delimiter(',')->capture_default_str();
    cmd->add_option("--eta", eta, "Threshold exponent offset")->capture_default_str();
    cmd->add_option("--m", m, "Simulated learning size")->capture_default_str();
    cmd->add_option("--max-exp", max_exp, "Largest horizon exponent r (k = m + 2^r)")->capture_default_str();
    cmd->add_option("--traj", traj, "Trajectories per p")->capture_default_str();
    cmd->add_option("--cov", cov, "Covariance used by the detector")
        ->check(CLI::IsMember({"estimated", "true-iid"}))
        ->capture_default_str();
    cmd->add_option("--seed", seed, "RNG seed")->capture_default_str();
    cmd->add_option("--workers", workers, "Worker threads");
    cmd->add_option("--out", out, "Quantile table JSON (default: stdout)");
    lrv.add(cmd);
    cmd->callback([this] { run = [this] { return execute(); }; });
  }

  int execute() {
    CalibrationConfig cfg;
    cfg.m = m;
    cfg.max_exp = max_exp;
    cfg.n_traj = traj;
    cfg.cov_mode = cov == "true-iid" ? CovMode::TrueIid : CovMode::Estimated;
    cfg.seed = seed;
    cfg.workers = std::max<std::size_t>(1, workers);
    cfg.lrv = lrv.spec();
    cfg.validate();
    if (!(eta > 0.0)) throw UsageError("--eta must be positive");
    for (double a : alphas)
      if (!(a > 0.0 && a < 0.5)) throw UsageError("--alpha values must lie in (0, 1/2)");
    for (std::size_t p : ps)
      if (p == 0) throw UsageError("--p values must be positive");

    const auto report = [](std::size_t p, double alpha, const QuantileEstimate& est) {
      std::cerr << "p=" << p << " alpha=" << format_double(alpha) << " per-r:";
      for (double v : est.per_r) std::cerr << ' ' << format_double(v);
      std::cerr << " -> q=" << format_double(est.q) << "\n";
    };
    const QuantileTable table = build_quantile_table(ps, alphas, eta, cfg, report);
    OutputFile o(out);
    *o.stream << to_json(table).dump(2) << '\n';
    return kExitOk;
  }
};

// --- simulate ---

struct SimulateCmd {
  std::string scenario;
  std::string model = "M1";
  std::size_t m = 800;
  std::size_t n_post = 1000;
  std::size_t d = 2;
  double beta = 0.0;
  std::string copula = "Independence";
  double tau = 0.0;
  std::optional<double> delta;
  std::size_t change_at = 0;
  std::optional<std::uint64_t> seed;
  std::uint64_t rep = 0;
  std::string out;
  std::function<int()> run;
  CLI::App* cmd = nullptr;

  void add(CLI::App& app) {
    cmd = app.add_subcommand("simulate", "Generate data from a scenario");
    auto* os = cmd->add_option("--scenario", scenario, "Scenario JSON");
    cmd->add_option("--model", model, "M1..M9 or MVAR1")->excludes(os)->capture_default_str();
    cmd->add_option("--m", m, "Learning size")->capture_default_str();
    cmd->add_option("--n-post", n_post, "Observations after the learning sample")->capture_default_str();
    cmd->add_option("--d", d, "MVAR1 dimension")->excludes(os)->capture_default_str();
    cmd->add_option("--beta", beta, "MVAR1 autoregressive coefficient")->excludes(os);
    cmd->add_option("--copula", copula, "MVAR1 innovation copula")->excludes(os)->capture_default_str();
    cmd->add_option("--tau", tau, "Kendall's tau of the copula")->excludes(os);
    cmd->add_option("--delta", delta, "Mean offset added after position m + change-at")->excludes(os);
    cmd->add_option("--change-at", change_at, "Change offset k")->excludes(os);
    cmd->add_option("--seed", seed, "RNG seed (overrides the scenario's)");
    cmd->add_option("--rep", rep, "Replication index (substream)")->capture_default_str();
    cmd->add_option("--out", out, "Data CSV (default: stdout)");
    cmd->callback([this] { run = [this] { return execute(); }; });
  }

  ScenarioSpec build() const {
    if (!scenario.empty()) {
      InputFile in(scenario);
      ScenarioSpec s = scenario_from_json(parse_json(*in.stream, scenario));
      if (cmd->count("--m")) s.m = m;
      if (cmd->count("--n-post")) s.n_post = n_post;
      return s;
    }
    ScenarioSpec s;
    if (model == "MVAR1") {
      MvAr1Model mv;
      mv.d = d;
      mv.beta = beta;
      mv.copula = CopulaSpec{copula_family_from_string(copula), tau, d};
      validate(mv.copula);
      s.model = mv;
    } else {
      s.model = named_model(model);
    }
    s.m = m;
    s.n_post = n_post;
    if (delta) s.change = ChangeSpec{change_at, MeanOffset{*delta}};
    return s;
  }

  int execute() {
    ScenarioSpec s = build();
    if (seed) s.seed = *seed;
    const Matrix data = generate_scenario(s, rep);
    OutputFile o(out);
    std::ostream& os = *o.stream;
    os << "index";
    for (std::size_t j = 0; j < data.cols(); ++j) os << ",x" << j + 1;
    os << '\n';
    std::vector<double> row(data.cols() + 1);
    for (std::size_t i = 0; i < data.rows(); ++i) {
      row[0] = static_cast<double>(i + 1);
      std::copy(data.row(i).begin(), data.row(i).end(), row.begin() + 1);
      write_csv_row(os, row);
    }
    return kExitOk;
  }
};

// --- experiment ---

struct ExperimentCmd {
  std::string grid;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::string quantile_table;
  std::size_t workers = default_workers();
  std::string out;
  std::function<int()> run;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("experiment", "Run a grid of Monte Carlo experiments");
    cmd->add_option("--grid", grid, "JSON array of experiment specs")->required();
    cmd->add_option("--seed", seed, "RNG seed (overrides every scenario's)");
    cmd->add_option("--reps", reps, "Replications (overrides every spec's)");
    cmd->add_option("--quantile-table", quantile_table, "Quantile table JSON");
    cmd->add_option("--workers", workers, "Worker threads");
    cmd->add_option("--out", out, "Results CSV (default: stdout)");
    cmd->callback([this] { run = [this] { return execute(); }; });
  }

  int execute() {
    InputFile in(grid);
    std::vector<ExperimentSpec> specs = experiments_from_json(parse_json(*in.stream, grid));
    std::optional<QuantileTable> table;
    if (!quantile_table.empty()) {
      InputFile tin(quantile_table);
      table = quantile_table_from_json(parse_json(*tin.stream, quantile_table));
    }
    OutputFile o(out);
    std::ostream& os = *o.stream;
    write_results_header(os);
    for (auto& spec : specs) {
      if (seed) spec.scenario.seed = *seed;
      if (reps) spec.reps = *reps;
      if (table) spec.table = *table;
      spec.workers = std::max<std::size_t>(1, workers);
      if (!(spec.monitor.q > 0.0) && !same_alpha(spec.table.eta, spec.monitor.eta)) {
        throw UsageError("experiment '" + spec.id + "': quantile table eta differs from eta");
      }
      const ResultRow row = run_experiment(spec);
      if (row.reps_failed > 0) {
        std::cerr << "experiment '" << spec.id << "': " << row.reps_failed
                  << " failed replications excluded\n";
      }
      write_result_row(os, spec, row);
      os << std::flush;
    }
    return kExitOk;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-end nonparametric monitoring of the contemporary distribution function"};
  app.require_subcommand(1);
  MonitorCmd monitor;
  SelectPointsCmd select;
  CalibrateCmd calibrate;
  SimulateCmd simulate;
  ExperimentCmd experiment;
  monitor.add(app);
  select.add(app);
  calibrate.add(app);
  simulate.add(app);
  experiment.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::function<int()> run;
  for (auto* r : {&monitor.run, &select.run, &calibrate.run, &simulate.run, &experiment.run})
    if (*r) run = *r;

  try {
    return run();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const AlphaNotInTable& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const POutOfRange& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
