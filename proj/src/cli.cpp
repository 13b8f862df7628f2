#include "ectn/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <json.hpp>
#include <sstream>

#include "ectn/serialize.hpp"

namespace ectn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  return in;
}

json dims_json(const Dims& d) { return json::array({d.users, d.services, d.times}); }
Dims dims_from(const json& j) { return Dims{j.at(0).get<Index>(), j.at(1).get<Index>(), j.at(2).get<Index>()}; }

std::string run_name(std::size_t r) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "run_%02zu", r);
  return buf;
}

void write_loss_csv(const TrainReport& report, std::ostream& out) {
  out << "epoch,loss\n0," << format_double(report.initial_loss) << '\n';
  for (std::size_t e = 0; e < report.loss_trace.size(); ++e)
    out << e + 1 << ',' << format_double(report.loss_trace[e]) << '\n';
}

void write_timing_csv(const TrainReport& report, std::ostream& out) {
  out << "epoch,seconds\n";
  for (std::size_t e = 0; e < report.epoch_seconds.size(); ++e)
    out << e + 1 << ',' << report.epoch_seconds[e] << '\n';
  out << "# converged " << (report.converged ? "true" : "false") << ", epochs " << report.epochs_run << '\n';
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), last, v);
  if (ec != std::errc() || ptr != last) throw CLI::ValidationError("grid", "not a number: " + s);
  return v;
}

}  // namespace

std::string manifest_to_json(const ExperimentManifest& m) {
  json j;
  json src;
  if (m.source.path) {
    src["path"] = m.source.path->string();
  } else {
    const SyntheticSpec& s = m.source.synthetic;
    src["synthetic"] = {{"dims", dims_json(s.dims)}, {"rank", s.rank},
                        {"expansion", s.expansion},  {"density", s.density},
                        {"noise_sigma", s.noise_sigma}, {"bias_scale", s.bias_scale},
                        {"seed", s.seed}};
  }
  if (m.source.dims_override) src["dims"] = dims_json(*m.source.dims_override);
  j["source"] = src;
  j["ratios"] = {m.ratios.train, m.ratios.validation, m.ratios.test};
  j["repeats"] = m.repeats;
  j["split_seed"] = m.split_seed;
  const TrainConfig& t = m.train;
  j["train"] = {{"rank", t.model.rank},
                {"expansion", t.model.expansion},
                {"init_scale", t.model.init_scale},
                {"seed", t.model.seed},
                {"lambda", t.lambda},
                {"max_epochs", t.max_epochs},
                {"tol", t.tol},
                {"min_denominator", t.update.min_denominator},
                {"partitions", t.update.partitions},
                {"threads", t.update.threads},
                {"schedule", t.update.schedule == Schedule::Sequential ? "sequential" : "simultaneous"}};
  j["out_dir"] = m.out_dir.string();
  return j.dump(2) + "\n";
}

ExperimentManifest manifest_from_json(const std::string& text) {
  ExperimentManifest m;
  try {
    const json j = json::parse(text);
    const json& src = j.at("source");
    if (src.contains("path")) {
      m.source.path = src.at("path").get<std::string>();
    } else {
      const json& s = src.at("synthetic");
      SyntheticSpec& spec = m.source.synthetic;
      spec.dims = dims_from(s.at("dims"));
      spec.rank = s.at("rank");
      spec.expansion = s.at("expansion");
      spec.density = s.at("density");
      spec.noise_sigma = s.at("noise_sigma");
      spec.bias_scale = s.at("bias_scale");
      spec.seed = s.at("seed");
    }
    if (src.contains("dims")) m.source.dims_override = dims_from(src.at("dims"));
    const json& r = j.at("ratios");
    m.ratios = Ratios{r.at(0), r.at(1), r.at(2)};
    m.repeats = j.at("repeats");
    m.split_seed = j.at("split_seed");
    const json& t = j.at("train");
    m.train.model.rank = t.at("rank");
    m.train.model.expansion = t.at("expansion");
    m.train.model.init_scale = t.at("init_scale");
    m.train.model.seed = t.at("seed");
    m.train.lambda = t.at("lambda");
    m.train.max_epochs = t.at("max_epochs");
    m.train.tol = t.at("tol");
    m.train.update.min_denominator = t.value("min_denominator", 1e-12);
    m.train.update.partitions = t.value("partitions", std::size_t{1});
    m.train.update.threads = t.value("threads", std::size_t{1});
    m.train.update.schedule =
        t.value("schedule", std::string("sequential")) == "simultaneous" ? Schedule::Simultaneous : Schedule::Sequential;
    m.out_dir = j.at("out_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedLine, std::string("manifest: ") + e.what());
  }
  return m;
}

ObservedTensor load_tensor(const DataSource& source, std::ostream& log) {
  if (!source.path) {
    SyntheticSpec spec = source.synthetic;
    if (source.dims_override) spec.dims = *source.dims_override;
    return generate_synthetic(spec).tensor;
  }
  std::ifstream in = open_in(*source.path);
  ParsedLog parsed = parse_qos_log(in, source.dims_override);
  if (parsed.dims_inferred)
    log << "warning: dims inferred from max index as " << parsed.dims.users << "x" << parsed.dims.services << "x"
        << parsed.dims.times << "; pass --dims to declare them\n";
  if (parsed.skipped_sentinels > 0) log << "skipped " << parsed.skipped_sentinels << " sentinel records\n";
  if (!parsed.dims.positive()) throw Error(ErrorCode::MalformedLine, "no usable records in " + source.path->string());
  return ObservedTensor::build(parsed.dims, std::move(parsed.entries));
}

Metrics cmd_train(const ExperimentManifest& manifest, std::ostream& log) {
  const ObservedTensor tensor = load_tensor(manifest.source, log);
  log << "tensor " << tensor.dims().users << "x" << tensor.dims().services << "x" << tensor.dims().times << ", "
      << tensor.size() << " entries, density " << tensor.density() << '\n';

  fs::create_directories(manifest.out_dir);
  {
    std::ofstream out = open_out(manifest.out_dir / "manifest.json");
    out << manifest_to_json(manifest);
  }

  const auto splits = repeated_splits(tensor, manifest.ratios, manifest.split_seed, manifest.repeats);
  std::vector<Metrics> runs;
  for (std::size_t r = 0; r < splits.size(); ++r) {
    const DatasetSplit& s = splits[r];
    const fs::path dir = manifest.out_dir / run_name(r);
    fs::create_directories(dir);

    TrainConfig cfg = manifest.train;
    cfg.model.seed = manifest.train.model.seed + r;
    const auto result = train(tensor, s, cfg);
    const std::span<const std::size_t> eval_set = s.test.empty() ? std::span<const std::size_t>(s.train) : s.test;
    if (s.test.empty()) log << run_name(r) << ": test set is empty, reporting training-set metrics\n";
    const Metrics m = evaluate(result.model, tensor, eval_set);
    runs.push_back(m);

    save_model(result.model, dir / "model.bin");
    {
      std::ofstream out = open_out(dir / "split.txt");
      write_split_manifest(s, out);
    }
    {
      std::ofstream out = open_out(dir / "loss.csv");
      write_loss_csv(result.report, out);
    }
    {
      std::ofstream out = open_out(dir / "timing.csv");
      write_timing_csv(result.report, out);
    }
    {
      std::ofstream out = open_out(dir / "metrics.csv");
      write_metrics_csv(m, out);
    }
    log << run_name(r) << ": epochs " << result.report.epochs_run << (result.report.converged ? " (converged)" : " (cap)")
        << ", test rmse " << format_double(m.rmse) << ", mae " << format_double(m.mae) << '\n';
  }

  const Metrics total = aggregate(runs);
  std::ofstream out = open_out(manifest.out_dir / "aggregate.csv");
  write_metrics_csv(total, out);
  log << "aggregate: rmse " << format_double(total.rmse) << ", mae " << format_double(total.mae) << '\n';
  return total;
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, ':');) parts.push_back(parse_double(item));
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0])
      throw CLI::ValidationError("grid", "expected start:stop:step with step > 0");
    const auto n = static_cast<std::size_t>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9)) + 1;
    for (std::size_t s = 0; s < n; ++s) out.push_back(std::round((parts[0] + s * parts[2]) * 1e12) / 1e12);
  } else {
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, ',');) out.push_back(parse_double(item));
  }
  if (out.empty()) throw CLI::ValidationError("grid", "empty grid");
  return out;
}

GridResult cmd_grid_lambda(const ExperimentManifest& manifest, std::span<const double> grid, std::ostream& log) {
  if (grid.empty()) throw Error(ErrorCode::InvalidConfig, "empty lambda grid");
  const ObservedTensor tensor = load_tensor(manifest.source, log);
  const DatasetSplit s = split(tensor, manifest.ratios, manifest.split_seed);
  if (s.validation.empty()) throw Error(ErrorCode::BadRatios, "validation set is empty");

  std::vector<double> lambdas(grid.begin(), grid.end());
  std::sort(lambdas.begin(), lambdas.end());

  GridResult result;
  for (double lambda : lambdas) {
    TrainConfig cfg = manifest.train;
    cfg.lambda = lambda;
    const auto trained = train(tensor, s, cfg);
    const Metrics m = evaluate(trained.model, tensor, s.validation);
    result.rows.push_back({lambda, m});
    log << "lambda " << format_double(lambda) << ": validation rmse " << format_double(m.rmse) << '\n';
  }
  // rows are ascending in lambda, so strict < keeps the smaller lambda on ties
  std::size_t best = 0;
  for (std::size_t r = 1; r < result.rows.size(); ++r)
    if (result.rows[r].validation.rmse < result.rows[best].validation.rmse) best = r;
  result.best_lambda = result.rows[best].lambda;

  fs::create_directories(manifest.out_dir);
  std::ofstream out = open_out(manifest.out_dir / "grid.csv");
  out << "lambda,validation_rmse,validation_mae\n";
  for (const GridRow& row : result.rows)
    out << format_double(row.lambda) << ',' << format_double(row.validation.rmse) << ','
        << format_double(row.validation.mae) << '\n';
  out << "# best " << format_double(result.best_lambda) << '\n';
  log << "best lambda " << format_double(result.best_lambda) << '\n';
  return result;
}

Metrics cmd_eval(const fs::path& model_path, const DataSource& source, const fs::path& split_path,
                 const std::optional<fs::path>& out_path, std::ostream& log) {
  const EctnModeld model = load_model(model_path);
  const ObservedTensor tensor = load_tensor(source, log);
  std::ifstream in = open_in(split_path);
  const DatasetSplit s = read_split_manifest(in);
  for (const auto* part : {&s.train, &s.validation, &s.test})
    for (std::size_t p : *part)
      if (p >= tensor.size()) throw Error(ErrorCode::IndexOutOfRange, "split position beyond tensor entries");
  if (s.test.empty()) log << "test set is empty, reporting training-set metrics\n";
  const Metrics m = evaluate(model, tensor, s.test.empty() ? std::span<const std::size_t>(s.train) : s.test);
  if (out_path) {
    std::ofstream out = open_out(*out_path);
    write_metrics_csv(m, out);
  }
  return m;
}

double measure_epoch_seconds(const ObservedTensor& t, std::span<const std::size_t> positions, const TrainConfig& cfg,
                             Index epochs) {
  TrainConfig run = cfg;
  run.max_epochs = epochs + 1;
  run.tol = 1e-300;  // never stop early while timing
  auto result = train(t, positions, run);
  std::vector<double> times(result.report.epoch_seconds.begin() + 1, result.report.epoch_seconds.end());
  if (times.empty()) return result.report.epoch_seconds.front();
  std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
  return times[times.size() / 2];
}

std::vector<ScalingRow> cmd_bench_scaling(const SyntheticSpec& base, std::span<const double> entry_factors,
                                          std::span<const Index> rm_factors, const TrainConfig& cfg, Index epochs,
                                          std::ostream& log) {
  const auto measure = [&](const char* kind, double factor, const SyntheticSpec& spec, Index expansion) {
    const SyntheticData data = generate_synthetic(spec);
    std::vector<std::size_t> all(data.tensor.size());
    for (std::size_t p = 0; p < all.size(); ++p) all[p] = p;
    TrainConfig run = cfg;
    run.model.expansion = expansion;
    ScalingRow row{kind, factor, all.size(), run.model.rank, expansion,
                   measure_epoch_seconds(data.tensor, all, run, epochs)};
    log << kind << " x" << factor << ": " << row.entries << " entries, R=" << row.rank << " M=" << row.expansion
        << ", " << row.seconds_per_epoch << " s/epoch\n";
    return row;
  };

  std::vector<ScalingRow> rows;
  rows.push_back(measure("baseline", 1.0, base, cfg.model.expansion));
  for (double factor : entry_factors) {
    if (!(factor >= 1.0)) throw Error(ErrorCode::InvalidConfig, "scaling factors must be >= 1");
    SyntheticSpec spec = base;
    spec.density = base.density * factor;
    rows.push_back(measure("entries", factor, spec, cfg.model.expansion));
  }
  for (Index factor : rm_factors) {
    if (factor < 1) throw Error(ErrorCode::InvalidConfig, "scaling factors must be >= 1");
    rows.push_back(measure("rank", static_cast<double>(factor), base, cfg.model.expansion * factor));
  }
  return rows;
}

void write_scaling_csv(std::span<const ScalingRow> rows, std::ostream& out) {
  out << "kind,factor,entries,rank,expansion,seconds_per_epoch\n";
  for (const ScalingRow& r : rows)
    out << r.kind << ',' << format_double(r.factor) << ',' << r.entries << ',' << r.rank << ',' << r.expansion << ','
        << format_double(r.seconds_per_epoch) << '\n';
}

void cmd_gen_synth(const SyntheticSpec& spec, const fs::path& out, const std::optional<fs::path>& truth_out,
                   std::ostream& log) {
  const SyntheticData data = generate_synthetic(spec);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream file = open_out(out);
  file << "# synthetic ECTN data " << spec.dims.users << "x" << spec.dims.services << "x" << spec.dims.times
       << " R=" << spec.rank << " M=" << spec.expansion << " seed=" << spec.seed << '\n';
  write_qos_log(data.tensor.entries(), file);
  if (truth_out) save_model(data.truth, *truth_out);
  log << "wrote " << data.tensor.size() << " entries to " << out.string() << '\n';
}

namespace {

void add_synth_options(CLI::App* app, SyntheticSpec& spec, std::vector<Index>& dims) {
  app->add_option("--synth-dims", dims, "synthetic tensor dims I J K")->expected(3)->delimiter(',');
  app->add_option("--synth-rank", spec.rank, "synthetic truth rank R");
  app->add_option("--synth-expansion", spec.expansion, "synthetic truth expansion M");
  app->add_option("--synth-density", spec.density, "fraction of observed entries");
  app->add_option("--synth-noise", spec.noise_sigma, "Gaussian noise sigma");
  app->add_option("--synth-bias", spec.bias_scale, "bias scale");
  app->add_option("--synth-seed", spec.seed, "synthetic data seed");
}

void add_train_options(CLI::App* app, TrainConfig& cfg) {
  app->add_option("-R,--rank", cfg.model.rank, "rank R")->capture_default_str();
  app->add_option("-M,--expansion", cfg.model.expansion, "expansion dimension M")->capture_default_str();
  app->add_option("--lambda", cfg.lambda, "regularization coefficient")->capture_default_str();
  app->add_option("--tol", cfg.tol, "convergence threshold on successive objectives")->capture_default_str();
  app->add_option("--max-epochs", cfg.max_epochs, "epoch cap")->capture_default_str();
  app->add_option("--init-scale", cfg.model.init_scale, "upper bound of the uniform init")->capture_default_str();
  app->add_option("--seed", cfg.model.seed, "model init seed")->capture_default_str();
  app->add_option("--partitions", cfg.update.partitions, "accumulation chunks")->capture_default_str();
  app->add_option("--threads", cfg.update.threads, "accumulation workers")->capture_default_str();
  app->add_option("--schedule", cfg.update.schedule, "block order within an epoch")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, Schedule>{{"sequential", Schedule::Sequential}, {"simultaneous", Schedule::Simultaneous}}));
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ECTN tensor completion for dynamic QoS data"};
  app.require_subcommand(1);

  ExperimentManifest manifest;
  manifest.train.model.rank = 5;
  manifest.train.model.expansion = 5;
  std::vector<Index> dims_override, synth_dims;
  std::vector<double> ratios;
  std::string data_path, manifest_path, out_dir;

  const auto add_source = [&](CLI::App* sub) {
    sub->add_option("--data", data_path, "QoS log (user service time value)");
    sub->add_option("--dims", dims_override, "declared dims I J K")->expected(3)->delimiter(',');
    add_synth_options(sub, manifest.source.synthetic, synth_dims);
  };
  const auto add_experiment = [&](CLI::App* sub) {
    add_source(sub);
    sub->add_option("--ratios", ratios, "train,validation,test ratios")->expected(3)->delimiter(',');
    sub->add_option("--repeats", manifest.repeats, "number of random splits")->capture_default_str();
    sub->add_option("--split-seed", manifest.split_seed, "seed of the first split")->capture_default_str();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--manifest", manifest_path, "load the experiment from a manifest.json");
    add_train_options(sub, manifest.train);
  };

  CLI::App* train_cmd = app.add_subcommand("train", "train over repeated random splits");
  add_experiment(train_cmd);

  CLI::App* grid_cmd = app.add_subcommand("grid-lambda", "select lambda on the validation set");
  add_experiment(grid_cmd);
  std::string grid_spec = "0.1:1.0:0.1";
  grid_cmd->add_option("--grid", grid_spec, "start:stop:step or comma list")->capture_default_str();

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a saved model on a split's test set");
  add_source(eval_cmd);
  std::string model_path, split_path, metrics_out;
  eval_cmd->add_option("--model", model_path, "model dump")->required();
  eval_cmd->add_option("--split", split_path, "split manifest")->required();
  eval_cmd->add_option("--out", metrics_out, "write metrics csv here");

  CLI::App* bench_cmd = app.add_subcommand("bench-scaling", "per-epoch time against |Omega| and R*M");
  add_synth_options(bench_cmd, manifest.source.synthetic, synth_dims);
  add_train_options(bench_cmd, manifest.train);
  std::vector<double> entry_factors{2.0};
  std::vector<Index> rm_factors;
  Index bench_epochs = 5;
  std::string bench_out;
  bench_cmd->add_option("--factors", entry_factors, "entry-count factors")->delimiter(',');
  bench_cmd->add_option("--rm-factors", rm_factors, "R*M factors (scales M)")->delimiter(',');
  bench_cmd->add_option("--epochs", bench_epochs, "timed epochs per row")->capture_default_str();
  bench_cmd->add_option("--out", bench_out, "write csv here (default stdout)");

  CLI::App* gen_cmd = app.add_subcommand("gen-synth", "write a synthetic QoS log");
  add_synth_options(gen_cmd, manifest.source.synthetic, synth_dims);
  std::string gen_out, truth_out;
  gen_cmd->add_option("--out", gen_out, "output log path")->required();
  gen_cmd->add_option("--truth", truth_out, "also save the ground-truth model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (!manifest_path.empty()) {
      std::ifstream in = open_in(manifest_path);
      std::stringstream text;
      text << in.rdbuf();
      manifest = manifest_from_json(text.str());
    }
    if (!data_path.empty()) manifest.source.path = data_path;
    if (!dims_override.empty()) manifest.source.dims_override = Dims{dims_override[0], dims_override[1], dims_override[2]};
    if (!synth_dims.empty()) manifest.source.synthetic.dims = Dims{synth_dims[0], synth_dims[1], synth_dims[2]};
    if (!ratios.empty()) manifest.ratios = Ratios{ratios[0], ratios[1], ratios[2]};
    if (!out_dir.empty()) manifest.out_dir = out_dir;

    if (train_cmd->parsed()) {
      cmd_train(manifest, err);
    } else if (grid_cmd->parsed()) {
      const auto grid = parse_grid(grid_spec);
      const GridResult r = cmd_grid_lambda(manifest, grid, err);
      out << "lambda,validation_rmse,validation_mae\n";
      for (const GridRow& row : r.rows)
        out << format_double(row.lambda) << ',' << format_double(row.validation.rmse) << ','
            << format_double(row.validation.mae) << '\n';
      out << "best_lambda " << format_double(r.best_lambda) << '\n';
    } else if (eval_cmd->parsed()) {
      std::optional<fs::path> target;
      if (!metrics_out.empty()) target = metrics_out;
      const Metrics m = cmd_eval(model_path, manifest.source, split_path, target, err);
      out << "rmse " << format_double(m.rmse) << "\nmae " << format_double(m.mae) << "\ncount " << m.count << '\n';
    } else if (bench_cmd->parsed()) {
      const auto rows = cmd_bench_scaling(manifest.source.synthetic, entry_factors, rm_factors, manifest.train,
                                          bench_epochs, err);
      if (bench_out.empty()) {
        write_scaling_csv(rows, out);
      } else {
        std::ofstream file = open_out(bench_out);
        write_scaling_csv(rows, file);
      }
    } else if (gen_cmd->parsed()) {
      std::optional<fs::path> truth;
      if (!truth_out.empty()) truth = truth_out;
      cmd_gen_synth(manifest.source.synthetic, gen_out, truth, err);
    }
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    if (e.code() == ErrorCode::NonFiniteAccumulator) return kNumericalFailure;
    if (e.code() == ErrorCode::InvalidConfig) return kUsage;
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}

}  // namespace ectn::cli
