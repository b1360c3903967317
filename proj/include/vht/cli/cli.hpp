#pragma once

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "vht/baselines/sequential.hpp"
#include "vht/baselines/sharding.hpp"
#include "vht/datagen/dense.hpp"
#include "vht/datagen/sparse.hpp"
#include "vht/eval/dataset.hpp"
#include "vht/eval/prequential.hpp"
#include "vht/eval/report.hpp"
#include "vht/tree/serialization.hpp"
#include "vht/vertical/vht.hpp"

namespace vht::cli {

/// Invalid command line: unknown flag, bad value or conflicting options.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

enum class Algorithm { sequential, vht_local, vht_wok, vht_wk, sharding };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::sequential: return "sequential";
    case Algorithm::vht_local: return "vht-local";
    case Algorithm::vht_wok: return "vht-wok";
    case Algorithm::vht_wk: return "vht-wk";
    case Algorithm::sharding: return "sharding";
  }
  return "?";
}

inline const std::map<std::string, Algorithm>& algorithm_names() {
  static const std::map<std::string, Algorithm> names{{"sequential", Algorithm::sequential},
                                                       {"vht-local", Algorithm::vht_local},
                                                       {"vht-wok", Algorithm::vht_wok},
                                                       {"vht-wk", Algorithm::vht_wk},
                                                       {"sharding", Algorithm::sharding}};
  return names;
}

enum class EngineChoice { threaded, simulated };

/// Where instances come from: a generator or a dataset file.
struct DataSpec {
  enum class Kind { dense, sparse, dataset };
  Kind kind = Kind::dense;
  datagen::DenseGenConfig dense;
  datagen::SparseGenConfig sparse;
  std::filesystem::path path;
  std::optional<std::uint64_t> limit;  // required for generators

  std::string describe() const {
    switch (kind) {
      case Kind::dense:
        return "dense " + std::to_string(dense.categorical) + "-" + std::to_string(dense.numerical);
      case Kind::sparse: return "sparse d=" + std::to_string(sparse.vocabulary);
      case Kind::dataset: return path.filename().string();
    }
    return "?";
  }
};

struct RunSpec {
  Algorithm algorithm = Algorithm::sequential;
  std::vector<std::size_t> parallelism{2};
  std::size_t model_replicas = 1;
  std::size_t buffer_size = 0;
  std::uint64_t timeout = 30;
  std::size_t queue_capacity = 1024;
  EngineChoice engine = EngineChoice::threaded;
  HoeffdingParams params;
  DataSpec data;
  std::uint64_t report_every = 100000;
  std::vector<std::uint64_t> seeds{1};
  bool timing = true;
  bool speedup = false;
  std::optional<std::filesystem::path> out_dir = std::filesystem::path("results");
  std::optional<std::filesystem::path> plot;
  std::optional<std::filesystem::path> dump_model;
  std::optional<std::filesystem::path> save_model;

  /// Parallelism values actually run; the sequential tree has none.
  std::vector<std::size_t> levels() const {
    if (algorithm == Algorithm::sequential) return {1};
    return parallelism;
  }
};

struct GenSpec {
  DataSpec data;
  std::uint64_t seed = 1;
  std::filesystem::path output;
};

struct PlotSpec {
  std::vector<std::filesystem::path> inputs;
  std::vector<std::string> labels;
  std::string title = "Accuracy";
  std::filesystem::path output;
};

struct HelpRequest {
  std::string text;
};

using Command = std::variant<RunSpec, GenSpec, PlotSpec, HelpRequest>;

namespace detail {

struct DataFlags {
  std::string gen;
  std::string dataset;
  std::size_t categorical = 10;
  std::size_t numerical = 10;
  std::uint32_t values = 2;
  std::size_t vocab = 1000;
  double skew = 1.5;
  std::uint64_t instances = 100000;
  CLI::Option* categorical_opt = nullptr;
  CLI::Option* numerical_opt = nullptr;
  CLI::Option* values_opt = nullptr;
  CLI::Option* vocab_opt = nullptr;
  CLI::Option* skew_opt = nullptr;
  CLI::Option* instances_opt = nullptr;

  void add_generator(CLI::App* app, bool allow_dataset) {
    app->add_option("--gen", gen, "Synthetic stream generator")->check(CLI::IsMember({"dense", "sparse"}));
    if (allow_dataset) {
      app->add_option("--dataset", dataset, "Dataset file (.arff or .csv with header; class is the last column)");
    }
    categorical_opt = app->add_option("--categorical", categorical, "Dense: categorical attributes")
                          ->capture_default_str();
    numerical_opt = app->add_option("--numerical", numerical, "Dense: numerical attributes")->capture_default_str();
    values_opt = app->add_option("--values", values, "Dense: values per categorical attribute")
                     ->check(CLI::Range(2u, 1u << 20))
                     ->capture_default_str();
    vocab_opt = app->add_option("--vocab", vocab, "Sparse: vocabulary size d")
                    ->check(CLI::PositiveNumber)
                    ->capture_default_str();
    skew_opt = app->add_option("--skew", skew, "Sparse: Zipf skew")->check(CLI::PositiveNumber)->capture_default_str();
    instances_opt = app->add_option("-n,--instances", instances,
                                    "Instances to generate, or the maximum read from a dataset (default 100000 "
                                    "for generators, whole file for datasets)");
  }

  DataSpec build(bool allow_dataset) const {
    DataSpec d;
    const bool has_gen = !gen.empty();
    const bool has_dataset = !dataset.empty();
    if (has_gen && has_dataset) throw UsageError("--gen and --dataset are mutually exclusive");
    if (!has_gen && !has_dataset) {
      throw UsageError(allow_dataset ? "choose a data source with --gen or --dataset" : "--gen is required");
    }
    auto only_for = [](CLI::Option* o, bool ok, const std::string& what) {
      if (o && o->count() > 0 && !ok) throw UsageError(o->get_name() + " applies only to " + what);
    };
    only_for(categorical_opt, gen == "dense", "--gen dense");
    only_for(numerical_opt, gen == "dense", "--gen dense");
    only_for(values_opt, gen == "dense", "--gen dense");
    only_for(vocab_opt, gen == "sparse", "--gen sparse");
    only_for(skew_opt, gen == "sparse", "--gen sparse");
    if (instances_opt->count() > 0 || has_gen) d.limit = instances;
    if (has_dataset) {
      d.kind = DataSpec::Kind::dataset;
      d.path = dataset;
    } else if (gen == "dense") {
      d.kind = DataSpec::Kind::dense;
      d.dense.categorical = categorical;
      d.dense.numerical = numerical;
      d.dense.values_per_categorical = values;
      try {
        d.dense.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
    } else {
      d.kind = DataSpec::Kind::sparse;
      d.sparse.vocabulary = vocab;
      d.sparse.skew = skew;
    }
    return d;
  }
};

}  // namespace detail

/// Parses a command line (without the program name). Throws UsageError.
inline Command parse_args(const std::vector<std::string>& args) {
  CLI::App app{"Vertical Hoeffding Tree experiments", "vht"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // run
  auto* run = app.add_subcommand("run", "Train and evaluate one algorithm prequentially");
  RunSpec spec;
  std::string algo;
  detail::DataFlags data;
  std::string engine = "threaded";
  std::uint64_t repetitions = 1;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "results";
  std::string plot, dump, save;
  run->add_option("--algo", algo, "sequential | vht-local | vht-wok | vht-wk | sharding")
      ->required()
      ->check(CLI::IsMember({"sequential", "vht-local", "vht-wok", "vht-wk", "sharding"}));
  auto* p_opt = run->add_option("-p,--parallelism", spec.parallelism,
                                "Statistics replicas (VHT) or shards; several values run a sweep")
                    ->delimiter(',')
                    ->check(CLI::PositiveNumber)
                    ->capture_default_str();
  auto* q_opt = run->add_option("-q,--model-replicas", spec.model_replicas, "Model aggregator replicas (VHT)")
                    ->check(CLI::PositiveNumber)
                    ->capture_default_str();
  auto* z_opt = run->add_option("-z,--buffer", spec.buffer_size, "Instance buffer size z for vht-wk")
                    ->capture_default_str();
  run->add_option("--timeout", spec.timeout,
                  "Split timeout in engine time units (seconds when threaded, instances otherwise)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--queue", spec.queue_capacity, "Mailbox capacity")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--engine", engine, "Engine for vht-wok, vht-wk and sharding: threaded | sim")
      ->check(CLI::IsMember({"threaded", "sim"}))
      ->capture_default_str();
  run->add_option("--delta", spec.params.delta, "Hoeffding bound confidence delta")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  run->add_option("--grace", spec.params.grace_period, "Grace period n_min")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--tau", spec.params.tie_threshold, "Tie threshold tau")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  data.add_generator(run, true);
  run->add_option("--report-every", spec.report_every, "Metrics row interval in instances")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  auto* rep_opt = run->add_option("--repetitions", repetitions, "Seeded repetitions (seeds 1..R)")
                      ->check(CLI::PositiveNumber)
                      ->capture_default_str();
  auto* seeds_opt = run->add_option("--seeds", seeds, "Explicit seed list, comma separated")->delimiter(',');
  run->add_option("--out-dir", out_dir, "Directory for per-run and aggregate CSV files")->capture_default_str();
  run->add_flag("--no-files", "Print the summary only");
  run->add_option("--plot", plot, "Write an accuracy plot (SVG)");
  run->add_option("--dump-model", dump, "Write the final tree as text");
  run->add_option("--save-model", save, "Write the final tree in binary form");
  run->add_flag("--no-timing", "Report zero for times and throughput (byte-stable output)");
  run->add_flag("--speedup", "Also run the sequential tree and report speedups");

  // gen
  auto* gen = app.add_subcommand("gen", "Export a synthetic stream as CSV");
  GenSpec gspec;
  detail::DataFlags gdata;
  std::string gout;
  gdata.add_generator(gen, false);
  gen->add_option("--seed", gspec.seed, "Generator seed")->capture_default_str();
  gen->add_option("-o,--output", gout, "Output CSV file")->required();

  // plot
  auto* plt = app.add_subcommand("plot", "Render accuracy curves from metrics CSV files");
  PlotSpec pspec;
  std::vector<std::string> inputs;
  std::string pout;
  plt->add_option("inputs", inputs, "Metrics CSV files")->required();
  plt->add_option("--label", pspec.labels, "Series label, one per input (default: file name)");
  plt->add_option("--title", pspec.title, "Plot title")->capture_default_str();
  plt->add_option("-o,--output", pout, "Output SVG file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    return HelpRequest{app.help()};
  } catch (const CLI::CallForAllHelp&) {
    return HelpRequest{app.help("", CLI::AppFormatMode::All)};
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  if (*run) {
    spec.algorithm = algorithm_names().at(algo);
    spec.engine = engine == "sim" ? EngineChoice::simulated : EngineChoice::threaded;
    spec.data = data.build(true);
    if (spec.algorithm == Algorithm::sharding && (z_opt->count() > 0 || q_opt->count() > 0)) {
      throw UsageError("sharding does not take -z or -q");
    }
    if (spec.algorithm != Algorithm::vht_wk && z_opt->count() > 0) throw UsageError("-z applies only to vht-wk");
    if (spec.algorithm == Algorithm::sequential && (p_opt->count() > 0 || q_opt->count() > 0)) {
      throw UsageError("the sequential tree does not take -p or -q");
    }
    std::sort(spec.parallelism.begin(), spec.parallelism.end());
    spec.parallelism.erase(std::unique(spec.parallelism.begin(), spec.parallelism.end()), spec.parallelism.end());
    if (seeds_opt->count() > 0) {
      if (rep_opt->count() > 0 && repetitions != seeds.size()) {
        throw UsageError("--repetitions disagrees with the number of --seeds");
      }
      spec.seeds = seeds;
    } else {
      spec.seeds.clear();
      for (std::uint64_t s = 1; s <= repetitions; ++s) spec.seeds.push_back(s);
    }
    spec.out_dir = run->count("--no-files") > 0 ? std::nullopt : std::optional<std::filesystem::path>(out_dir);
    if (!plot.empty()) spec.plot = plot;
    if (!dump.empty()) spec.dump_model = dump;
    if (!save.empty()) spec.save_model = save;
    if (spec.save_model && spec.algorithm == Algorithm::sharding) {
      throw UsageError("--save-model writes one tree; sharding has several (use --dump-model)");
    }
    spec.timing = run->count("--no-timing") == 0;
    spec.speedup = run->count("--speedup") > 0;
    if (spec.speedup && spec.algorithm == Algorithm::sequential) throw UsageError("--speedup needs a parallel algorithm");
    return spec;
  }
  if (*gen) {
    gspec.data = gdata.build(false);
    gspec.output = gout;
    return gspec;
  }
  for (const auto& i : inputs) pspec.inputs.emplace_back(i);
  if (!pspec.labels.empty() && pspec.labels.size() != pspec.inputs.size()) {
    throw UsageError("give one --label per input file");
  }
  pspec.output = pout;
  return pspec;
}

/// A schema and a pull function over one data source.
struct OpenStream {
  Schema schema;
  std::function<std::optional<Instance>()> next;
};

inline OpenStream open_stream(const DataSpec& data, std::uint64_t seed) {
  OpenStream s;
  const std::uint64_t limit = data.limit.value_or(std::numeric_limits<std::uint64_t>::max());
  switch (data.kind) {
    case DataSpec::Kind::dense: {
      auto cfg = data.dense;
      cfg.seed = seed;
      auto gen = std::make_shared<datagen::DenseGenerator>(cfg);
      s.schema = gen->schema();
      s.next = [gen, stream = datagen::GeneratedStream(*gen, limit)]() mutable { return stream(); };
      break;
    }
    case DataSpec::Kind::sparse: {
      auto cfg = data.sparse;
      cfg.seed = seed;
      auto gen = std::make_shared<datagen::SparseGenerator>(cfg);
      s.schema = gen->schema();
      s.next = [gen, stream = datagen::GeneratedStream(*gen, limit)]() mutable { return stream(); };
      break;
    }
    case DataSpec::Kind::dataset: {
      auto reader = std::make_shared<eval::DatasetReader>(data.path);
      s.schema = reader->schema();
      s.next = [reader, left = limit]() mutable -> std::optional<Instance> {
        if (left == 0) return std::nullopt;
        --left;
        return reader->next();
      };
      break;
    }
  }
  return s;
}

/// Outcome of one (parallelism, seed) run.
struct RunRecord {
  std::size_t parallelism = 1;
  std::uint64_t seed = 1;
  std::vector<eval::MetricsRow> rows;
  double wall_seconds = 0.0;
  std::uint64_t instances = 0;
  std::size_t cells = 0;
  std::vector<TreeModel> trees;  // one, or one per shard
  std::uint64_t timeouts = 0;

  double accuracy() const { return rows.empty() ? 0.0 : rows.back().accuracy_cum; }
  double throughput() const { return wall_seconds > 0 ? static_cast<double>(instances) / wall_seconds : 0.0; }
};

struct SpeedupRow {
  std::size_t parallelism = 1;
  eval::Stat seconds;
  eval::Stat throughput;
  double baseline_seconds = 0.0;
  double speedup = 0.0;
};

struct RunSummary {
  std::vector<RunRecord> runs;
  std::map<std::size_t, std::vector<eval::AggregateRow>> aggregates;
  std::vector<RunRecord> baseline;  // sequential runs for --speedup
  std::vector<SpeedupRow> speedups;
};

/// Runs one algorithm at one parallelism level on the stream for `seed`.
inline RunRecord run_once(const RunSpec& spec, std::size_t p, std::uint64_t seed, Algorithm algorithm) {
  auto stream = open_stream(spec.data, seed);
  RunRecord rec;
  rec.parallelism = p;
  rec.seed = seed;
  eval::PrequentialEvaluator::Clock clock;
  if (!spec.timing) clock = [] { return 0.0; };
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  if (algorithm == Algorithm::sequential) {
    baselines::SequentialLearner learner(stream.schema, spec.params);
    rec.rows = eval::prequential(learner, stream.next, spec.report_every, clock);
    rec.wall_seconds = elapsed();
    rec.cells = learner.tree().cell_count();
    rec.trees.push_back(learner.tree().model());
  } else if (algorithm == Algorithm::sharding) {
    eval::PrequentialEvaluator ev(spec.report_every, clock);
    baselines::ShardingConfig cfg;
    cfg.parallelism = p;
    cfg.params = spec.params;
    cfg.queue_capacity = spec.queue_capacity;
    engine::RunOptions<baselines::ShardEvent> o;
    o.mode = spec.engine == EngineChoice::simulated ? engine::Mode::simulated : engine::Mode::threaded;
    o.seed = seed;
    auto res = baselines::run_sharding(
        cfg, stream.schema, stream.next,
        [&ev](const vertical::PredictionEvent& e) { ev.record(e.predicted, e.actual, e.weight, e.splits, e.leaves); },
        o);
    rec.rows = ev.finish();
    rec.wall_seconds = res.report.wall_seconds;
    rec.cells = res.total_cells();
    rec.trees = std::move(res.trees);
  } else {
    eval::PrequentialEvaluator ev(spec.report_every, clock);
    vertical::VhtConfig cfg;
    cfg.parallelism = p;
    cfg.model_replicas = spec.model_replicas;
    cfg.variant = algorithm == Algorithm::vht_wk ? vertical::Variant::wk : vertical::Variant::wok;
    cfg.buffer_size = algorithm == Algorithm::vht_wk ? spec.buffer_size : 0;
    cfg.timeout = spec.timeout;
    cfg.params = spec.params;
    cfg.queue_capacity = spec.queue_capacity;
    engine::RunOptions<vertical::Event> o;
    if (algorithm == Algorithm::vht_local) {
      o.mode = engine::Mode::local;
    } else {
      o.mode = spec.engine == EngineChoice::simulated ? engine::Mode::simulated : engine::Mode::threaded;
    }
    o.seed = seed;
    auto res = vertical::run_vht(
        cfg, stream.schema, stream.next,
        [&ev](const vertical::PredictionEvent& e) { ev.record(e.predicted, e.actual, e.weight, e.splits, e.leaves); },
        o);
    rec.rows = ev.finish();
    rec.wall_seconds = res.report.wall_seconds;
    rec.cells = res.total_cells();
    rec.timeouts = res.timeouts;
    rec.trees.push_back(res.tree());
  }
  rec.instances = rec.rows.empty() ? 0 : rec.rows.back().instances;
  if (!spec.timing) rec.wall_seconds = 0.0;
  return rec;
}

inline std::string run_label(const RunSpec& spec, std::size_t p) {
  std::string label = to_string(spec.algorithm);
  if (spec.algorithm == Algorithm::sequential) return label;
  label += "_p" + std::to_string(p);
  if (spec.algorithm == Algorithm::vht_wk) label += "_z" + std::to_string(spec.buffer_size);
  if (spec.model_replicas > 1 && spec.algorithm != Algorithm::sharding) {
    label += "_q" + std::to_string(spec.model_replicas);
  }
  return label;
}

/// Runs every (parallelism, seed) pair; pure apart from logging.
inline RunSummary execute_run(const RunSpec& spec) {
  RunSummary out;
  for (std::size_t p : spec.levels()) {
    std::vector<std::vector<eval::MetricsRow>> per_seed;
    for (std::uint64_t seed : spec.seeds) {
      spdlog::debug("starting {} p={} seed={} on {}", to_string(spec.algorithm), p, seed, spec.data.describe());
      auto rec = run_once(spec, p, seed, spec.algorithm);
      spdlog::info("{} p={} seed={}: {} instances, accuracy {:.2f}%, {:.0f} inst/s", to_string(spec.algorithm), p,
                   seed, rec.instances, rec.accuracy(), rec.throughput());
      if (rec.timeouts > 0) spdlog::warn("{} split attempts timed out", rec.timeouts);
      per_seed.push_back(rec.rows);
      out.runs.push_back(std::move(rec));
    }
    out.aggregates[p] = eval::aggregate(per_seed);
  }
  if (spec.speedup) {
    for (std::uint64_t seed : spec.seeds) out.baseline.push_back(run_once(spec, 1, seed, Algorithm::sequential));
    std::vector<double> base;
    for (const auto& r : out.baseline) base.push_back(r.wall_seconds);
    const double base_mean = eval::summarize(base).mean;
    for (std::size_t p : spec.levels()) {
      std::vector<double> secs, tput;
      for (const auto& r : out.runs) {
        if (r.parallelism != p) continue;
        secs.push_back(r.wall_seconds);
        tput.push_back(r.throughput());
      }
      SpeedupRow row;
      row.parallelism = p;
      row.seconds = eval::summarize(secs);
      row.throughput = eval::summarize(tput);
      row.baseline_seconds = base_mean;
      row.speedup = row.seconds.mean > 0 ? base_mean / row.seconds.mean : 0.0;
      out.speedups.push_back(row);
    }
  }
  return out;
}

inline std::string speedup_csv(const std::vector<SpeedupRow>& rows) {
  std::ostringstream o;
  o << "parallelism,seconds_mean,seconds_std,throughput_mean,throughput_std,baseline_seconds,speedup\n";
  for (const auto& r : rows) {
    o << r.parallelism << ',' << eval::format_number(r.seconds.mean) << ',' << eval::format_number(r.seconds.stddev)
      << ',' << eval::format_number(r.throughput.mean) << ',' << eval::format_number(r.throughput.stddev) << ','
      << eval::format_number(r.baseline_seconds) << ',' << eval::format_number(r.speedup) << '\n';
  }
  return o.str();
}

namespace detail {

inline std::filesystem::path variant_path(const std::filesystem::path& base, const std::string& suffix) {
  auto p = base;
  p.replace_filename(base.stem().string() + suffix + base.extension().string());
  return p;
}

inline std::string dump_trees(const std::vector<TreeModel>& trees) {
  if (trees.size() == 1) return trees.front().dump();
  std::ostringstream o;
  for (std::size_t i = 0; i < trees.size(); ++i) o << "# shard " << i << '\n' << trees[i].dump();
  return o.str();
}

}  // namespace detail

/// Writes CSVs, plot and models for a finished run and prints the summary.
inline void write_outputs(const RunSpec& spec, const RunSummary& summary, std::ostream& out) {
  const bool many = summary.runs.size() > 1;
  if (spec.out_dir) {
    std::filesystem::create_directories(*spec.out_dir);
    for (const auto& r : summary.runs) {
      eval::emit_csv(r.rows, *spec.out_dir / (run_label(spec, r.parallelism) + "_seed" + std::to_string(r.seed) + ".csv"));
    }
    for (const auto& [p, agg] : summary.aggregates) {
      eval::write_text(*spec.out_dir / (run_label(spec, p) + "_aggregate.csv"), eval::aggregate_csv(agg));
    }
    if (!summary.speedups.empty()) {
      eval::write_text(*spec.out_dir / (to_string(spec.algorithm) + "_speedup.csv"), speedup_csv(summary.speedups));
    }
  }
  if (spec.plot) {
    std::vector<eval::PlotSeries> series;
    for (const auto& [p, agg] : summary.aggregates) {
      eval::PlotSeries s;
      s.label = spec.algorithm == Algorithm::sequential ? "sequential" : to_string(spec.algorithm) + " p=" + std::to_string(p);
      for (const auto& a : agg) {
        eval::MetricsRow m;
        m.instances = a.instances;
        m.accuracy_cum = a.accuracy_cum.mean;
        s.rows.push_back(m);
      }
      series.push_back(std::move(s));
    }
    eval::emit_plot(series, *spec.plot, "Accuracy on " + spec.data.describe());
  }
  for (const auto& r : summary.runs) {
    const std::string suffix = many ? "_p" + std::to_string(r.parallelism) + "_seed" + std::to_string(r.seed) : "";
    if (spec.dump_model) eval::write_text(detail::variant_path(*spec.dump_model, suffix), detail::dump_trees(r.trees));
    if (spec.save_model) save_tree(r.trees.front(), detail::variant_path(*spec.save_model, suffix).string());
  }

  out << std::fixed;
  for (const auto& [p, agg] : summary.aggregates) {
    if (agg.empty()) continue;
    const auto& last = agg.back();
    std::vector<double> cells, tput;
    for (const auto& r : summary.runs) {
      if (r.parallelism != p) continue;
      cells.push_back(static_cast<double>(r.cells));
      tput.push_back(r.throughput());
    }
    const auto c = eval::summarize(cells);
    const auto t = eval::summarize(tput);
    out << to_string(spec.algorithm);
    if (spec.algorithm != Algorithm::sequential) out << " p=" << p;
    out << std::setprecision(2) << ": accuracy " << last.accuracy_cum.mean << " +- " << last.accuracy_cum.stddev
        << " %, throughput " << std::setprecision(0) << t.mean << " +- " << t.stddev << " inst/s, splits "
        << std::setprecision(1) << last.splits.mean << ", leaves " << last.leaves.mean << ", cells "
        << std::setprecision(0) << c.mean << " (" << last.runs << " run" << (last.runs == 1 ? "" : "s") << ", "
        << last.instances << " instances)\n";
  }
  if (!summary.speedups.empty()) {
    out << "speedup vs sequential (" << std::setprecision(3) << summary.speedups.front().baseline_seconds << " s)\n";
    out << "  p  seconds  throughput  speedup\n";
    for (const auto& s : summary.speedups) {
      out << std::setw(3) << s.parallelism << std::setw(9) << std::setprecision(3) << s.seconds.mean << std::setw(12)
          << std::setprecision(0) << s.throughput.mean << std::setw(9) << std::setprecision(2) << s.speedup << '\n';
    }
  }
  out.unsetf(std::ios::floatfield);
}

inline std::uint64_t execute_gen(const GenSpec& spec) {
  auto stream = open_stream(spec.data, spec.seed);
  return eval::write_csv_dataset(spec.output, stream.schema, stream.next);
}

inline void execute_plot(const PlotSpec& spec) {
  std::vector<eval::PlotSeries> series;
  for (std::size_t i = 0; i < spec.inputs.size(); ++i) {
    const auto label = spec.labels.empty() ? spec.inputs[i].stem().string() : spec.labels[i];
    series.push_back({label, eval::read_metrics_csv(spec.inputs[i])});
  }
  eval::emit_plot(series, spec.output, spec.title);
}

/// Executes a parsed command; errors propagate as exceptions.
inline int execute(const Command& command, std::ostream& out) {
  if (const auto* h = std::get_if<HelpRequest>(&command)) {
    out << h->text;
    return kExitOk;
  }
  if (const auto* r = std::get_if<RunSpec>(&command)) {
    const auto summary = execute_run(*r);
    write_outputs(*r, summary, out);
    return kExitOk;
  }
  if (const auto* g = std::get_if<GenSpec>(&command)) {
    const auto n = execute_gen(*g);
    out << "wrote " << n << " instances to " << g->output.string() << '\n';
    return kExitOk;
  }
  execute_plot(std::get<PlotSpec>(command));
  out << "wrote " << std::get<PlotSpec>(command).output.string() << '\n';
  return kExitOk;
}

/// Parse and execute with exit-code discipline: 0 success, 2 usage error,
/// 1 runtime failure.
inline int run_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Command command;
  try {
    command = parse_args(args);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nRun with --help for the list of options.\n";
    return kExitUsage;
  }
  try {
    return execute(command, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace vht::cli
