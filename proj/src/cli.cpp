#include "scl/cli.hpp"

#include "scl/dataset.hpp"
#include "scl/errors.hpp"
#include "scl/matrix_io.hpp"
#include "scl/parallel.hpp"
#include "scl/svg.hpp"
#include "scl/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace scl::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

void require_out(const fs::path& out, const char* command) {
  if (out.empty()) throw UsageError(std::string(command) + ": --out is required");
}

void write_training_outputs(const TrainResult& result, const fs::path& out) {
  write_series(result.series, out);
  write_encoder(result.encoder, out / "encoder.json");
  write_text_file(out / "loss.csv", format_loss_log(result.log));
}

TrainConfig make_config(const TrainOptions& opt, int epochs, std::size_t batch_size) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.learning_rate = opt.learning_rate;
  cfg.checkpoint_interval = opt.interval;
  cfg.mode = opt.mode;
  cfg.seed = opt.seed;
  cfg.embed_dim = opt.embed_dim;
  cfg.freeze_text = opt.freeze_text;
  return cfg;
}

std::optional<DualEncoder> load_init(const TrainOptions& opt) {
  if (!opt.init_from) return std::nullopt;
  return read_encoder(*opt.init_from / "encoder.json");
}

}  // namespace

void gen_data(const GenDataOptions& opt) {
  require_out(opt.out, "gen-data");
  if (opt.n < 1) throw UsageError("gen-data: --n must be positive");
  const GroupSpec groups = parse_groups(opt.groups.empty() ? "1:" + std::to_string(opt.n) : opt.groups);
  const ToyDataset data = generate_synthetic(opt.n, parse_dims(opt.dims), groups, opt.noise, opt.seed);
  write_dataset(data, opt.out);
}

void train_ref(const TrainOptions& opt) {
  require_out(opt.out, "train-ref");
  const ToyDataset data = read_dataset(opt.data);
  const TrainConfig cfg = make_config(opt, opt.epochs.value_or(40), opt.batch_size.value_or(16));
  write_training_outputs(train_reference(data, cfg, load_init(opt)), opt.out);
}

void train_scl(const TrainOptions& opt) {
  require_out(opt.out, "train-scl");
  if (!opt.plan) throw UsageError("train-scl: --plan is required");
  const ToyDataset data = read_dataset(opt.data);
  const std::vector<EpochPlan> plans = read_plans(*opt.plan);
  const int epochs = opt.epochs.value_or(static_cast<int>(plans.size()));
  const std::size_t batch_size = opt.batch_size.value_or(8);
  for (const auto& plan : plans) {
    for (const auto& batch : plan.batches) {
      if (batch.ids.size() > batch_size) {
        throw FormatError("plan epoch " + std::to_string(plan.epoch) + " holds a batch of " +
                          std::to_string(batch.ids.size()) + " > --batch-size " + std::to_string(batch_size));
      }
    }
  }
  const TrainConfig cfg = make_config(opt, epochs, batch_size);
  write_training_outputs(train_selective(data, cfg, plans, load_init(opt)), opt.out);
}

void analyze(const AnalyzeOptions& opt) {
  require_out(opt.out, "analyze");
  if (opt.epsilon < 0.0) throw UsageError("analyze: --epsilon must be non-negative");
  const SnapshotSeries series = read_series(opt.snapshots);
  if (series.checkpoints.size() < 2) {
    throw InsufficientDataError("analyze: series has " + std::to_string(series.checkpoints.size()) +
                                " checkpoint(s); trajectory regression needs at least 2");
  }
  const Aggregation mode = opt.mode.value_or(series.aggregation);
  const auto matrices = similarity_matrices(series, mode);
  const DeltaAnalysis analysis = delta_matrix(matrices);
  const CategoryReport rep = category_report(analysis, opt.epsilon);

  fs::create_directories(opt.out);
  write_dense_matrix(opt.out / "delta.mat", analysis.delta.values);
  write_fits_csv(opt.out / "fits.csv", analysis.fits, analysis.s_mean, opt.epsilon);
  write_text_file(opt.out / "report.csv", format_report_csv(rep));

  std::string positives = "i,a,b,s0,sK\n";
  for (const auto& f : analysis.positive_fits) {
    positives += std::to_string(f.i) + ',' + format_decimal(f.slope) + ',' + format_decimal(f.intercept) + ',' +
                 format_decimal(f.fitted_start) + ',' + format_decimal(f.fitted_end) + '\n';
  }
  write_text_file(opt.out / "positives.csv", positives);

  std::vector<CategoryLabel> labels;
  labels.reserve(analysis.fits.size());
  for (const auto& f : analysis.fits) labels.push_back(classify_pair(f, analysis.s_mean, opt.epsilon));
  write_text_file(opt.out / "trajectories.svg", trajectories_svg(analysis.fits, labels, analysis.checkpoints));

  json meta;
  meta["n"] = series.n;
  meta["checkpoints"] = analysis.checkpoints;
  meta["aggregation"] = std::string(to_string(mode));
  meta["s_mean"] = analysis.s_mean;
  meta["epsilon"] = opt.epsilon;
  meta["fall_through_count"] = rep.fall_through_count;
  json counts;
  for (const Category c : kCategories) counts[std::string(to_string(c))] = rep.count(c);
  meta["counts"] = counts;
  write_text_file(opt.out / "analysis.json", meta.dump(2) + "\n");
}

void build_batches(const BuildBatchesOptions& opt, std::ostream* log) {
  require_out(opt.out, "build-batches");
  if (opt.epochs < 1) throw UsageError("build-batches: --epochs must be positive");
  if (opt.batch_size < 1) throw UsageError("build-batches: --batch-size must be positive");
  const DeltaMatrix delta{read_dense_matrix(opt.delta)};

  std::vector<int> groups;
  if (opt.exclude_duplicate_texts) {
    if (!opt.data) throw UsageError("build-batches: --exclude-duplicate-texts needs --data for group ids");
    groups = read_dataset(*opt.data).group;
    if (groups.size() != delta.size()) {
      throw FormatError("build-batches: dataset has " + std::to_string(groups.size()) + " samples, delta has " +
                        std::to_string(delta.size()));
    }
  }
  const auto plans = plan_epochs({opt.schedule, opt.epochs}, delta, opt.batch_size, opt.seed, {groups});
  write_plans(opt.out, plans);

  if (log) {
    // Share of in-batch negatives whose fitted change exceeds epsilon in magnitude.
    for (const auto& plan : plans) {
      std::size_t pairs = 0, large = 0;
      for (const auto& batch : plan.batches) {
        for (const auto i : batch.ids) {
          for (const auto j : batch.ids) {
            if (i == j) continue;
            ++pairs;
            if (std::abs(delta(i, j)) > opt.epsilon) ++large;
          }
        }
      }
      *log << "epoch " << plan.epoch << " alpha " << (plan.alpha ? format_decimal(*plan.alpha) : "random") << ": "
           << plan.batches.size() << " batches, |delta| > " << opt.epsilon << " for " << large << "/" << pairs
           << " in-batch negatives\n";
    }
  }
}

void report(const ReportOptions& opt) {
  require_out(opt.out, "report");
  json meta;
  const fs::path meta_path = opt.analysis / "analysis.json";
  try {
    meta = json::parse(read_text_file(meta_path));
  } catch (const json::parse_error& e) {
    throw FormatError(meta_path.string() + ": " + e.what());
  }
  std::vector<int> checkpoints;
  double s_mean = 0.0, epsilon = 0.0;
  try {
    checkpoints = meta.at("checkpoints").get<std::vector<int>>();
    s_mean = meta.at("s_mean").get<double>();
    epsilon = meta.at("epsilon").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(meta_path.string() + ": " + e.what());
  }
  validate_checkpoints(checkpoints);

  const auto rows = read_fits_csv(opt.analysis / "fits.csv", checkpoints.back());
  std::vector<TrajectoryFit> fits;
  std::vector<CategoryLabel> labels;
  fits.reserve(rows.size());
  labels.reserve(rows.size());
  for (const auto& r : rows) {
    fits.push_back(r.fit);
    labels.push_back(r.label);
  }
  fs::create_directories(opt.out);
  write_text_file(opt.out / "report.csv", format_report_csv(report_from_labels(labels, s_mean, epsilon)));
  write_text_file(opt.out / "trajectories.svg", trajectories_svg(fits, labels, checkpoints));
  write_text_file(opt.out / "schedule.svg", schedule_svg({opt.schedule, opt.epochs}));

  std::vector<NamedLog> logs;
  for (const auto& path : opt.logs) {
    if (!fs::exists(path)) continue;
    const std::string name = path.has_parent_path() ? path.parent_path().filename().string() : path.stem().string();
    logs.push_back({name, read_loss_log(path)});
  }
  if (!logs.empty()) write_text_file(opt.out / "loss.svg", loss_svg(logs));
}

void pipeline(const PipelineOptions& opt, std::ostream* log) {
  require_out(opt.out, "pipeline");
  const fs::path data_dir = opt.out / "data";
  const fs::path ref_dir = opt.out / "ref";
  const fs::path analysis_dir = opt.out / "analysis";
  const fs::path plan_path = opt.out / "plan.jsonl";
  const fs::path scl_dir = opt.out / "scl";
  const fs::path report_dir = opt.out / "report";
  const int scl_epochs = opt.scl_epochs.value_or(opt.epochs);

  auto stage = [&](const char* name, auto&& body) {
    if (log) *log << "[pipeline] " << name << '\n';
    try {
      body();
    } catch (const Error& e) {
      throw Error(e.kind(), std::string("stage '") + name + "' failed: " + e.what());
    }
  };

  stage("gen-data", [&] {
    GenDataOptions g = opt.data;
    g.seed = opt.seed;
    g.out = data_dir;
    gen_data(g);
  });

  TrainOptions t;
  t.data = data_dir;
  t.learning_rate = opt.learning_rate;
  t.interval = opt.interval;
  t.mode = opt.mode;
  t.embed_dim = opt.embed_dim;
  t.freeze_text = opt.freeze_text;
  t.seed = opt.seed;

  stage("train-ref", [&] {
    TrainOptions r = t;
    r.epochs = opt.epochs;
    r.batch_size = opt.batch_size;
    r.out = ref_dir;
    train_ref(r);
  });
  stage("analyze", [&] { analyze({ref_dir, opt.mode, opt.epsilon, analysis_dir}); });
  stage("build-batches", [&] {
    BuildBatchesOptions b;
    b.delta = analysis_dir / "delta.mat";
    b.schedule = opt.schedule;
    b.epochs = scl_epochs;
    b.batch_size = opt.scl_batch_size;
    b.epsilon = opt.epsilon;
    b.exclude_duplicate_texts = opt.exclude_duplicate_texts;
    b.data = data_dir;
    b.seed = opt.seed;
    b.out = plan_path;
    build_batches(b);
  });
  stage("train-scl", [&] {
    TrainOptions s = t;
    s.epochs = scl_epochs;
    s.batch_size = opt.scl_batch_size;
    s.plan = plan_path;
    if (opt.init_from_reference) s.init_from = ref_dir;
    s.out = scl_dir;
    train_scl(s);
  });
  stage("report", [&] {
    report({analysis_dir, opt.schedule, scl_epochs, {ref_dir / "loss.csv", scl_dir / "loss.csv"}, report_dir});
  });
}

namespace {

constexpr const char* kFooter = R"(Exit codes:
  0  success
  1  usage error (bad flag, missing input file)
  2  format error (malformed or inconsistent file)
  3  numeric degeneracy (zero-norm embedding, fewer than 2 checkpoints, degenerate fit)
  4  divergence (non-finite training loss)

Files:
  dataset dir     dataset.json, video.mat, text.mat
  snapshot dir    manifest.json {n, dim, checkpoints, aggregation, format},
                  ckpt_<k>/video.mat + ckpt_<k>/text.mat (or ckpt_<k>/sim.mat),
                  encoder.json, loss.csv (epoch,loss,alpha,mean_batch_score)
  *.mat           one record per line: <id> <rows> <rows*cols values, %.17g>
  analysis dir    delta.mat, fits.csv (i,j,a,b,s0,sK,label,fall_through),
                  report.csv (category,count,fraction), positives.csv,
                  trajectories.svg, analysis.json
  plan.jsonl      {"epoch","alpha","batch_index","ids","score","seed_id"} per line)";

template <typename T>
void assign_if(const CLI::Option* flag, std::optional<T>& target, const T& value) {
  if (flag->count() > 0) target = value;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Curriculum pair selection for contrastive learning: trajectory analysis, "
               "curriculum batch planning and a toy dual-encoder trainer."};
  app.name("scl");
  app.footer(kFooter);
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool verbose = false;
  app.add_option("--seed", seed, "Seed shared by every stochastic stage")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("--verbose", verbose, "Progress messages on stderr");

  // gen-data
  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic paired dataset with duplicate-text groups");
  gen_cmd->add_option("--n", gen.n, "Number of pairs")->capture_default_str();
  gen_cmd->add_option("--dims", gen.dims, "d_v,d_t,T_v,T_t")->capture_default_str();
  gen_cmd->add_option("--groups", gen.groups, "Group histogram size:count,... (default 1:n)");
  gen_cmd->add_option("--noise", gen.noise, "Gaussian noise on video tokens")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output dataset directory")->required();

  // train-ref / train-scl
  std::string ref_mode = "cico", scl_mode = "cico";
  int ref_epochs = 40, scl_epochs = 0;
  std::size_t ref_batch = 16, scl_batch = 8;
  std::string ref_init, scl_init, scl_plan;
  TrainOptions ref, scl;
  auto add_train_flags = [](CLI::App* cmd, TrainOptions& t, std::string& mode, std::string& init) {
    cmd->add_option("--data", t.data, "Dataset directory")->required();
    cmd->add_option("--lr", t.learning_rate, "Gradient descent step size")->capture_default_str();
    cmd->add_option("--interval", t.interval, "Snapshot every N epochs (plus epoch 0 and the last)")
        ->capture_default_str();
    cmd->add_option("--mode", mode, "Aggregation: cls, mean or cico")->capture_default_str();
    cmd->add_option("--embed-dim", t.embed_dim, "Shared embedding dimension")->capture_default_str();
    cmd->add_flag("--freeze-text", t.freeze_text, "Keep the text projection fixed");
    cmd->add_option("--init-from", init, "Start from encoder.json in this snapshot directory");
    cmd->add_option("--out", t.out, "Output snapshot directory")->required();
  };
  auto* ref_cmd = app.add_subcommand("train-ref", "Train the reference dual encoder and save checkpoint snapshots");
  add_train_flags(ref_cmd, ref, ref_mode, ref_init);
  auto* ref_epochs_opt = ref_cmd->add_option("--epochs", ref_epochs, "Training epochs")->capture_default_str();
  auto* ref_batch_opt = ref_cmd->add_option("--batch-size", ref_batch, "Batch size")->capture_default_str();

  auto* scl_cmd = app.add_subcommand("train-scl", "Train on curriculum batches taken from a plan file");
  add_train_flags(scl_cmd, scl, scl_mode, scl_init);
  auto* scl_epochs_opt = scl_cmd->add_option("--epochs", scl_epochs, "Training epochs (default: epochs in plan)");
  auto* scl_batch_opt = scl_cmd->add_option("--batch-size", scl_batch, "Largest batch accepted from the plan")
                            ->capture_default_str();
  scl_cmd->add_option("--plan", scl_plan, "plan.jsonl from build-batches")->required();

  // analyze
  AnalyzeOptions an;
  std::string an_mode;
  auto* an_cmd = app.add_subcommand("analyze", "Fit similarity trajectories, compute delta and classify negatives");
  an_cmd->add_option("--snapshots", an.snapshots, "Snapshot directory")->required();
  an_cmd->add_option("--mode", an_mode, "Aggregation override: cls, mean or cico");
  an_cmd->add_option("--epsilon", an.epsilon, "Change threshold for the taxonomy")->capture_default_str();
  an_cmd->add_option("--out", an.out, "Output directory")->required();

  // build-batches
  BuildBatchesOptions bb;
  std::string bb_schedule = "linear", bb_data;
  auto* bb_cmd = app.add_subcommand("build-batches", "Plan curriculum mini-batches for every epoch");
  bb_cmd->add_option("--delta", bb.delta, "delta.mat from analyze")->required();
  bb_cmd->add_option("--schedule", bb_schedule, "random, easy, hard, linear, sqrt or log")->capture_default_str();
  bb_cmd->add_option("--epochs", bb.epochs, "Epochs to plan")->capture_default_str();
  bb_cmd->add_option("--batch-size", bb.batch_size, "Batch size")->capture_default_str();
  bb_cmd->add_option("--epsilon", bb.epsilon, "Threshold for the |delta| summary printed with --verbose")
      ->capture_default_str();
  bb_cmd->add_flag("--exclude-duplicate-texts", bb.exclude_duplicate_texts,
                   "Never place two samples of one duplicate-text group in the same batch (needs --data)");
  bb_cmd->add_option("--data", bb_data, "Dataset directory supplying group ids");
  bb_cmd->add_option("--out", bb.out, "Output plan.jsonl")->required();

  // report
  ReportOptions rp;
  std::string rp_schedule = "linear";
  auto* rp_cmd = app.add_subcommand("report", "Write report.csv and SVG charts from analyze outputs");
  rp_cmd->add_option("--analysis", rp.analysis, "analyze output directory")->required();
  rp_cmd->add_option("--schedule", rp_schedule, "Schedule to chart")->capture_default_str();
  rp_cmd->add_option("--epochs", rp.epochs, "Epochs of the charted schedule")->capture_default_str();
  rp_cmd->add_option("--log", rp.logs, "loss.csv files to chart (repeatable)");
  rp_cmd->add_option("--out", rp.out, "Output directory")->required();

  // pipeline
  PipelineOptions pl;
  std::string pl_mode = "cico", pl_schedule = "linear";
  auto* pl_cmd = app.add_subcommand("pipeline", "gen-data -> train-ref -> analyze -> build-batches -> train-scl -> report");
  pl_cmd->add_option("--n", pl.data.n, "Number of pairs")->capture_default_str();
  pl_cmd->add_option("--dims", pl.data.dims, "d_v,d_t,T_v,T_t")->capture_default_str();
  pl_cmd->add_option("--groups", pl.data.groups, "Group histogram size:count,... (default 1:n)");
  pl_cmd->add_option("--noise", pl.data.noise, "Gaussian noise on video tokens")->capture_default_str();
  pl_cmd->add_option("--epochs", pl.epochs, "Reference training epochs")->capture_default_str();
  int pl_scl_epochs = 0;
  auto* pl_scl_epochs_opt =
      pl_cmd->add_option("--scl-epochs", pl_scl_epochs, "Selective training epochs (default --epochs)");
  pl_cmd->add_option("--batch-size", pl.batch_size, "Reference batch size")->capture_default_str();
  pl_cmd->add_option("--scl-batch-size", pl.scl_batch_size, "Selective batch size")->capture_default_str();
  pl_cmd->add_option("--lr", pl.learning_rate, "Gradient descent step size")->capture_default_str();
  pl_cmd->add_option("--interval", pl.interval, "Snapshot interval in epochs")->capture_default_str();
  pl_cmd->add_option("--mode", pl_mode, "Aggregation: cls, mean or cico")->capture_default_str();
  pl_cmd->add_option("--embed-dim", pl.embed_dim, "Shared embedding dimension")->capture_default_str();
  pl_cmd->add_flag("--freeze-text", pl.freeze_text, "Keep the text projection fixed");
  pl_cmd->add_option("--schedule", pl_schedule, "random, easy, hard, linear, sqrt or log")->capture_default_str();
  pl_cmd->add_option("--epsilon", pl.epsilon, "Change threshold for the taxonomy")->capture_default_str();
  pl_cmd->add_flag("--exclude-duplicate-texts", pl.exclude_duplicate_texts, "Duplicate-group guard during selection");
  pl_cmd->add_flag("--init-from-reference", pl.init_from_reference, "Start selective training from the reference weights");
  pl_cmd->add_option("--out", pl.out, "Run directory")->capture_default_str()->default_val("scl_run");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : static_cast<int>(ErrorKind::usage);
  }

  set_thread_count(threads);
  std::ostream* log = verbose ? &err : nullptr;
  const auto* cmd = app.get_subcommands().front();
  try {
    if (cmd == gen_cmd) {
      gen.seed = seed;
      gen_data(gen);
    } else if (cmd == ref_cmd) {
      ref.mode = parse_aggregation(ref_mode);
      ref.seed = seed;
      assign_if(ref_epochs_opt, ref.epochs, ref_epochs);
      assign_if(ref_batch_opt, ref.batch_size, ref_batch);
      if (!ref_init.empty()) ref.init_from = ref_init;
      train_ref(ref);
    } else if (cmd == scl_cmd) {
      scl.mode = parse_aggregation(scl_mode);
      scl.seed = seed;
      assign_if(scl_epochs_opt, scl.epochs, scl_epochs);
      assign_if(scl_batch_opt, scl.batch_size, scl_batch);
      if (!scl_init.empty()) scl.init_from = scl_init;
      scl.plan = scl_plan;
      train_scl(scl);
    } else if (cmd == an_cmd) {
      if (!an_mode.empty()) an.mode = parse_aggregation(an_mode);
      analyze(an);
    } else if (cmd == bb_cmd) {
      bb.schedule = parse_schedule(bb_schedule);
      bb.seed = seed;
      if (!bb_data.empty()) bb.data = bb_data;
      build_batches(bb, log);
    } else if (cmd == rp_cmd) {
      rp.schedule = parse_schedule(rp_schedule);
      report(rp);
    } else if (cmd == pl_cmd) {
      pl.mode = parse_aggregation(pl_mode);
      pl.schedule = parse_schedule(pl_schedule);
      pl.seed = seed;
      assign_if(pl_scl_epochs_opt, pl.scl_epochs, pl_scl_epochs);
      pipeline(pl, log);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::usage);
  }
  if (verbose) err << cmd->get_name() << ": done\n";
  return 0;
}

}  // namespace scl::cli
