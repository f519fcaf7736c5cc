// Command-line front end for the face clustering pipeline: synthetic data
// generation, KNN graph construction, training, linkage prediction,
// clustering, evaluation, threshold sweeps, ROC curves and the ablation
// table. Every subcommand echoes its resolved configuration and writes a
// reproducibility manifest next to its primary output, so identical
// manifests replay to byte-identical artifacts.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "facet/facet.hpp"

namespace {

using nlohmann::json;

void write_manifest(const std::string& primary_out, const std::string& command,
                    const json& config) {
  json manifest;
  manifest["command"] = command;
  manifest["config"] = config;
  manifest["format_versions"] = {{"fctf", facet::kFeatureFormatVersion},
                                 {"fctl", facet::kLabelFormatVersion},
                                 {"fctg", facet::kGraphFormatVersion},
                                 {"fctw", facet::kCheckpointFormatVersion}};
  std::ofstream out(primary_out + ".manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw facet::FormatError(primary_out + ".manifest.json: cannot write");
  out << manifest.dump(2) << '\n';
}

void echo_config(const std::string& command, const json& config) {
  std::cout << "[facet] " << command << " " << config.dump() << std::endl;
}

std::vector<double> parse_tau_grid(const std::string& text) {
  std::vector<double> grid;
  auto colon1 = text.find(':');
  if (colon1 != std::string::npos) {
    auto colon2 = text.find(':', colon1 + 1);
    if (colon2 == std::string::npos) {
      throw facet::UsageError("tau grid: expected start:end:step, got \"" + text + "\"");
    }
    double start = std::stod(text.substr(0, colon1));
    double stop = std::stod(text.substr(colon1 + 1, colon2 - colon1 - 1));
    double step = std::stod(text.substr(colon2 + 1));
    if (!(step > 0) || stop < start) {
      throw facet::UsageError("tau grid: need start <= end and step > 0");
    }
    std::size_t count = static_cast<std::size_t>((stop - start) / step + 1.5);
    for (std::size_t i = 0; i < count; ++i) {
      double tau = start + static_cast<double>(i) * step;
      if (tau > stop + 1e-12) break;
      grid.push_back(std::min(tau, 1.0));
    }
  } else {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) grid.push_back(std::stod(item));
    }
  }
  if (grid.empty()) throw facet::UsageError("tau grid: no thresholds in \"" + text + "\"");
  for (double tau : grid) {
    if (tau < 0 || tau > 1) {
      throw facet::UsageError("tau grid: threshold " + std::to_string(tau) +
                              " outside [0, 1]");
    }
  }
  return grid;
}

facet::FeatureStore load_store(const std::string& features_path,
                               const std::string& labels_path) {
  auto store = facet::load_features(features_path);
  if (!labels_path.empty()) {
    facet::attach_labels(store, facet::load_labels(labels_path));
  }
  return store;
}

facet::NeighborGraph obtain_graph(const facet::FeatureStore& store,
                                  const std::string& graph_path, std::size_t hop1,
                                  std::size_t hop2, std::size_t workers) {
  if (!graph_path.empty() && std::filesystem::exists(graph_path)) {
    auto graph = facet::load_graph(graph_path);
    if (graph.count != store.count) {
      throw facet::UsageError("graph cache covers " + std::to_string(graph.count) +
                              " nodes, features have " + std::to_string(store.count));
    }
    return graph;
  }
  auto graph = facet::build_knn(store, hop1, hop2, workers);
  if (!graph_path.empty()) facet::save_graph(graph, graph_path);
  return graph;
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenDataOptions {
  facet::SyntheticSpec spec;
  std::string config_path;
  std::string features_out;
  std::string labels_out;
};

void run_gen_data(const GenDataOptions& opt, const json& config) {
  echo_config("gen-data", config);
  auto store = facet::generate(opt.spec);
  facet::save_features(store, opt.features_out);
  facet::save_labels(store.labels, opt.labels_out);
  write_manifest(opt.features_out, "gen-data", config);
  std::cout << "[facet] wrote " << store.count << " x " << store.dim
            << " features to " << opt.features_out << ", labels to " << opt.labels_out
            << std::endl;
}

// ---------------------------------------------------------------------------
// build-knn
// ---------------------------------------------------------------------------

struct BuildKnnOptions {
  std::string features;
  std::size_t hop1 = 150;
  std::size_t hop2 = 5;
  std::size_t workers = 1;
  std::string out;
};

void run_build_knn(const BuildKnnOptions& opt, const json& config) {
  echo_config("build-knn", config);
  auto store = facet::load_features(opt.features);
  auto graph = facet::build_knn(store, opt.hop1, opt.hop2, opt.workers);
  facet::save_graph(graph, opt.out);
  write_manifest(opt.out, "build-knn", config);
  std::cout << "[facet] wrote graph (" << graph.count << " nodes, hop1="
            << graph.hop1_size << ", hop2=" << graph.hop2_size << ") to " << opt.out
            << std::endl;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOptions {
  std::string features, labels, graph;
  std::string variant = "full";
  facet::TrainConfig cfg;
  std::size_t workers = 1;
  std::size_t checkpoint_every = 0;
  std::string checkpoint;
  std::string out;  // loss trace CSV
};

void run_train(TrainOptions& opt, const json& config) {
  echo_config("train", config);
  auto store = load_store(opt.features, opt.labels);
  auto graph = obtain_graph(store, opt.graph, opt.cfg.hop1, opt.cfg.hop2, opt.workers);
  opt.cfg.hop1 = graph.hop1_size;
  opt.cfg.hop2 = graph.hop2_size;
  auto variant = facet::parse_variant(opt.variant);

  std::function<void(std::size_t, facet::FaceTModel&)> on_epoch;
  if (opt.checkpoint_every > 0) {
    on_epoch = [&](std::size_t epoch, facet::FaceTModel& model) {
      if ((epoch + 1) % opt.checkpoint_every == 0) {
        facet::save_checkpoint(model,
                               opt.checkpoint + ".epoch" + std::to_string(epoch));
      }
    };
  }
  auto result = facet::train_model<float>(store, graph, opt.cfg, variant, on_epoch);
  facet::save_checkpoint(result.model, opt.checkpoint);
  std::string trace_path = opt.out.empty() ? opt.checkpoint + ".loss.csv" : opt.out;
  facet::write_loss_trace_csv(result.trace, trace_path);
  write_manifest(opt.checkpoint, "train", config);
  if (!result.trace.empty()) {
    std::cout << "[facet] final epoch mean loss "
              << facet::format_double(result.trace.back().mean_loss) << std::endl;
  }
  std::cout << "[facet] wrote checkpoint to " << opt.checkpoint << ", loss trace to "
            << trace_path << std::endl;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictOptions {
  std::string features, graph, checkpoint;
  std::string variant;  // empty = take from checkpoint
  double tau = 0.5;
  std::size_t workers = 1;
  std::string out;
};

void run_predict(const PredictOptions& opt, const json& config) {
  echo_config("predict", config);
  auto store = facet::load_features(opt.features);
  auto graph = facet::load_graph(opt.graph);
  if (graph.count != store.count) {
    throw facet::UsageError("graph cache covers " + std::to_string(graph.count) +
                            " nodes, features have " + std::to_string(store.count));
  }
  facet::FaceTModel model;
  if (opt.checkpoint.empty()) {
    if (opt.variant != "naive") {
      throw facet::UsageError("predict: --checkpoint required unless --variant naive");
    }
    model.variant = facet::Variant::naive;
  } else {
    model = facet::load_model(opt.checkpoint);
    if (!opt.variant.empty() &&
        facet::parse_variant(opt.variant) != model.variant) {
      throw facet::UsageError("predict: checkpoint variant is " +
                              std::string(facet::variant_name(model.variant)) +
                              ", --variant says " + opt.variant);
    }
    if (model.dim != 0 && model.dim != store.dim) {
      throw facet::UsageError("predict: model dimension " + std::to_string(model.dim) +
                              " vs feature dimension " + std::to_string(store.dim));
    }
  }
  auto links = facet::predict_all(store, graph, model, opt.workers,
                                  static_cast<float>(opt.tau));
  facet::write_linkage_csv(links, opt.out);
  write_manifest(opt.out, "predict", config);
  std::cout << "[facet] wrote " << links.rows.size() << " linkage rows to " << opt.out
            << std::endl;
}

// ---------------------------------------------------------------------------
// cluster
// ---------------------------------------------------------------------------

struct ClusterOptions {
  std::string links;
  std::string features;  // optional, pins the instance count
  double tau = 0.5;
  std::string out;
};

void run_cluster(const ClusterOptions& opt, const json& config) {
  echo_config("cluster", config);
  auto links = facet::read_linkage_csv(opt.links);
  std::size_t n = 0;
  if (!opt.features.empty()) {
    n = facet::load_features(opt.features).count;
  } else {
    for (const auto& row : links.rows) {
      n = std::max<std::size_t>(n, std::max(row.query, row.candidate) + 1);
    }
  }
  auto edges = facet::threshold_links(links, opt.tau);
  auto partition = facet::union_find_clusters(n, edges);
  facet::write_partition(partition, opt.out);
  write_manifest(opt.out, "cluster", config);
  std::cout << "[facet] " << partition.count << " clusters over " << n
            << " instances at tau=" << opt.tau << ", wrote " << opt.out << std::endl;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateOptions {
  std::string partition, labels, out;
};

void run_evaluate(const EvaluateOptions& opt, const json& config) {
  echo_config("evaluate", config);
  auto partition = facet::read_partition(opt.partition);
  auto labels = facet::load_labels(opt.labels);
  auto report = facet::evaluate_clustering(partition, labels);
  facet::write_report(report, opt.out);
  facet::write_report_csv(report, opt.out + ".csv");
  write_manifest(opt.out, "evaluate", config);
  std::cout << facet::report_text(report);
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepOptions {
  std::string links, labels, tau_grid = "0.1:0.9:0.1", out;
};

void run_sweep(const SweepOptions& opt, const json& config) {
  echo_config("sweep", config);
  auto links = facet::read_linkage_csv(opt.links);
  auto labels = facet::load_labels(opt.labels);
  auto grid = parse_tau_grid(opt.tau_grid);
  auto sweep = facet::sweep_threshold(links, labels, grid);
  facet::write_sweep_csv(sweep, opt.out);
  write_manifest(opt.out, "sweep", config);
  const auto& best = sweep.rows[sweep.best_index];
  std::cout << "[facet] best tau=" << facet::format_double(best.tau) << " pairwise_f="
            << facet::format_double(best.metrics.pairwise.f) << " bcubed_f="
            << facet::format_double(best.metrics.bcubed.f) << " nmi="
            << facet::format_double(best.metrics.nmi) << " clusters="
            << best.clusters << std::endl;
}

// ---------------------------------------------------------------------------
// roc
// ---------------------------------------------------------------------------

struct RocOptions {
  std::string links, labels, out;
  std::size_t top_k = 80;
};

void run_roc(const RocOptions& opt, const json& config) {
  echo_config("roc", config);
  auto links = facet::read_linkage_csv(opt.links);
  auto labels = facet::load_labels(opt.labels);
  auto points = facet::roc_points(links, labels, opt.top_k);
  facet::write_roc_csv(points, opt.out);
  write_manifest(opt.out, "roc", config);
  std::cout << "[facet] wrote " << points.size() << " ROC points (auc="
            << facet::format_double(facet::roc_auc(points)) << ") to " << opt.out
            << std::endl;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

struct AblateOptions {
  std::string features, labels, graph;
  facet::TrainConfig cfg;
  std::string tau_grid = "0.1:0.9:0.1";
  std::size_t workers = 1;
  std::string out;
};

void run_ablate(AblateOptions& opt, const json& config) {
  echo_config("ablate", config);
  auto store = load_store(opt.features, opt.labels);
  auto graph = obtain_graph(store, opt.graph, opt.cfg.hop1, opt.cfg.hop2, opt.workers);
  opt.cfg.hop1 = graph.hop1_size;
  opt.cfg.hop2 = graph.hop2_size;
  auto grid = parse_tau_grid(opt.tau_grid);

  auto score = [&](facet::FaceTModel& model) {
    auto links = facet::predict_all(store, graph, model, opt.workers);
    auto sweep = facet::sweep_threshold(links, store.labels, grid);
    return sweep.rows[sweep.best_index];
  };

  std::vector<facet::AblationRow> table;
  auto add_row = [&](const char* name, const facet::SweepRow& best) {
    table.push_back(facet::AblationRow{name, best.tau, best.metrics.pairwise.f,
                                       best.metrics.bcubed.f, best.metrics.nmi});
    std::cout << "[facet] " << name << ": best tau="
              << facet::format_double(best.tau) << " pairwise_f="
              << facet::format_double(best.metrics.pairwise.f) << " bcubed_f="
              << facet::format_double(best.metrics.bcubed.f) << " nmi="
              << facet::format_double(best.metrics.nmi) << std::endl;
  };

  facet::FaceTModel naive;
  naive.variant = facet::Variant::naive;
  add_row("naive", score(naive));
  for (auto variant : {facet::Variant::only_re, facet::Variant::only_lp,
                       facet::Variant::full}) {
    std::cout << "[facet] training " << facet::variant_name(variant) << std::endl;
    auto result = facet::train_model<float>(store, graph, opt.cfg, variant);
    add_row(facet::variant_name(variant), score(result.model));
  }
  facet::write_ablation_csv(table, opt.out);
  write_manifest(opt.out, "ablate", config);
  std::cout << "[facet] wrote ablation table to " << opt.out << std::endl;
}

// ---------------------------------------------------------------------------

void load_gen_config_file(GenDataOptions& opt) {
  std::ifstream in(opt.config_path);
  if (!in) throw facet::FormatError(opt.config_path + ": cannot open config file");
  json parsed;
  try {
    in >> parsed;
  } catch (const json::exception& e) {
    throw facet::FormatError(opt.config_path + ": invalid JSON: " + e.what());
  }
  auto& spec = opt.spec;
  if (parsed.contains("identities")) spec.identities = parsed["identities"].get<std::size_t>();
  if (parsed.contains("samples_min")) spec.samples_min = parsed["samples_min"].get<std::size_t>();
  if (parsed.contains("samples_max")) spec.samples_max = parsed["samples_max"].get<std::size_t>();
  if (parsed.contains("dim")) spec.dim = parsed["dim"].get<std::size_t>();
  if (parsed.contains("sigma_clean")) spec.sigma_clean = parsed["sigma_clean"].get<double>();
  if (parsed.contains("sigma_hard")) spec.sigma_hard = parsed["sigma_hard"].get<double>();
  if (parsed.contains("rho")) spec.challenging_fraction = parsed["rho"].get<double>();
  if (parsed.contains("challenging_fraction")) {
    spec.challenging_fraction = parsed["challenging_fraction"].get<double>();
  }
  if (parsed.contains("seed")) spec.seed = parsed["seed"].get<std::uint64_t>();
}

json train_config_json(const facet::TrainConfig& cfg) {
  return json{{"batch_size", cfg.batch_size},
              {"lr", cfg.base_lr},
              {"warmup_steps", cfg.warmup_steps},
              {"epochs", cfg.epochs},
              {"weight_decay", cfg.weight_decay},
              {"momentum", cfg.momentum},
              {"hop1", cfg.hop1},
              {"hop2", cfg.hop2},
              {"dropout", cfg.dropout},
              {"seed", cfg.seed},
              {"heads", cfg.heads},
              {"head_dim", cfg.head_dim},
              {"depth", cfg.depth}};
}

void add_train_flags(CLI::App* cmd, facet::TrainConfig& cfg) {
  cmd->add_option("--hop1", cfg.hop1, "hop1 candidate count");
  cmd->add_option("--hop2", cfg.hop2, "hop2 context size");
  cmd->add_option("--epochs", cfg.epochs, "training epochs");
  cmd->add_option("--batch-size", cfg.batch_size, "queries per optimizer step");
  cmd->add_option("--lr", cfg.base_lr, "base learning rate");
  cmd->add_option("--warmup-steps", cfg.warmup_steps, "linear warm-up steps");
  cmd->add_option("--weight-decay", cfg.weight_decay, "decoupled weight decay");
  cmd->add_option("--dropout", cfg.dropout, "dropout ratio");
  cmd->add_option("--heads", cfg.heads, "attention head count");
  cmd->add_option("--head-dim", cfg.head_dim, "per-head projection dim");
  cmd->add_option("--depth", cfg.depth, "encoder depth d_e");
  cmd->add_option("--seed", cfg.seed, "rng seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FaceT: transformer-based supervised face clustering"};
  app.require_subcommand(1);

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic labeled store");
  gen_cmd->add_option("--identities", gen.spec.identities, "identity count");
  gen_cmd->add_option("--samples-min", gen.spec.samples_min, "min samples per identity");
  gen_cmd->add_option("--samples-max", gen.spec.samples_max, "max samples per identity");
  gen_cmd->add_option("--dim", gen.spec.dim, "feature dimension");
  gen_cmd->add_option("--sigma-clean", gen.spec.sigma_clean, "clean noise sigma");
  gen_cmd->add_option("--sigma-hard", gen.spec.sigma_hard, "challenging noise sigma");
  gen_cmd->add_option("--rho", gen.spec.challenging_fraction, "challenging fraction");
  gen_cmd->add_option("--seed", gen.spec.seed, "rng seed");
  gen_cmd->add_option("--config", gen.config_path, "JSON file with generator params");
  gen_cmd->add_option("--out", gen.features_out, "output feature file (FCTF)")
      ->required();
  gen_cmd->add_option("--labels", gen.labels_out, "output label file (FCTL)")
      ->required();

  BuildKnnOptions knn;
  auto* knn_cmd = app.add_subcommand("build-knn", "build the exact KNN graph cache");
  knn_cmd->add_option("--features", knn.features, "input feature file")->required();
  knn_cmd->add_option("--hop1", knn.hop1, "hop1 list size");
  knn_cmd->add_option("--hop2", knn.hop2, "hop2 list size");
  knn_cmd->add_option("--workers", knn.workers, "worker threads");
  knn_cmd->add_option("--out", knn.out, "output graph file (FCTG)")->required();

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "train a model variant");
  train_cmd->add_option("--features", tr.features, "input feature file")->required();
  train_cmd->add_option("--labels", tr.labels, "input label file");
  train_cmd->add_option("--graph", tr.graph, "graph cache (built+saved if absent)");
  train_cmd->add_option("--variant", tr.variant, "full|only_re|only_lp");
  train_cmd->add_option("--workers", tr.workers, "worker threads for KNN build");
  train_cmd->add_option("--checkpoint-every", tr.checkpoint_every,
                        "write intermediate checkpoints every N epochs");
  add_train_flags(train_cmd, tr.cfg);
  train_cmd->add_option("--checkpoint", tr.checkpoint, "output checkpoint (FCTW)")
      ->required();
  train_cmd->add_option("--out", tr.out, "loss trace CSV (default <checkpoint>.loss.csv)");

  PredictOptions pr;
  auto* predict_cmd = app.add_subcommand("predict", "emit linkage probabilities");
  predict_cmd->add_option("--features", pr.features, "input feature file")->required();
  predict_cmd->add_option("--graph", pr.graph, "graph cache file")->required();
  predict_cmd->add_option("--checkpoint", pr.checkpoint, "trained checkpoint");
  predict_cmd->add_option("--variant", pr.variant, "expected variant, or naive");
  predict_cmd->add_option("--tau", pr.tau, "default threshold stored with the rows");
  predict_cmd->add_option("--workers", pr.workers, "worker threads");
  predict_cmd->add_option("--out", pr.out, "output linkage CSV")->required();

  ClusterOptions cl;
  auto* cluster_cmd = app.add_subcommand("cluster", "threshold links and extract clusters");
  cluster_cmd->add_option("--links", cl.links, "linkage CSV")->required();
  cluster_cmd->add_option("--features", cl.features, "feature file (pins instance count)");
  cluster_cmd->add_option("--tau", cl.tau, "link threshold");
  cluster_cmd->add_option("--out", cl.out, "output partition file")->required();

  EvaluateOptions ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "score a partition against labels");
  eval_cmd->add_option("--partition", ev.partition, "partition file")->required();
  eval_cmd->add_option("--labels", ev.labels, "label file")->required();
  eval_cmd->add_option("--out", ev.out, "report path (text; .csv twin added)")
      ->required();

  SweepOptions sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "score a tau grid");
  sweep_cmd->add_option("--links", sw.links, "linkage CSV")->required();
  sweep_cmd->add_option("--labels", sw.labels, "label file")->required();
  sweep_cmd->add_option("--tau-grid", sw.tau_grid, "start:end:step or comma list");
  sweep_cmd->add_option("--out", sw.out, "output sweep CSV")->required();

  RocOptions roc;
  auto* roc_cmd = app.add_subcommand("roc", "ROC curve of linkage predictions");
  roc_cmd->add_option("--links", roc.links, "linkage CSV")->required();
  roc_cmd->add_option("--labels", roc.labels, "label file")->required();
  roc_cmd->add_option("--top-k", roc.top_k, "keep top-k predictions per node");
  roc_cmd->add_option("--out", roc.out, "output ROC CSV")->required();

  AblateOptions ab;
  auto* ablate_cmd = app.add_subcommand(
      "ablate", "train and score naive/only_re/only_lp/full on one dataset");
  ablate_cmd->add_option("--features", ab.features, "input feature file")->required();
  ablate_cmd->add_option("--labels", ab.labels, "input label file");
  ablate_cmd->add_option("--graph", ab.graph, "graph cache (built+saved if absent)");
  ablate_cmd->add_option("--tau-grid", ab.tau_grid, "start:end:step or comma list");
  ablate_cmd->add_option("--workers", ab.workers, "worker threads");
  add_train_flags(ablate_cmd, ab.cfg);
  ablate_cmd->add_option("--out", ab.out, "output ablation CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (gen_cmd->parsed()) {
      if (!gen.config_path.empty()) {
        // config file first, explicit flags override
        GenDataOptions overlay = gen;
        load_gen_config_file(gen);
        if (gen_cmd->count("--identities")) gen.spec.identities = overlay.spec.identities;
        if (gen_cmd->count("--samples-min")) gen.spec.samples_min = overlay.spec.samples_min;
        if (gen_cmd->count("--samples-max")) gen.spec.samples_max = overlay.spec.samples_max;
        if (gen_cmd->count("--dim")) gen.spec.dim = overlay.spec.dim;
        if (gen_cmd->count("--sigma-clean")) gen.spec.sigma_clean = overlay.spec.sigma_clean;
        if (gen_cmd->count("--sigma-hard")) gen.spec.sigma_hard = overlay.spec.sigma_hard;
        if (gen_cmd->count("--rho")) gen.spec.challenging_fraction = overlay.spec.challenging_fraction;
        if (gen_cmd->count("--seed")) gen.spec.seed = overlay.spec.seed;
      }
      json config{{"identities", gen.spec.identities},
                  {"samples_min", gen.spec.samples_min},
                  {"samples_max", gen.spec.samples_max},
                  {"dim", gen.spec.dim},
                  {"sigma_clean", gen.spec.sigma_clean},
                  {"sigma_hard", gen.spec.sigma_hard},
                  {"challenging_fraction", gen.spec.challenging_fraction},
                  {"seed", gen.spec.seed},
                  {"features", gen.features_out},
                  {"labels", gen.labels_out}};
      run_gen_data(gen, config);
    } else if (knn_cmd->parsed()) {
      json config{{"features", knn.features}, {"hop1", knn.hop1}, {"hop2", knn.hop2},
                  {"workers", knn.workers},   {"out", knn.out}};
      run_build_knn(knn, config);
    } else if (train_cmd->parsed()) {
      json config = train_config_json(tr.cfg);
      config["features"] = tr.features;
      config["labels"] = tr.labels;
      config["graph"] = tr.graph;
      config["variant"] = tr.variant;
      config["checkpoint"] = tr.checkpoint;
      config["checkpoint_every"] = tr.checkpoint_every;
      config["out"] = tr.out;
      run_train(tr, config);
    } else if (predict_cmd->parsed()) {
      json config{{"features", pr.features}, {"graph", pr.graph},
                  {"checkpoint", pr.checkpoint}, {"variant", pr.variant},
                  {"tau", pr.tau}, {"workers", pr.workers}, {"out", pr.out}};
      run_predict(pr, config);
    } else if (cluster_cmd->parsed()) {
      json config{{"links", cl.links}, {"features", cl.features}, {"tau", cl.tau},
                  {"out", cl.out}};
      run_cluster(cl, config);
    } else if (eval_cmd->parsed()) {
      json config{{"partition", ev.partition}, {"labels", ev.labels}, {"out", ev.out}};
      run_evaluate(ev, config);
    } else if (sweep_cmd->parsed()) {
      json config{{"links", sw.links}, {"labels", sw.labels},
                  {"tau_grid", sw.tau_grid}, {"out", sw.out}};
      run_sweep(sw, config);
    } else if (roc_cmd->parsed()) {
      json config{{"links", roc.links}, {"labels", roc.labels},
                  {"top_k", roc.top_k}, {"out", roc.out}};
      run_roc(roc, config);
    } else if (ablate_cmd->parsed()) {
      json config = train_config_json(ab.cfg);
      config["features"] = ab.features;
      config["labels"] = ab.labels;
      config["graph"] = ab.graph;
      config["tau_grid"] = ab.tau_grid;
      config["workers"] = ab.workers;
      config["out"] = ab.out;
      run_ablate(ab, config);
    }
  } catch (const facet::FormatError& e) {
    std::cerr << "error (format): " << e.what() << std::endl;
    return 2;
  } catch (const facet::NumericError& e) {
    std::cerr << "error (numeric): " << e.what() << std::endl;
    return 3;
  } catch (const facet::TrainingError& e) {
    std::cerr << "error (training): " << e.what() << std::endl;
    return 3;
  } catch (const facet::Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
