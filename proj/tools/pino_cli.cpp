// Command-line front end: dataset generation, physics-informed training,
// evaluation, hyper-parameter search, architecture ablations, embedding
// analysis, and plotting.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "pino/pino.hpp"

namespace fs = std::filesystem;
using namespace pino;

namespace {

struct TrainFlags {
  std::string data_dir;
  std::string out_dir;
  std::string model = "gano";
  std::string pooling = "avg";
  std::string fusion = "concat";
  std::string geo_input = "var-boundary";
  std::string config_file;
  double lr = 1e-3;
  double ratio = 0.3;
  int batch = 20;
  int epochs = 2000;
  std::uint64_t seed = 0;
  int width = 64;
  int geo_width = -1;  // defaults to width
  int geo_layers = 3;
  double alpha = 500.0;
  double alpha0 = 1e-5;
  double alpha1 = 1.0, alpha2 = 1.0, alpha3 = 1.0, alpha4 = 1.0;
  double youngs = 1.0;
  double poisson = 0.3;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f, bool with_model = true,
                     bool with_arch = true) {
  cmd->add_option("--data", f.data_dir, "dataset directory")->required();
  cmd->add_option("--out", f.out_dir, "output directory")->required();
  if (with_model)
    cmd->add_option("--model", f.model, "gano|dcon|pointnet|pointnet-star|deeponet");
  if (with_arch) {
    cmd->add_option("--pooling", f.pooling, "geometry pooling: avg|max|min");
    cmd->add_option("--fusion", f.fusion, "embedding fusion: concat|add|mul");
    cmd->add_option("--geo-input", f.geo_input,
                    "geometry input: var-boundary|all-boundary|interior|parametric");
  }
  cmd->add_option("--config", f.config_file, "JSON config file (flags override its keys)");
  cmd->add_option("--lr", f.lr, "learning rate");
  cmd->add_option("--ratio", f.ratio, "interior sampling ratio per epoch");
  cmd->add_option("--batch", f.batch, "batch size");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--seed", f.seed, "training seed");
  cmd->add_option("--width", f.width, "operator layer width");
  cmd->add_option("--geo-width", f.geo_width, "geometry embedding width (default: width)");
  cmd->add_option("--geo-layers", f.geo_layers, "geometry encoder layers");
  cmd->add_option("--alpha", f.alpha, "Darcy BC weight");
  cmd->add_option("--alpha0", f.alpha0, "plate residual weight");
  cmd->add_option("--alpha1", f.alpha1, "plate TB weight");
  cmd->add_option("--alpha2", f.alpha2, "plate L weight");
  cmd->add_option("--alpha3", f.alpha3, "plate R weight");
  cmd->add_option("--alpha4", f.alpha4, "plate hole weight");
  cmd->add_option("--youngs", f.youngs, "Young's modulus");
  cmd->add_option("--poisson", f.poisson, "Poisson's ratio");
}

/// Config-file values apply wherever the flag was not passed explicitly.
void apply_config_file(const CLI::App* cmd, TrainFlags& f) {
  if (f.config_file.empty()) return;
  std::ifstream in(f.config_file);
  if (!in) throw std::runtime_error("cannot open config file " + f.config_file);
  nlohmann::json j = nlohmann::json::parse(in);
  auto set_if_unset = [&](const char* flag, const char* key, auto& target) {
    const CLI::Option* opt = cmd->get_option_no_throw(flag);
    if ((opt == nullptr || opt->count() == 0) && j.contains(key)) target = j.at(key);
  };
  set_if_unset("--lr", "lr", f.lr);
  set_if_unset("--ratio", "ratio", f.ratio);
  set_if_unset("--batch", "batch_size", f.batch);
  set_if_unset("--epochs", "epochs", f.epochs);
  set_if_unset("--seed", "seed", f.seed);
  set_if_unset("--width", "width", f.width);
  set_if_unset("--geo-width", "geo_width", f.geo_width);
  set_if_unset("--geo-layers", "geo_layers", f.geo_layers);
  set_if_unset("--alpha", "alpha", f.alpha);
  set_if_unset("--alpha0", "alpha0", f.alpha0);
  set_if_unset("--alpha1", "alpha1", f.alpha1);
  set_if_unset("--alpha2", "alpha2", f.alpha2);
  set_if_unset("--alpha3", "alpha3", f.alpha3);
  set_if_unset("--alpha4", "alpha4", f.alpha4);
  set_if_unset("--youngs", "youngs", f.youngs);
  set_if_unset("--poisson", "poisson", f.poisson);
  auto str_if_unset = [&](const char* flag, const char* key, std::string& target) {
    const CLI::Option* opt = cmd->get_option_no_throw(flag);
    if ((opt == nullptr || opt->count() == 0) && j.contains(key)) target = j.at(key);
  };
  str_if_unset("--model", "model", f.model);
  str_if_unset("--pooling", "pooling", f.pooling);
  str_if_unset("--fusion", "fusion", f.fusion);
  str_if_unset("--geo-input", "geo_input", f.geo_input);
}

ModelConfig model_config_for(const TrainFlags& f, const Dataset& data) {
  ModelConfig mc;
  mc.kind = parse_enum<ModelKind>(f.model);
  mc.width = f.width;
  mc.geo_width = f.geo_width > 0 ? f.geo_width : f.width;
  mc.geo_layers = f.geo_layers;
  mc.pooling = parse_enum<Pooling>(f.pooling);
  mc.fusion = parse_enum<Fusion>(f.fusion);
  mc.geo_input = parse_enum<GeoInput>(f.geo_input);
  mc.out_dim = data.problem == ProblemKind::kDarcy ? 1 : 2;
  mc.branch_dim = branch_row_dim(data.problem);
  mc.geo_dim = geo_input_dim(data.problem, mc.geo_input);
  mc.coord_scale = data.problem == ProblemKind::kDarcy ? 1.0 : 0.1;
  if (mc.kind == ModelKind::kDeepOnet)
    mc.branch_size = static_cast<int>(branch_flat(data.samples.at(0)).size());
  return mc;
}

TrainConfig train_config_for(const TrainFlags& f) {
  TrainConfig tc;
  tc.lr = f.lr;
  tc.ratio = f.ratio;
  tc.batch_size = f.batch;
  tc.epochs = f.epochs;
  tc.seed = f.seed;
  tc.weights.alpha = f.alpha;
  tc.weights.alpha0 = f.alpha0;
  tc.weights.alpha1 = f.alpha1;
  tc.weights.alpha2 = f.alpha2;
  tc.weights.alpha3 = f.alpha3;
  tc.weights.alpha4 = f.alpha4;
  tc.material.youngs = f.youngs;
  tc.material.poisson = f.poisson;
  return tc;
}

void write_train_outputs(const fs::path& out, const TrainFlags& f, const TrainResult& r) {
  fs::create_directories(out);
  save_checkpoint(r.best, out / "checkpoint.bin");
  write_csv(out / "history.csv", history_csv(r.history));
  nlohmann::ordered_json summary;
  summary["model"] = f.model;
  summary["best_val_loss"] = r.best_val;
  summary["best_epoch"] = r.best_epoch;
  summary["epochs"] = r.history.size();
  summary["lr"] = f.lr;
  summary["ratio"] = f.ratio;
  summary["seed"] = f.seed;
  nlohmann::ordered_json terms;
  for (const auto& [name, v] : r.final_terms) terms[name] = v;
  summary["final_terms"] = terms;
  std::ofstream(out / "summary.json") << summary.dump(2) << "\n";
  std::cout << "best val loss " << r.best_val << " at epoch " << r.best_epoch << "\n";
}

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

int cmd_gen_data(const GenSettings& g, const std::string& out) {
  Dataset d = generate_dataset(g);
  write_dataset(d, g, out);
  std::cout << "wrote " << d.samples.size() << " samples (" << d.train_ids.size() << "/"
            << d.val_ids.size() << "/" << d.test_ids.size() << " train/val/test) to " << out
            << "\n";
  return 0;
}

int cmd_evaluate(const std::string& ckpt, const std::string& data_dir, const std::string& split,
                 const std::string& out_dir) {
  ModelState state = load_checkpoint(ckpt);
  LoadedDataset ld = read_dataset(data_dir);
  EvalSummary e = evaluate(state, ld.data, ld.data.split(split), split);
  fs::create_directories(out_dir);
  write_csv(fs::path(out_dir) / "eval.csv", eval_csv(e));
  std::cout << split << " mean " << e.mean << " std " << e.stddev << " best " << e.best_id
            << " worst " << e.worst_id << "\n";
  return 0;
}

int cmd_plot(const std::string& input, const std::string& out_dir) {
  CsvTable t = read_csv(input);
  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  auto col_values = [&](std::size_t c) {
    std::vector<double> v;
    for (const auto& row : t.rows)
      if (!row[c].empty()) v.push_back(std::stod(row[c]));
    return v;
  };

  if (t.header == std::vector<std::string>{"epoch", "train_loss", "val_loss", "wall_seconds"}) {
    Series train{"train_loss", col_values(0), col_values(1)};
    Series val{"val_loss", col_values(0), col_values(2)};
    svg_line_chart(out / "loss_curve.svg", "physics-informed training loss", {train, val},
                   /*log_y=*/true);
    write_csv(out / "loss_curve.csv", t);
  } else if (t.header.size() >= 4 && t.header[0] == "kind" && t.header[3] == "metric") {
    std::vector<double> metrics;
    for (const auto& row : t.rows)
      if (row[0] == "sample") metrics.push_back(std::stod(row[3]));
    svg_histogram(out / "metric_hist.svg", "per-sample evaluation metric",
                  {{"samples", metrics}});
    write_csv(out / "metric_hist.csv", t);
  } else if (t.header == std::vector<std::string>{"set", "index", "distance"}) {
    std::map<std::string, std::vector<double>> by_set;
    for (const auto& row : t.rows) by_set[row[0]].push_back(std::stod(row[2]));
    std::vector<HistogramSpec> specs;
    for (auto& [name, values] : by_set) specs.push_back({name, values});
    svg_histogram(out / "embedding_hist.svg", "geometry embedding distance to centroid", specs);
    write_csv(out / "embedding_hist.csv", t);
  } else if (t.header.size() >= 3 && t.header[0] == "axis") {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      xs.push_back(static_cast<double>(i));
      ys.push_back(std::stod(t.rows[i][2]));
    }
    svg_line_chart(out / "ablation.svg", "ablation validation loss by variant",
                   {{"val_loss", xs, ys}});
    write_csv(out / "ablation.csv", t);
  } else if (t.header.size() >= 3 && t.header[0] == "lr") {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      xs.push_back(static_cast<double>(i));
      ys.push_back(std::stod(t.rows[i][2]));
    }
    svg_line_chart(out / "grid.svg", "grid-search validation loss by cell", {{"val_loss", xs, ys}});
    write_csv(out / "grid.csv", t);
  } else {
    throw std::runtime_error("plot: unrecognized csv header in " + input);
  }
  std::cout << "plots written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"physics-informed neural operators on variable 2D geometries"};
  app.require_subcommand(1);

  // gen-data -----------------------------------------------------------
  GenSettings gen;
  std::string gen_problem = "darcy", gen_variation = "low", gen_out;
  auto* g = app.add_subcommand("gen-data", "generate a dataset of PDE samples");
  g->add_option("--problem", gen_problem, "darcy|plate")->required();
  g->add_option("--variation", gen_variation, "plate geometry variation: low|high");
  g->add_option("--samples", gen.samples, "number of samples");
  g->add_option("--seed", gen.seed, "generator seed");
  g->add_option("--out", gen_out, "output directory")->required();
  g->add_flag("--fixed-bc", gen.fixed_bc, "share one BC draw across samples (geometry-only)");
  g->add_option("--boundary-points", gen.boundary_points, "Darcy boundary discretization");
  g->add_option("--interior-points", gen.interior_points, "interior collocation points");
  g->add_option("--eval-points", gen.eval_points, "held-out evaluation points");
  g->add_option("--tb-points", gen.tb_points, "plate top+bottom points");
  g->add_option("--l-points", gen.l_points, "plate left-edge points");
  g->add_option("--r-points", gen.r_points, "plate right-edge points");
  g->add_option("--h-points", gen.h_points, "plate hole points");
  g->add_option("--oracle-walks", gen.oracle_walks, "sphere walks per eval point (0: skip)");
  g->add_option("--oracle-eps", gen.oracle_eps_fraction, "stopping shell, fraction of diameter");

  // train ---------------------------------------------------------------
  TrainFlags tf;
  auto* tr = app.add_subcommand("train", "physics-informed training");
  add_train_flags(tr, tf);

  // eval ----------------------------------------------------------------
  std::string ev_ckpt, ev_data, ev_split = "test", ev_out;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--split", ev_split, "train|val|test");
  ev->add_option("--out", ev_out, "output directory")->required();

  // grid-search ----------------------------------------------------------
  TrainFlags gf;
  std::string grid_lrs = "0.001,0.0005,0.0002,0.0001", grid_ratios = "0.3,0.2,0.1,0.05";
  auto* gs = app.add_subcommand("grid-search", "train over a (lr, ratio) grid");
  add_train_flags(gs, gf);
  gs->add_option("--lrs", grid_lrs, "comma-separated learning rates");
  gs->add_option("--ratios", grid_ratios, "comma-separated sampling ratios");

  // ablate ---------------------------------------------------------------
  TrainFlags af;
  bool ab_pooling = false, ab_fusion = false, ab_geo = false;
  auto* ab = app.add_subcommand("ablate", "run one architecture ablation axis");
  add_train_flags(ab, af, /*with_model=*/false, /*with_arch=*/false);
  ab->add_flag("--pooling", ab_pooling, "ablate the pooling type (avg|max|min)");
  ab->add_flag("--fusion", ab_fusion, "ablate the fusion operation (concat|add|mul)");
  ab->add_flag("--geo-input", ab_geo, "ablate the geometry input representation");

  // embed-dist -----------------------------------------------------------
  std::string ed_ckpt, ed_a, ed_b, ed_out;
  auto* ed = app.add_subcommand("embed-dist", "geometry embedding distance analysis");
  ed->add_option("--checkpoint", ed_ckpt, "trained geometry-aware checkpoint")->required();
  ed->add_option("--data-a", ed_a, "reference dataset (centroid source)")->required();
  ed->add_option("--data-b", ed_b, "comparison dataset")->required();
  ed->add_option("--out", ed_out, "output directory")->required();

  // plot -----------------------------------------------------------------
  std::string pl_in, pl_out;
  auto* pl = app.add_subcommand("plot", "emit SVG and CSV from result files");
  pl->add_option("--input", pl_in, "csv produced by train/eval/grid/ablate/embed-dist")
      ->required();
  pl->add_option("--out", pl_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (g->parsed()) {
      gen.problem = parse_enum<ProblemKind>(gen_problem);
      gen.variation = gen_variation == "high" ? Variation::kHigh : Variation::kLow;
      return cmd_gen_data(gen, gen_out);
    }
    if (tr->parsed()) {
      apply_config_file(tr, tf);
      LoadedDataset ld = read_dataset(tf.data_dir);
      TrainResult r = train(model_config_for(tf, ld.data), ld.data, train_config_for(tf));
      write_train_outputs(tf.out_dir, tf, r);
      return 0;
    }
    if (ev->parsed()) return cmd_evaluate(ev_ckpt, ev_data, ev_split, ev_out);
    if (gs->parsed()) {
      apply_config_file(gs, gf);
      LoadedDataset ld = read_dataset(gf.data_dir);
      GridResult r = grid_search(model_config_for(gf, ld.data), ld.data, train_config_for(gf),
                                 parse_list(grid_lrs), parse_list(grid_ratios));
      fs::create_directories(gf.out_dir);
      CsvTable t;
      t.header = {"lr", "ratio", "val_loss", "best_epoch"};
      for (const auto& c : r.cells)
        t.rows.push_back(
            {csv_num(c.lr), csv_num(c.ratio), csv_num(c.val_loss), std::to_string(c.best_epoch)});
      write_csv(fs::path(gf.out_dir) / "grid.csv", t);
      save_checkpoint(r.best.best, fs::path(gf.out_dir) / "checkpoint.bin");
      write_csv(fs::path(gf.out_dir) / "history.csv", history_csv(r.best.history));
      const GridCell& bc = r.cells[r.best_index];
      std::cout << "best cell lr " << bc.lr << " ratio " << bc.ratio << " val loss " << bc.val_loss
                << "\n";
      return 0;
    }
    if (ab->parsed()) {
      if (static_cast<int>(ab_pooling) + static_cast<int>(ab_fusion) + static_cast<int>(ab_geo) !=
          1)
        throw CLI::ValidationError("ablate",
                                   "pass exactly one of --pooling, --fusion, --geo-input");
      apply_config_file(ab, af);
      LoadedDataset ld = read_dataset(af.data_dir);
      af.model = "gano";
      std::vector<std::string> variants;
      std::string axis;
      if (ab_pooling) {
        axis = "pooling";
        variants = {"avg", "max", "min"};
      } else if (ab_fusion) {
        axis = "fusion";
        variants = {"concat", "add", "mul"};
      } else {
        axis = "geo-input";
        variants = {"var-boundary", "all-boundary", "interior", "parametric"};
      }
      CsvTable t;
      t.header = {"axis", "variant", "val_loss", "test_metric"};
      for (const auto& v : variants) {
        TrainFlags run = af;
        if (ab_pooling) run.pooling = v;
        if (ab_fusion) run.fusion = v;
        if (ab_geo) run.geo_input = v;
        TrainResult r = train(model_config_for(run, ld.data), ld.data, train_config_for(run));
        std::string test_metric;
        if (!ld.data.test_ids.empty()) {
          try {
            EvalSummary e = evaluate(r.best, ld.data, ld.data.test_ids, "test");
            test_metric = csv_num(e.mean);
          } catch (const std::exception&) {
            test_metric = "";  // no oracle stored for this dataset
          }
        }
        t.rows.push_back({axis, v, csv_num(r.best_val), test_metric});
        std::cout << axis << "=" << v << " val loss " << r.best_val << "\n";
      }
      fs::create_directories(af.out_dir);
      write_csv(fs::path(af.out_dir) / "ablate.csv", t);
      return 0;
    }
    if (ed->parsed()) {
      ModelState state = load_checkpoint(ed_ckpt);
      LoadedDataset a = read_dataset(ed_a);
      LoadedDataset b = read_dataset(ed_b);
      EmbeddingDistances d = embedding_distances(state, a.data.samples, b.data.samples);
      fs::create_directories(ed_out);
      write_csv(fs::path(ed_out) / "embed_dist.csv", embedding_csv(d, "set_a", "set_b"));
      svg_histogram(fs::path(ed_out) / "embed_dist.svg",
                    "geometry embedding distance to the set-a centroid",
                    {{"set_a", d.dist_a}, {"set_b", d.dist_b}});
      std::cout << "mean distance set_a " << d.mean_a << " set_b " << d.mean_b << "\n";
      return 0;
    }
    if (pl->parsed()) return cmd_plot(pl_in, pl_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
