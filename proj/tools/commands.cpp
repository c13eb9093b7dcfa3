#include "commands.hpp"

#include "routeseq/astar.hpp"
#include "routeseq/diffusion.hpp"
#include "routeseq/errors.hpp"
#include "routeseq/eval.hpp"
#include "routeseq/graph.hpp"
#include "routeseq/seq2seq.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <span>
#include <sstream>

namespace routeseq::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::string kDataDir = ROUTESEQ_DATA_DIR;

struct GenerateArgs {
  std::string edges = kDataDir + "/minnesota.mtx";
  std::string coords = kDataDir + "/minnesota.xy";
  std::vector<double> bbox{-97.0, -94.0, 46.0, 49.0};
  bool no_bbox = false;
  std::string bbox_mode = "open";
  std::size_t n = 3000;
  double split = 0.67;
  std::uint64_t seed = 0;
  std::string out = ".";
};

struct TrainArgs {
  std::string dataset = "routes.txt";
  std::string graph = "graph.txt";
  std::string variant = "dual";
  int hidden = 256;
  int embed = 0;
  bool context_with_cell = false;
  double init_scale = 0.1;
  int epochs = 400;
  double lr = 1e-3;
  double clip = 5.0;
  std::uint64_t seed = 0;
  bool diffuse = false;
  bool diffuse_tanh = false;
  int stage_epochs = 100;
  std::string checkpoint = "model.ckpt";
  std::string loss_csv = "loss.csv";
  bool quiet = false;
};

struct EvalArgs {
  std::string checkpoint = "model.ckpt";
  std::string dataset = "routes.txt";
  std::string graph = "graph.txt";
  unsigned jobs = 1;
  std::size_t max_len = 0;
  std::string report = "report.csv";
  std::string summary = "summary.csv";
};

struct DiffusedCheckArgs {
  int nodes = 128;
  std::string out = "-";
};

struct RankArgs {
  std::string checkpoint = "model.ckpt";
  std::string dataset = "routes.txt";
  std::size_t routes = 600;
  double tol = 0.0;
  std::string out = "-";
};

struct AllArgs {
  std::string config;
  GenerateArgs generate;
  TrainArgs train;
  EvalArgs eval;
  DiffusedCheckArgs diffused;
  RankArgs rank;
};

void add_config_option(CLI::App* sub, std::string& target) {
  sub->add_option("--config", target, "key=value file; flags on the command line win");
}

void build(CLI::App& app, AllArgs& a) {
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "Filter the road graph and sample a route dataset");
  add_config_option(gen, a.config);
  gen->add_option("--edges", a.generate.edges, "MatrixMarket adjacency file")->capture_default_str();
  gen->add_option("--coords", a.generate.coords, "node coordinates, one `lon lat` row per node")->capture_default_str();
  gen->add_option("--bbox", a.generate.bbox, "lon_min lon_max lat_min lat_max")->expected(4)->capture_default_str();
  gen->add_flag("--no-bbox", a.generate.no_bbox, "keep the whole graph");
  gen->add_option("--bbox-mode", a.generate.bbox_mode, "open (strict) or closed box boundary")
      ->check(CLI::IsMember({"open", "closed"}))
      ->capture_default_str();
  gen->add_option("--n", a.generate.n, "number of routes")->capture_default_str();
  gen->add_option("--split", a.generate.split, "training fraction")->capture_default_str();
  gen->add_option("--seed", a.generate.seed, "random seed")->capture_default_str();
  gen->add_option("--out", a.generate.out, "output directory")->capture_default_str();

  auto* tr = app.add_subcommand("train", "Train a sequence model on a route dataset");
  add_config_option(tr, a.config);
  tr->add_option("--dataset", a.train.dataset, "dataset written by `generate`")->capture_default_str();
  tr->add_option("--graph", a.train.graph, "graph written by `generate`")->capture_default_str();
  tr->add_option("--variant", a.train.variant, "lstm2rnn, gru2rnn or dual")
      ->check(CLI::IsMember({"lstm2rnn", "gru2rnn", "dual"}))
      ->capture_default_str();
  tr->add_option("--hidden", a.train.hidden, "hidden units per encoder")->capture_default_str();
  tr->add_option("--embed", a.train.embed, "embedding width (0: same as hidden)")->capture_default_str();
  tr->add_flag("--context-with-cell", a.train.context_with_cell, "LSTM contributes [h; c] to the context");
  tr->add_option("--init-scale", a.train.init_scale, "uniform init half-width")->capture_default_str();
  tr->add_option("--epochs", a.train.epochs, "epochs without --diffuse")->capture_default_str();
  tr->add_option("--lr", a.train.lr, "Adam learning rate")->capture_default_str();
  tr->add_option("--clip", a.train.clip, "global gradient norm clip")->capture_default_str();
  tr->add_option("--seed", a.train.seed, "random seed")->capture_default_str();
  tr->add_flag("--diffuse", a.train.diffuse, "train through the smoothed-loss schedule 30, 5, 1, 1e-4");
  tr->add_flag("--diffuse-tanh", a.train.diffuse_tanh, "also smooth the decoder tanh");
  tr->add_option("--stage-epochs", a.train.stage_epochs, "epochs per smoothing stage")->capture_default_str();
  tr->add_option("--checkpoint", a.train.checkpoint, "output checkpoint")->capture_default_str();
  tr->add_option("--loss-csv", a.train.loss_csv, "output loss curve")->capture_default_str();
  tr->add_flag("--quiet", a.train.quiet, "no per-epoch progress");

  auto* ev = app.add_subcommand("eval", "Score bidirectional predictions on the test split");
  add_config_option(ev, a.config);
  ev->add_option("--checkpoint", a.eval.checkpoint)->capture_default_str();
  ev->add_option("--dataset", a.eval.dataset)->capture_default_str();
  ev->add_option("--graph", a.eval.graph)->capture_default_str();
  ev->add_option("--jobs", a.eval.jobs, "worker threads")->capture_default_str();
  ev->add_option("--max-len", a.eval.max_len, "decode cap (0: 4x mean training hops)")->capture_default_str();
  ev->add_option("--report", a.eval.report, "per-pair CSV")->capture_default_str();
  ev->add_option("--summary", a.eval.summary, "one-row summary CSV")->capture_default_str();

  auto* dc = app.add_subcommand("diffused-check", "Compare smoothed activations with numerical convolution");
  add_config_option(dc, a.config);
  dc->add_option("--nodes", a.diffused.nodes, "Gauss-Legendre nodes per panel")->capture_default_str();
  dc->add_option("--out", a.diffused.out, "CSV path, - for stdout")->capture_default_str();

  auto* rk = app.add_subcommand("rank", "Numerical rank of the dual-encoder context matrix");
  add_config_option(rk, a.config);
  rk->add_option("--checkpoint", a.rank.checkpoint)->capture_default_str();
  rk->add_option("--dataset", a.rank.dataset)->capture_default_str();
  rk->add_option("--routes", a.rank.routes, "routes (train split first)")->capture_default_str();
  rk->add_option("--tol", a.rank.tol, "relative tolerance (0: 1e-10 * max(rows, cols))")->capture_default_str();
  rk->add_option("--out", a.rank.out, "output path, - for stdout")->capture_default_str();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

template <typename F>
void write_to(const std::string& path, F&& f) {
  if (path == "-") {
    f(std::cout);
    std::cout.flush();
    return;
  }
  auto out = open_out(path);
  f(out);
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

std::string percent(double rate) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << 100.0 * rate << '%';
  return s.str();
}

void check_ids(const RouteDataset& ds, std::size_t node_count) {
  for (const auto* split : {&ds.train, &ds.test}) {
    for (const auto& r : *split) {
      for (NodeId u : r.nodes) {
        if (u < 0 || static_cast<std::size_t>(u) >= node_count) {
          throw UsageError("dataset references node " + std::to_string(u) + " but the graph has " +
                           std::to_string(node_count) + " nodes");
        }
      }
    }
  }
}

int cmd_generate(const GenerateArgs& a) {
  const Graph full = load_graph_files(a.edges, a.coords);
  Graph g = full;
  if (!a.no_bbox) {
    const BoundingBox box{a.bbox[0], a.bbox[1], a.bbox[2], a.bbox[3]};
    g = filter_bbox(full, box, a.bbox_mode == "closed" ? BoxMode::Closed : BoxMode::Open).graph;
  }
  const auto ds = generate_dataset(g, a.n, a.split, a.seed + kDatasetSeedOffset);

  fs::create_directories(a.out);
  const fs::path dir(a.out);
  save_graph((dir / "graph.txt").string(), g);
  save_dataset((dir / "routes.txt").string(), ds);
  write_to((dir / "hops.csv").string(), [&](std::ostream& out) { write_histogram_csv(out, hop_histogram(ds)); });

  std::vector<RoutePath> all = ds.train;
  all.insert(all.end(), ds.test.begin(), ds.test.end());
  std::cout << "source: " << full.node_count() << " nodes, " << full.edge_count() << " edges ("
            << full.self_loops_dropped() << " self-loops, " << full.zero_length_dropped()
            << " zero-length edges dropped)\n"
            << "graph: " << g.node_count() << " nodes, " << g.edge_count() << " edges\n"
            << "routes: " << ds.size() << " (train " << ds.train.size() << ", test " << ds.test.size() << ")\n"
            << "mean hops: " << std::setprecision(6) << mean_hops(all) << '\n';
  return kOk;
}

int cmd_train(const TrainArgs& a) {
  if (!a.diffuse && a.epochs < 1) throw UsageError("--epochs must be at least 1");
  if (a.diffuse && a.stage_epochs < 1) throw UsageError("--stage-epochs must be at least 1");
  if (a.hidden < 1) throw UsageError("--hidden must be positive");

  const Graph g = load_saved_graph(a.graph);
  const RouteDataset ds = load_dataset(a.dataset);
  check_ids(ds, g.node_count());
  if (ds.train.empty()) throw UsageError("dataset has an empty training split");

  ModelConfig mc;
  mc.variant = parse_variant(a.variant);
  mc.num_nodes = static_cast<int>(g.node_count());
  mc.hidden = a.hidden;
  mc.embed_dim = a.embed;
  mc.lstm_context_with_cell = a.context_with_cell;
  mc.init_scale = a.init_scale;
  mc.seed = a.seed + kInitSeedOffset;
  auto model = Seq2SeqModel::create(mc);

  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.adam.learning_rate = a.lr;
  tc.grad_clip_norm = a.clip;
  tc.seed = a.seed + kShuffleSeedOffset;
  tc.diffuse_decoder_tanh = a.diffuse_tanh;
  if (a.diffuse) {
    std::vector<DiffusionStage> stages = schedule_default().stages();
    for (auto& s : stages) s.epochs = a.stage_epochs;
    tc.schedule = DiffusionSchedule(stages);
  }
  const int total = tc.schedule ? tc.schedule->total_epochs() : tc.epochs;
  if (!a.quiet) {
    tc.on_epoch = [total](const EpochLoss& e) {
      std::cout << "epoch " << e.epoch << '/' << total << " sigma=" << e.sigma << " mean_nll=" << std::setprecision(6)
                << e.mean_nll << std::endl;
    };
  }

  std::cout << to_string(mc.variant) << ": " << model.parameter_count() << " parameters, context "
            << model.context_dim() << ", " << ds.train.size() << " training routes\n";
  const auto curve = train(model, ds.train, tc);

  std::ostringstream extra;
  extra << "epochs=" << total << "\nlearning_rate=" << a.lr << "\nclip=" << a.clip
        << "\ndiffuse=" << (a.diffuse ? 1 : 0) << "\ndiffuse_tanh=" << (a.diffuse_tanh ? 1 : 0)
        << "\ntrain_seed=" << a.seed << '\n';
  save_model(a.checkpoint, model, extra.str());
  write_to(a.loss_csv, [&](std::ostream& out) {
    out << "epoch,sigma,mean_nll\n" << std::setprecision(17);
    for (const auto& e : curve) out << e.epoch << ',' << e.sigma << ',' << e.mean_nll << '\n';
  });
  std::cout << "final mean_nll=" << std::setprecision(6) << curve.back().mean_nll << "\ncheckpoint: " << a.checkpoint
            << '\n';
  return kOk;
}

int cmd_eval(const EvalArgs& a) {
  const auto model = load_model(a.checkpoint);
  const Graph g = load_saved_graph(a.graph);
  const RouteDataset ds = load_dataset(a.dataset);
  if (static_cast<std::size_t>(model.num_nodes()) != g.node_count()) {
    throw UsageError("checkpoint vocabulary covers " + std::to_string(model.num_nodes()) +
                     " nodes but the graph has " + std::to_string(g.node_count()));
  }
  check_ids(ds, g.node_count());
  if (ds.test.empty()) throw UsageError("dataset has an empty test split");
  if (a.jobs < 1) throw UsageError("--jobs must be at least 1");

  const std::size_t max_len = a.max_len > 0 ? a.max_len : default_max_len(ds.train.empty() ? ds.test : ds.train);
  if (max_len < 2) throw UsageError("--max-len must be at least 2");
  const auto report = evaluate(model, ds.test, g, max_len, a.jobs);
  write_to(a.report, [&](std::ostream& out) { write_report_csv(out, report); });
  write_to(a.summary, [&](std::ostream& out) { write_summary_csv(out, report); });
  std::cout << "shortest=" << percent(report.shortest_rate) << " successful=" << percent(report.successful_rate)
            << " exact_sequence=" << percent(report.exact_sequence_rate) << " n=" << report.n_test << '\n';
  return kOk;
}

int cmd_diffused_check(const DiffusedCheckArgs& a) {
  if (a.nodes < 32) throw UsageError("--nodes must be at least 32");
  const std::vector<double> xs{-5, -2, -0.5, 0, 0.5, 2, 5};
  const std::vector<double> sigmas{0.1, 1, 5};
  const std::vector<double> kink{0.0};
  struct Row {
    DiffusedKind kind;
    std::function<double(double)> f;
    std::span<const double> breaks;
  };
  const std::vector<Row> rows{
      {DiffusedKind::erf(1.0), [](double t) { return std::erf(t); }, {}},
      {DiffusedKind::tanh(), [](double t) { return std::tanh(t); }, {}},
      {DiffusedKind::sign(), [](double t) { return t > 0 ? 1.0 : (t < 0 ? -1.0 : 0.0); }, kink},
      {DiffusedKind::relu(), [](double t) { return std::max(t, 0.0); }, kink},
  };
  std::vector<double> worst(rows.size(), 0.0);
  write_to(a.out, [&](std::ostream& out) {
    out << "kind,x,sigma,closed_form,quadrature,abs_err\n" << std::setprecision(17);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      for (double s : sigmas) {
        for (double x : xs) {
          const double closed = diffused_apply(rows[k].kind, x, s);
          const double quad = quadrature_convolve(rows[k].f, x, s, a.nodes, rows[k].breaks);
          const double err = std::abs(closed - quad);
          worst[k] = std::max(worst[k], err);
          out << rows[k].kind.name() << ',' << x << ',' << s << ',' << closed << ',' << quad << ',' << err << '\n';
        }
      }
    }
  });
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::cerr << rows[k].kind.name() << " max_abs_err=" << std::setprecision(3) << worst[k] << '\n';
  }
  std::cerr << "logsoftmax kappa(30)-1/pi=" << logsoftmax_kappa(30.0) - 1.0 / std::numbers::pi
            << " kappa(1e-4)-1=" << logsoftmax_kappa(1e-4) - 1.0 << '\n';
  return kOk;
}

int cmd_rank(const RankArgs& a) {
  const auto model = load_model(a.checkpoint);
  if (model.config.variant != Variant::DualEncoder || model.config.lstm_context_with_cell) {
    throw UsageError("rank needs a dual-encoder checkpoint with [gru ; lstm] hidden-state context");
  }
  const RouteDataset ds = load_dataset(a.dataset);
  check_ids(ds, static_cast<std::size_t>(model.num_nodes()));
  std::vector<RoutePath> routes = ds.train;
  routes.insert(routes.end(), ds.test.begin(), ds.test.end());
  if (routes.empty()) throw UsageError("dataset holds no routes");
  if (routes.size() > a.routes) routes.resize(a.routes);
  if (routes.size() < static_cast<std::size_t>(model.context_dim())) {
    std::cerr << "warning: " << routes.size() << " routes for a " << model.context_dim()
              << "-dimensional context; the rank cannot be full\n";
  }
  const auto report = rank_analysis(context_matrix(model, routes), a.tol > 0.0 ? std::optional(a.tol) : std::nullopt);
  write_to(a.out, [&](std::ostream& out) { write_rank(out, report); });
  return kOk;
}

bool truthy(const std::string& v) {
  std::string s = v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw UsageError("expected a boolean, got `" + v + "`");
}

// Appends `--key value` tokens for config entries the command line left unset.
std::vector<std::string> config_tokens(CLI::App& sub, const std::string& path) {
  std::vector<std::string> tokens;
  for (const auto& [key, value] : read_config(path)) {
    if (key == "config") throw UsageError(path + ": nested `config` key");
    const CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr) throw UsageError(path + ": unknown key `" + key + "` for " + sub.get_name());
    if (opt->count() > 0) continue;
    if (opt->get_expected_min() == 0) {
      if (truthy(value)) tokens.push_back("--" + key);
      continue;
    }
    tokens.push_back("--" + key);
    std::istringstream words(value);
    for (std::string w; words >> w;) tokens.push_back(w);
  }
  return tokens;
}

void parse(CLI::App& app, std::vector<std::string> args) {
  std::reverse(args.begin(), args.end());
  app.parse(args);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError(path + ":" + std::to_string(lineno) + ": empty key");
    std::replace(key.begin(), key.end(), '_', '-');
    out.emplace_back(key, value);
  }
  return out;
}

int run(const std::vector<std::string>& args) {
  try {
    AllArgs a;
    CLI::App app("Route prediction with sequence-to-sequence networks", "routeseq");
    build(app, a);
    try {
      parse(app, args);
      CLI::App* sub = app.get_subcommands().front();
      if (!a.config.empty()) {
        auto extra = config_tokens(*sub, a.config);
        if (!extra.empty()) {
          std::vector<std::string> again = args;
          const auto pos = std::find(again.begin(), again.end(), sub->get_name());
          again.insert(pos + 1, extra.begin(), extra.end());
          a = AllArgs{};
          CLI::App fresh("Route prediction with sequence-to-sequence networks", "routeseq");
          build(fresh, a);
          parse(fresh, again);
        }
      }
      const std::string name = sub->get_name();
      if (name == "generate") return cmd_generate(a.generate);
      if (name == "train") return cmd_train(a.train);
      if (name == "eval") return cmd_eval(a.eval);
      if (name == "diffused-check") return cmd_diffused_check(a.diffused);
      if (name == "rank") return cmd_rank(a.rank);
      throw UsageError("unknown command " + name);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? kOk : kUsage;
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace routeseq::cli
