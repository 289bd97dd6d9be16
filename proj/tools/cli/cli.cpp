#include "cli.hpp"

#include <csignal>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "camscope/aggregate.hpp"
#include "camscope/cam.hpp"
#include "camscope/dataset.hpp"
#include "camscope/error.hpp"
#include "camscope/glyph.hpp"
#include "camscope/http_server.hpp"
#include "camscope/service.hpp"
#include "camscope/synthetic.hpp"
#include "camscope/train.hpp"
#include "camscope/weights_io.hpp"

namespace camscope::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct PrepareArgs {
  fs::path pcap_dir;
  fs::path manifest;
  fs::path csv;
  std::string label_column = "label";
  fs::path out;
  std::size_t per_class = 5000;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  fs::path data;
  fs::path out;
  fs::path metrics_out;
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::vector<std::size_t> channels{16, 32, 64, 128, 128, 128};
  std::size_t kernel_size = 5;
  std::size_t threads = 1;
};

struct PredictArgs {
  fs::path data;
  fs::path weights;
};

struct ExportArgs {
  fs::path data;
  fs::path weights;
  std::size_t class_index = 0;
  std::string agg = "mean";
  std::string var = "entropy";
  fs::path out;
  fs::path svg;
  std::size_t wrap = glyph::kDefaultWrapWidth;
};

struct ServeArgs {
  fs::path data;
  fs::path weights;
  std::string listen = "127.0.0.1:8080";
  fs::path ui_dir;
};

struct SynthArgs {
  fs::path out;
  data::SyntheticSpec spec;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::io_error, "cannot open " + path.string() + " for writing");
  f << text;
  require(static_cast<bool>(f), ErrorCode::io_error, "failed writing " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  require(static_cast<bool>(f), ErrorCode::io_error, "cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::parse_error, path.string() + ": " + e.what());
  }
}

void require_file(const fs::path& path, const char* what) {
  require(fs::is_regular_file(path), ErrorCode::io_error, std::string(what) + " " + path.string() + " does not exist");
}

// ---------------------------------------------------------------------------

int cmd_prepare(const PrepareArgs& a, std::ostream& out, std::ostream& err) {
  const bool from_pcap = !a.pcap_dir.empty();
  require(from_pcap != !a.csv.empty(), ErrorCode::invalid_argument, "give either --pcap-dir/--manifest or --csv");
  data::Dataset ds;
  data::DatasetSummary summary;
  if (from_pcap) {
    require(!a.manifest.empty(), ErrorCode::invalid_argument, "--pcap-dir needs --manifest");
    require(fs::is_directory(a.pcap_dir), ErrorCode::io_error, "no such directory " + a.pcap_dir.string());
    bool any_capture = false;
    for (const auto& entry : fs::directory_iterator(a.pcap_dir))
      any_capture = any_capture || (entry.is_regular_file() && entry.path().extension() == ".pcap");
    require(any_capture, ErrorCode::empty_input, "no samples: " + a.pcap_dir.string() + " holds no .pcap files");
    const auto manifest = data::parse_manifest(read_json(a.manifest));
    require(!manifest.empty(), ErrorCode::empty_input, "no samples: the manifest lists no capture files");
    ds = data::prepare_pcap_dataset(a.pcap_dir, manifest, a.per_class, a.seed, summary);
  } else {
    auto loaded = data::load_csv(a.csv, a.label_column);
    require(!loaded.samples.empty(), ErrorCode::empty_input, "no samples in " + a.csv.string());
    summary.class_names = loaded.class_names;
    ds.class_names = loaded.class_names;
    ds.input_length = loaded.input_length;
    ds.samples = data::undersample(loaded.samples, loaded.class_names.size(), a.per_class, a.seed, &summary);
  }
  data::save_bundle(ds, a.out);
  err << "prepared " << ds.samples.size() << " samples of length " << ds.input_length << " -> " << a.out.string()
      << '\n';
  out << data::to_json(summary).dump(2) << '\n';
  return kSuccess;
}

std::string metrics_header(std::size_t classes) {
  std::string h = "epoch,loss,accuracy,macro_f1";
  for (std::size_t c = 0; c < classes; ++c) {
    const auto s = std::to_string(c);
    h += ",precision_" + s + ",recall_" + s + ",f1_" + s;
  }
  return h;
}

std::string metrics_row(const nn::EpochMetrics& m) {
  std::ostringstream os;
  os << std::setprecision(10) << m.epoch << ',' << m.loss << ',' << m.accuracy << ',' << m.macro_f1;
  for (const auto& c : m.per_class) os << ',' << c.precision << ',' << c.recall << ',' << c.f1;
  return os.str();
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const auto ds = data::load_bundle(a.data);
  require(!ds.samples.empty(), ErrorCode::empty_input, "dataset bundle is empty");
  require(ds.class_names.size() >= 2, ErrorCode::contract_violation, "training needs at least two classes");
  nn::ModelConfig config;
  config.input_length = ds.input_length;
  config.conv_channels = a.channels;
  config.kernel_size = a.kernel_size;
  config.num_classes = ds.class_names.size();
  config.validate();
  const auto examples = ds.examples();

  nn::TrainOptions opt;
  opt.epochs = a.epochs;
  opt.batch_size = a.batch_size;
  opt.adam.lr = a.lr;
  opt.seed = a.seed;
  opt.threads = a.threads;

  std::ofstream metrics_file;
  if (!a.metrics_out.empty()) {
    metrics_file.open(a.metrics_out);
    require(static_cast<bool>(metrics_file), ErrorCode::io_error, "cannot open " + a.metrics_out.string());
  }
  const auto header = metrics_header(config.num_classes);
  out << header << '\n';
  if (metrics_file) metrics_file << header << '\n';
  opt.on_epoch = [&](const nn::EpochMetrics& m) {
    const auto row = metrics_row(m);
    out << row << '\n' << std::flush;
    if (metrics_file) metrics_file << row << '\n';
    err << "epoch " << m.epoch << ": loss " << m.loss << ", accuracy " << m.accuracy << '\n';
  };
  const auto result = nn::train(config, examples, opt);
  nn::save_model(result.model, a.out);
  err << "wrote " << a.out.string() << '\n';
  return kSuccess;
}

struct Loaded {
  nn::Model model;
  data::Dataset dataset;
};

Loaded load_inputs(const fs::path& data_path, const fs::path& weights_path) {
  require_file(weights_path, "weights file");
  require_file(data_path, "dataset bundle");
  Loaded l{nn::load_model(weights_path), data::load_bundle(data_path)};
  require(l.dataset.input_length == l.model.config.input_length, ErrorCode::contract_violation,
          "dataset input length " + std::to_string(l.dataset.input_length) + " does not match the model's " +
              std::to_string(l.model.config.input_length));
  return l;
}

int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream&) {
  const auto l = load_inputs(a.data, a.weights);
  out << "sample_id,label,predicted";
  for (std::size_t c = 0; c < l.model.config.num_classes; ++c) out << ",p_" << c;
  out << '\n' << std::setprecision(10);
  for (const auto& s : l.dataset.samples) {
    const auto p = nn::predict(l.model, s.input);
    out << s.sample_id << ',' << (s.label ? std::to_string(*s.label) : std::string()) << ',' << p.label;
    for (double v : p.probabilities) out << ',' << v;
    out << '\n';
  }
  return kSuccess;
}

int cmd_export(const ExportArgs& a, std::ostream&, std::ostream& err) {
  const auto agg_method = agg::parse_aggregation(a.agg);
  const auto var_method = agg::parse_variability(a.var);
  require(a.wrap >= 1, ErrorCode::invalid_argument, "--wrap must be >= 1");
  const auto l = load_inputs(a.data, a.weights);
  const auto views = l.dataset.views();
  const auto matrix = agg::collect_cams(l.model, views, a.class_index);
  const auto cam = agg::build_aggregated_cam(matrix, agg_method, var_method);
  write_text(a.out, agg::to_json(cam).dump() + "\n");
  err << "class " << a.class_index << ": aggregated " << matrix.rows() << " CAMs -> " << a.out.string() << '\n';
  if (!a.svg.empty()) {
    glyph::GridSpec spec;
    spec.wrap_width = a.wrap;
    write_text(a.svg, glyph::render_svg(cam, spec));
    err << "wrote " << a.svg.string() << " (" << glyph::grid_rows(cam.impact.size(), a.wrap) << " rows)\n";
  }
  return kSuccess;
}

std::pair<std::string, int> parse_listen(const std::string& listen) {
  const auto colon = listen.rfind(':');
  require(colon != std::string::npos, ErrorCode::invalid_argument, "--listen expects host:port");
  const std::string host = listen.substr(0, colon);
  int port = -1;
  try {
    std::size_t used = 0;
    port = std::stoi(listen.substr(colon + 1), &used);
    require(used == listen.size() - colon - 1, ErrorCode::invalid_argument, "bad port in --listen");
  } catch (const std::logic_error&) {
    fail(ErrorCode::invalid_argument, "bad port in --listen");
  }
  require(port >= 0 && port <= 65535 && !host.empty(), ErrorCode::invalid_argument, "bad --listen address");
  return {host, port};
}

int cmd_serve(const ServeArgs& a, std::ostream& out, std::ostream& err) {
  const auto [host, port] = parse_listen(a.listen);
  if (!a.ui_dir.empty())
    require(fs::is_directory(a.ui_dir), ErrorCode::io_error, "UI directory " + a.ui_dir.string() + " does not exist");
  auto l = load_inputs(a.data, a.weights);
  service::Service svc(std::move(l.model), std::move(l.dataset));
  service::HttpServer server(svc, {host, port, a.ui_dir});

  // SIGINT/SIGTERM are consumed by a dedicated thread that stops the server.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  if (!server.bind()) {
    err << "error: cannot listen on " << a.listen << '\n';
    return kRuntimeError;
  }
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  out << "listening on http://" << host << ':' << server.port() << '\n' << std::flush;
  err << "serving " << svc.classes().size() << " classes; stop with SIGINT or SIGTERM\n";
  server.listen();
  // Wake the waiter if the server stopped on its own.
  kill(getpid(), SIGTERM);
  waiter.join();
  err << "shut down\n";
  return kSuccess;
}

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  const auto syn = data::make_motif_dataset(a.spec);
  data::save_bundle(syn.dataset, a.out);
  json motifs = json::array();
  for (std::size_t c = 0; c < syn.motifs.size(); ++c)
    motifs.push_back({{"class_index", c}, {"start", syn.motifs[c].start}, {"length", syn.motifs[c].length}});
  out << json{{"samples", syn.dataset.samples.size()}, {"motifs", motifs}}.dump(2) << '\n';
  err << "wrote " << a.out.string() << '\n';
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"camscope: class activation map explorer for semantically structured data", "camscope"};
  app.set_config("--config", "", "Optional TOML/INI file with the same keys as the flags; flags win");
  app.require_subcommand(1);

  PrepareArgs prepare;
  auto* p = app.add_subcommand("prepare", "Build a dataset bundle from PCAP captures or a CSV table");
  p->add_option("--pcap-dir", prepare.pcap_dir, "Directory holding the .pcap files");
  p->add_option("--manifest", prepare.manifest, "Label manifest JSON {\"files\": {name: class}}");
  p->add_option("--csv", prepare.csv, "CSV table with a header row (alternative to PCAPs)");
  p->add_option("--label-column", prepare.label_column, "CSV label column")->capture_default_str();
  p->add_option("--out", prepare.out, "Output bundle (.json for JSON, anything else for CSDS binary)")->required();
  p->add_option("--per-class", prepare.per_class, "Undersampling target per class")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  p->add_option("--seed", prepare.seed, "Undersampling seed")->capture_default_str();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train the CNN and write a weight file");
  t->add_option("--data", train.data, "Dataset bundle")->required();
  t->add_option("--out", train.out, "Output weight file")->required();
  t->add_option("--epochs", train.epochs)->capture_default_str();
  t->add_option("--batch-size", train.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--lr", train.lr)->capture_default_str()->check(CLI::NonNegativeNumber);
  t->add_option("--seed", train.seed)->capture_default_str();
  t->add_option("--channels", train.channels, "Output channels per conv layer")->delimiter(',')->capture_default_str();
  t->add_option("--kernel-size", train.kernel_size)->capture_default_str();
  t->add_option("--threads", train.threads, "Worker threads (0 = all cores); results do not depend on it")
      ->capture_default_str();
  t->add_option("--metrics-out", train.metrics_out, "Also write the per-epoch metrics CSV here");

  PredictArgs predict;
  auto* pr = app.add_subcommand("predict", "Print per-sample predictions as CSV");
  pr->add_option("--data", predict.data)->required();
  pr->add_option("--weights", predict.weights)->required();

  ExportArgs exp;
  auto* e = app.add_subcommand("export-cam", "Aggregate one class's CAMs and export JSON (and optionally SVG)");
  e->add_option("--data", exp.data)->required();
  e->add_option("--weights", exp.weights)->required();
  e->add_option("--class", exp.class_index, "Predicted class index")->required();
  e->add_option("--agg", exp.agg, "mean | median | kde_mode")->capture_default_str();
  e->add_option("--var", exp.var, "variance | stddev | entropy | gini")->capture_default_str();
  e->add_option("--out", exp.out, "AggregatedCam JSON output")->required();
  e->add_option("--svg", exp.svg, "Optional SVG grid rendering");
  e->add_option("--wrap", exp.wrap, "Cells per grid row")->capture_default_str();

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Serve the JSON API (and optional UI assets)");
  s->add_option("--data", serve.data)->required();
  s->add_option("--weights", serve.weights)->required();
  s->add_option("--listen", serve.listen, "host:port")->capture_default_str();
  s->add_option("--ui-dir", serve.ui_dir, "Static UI directory");

  SynthArgs synth;
  auto* sy = app.add_subcommand("synth", "Write a synthetic motif dataset bundle");
  sy->add_option("--out", synth.out)->required();
  sy->add_option("--classes", synth.spec.classes)->capture_default_str();
  sy->add_option("--per-class", synth.spec.per_class)->capture_default_str();
  sy->add_option("--length", synth.spec.length)->capture_default_str();
  sy->add_option("--motif-length", synth.spec.motif_length)->capture_default_str();
  sy->add_option("--seed", synth.spec.seed)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& pe) {
    err << "error: " << pe.what() << '\n';
    return kInvalidInput;
  }

  try {
    if (p->parsed()) return cmd_prepare(prepare, out, err);
    if (t->parsed()) return cmd_train(train, out, err);
    if (pr->parsed()) return cmd_predict(predict, out, err);
    if (e->parsed()) return cmd_export(exp, out, err);
    if (s->parsed()) return cmd_serve(serve, out, err);
    if (sy->parsed()) return cmd_synth(synth, out, err);
  } catch (const Error& ex) {
    err << "error [" << to_string(ex.code()) << "]: " << ex.what() << '\n';
    return kInvalidInput;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kRuntimeError;
  }
  return kInvalidInput;
}

}  // namespace camscope::cli
