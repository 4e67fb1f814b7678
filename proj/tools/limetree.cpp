// limetree command-line front end: benchmarks, one-shot explanations and the
// HTTP services.

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "limetree/blackbox.hpp"
#include "limetree/error.hpp"
#include "limetree/experiments.hpp"
#include "limetree/image.hpp"
#include "limetree/interpretable_domain.hpp"
#include "limetree/pipeline.hpp"
#include "limetree/service.hpp"

using namespace limetree;

namespace {

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server) g_server->stop();
}

struct BenchArgs {
  std::string family = "segment-logit";
  ExperimentConfig config;
  std::string out;
};

void add_bench_options(CLI::App* cmd, BenchArgs& args) {
  cmd->add_option("--family", args.family, "segment-logit | boolean-table | xor-pair")->capture_default_str();
  cmd->add_option("--trials", args.config.trials)->capture_default_str();
  cmd->add_option("--d", args.config.d, "interpretable features per trial")->capture_default_str();
  cmd->add_option("--top", args.config.top, "explained classes (top-n of the anchor)")->capture_default_str();
  cmd->add_option("--classes", args.config.class_count, "classes of each black box")->capture_default_str();
  cmd->add_option("--seed", args.config.seed)->capture_default_str();
  cmd->add_option("--epsilon", args.config.epsilon, "LIMEt fidelity target")->capture_default_str();
  cmd->add_option("--kernel-width", args.config.kernel_width)->capture_default_str();
  cmd->add_option("--samples", args.config.samples, "sample size when 2^d exceeds the budget")->capture_default_str();
  cmd->add_option("--alpha", args.config.alpha, "ridge strength of the LIME baseline")->capture_default_str();
  cmd->add_option("--threads", args.config.threads, "0 = all cores")->capture_default_str();
  cmd->add_option("--out", args.out, "CSV path (stdout when omitted)");
}

template <typename Table>
void emit(const Table& table, const std::string& path) {
  if (path.empty()) {
    table.write_csv(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::invalid_argument, "cannot open " + path + " for writing");
  table.write_csv(out);
}

InterpretableDomain build_domain(const std::string& image_path, const std::string& mask_path, const std::string& grid,
                                 const std::string& text, const std::string& occlusion) {
  if (!text.empty()) return InterpretableDomain::text(text);
  require(!image_path.empty(), "either --image or --text is required");
  RgbImage image = read_rgb_image(image_path);
  const OcclusionStrategy occ = occlusion == "mean" ? OcclusionStrategy::mean() : OcclusionStrategy::solid();
  if (!mask_path.empty()) return InterpretableDomain::image(std::move(image), Segmentation(read_label_image(mask_path)), occ);
  std::size_t rows = 0, cols = 0;
  char x = 0;
  std::istringstream in(grid);
  require(static_cast<bool>(in >> rows >> x >> cols) && x == 'x', "--grid expects ROWSxCOLS, e.g. 2x3");
  auto seg = build_grid_segmentation(image.width(), image.height(), rows, cols);
  return InterpretableDomain::image(std::move(image), std::move(seg), occ);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local surrogate trees for black-box probabilistic classifiers"};
  app.require_subcommand(1);

  auto* bench = app.add_subcommand("bench", "Fidelity benchmarks over synthetic black boxes");
  bench->require_subcommand(1);
  BenchArgs fidelity_args, sweep_args;
  auto* fidelity = bench->add_subcommand("fidelity", "Mean loss of LIME, LIMEt and tree variants");
  add_bench_options(fidelity, fidelity_args);
  auto* sweep = bench->add_subcommand("depth-sweep", "Loss against depth/d for every depth bound");
  add_bench_options(sweep, sweep_args);

  auto* explain_cmd = app.add_subcommand("explain", "Explain one image or text instance");
  std::string image_path, mask_path, grid = "3x3", text, occlusion = "black", model_path, remote_url, family = "segment-logit",
              out_path;
  std::size_t model_classes = 5, remote_classes = 0;
  std::uint64_t model_seed = 0;
  ExplainOptions explain_options;
  explain_cmd->add_option("--image", image_path, "PNG or PPM anchor image");
  explain_cmd->add_option("--mask", mask_path, "label image with segment ids 0..d-1");
  explain_cmd->add_option("--grid", grid, "grid segmentation ROWSxCOLS when no mask is given")->capture_default_str();
  explain_cmd->add_option("--text", text, "explain a whitespace-tokenised text instead");
  explain_cmd->add_option("--occlusion", occlusion, "black | mean")->capture_default_str();
  explain_cmd->add_option("--classes", explain_options.top, "number of top classes to explain")->capture_default_str();
  explain_cmd->add_option("--epsilon", explain_options.epsilon)->capture_default_str();
  explain_cmd->add_option("--samples", explain_options.samples)->capture_default_str();
  explain_cmd->add_option("--seed", explain_options.seed)->capture_default_str();
  explain_cmd->add_option("--kernel-width", explain_options.kernel_width)->capture_default_str();
  explain_cmd->add_option("--model", model_path, "black-box descriptor JSON file");
  explain_cmd->add_option("--remote", remote_url, "remote model endpoint (POST, batch protocol)");
  explain_cmd->add_option("--remote-classes", remote_classes, "class count of the remote model");
  explain_cmd->add_option("--family", family, "synthetic model family when no model is given")->capture_default_str();
  explain_cmd->add_option("--model-classes", model_classes, "synthetic model class count")->capture_default_str();
  explain_cmd->add_option("--model-seed", model_seed)->capture_default_str();
  explain_cmd->add_option("--out", out_path, "output JSON (stdout when omitted)");

  auto* serve = app.add_subcommand("serve", "Run the explanation HTTP service");
  std::string root = "sessions", host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--root", root, "session storage directory")->capture_default_str();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();

  auto* model_serve = app.add_subcommand("model-serve", "Serve a synthetic model over the batch predict protocol");
  std::string ms_image, ms_mask, ms_grid = "3x3", ms_text, ms_family = "segment-logit", ms_host = "127.0.0.1";
  std::size_t ms_classes = 5;
  std::uint64_t ms_seed = 0;
  int ms_port = 8090;
  model_serve->add_option("--image", ms_image, "reference image the model decodes occlusions against");
  model_serve->add_option("--mask", ms_mask);
  model_serve->add_option("--grid", ms_grid)->capture_default_str();
  model_serve->add_option("--text", ms_text);
  model_serve->add_option("--family", ms_family)->capture_default_str();
  model_serve->add_option("--classes", ms_classes)->capture_default_str();
  model_serve->add_option("--seed", ms_seed)->capture_default_str();
  model_serve->add_option("--host", ms_host)->capture_default_str();
  model_serve->add_option("--port", ms_port)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (fidelity->parsed()) {
      fidelity_args.config.family = parse_synthetic_kind(fidelity_args.family);
      emit(run_fidelity_experiment(fidelity_args.config), fidelity_args.out);
    } else if (sweep->parsed()) {
      sweep_args.config.family = parse_synthetic_kind(sweep_args.family);
      emit(run_depth_sweep(sweep_args.config), sweep_args.out);
    } else if (explain_cmd->parsed()) {
      const InterpretableDomain domain = build_domain(image_path, mask_path, grid, text, occlusion);
      nlohmann::json descriptor;
      if (!model_path.empty()) {
        std::ifstream in(model_path);
        if (!in) fail(ErrorCode::invalid_argument, "cannot read " + model_path);
        descriptor = nlohmann::json::parse(in);
      } else if (!remote_url.empty()) {
        require(remote_classes >= 2, "--remote-classes is required with --remote");
        descriptor = {{"kind", "remote"}, {"url", remote_url}, {"class_count", remote_classes}};
      } else {
        descriptor = {{"kind", "synthetic"}, {"family", family}, {"class_count", model_classes}, {"seed", model_seed}};
      }
      const BlackBoxPtr bb = make_black_box(descriptor, domain);
      nlohmann::json result = explain(domain, *bb, explain_options);
      result["black_box"] = descriptor;
      if (out_path.empty()) {
        std::cout << result.dump(2) << "\n";
      } else {
        std::ofstream out(out_path);
        if (!out) fail(ErrorCode::invalid_argument, "cannot open " + out_path + " for writing");
        out << result.dump(2) << "\n";
      }
    } else if (serve->parsed()) {
      ExplanationService service(root);
      httplib::Server server;
      service.mount(server);
      g_server = &server;
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      std::cerr << fmt::format("serving {} on http://{}:{}\n", root, host, port);
      if (!server.listen(host, port)) fail(ErrorCode::invalid_argument, fmt::format("cannot listen on {}:{}", host, port));
    } else if (model_serve->parsed()) {
      const InterpretableDomain domain = build_domain(ms_image, ms_mask, ms_grid, ms_text, "black");
      const BlackBoxPtr bb = make_black_box(
          {{"kind", "synthetic"}, {"family", ms_family}, {"class_count", ms_classes}, {"seed", ms_seed}}, domain);
      httplib::Server server;
      serve_black_box(server, bb);
      g_server = &server;
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      std::cerr << fmt::format("model on http://{}:{}/predict (d={}, {} classes)\n", ms_host, ms_port,
                               domain.dimension(), ms_classes);
      if (!server.listen(ms_host, ms_port))
        fail(ErrorCode::invalid_argument, fmt::format("cannot listen on {}:{}", ms_host, ms_port));
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
