#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tagclip/harness.hpp"
#include "tagclip/image_export.hpp"

using namespace tagclip;
namespace fs = std::filesystem;

namespace {

// Shared by every subcommand: where the config comes from and where outputs go.
struct CommonArgs {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string run_dir;
};

void add_common(CLI::App* cmd, CommonArgs& a, const std::string& default_dir) {
  a.run_dir = default_dir;
  cmd->add_option("-c,--config", a.config_file, "key=value config file")->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", a.overrides, "override, e.g. --set steps=200 (repeatable)");
  cmd->add_option("-o,--run-dir", a.run_dir, "output directory")->capture_default_str();
}

RunConfig resolve_config(const CommonArgs& a) {
  RunConfig c = a.config_file.empty() ? RunConfig{} : load_config(a.config_file);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not key=value");
    set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  c.validate();
  return c;
}

fs::path prepare_run_dir(const CommonArgs& a, const RunConfig& c) {
  const fs::path dir(a.run_dir);
  fs::create_directories(dir);
  save_config(dir / "config.cfg", c);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

Dataset obtain_dataset(const std::string& data_dir, const RunConfig& c) {
  if (data_dir.empty()) return make_dataset(c);
  Dataset d = load_dataset(data_dir);
  const auto& b = d.train.empty() ? d.test.front().bundle : d.train.front().bundle;
  if (d.vocab.size() != c.classes || b.text_tokens.dim(1) != c.dim) {
    throw ConfigError("dataset in " + data_dir + " has " + std::to_string(d.vocab.size()) + " classes and dim " +
                      std::to_string(b.text_tokens.dim(1)) + ", config expects " + std::to_string(c.classes) +
                      " and " + std::to_string(c.dim));
  }
  return d;
}

std::string trace_csv(const RunResult& r) {
  std::ostringstream s;
  s.precision(17);
  s << "step,total,cls,focal,dice,trusty,pseudo_pixels\n";
  const std::size_t offset = r.trace.size() - r.pseudo_pixels.size();
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    const auto& t = r.trace[i];
    s << i << ',' << t.total << ',' << t.cls << ',' << t.focal << ',' << t.dice << ',' << t.trusty << ',';
    if (i >= offset) s << r.pseudo_pixels[i - offset];
    s << '\n';
  }
  return s.str();
}

std::string run_summary(const RunConfig& c, const RunResult& r, const ClassVocabulary& vocab) {
  std::ostringstream s;
  s << "protocol=" << to_string(c.protocol) << '\n';
  if (c.protocol == Protocol::transductive) {
    std::size_t pseudo = 0;
    for (auto n : r.pseudo_pixels) pseudo += n;
    s << "st_threshold=" << c.st_threshold << "\nwarmup_steps=" << warmup_steps(c) << "\npseudo_pixels=" << pseudo
      << '\n';
  }
  s << "seconds=" << r.seconds << '\n' << format_report_kv(r.report, vocab);
  return s.str();
}

int cmd_gen_data(const CommonArgs& a) {
  const RunConfig c = resolve_config(a);
  const fs::path dir = prepare_run_dir(a, c);
  const Dataset d = make_dataset(c);
  save_dataset(dir / "data", d);
  std::printf("wrote %zu train and %zu test samples to %s\n", d.train.size(), d.test.size(),
              (dir / "data").c_str());
  return 0;
}

int cmd_train(const CommonArgs& a, const std::string& data_dir) {
  const RunConfig c = resolve_config(a);
  const fs::path dir = prepare_run_dir(a, c);
  const Dataset d = obtain_dataset(data_dir, c);
  const std::size_t every = std::max<std::size_t>(1, c.steps / 10);
  const TrainOutput out = train(c, d, [&](std::size_t step, const LossReport& r) {
    if ((step + 1) % every == 0) std::fprintf(stderr, "step %zu/%zu loss %.4f\n", step + 1, c.steps, r.total);
  });
  save_params(dir / "params", out.params);
  write_text(dir / "trace.csv", trace_csv(out.result));
  const std::string summary = run_summary(c, out.result, d.vocab);
  write_text(dir / "metrics.txt", summary);
  std::cout << format_report_table(out.result.report, d.vocab) << summary;
  return 0;
}

int cmd_eval(const CommonArgs& a, const std::string& params_dir, const std::string& data_dir) {
  const RunConfig c = resolve_config(a);
  const fs::path dir = prepare_run_dir(a, c);
  const HeadParams p = load_params(params_dir);
  const Dataset d = obtain_dataset(data_dir, c);
  const EvalReport r = evaluate(p, d.test, d.vocab, c.weighted_map);
  const std::string kv = "weighted_map=" + std::string(c.weighted_map ? "true" : "false") + "\n" +
                         format_report_kv(r, d.vocab);
  write_text(dir / "metrics.txt", kv);
  std::cout << format_report_table(r, d.vocab) << kv;
  return 0;
}

int cmd_ablate(const CommonArgs& a, const std::string& data_dir, bool only_core) {
  const RunConfig c = resolve_config(a);
  const fs::path dir = prepare_run_dir(a, c);
  const Dataset d = obtain_dataset(data_dir, c);
  const auto extras = only_core ? std::vector<LearnerVariant>{} : default_ablation_variants();
  const auto rows = run_ablation_grid(c, d, extras, [](const AblationRow& r) {
    std::fprintf(stderr, "%s %s done (%.1f s)\n", r.label.c_str(), to_string(r.config.variant).c_str(),
                 r.result.seconds);
  });
  const std::string table = format_ablation_table(rows);
  write_text(dir / "ablation.txt", table);
  std::cout << table;
  return 0;
}

int cmd_sweep(const CommonArgs& a, const std::string& data_dir, const std::vector<double>& gammas) {
  const RunConfig c = resolve_config(a);
  const fs::path dir = prepare_run_dir(a, c);
  const Dataset d = obtain_dataset(data_dir, c);
  const std::string table = format_sweep_table(sweep_gamma(c, d, gammas));
  write_text(dir / "sweep.txt", table);
  std::cout << table;
  return 0;
}

int cmd_export(const CommonArgs& a, const std::string& params_dir, const std::string& data_dir,
               std::size_t index, const std::string& split) {
  const RunConfig c = resolve_config(a);
  const fs::path dir = prepare_run_dir(a, c);
  const HeadParams p = load_params(params_dir);
  const Dataset d = obtain_dataset(data_dir, c);
  const auto& samples = split == "train" ? d.train : d.test;
  if (index >= samples.size()) {
    throw std::out_of_range("sample " + std::to_string(index) + " out of range for " + split + " split of " +
                            std::to_string(samples.size()));
  }
  const ToySample& s = samples[index];
  const std::string stem = split + "_" + std::to_string(index);
  export_label_image(predict(p, s, d.vocab, c.weighted_map), dir / (stem + "_pred.ppm"));
  export_label_image(s.labels, dir / (stem + "_gt.ppm"));
  std::printf("wrote %s_pred.ppm and %s_gt.ppm to %s\n", stem.c_str(), stem.c_str(), dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TagCLIP-style open-vocabulary segmentation head on a synthetic benchmark"};
  app.require_subcommand(1);

  CommonArgs gen, tr, ev, ab, sw, ex;
  std::string tr_data, ev_data, ev_params, ab_data, sw_data, ex_data, ex_params, ex_split = "test";
  std::vector<double> gammas{0, 1, 10, 100};
  std::size_t ex_index = 0;
  bool core_only = false;

  auto* g = app.add_subcommand("gen-data", "generate the toy benchmark as TGT1 tensors");
  add_common(g, gen, "runs/data");

  auto* t = app.add_subcommand("train", "train the head and evaluate on the test split");
  add_common(t, tr, "runs/train");
  t->add_option("-d,--data", tr_data, "dataset directory from gen-data (default: generate)");

  auto* e = app.add_subcommand("eval", "evaluate saved parameters");
  add_common(e, ev, "runs/eval");
  e->add_option("-p,--params", ev_params, "parameter directory from train")->required();
  e->add_option("-d,--data", ev_data, "dataset directory (default: generate)");

  auto* a = app.add_subcommand("ablate", "run ablation rows (a)-(d)");
  add_common(a, ab, "runs/ablate");
  a->add_option("-d,--data", ab_data, "dataset directory (default: generate)");
  a->add_flag("--core-only", core_only, "skip the extra Q/K/V variants in row (c)");

  auto* s = app.add_subcommand("sweep-gamma", "train once per trusty-loss weight");
  add_common(s, sw, "runs/sweep");
  s->add_option("-d,--data", sw_data, "dataset directory (default: generate)");
  s->add_option("-g,--gammas", gammas, "weights to sweep")->delimiter(',')->capture_default_str();

  auto* x = app.add_subcommand("export", "write predicted and ground-truth label maps as P6 images");
  add_common(x, ex, "runs/export");
  x->add_option("-p,--params", ex_params, "parameter directory from train")->required();
  x->add_option("-d,--data", ex_data, "dataset directory (default: generate)");
  x->add_option("-i,--index", ex_index, "sample index")->capture_default_str();
  x->add_option("--split", ex_split, "train or test")->check(CLI::IsMember({"train", "test"}))->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (g->parsed()) return cmd_gen_data(gen);
    if (t->parsed()) return cmd_train(tr, tr_data);
    if (e->parsed()) return cmd_eval(ev, ev_params, ev_data);
    if (a->parsed()) return cmd_ablate(ab, ab_data, core_only);
    if (s->parsed()) return cmd_sweep(sw, sw_data, gammas);
    if (x->parsed()) return cmd_export(ex, ex_params, ex_data, ex_index, ex_split);
  } catch (const ConfigError& err) {
    std::fprintf(stderr, "config error: %s\n", err.what());
    return 2;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 1;
}
