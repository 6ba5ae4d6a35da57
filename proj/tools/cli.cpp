#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "ltnn/checkpoint.hpp"
#include "ltnn/cost.hpp"
#include "ltnn/dataset.hpp"
#include "ltnn/errors.hpp"
#include "ltnn/evaluate.hpp"
#include "ltnn/image.hpp"
#include "ltnn/training.hpp"

namespace ltnn::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// --config plus the --key=value overrides left over by CLI11.
struct Settings {
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> overrides;
};

std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& args) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0 || a.size() == 2) throw UsageError("unexpected argument '" + a + "'");
    std::string key = a.substr(2), value;
    if (auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else if (i + 1 < args.size() && args[i + 1].rfind("--", 0) != 0) {
      value = args[++i];
    } else {
      value = "true";
    }
    for (auto& ch : key) {
      if (ch == '-') ch = '_';
    }
    out.emplace_back(key, value);
  }
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

/// Applies the config file and then the overrides; returns the keys that
/// were assigned by either.
std::set<std::string> apply(ConfigBinder& binder, const Settings& settings) {
  std::set<std::string> assigned;
  try {
    if (!settings.config_file.empty()) {
      const std::string text = read_text(settings.config_file);
      binder.load_text(text, settings.config_file);
      std::istringstream lines(text);
      std::string line;
      while (std::getline(lines, line)) {
        line = line.substr(0, line.find('#'));
        if (auto eq = line.find('='); eq != std::string::npos) {
          std::string key = line.substr(0, eq);
          key.erase(0, key.find_first_not_of(" \t"));
          key.erase(key.find_last_not_of(" \t") + 1);
          assigned.insert(key);
        }
      }
    }
    for (const auto& [key, value] : settings.overrides) {
      binder.set(key, value);
      assigned.insert(key);
    }
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  return assigned;
}

/// `data` may name a split file or a directory holding train.ltnd / test.ltnd.
fs::path split_path(const std::string& data, const std::string& split) {
  const fs::path p(data);
  if (fs::is_directory(p)) return p / (split + ".ltnd");
  return p;
}

int gen_data(const Settings& settings, std::ostream& out) {
  DatasetConfig config;
  std::string dir = "data";
  bool export_png = false;
  ConfigBinder b;
  config.bind(b);
  b.bind("out", dir);
  b.bind("export_png", export_png);
  apply(b, settings);
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto splits = generate_dataset(config);
  fs::create_directories(dir);
  write_text(fs::path(dir) / "config.txt", b.to_text());
  write_dataset((fs::path(dir) / "train.ltnd").string(), splits.train);
  write_dataset((fs::path(dir) / "test.ltnd").string(), splits.test);
  if (export_png) {
    write_png((fs::path(dir) / "train.png").string(), dataset_grid(splits.train, 8));
    write_png((fs::path(dir) / "test.png").string(), dataset_grid(splits.test, 8));
  }
  out << "wrote " << splits.train.size() << " train and " << splits.test.size()
      << " test samples to " << dir << "\n";
  return kExitOk;
}

int train(const Settings& settings, std::ostream& out) {
  TrainConfig config;
  std::string data = "data", dir = "run", resume;
  std::optional<Checkpoint> checkpoint;
  // A resumed run starts from the settings stored in its checkpoint.
  for (const auto& [key, value] : settings.overrides) {
    if (key == "resume") resume = value;
  }
  if (!resume.empty()) {
    checkpoint = read_checkpoint(resume);
    config = TrainConfig::from_text(checkpoint->config_text);
  }
  ConfigBinder b;
  config.bind(b);
  b.bind("data", data);
  b.bind("out", dir);
  b.bind("resume", resume);
  const auto assigned = apply(b, settings);

  const Dataset dataset = read_dataset(split_path(data, "train").string());
  if (!checkpoint) {
    if (!assigned.count("image_size")) config.model.image_size = static_cast<int>(dataset.height);
    if (!assigned.count("conditions")) config.model.conditions = static_cast<int>(dataset.conditions);
  }
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  Trainer trainer(config);
  if (checkpoint) trainer.restore(*checkpoint);
  const auto total = trainer.total_steps(dataset);
  out << "training " << to_string(config.model.conditioning) << " model ("
      << trainer.model().parameter_count() << " parameters) for " << total << " steps\n";
  TrainOutputs outputs;
  outputs.out = dir;
  outputs.on_step = [&](std::uint64_t step, const LossBreakdown& l) {
    if (step % 100 == 0 || step == total) {
      out << "step " << step << "/" << total << "  adv_d " << l.adv_d << "  adv_g " << l.adv_g
          << "  recon " << l.recon << "  total " << l.total << "\n";
    }
  };
  trainer.train(dataset, outputs);
  // config.txt written by the trainer holds only training keys.
  write_text(fs::path(dir) / "config.txt", b.to_text());
  out << "checkpoint: " << (fs::path(dir) / "checkpoint_final.ltnn").string() << "\n";
  return kExitOk;
}

int eval(const Settings& settings, std::ostream& out) {
  std::string checkpoint, data = "data", dir = "eval", split = "both";
  EvalOptions options;
  int batch_size = static_cast<int>(options.batch_size);
  int grid_samples = static_cast<int>(options.grid_samples);
  ConfigBinder b;
  b.bind("checkpoint", checkpoint);
  b.bind("data", data);
  b.bind("out", dir);
  b.bind_choice("split", split, {"both", "train", "test"});
  b.bind("batch_size", batch_size);
  b.bind("grid_samples", grid_samples);
  apply(b, settings);
  if (checkpoint.empty()) throw UsageError("eval needs --checkpoint");
  if (batch_size < 1 || grid_samples < 0) throw UsageError("batch_size must be >= 1, grid_samples >= 0");
  options.batch_size = static_cast<std::size_t>(batch_size);
  options.grid_samples = static_cast<std::size_t>(grid_samples);

  const LtnnModel model = restore_model(read_checkpoint(checkpoint));
  std::vector<SampleMetrics> samples;
  fs::create_directories(dir);
  for (const auto& [name, group] : {std::pair{"train", "seen"}, std::pair{"test", "unseen"}}) {
    if (split != "both" && split != name) continue;
    const Dataset dataset = read_dataset(split_path(data, name).string());
    auto result = evaluate_model(model, dataset, group, options);
    samples.insert(samples.end(), result.samples.begin(), result.samples.end());
    if (result.grid.width > 0) {
      write_png((fs::path(dir) / (std::string("grid_") + group + ".png")).string(), result.grid);
    }
  }
  const MetricReport report = summarize(std::move(samples));
  write_text(fs::path(dir) / "config.txt", b.to_text());
  write_text(fs::path(dir) / "summary.csv", report.summary_csv());
  write_text(fs::path(dir) / "samples.csv", report.samples_csv());
  write_text(fs::path(dir) / "report.txt", report.to_text());
  out << report.to_text();
  return kExitOk;
}

int synth(const Settings& settings, std::ostream& out) {
  std::string checkpoint, input, condition = "all", output = "synth.png";
  bool all = false;
  ConfigBinder b;
  b.bind("checkpoint", checkpoint);
  b.bind("input", input);
  b.bind("condition", condition);
  b.bind("all", all);
  b.bind("out", output);
  apply(b, settings);
  if (all) condition = "all";
  if (checkpoint.empty() || input.empty()) throw UsageError("synth needs --checkpoint and --input");

  const LtnnModel model = restore_model(read_checkpoint(checkpoint));
  const int K = model.config().conditions;
  std::vector<int> conditions;
  if (condition == "all") {
    for (int k = 0; k < K; ++k) conditions.push_back(k);
  } else {
    int k = 0;
    try {
      std::size_t used = 0;
      k = std::stoi(condition, &used);
      if (used != condition.size()) throw std::invalid_argument(condition);
    } catch (const std::exception&) {
      throw UsageError("condition must be an integer or 'all', got '" + condition + "'");
    }
    if (k < 0 || k >= K) {
      throw UsageError("condition " + condition + " outside [0, " + std::to_string(K) + ")");
    }
    conditions.push_back(k);
  }
  const Image image = read_png(input);
  const int S = model.config().image_size;
  if (image.width != S || image.height != S) {
    throw DimensionError("input is " + std::to_string(image.width) + "x" +
                         std::to_string(image.height) + ", model expects " + std::to_string(S) +
                         "x" + std::to_string(S));
  }
  const Tensor x = image_to_tensor(image);
  std::vector<Image> row{image};
  {
    NoGradScope no_grad;
    for (int k : conditions) row.push_back(tensor_to_image(model.predict(x, k).image, 0));
  }
  const fs::path out_path(output);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_png(output, compose_grid({row}));
  write_text(out_path.string() + ".config.txt", b.to_text());
  out << "wrote 1x" << row.size() << " grid to " << output << "\n";
  return kExitOk;
}

int cost(const Settings& settings, std::ostream& out) {
  ModelConfig config;
  ConfigBinder b;
  config.bind(b);
  apply(b, settings);
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  out << count_params_flops(config).to_text();
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent transformation network: data generation, training and evaluation", "ltnn"};
  app.require_subcommand(1);
  struct Command {
    const char* name;
    const char* help;
    int (*fn)(const Settings&, std::ostream&);
  };
  const Command commands[] = {
      {"gen-data", "render a procedural multi-view dataset", gen_data},
      {"train", "train a model on a dataset", train},
      {"eval", "score a checkpoint on the seen and unseen splits", eval},
      {"synth", "predict views of one PNG input", synth},
      {"cost", "report parameter and FLOP counts for a model config", cost},
  };
  std::vector<Settings> settings(std::size(commands));
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    auto* sub = app.add_subcommand(commands[i].name, commands[i].help);
    sub->add_option("--config", settings[i].config_file, "key=value settings file");
    sub->allow_extras();
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    try {
      settings[i].overrides = parse_overrides(subs[i]->remaining());
      return commands[i].fn(settings[i], out);
    } catch (const UsageError& e) {
      err << "ltnn " << commands[i].name << ": " << e.what() << "\n";
      return kExitUsage;
    } catch (const std::exception& e) {
      err << "ltnn " << commands[i].name << ": error: " << e.what() << "\n";
      return kExitRuntime;
    }
  }
  return kExitUsage;
}

}  // namespace ltnn::cli
