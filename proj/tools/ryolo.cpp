// ryolo: dataset preparation, anchor estimation, training, evaluation and
// synthetic data generation for the recurrent detector.
//
// Every subcommand accepts --config FILE, --seed N, --out DIR and repeated
// --set key.path=value overrides. On failure a single line
// "error: <class>: <message>" goes to stderr and the exit code is nonzero.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ryolo/config.hpp"
#include "ryolo/error.hpp"
#include "ryolo/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seed, "seed (overrides the config)");
  cmd->add_option("--out", args.out, "output directory")->required();
  cmd->add_option("--set", args.sets, "override, e.g. train.epochs=3");
}

ryolo::RunConfig resolve(const CommonArgs& args) {
  ryolo::RunConfig cfg = args.config.empty() ? ryolo::RunConfig{} : ryolo::read_config(args.config);
  cfg = ryolo::apply_overrides(cfg, args.sets);
  if (args.seed) cfg.seed = *args.seed;
  return cfg;
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ryolo: recurrent single-stage detector pipeline"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string checkpoint;

  auto* prepare = app.add_subcommand("prepare", "segment annotated videos into clips and splits");
  add_common(prepare, args);
  auto* anchors = app.add_subcommand("anchors", "estimate the nine anchor priors by k-means");
  add_common(anchors, args);
  auto* train = app.add_subcommand("train", "train the detector");
  add_common(train, args);
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the validation split");
  add_common(eval, args);
  eval->add_option("--checkpoint", checkpoint, "checkpoint to evaluate (default: paths.checkpoint)");
  auto* synth = app.add_subcommand("synth", "generate a synthetic moving-squares dataset");
  add_common(synth, args);
  auto* defaults = app.add_subcommand("defaults", "print the default configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    if (defaults->parsed()) {
      std::cout << ryolo::to_json(ryolo::RunConfig{}).dump(2) << '\n';
      return 0;
    }
    const ryolo::RunConfig cfg = resolve(args);
    ryolo::Json summary;
    if (prepare->parsed()) {
      const auto s = ryolo::cmd_prepare(cfg, args.out);
      summary = {{"clips", s.clips.size()},
                 {"train_clips", s.clip_split.train.size()},
                 {"val_clips", s.clip_split.val.size()},
                 {"reduction", s.stats.reduction()}};
    } else if (anchors->parsed()) {
      const auto s = ryolo::cmd_anchors(cfg, args.out);
      summary = {{"boxes", s.boxes}, {"objective", s.kmeans.objective}};
    } else if (train->parsed()) {
      const auto s = ryolo::cmd_train(cfg, args.out, [](std::size_t step, std::size_t epoch,
                                                       const ryolo::LossBreakdown& l) {
        if (step % 50 == 0) {
          std::cerr << "epoch " << epoch << " step " << step << " loss " << l.total << '\n';
        }
      });
      summary = {{"steps", s.steps}, {"epoch_loss", s.epoch_loss}, {"checkpoint", s.checkpoint}};
    } else if (eval->parsed()) {
      const auto r = ryolo::cmd_eval(cfg, checkpoint.empty() ? cfg.paths.checkpoint : checkpoint, args.out);
      summary = {{"frames", r.frames},
                 {"precision", r.overall.precision},
                 {"recall", r.overall.recall},
                 {"map", r.map_all.value}};
    } else if (synth->parsed()) {
      const auto s = ryolo::cmd_synth(cfg, args.out);
      summary = {{"videos", s.videos}, {"frames", s.frames}, {"labeled_frames", s.labeled_frames}};
    }
    std::cout << summary.dump() << '\n';
    return 0;
  } catch (const ryolo::Error& e) {
    std::cerr << "error: " << ryolo::error_kind_name(e.kind()) << ": " << one_line(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << one_line(e.what()) << '\n';
    return 3;
  }
}
