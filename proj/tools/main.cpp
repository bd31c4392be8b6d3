#include <iostream>

#include <CLI11.hpp>

#include "radfiner/commands.hpp"

namespace {

using radfiner::CommonOptions;

void add_common(CLI::App* cmd, CommonOptions& c, bool network_flags) {
  cmd->add_option("--config", c.config, "key=value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--workers", c.workers, "worker threads over scans")->check(CLI::PositiveNumber);
  if (network_flags) {
    cmd->add_option("--radius", c.radius, "ball query radius in meters")->check(CLI::PositiveNumber);
    cmd->add_option("--nmax", c.nmax, "maximum neighbors per point")->check(CLI::PositiveNumber);
    cmd->add_option("--attn-pad", c.attn_pad, "neighborhood padding: mask|zeropad")
        ->check(CLI::IsMember({"mask", "zeropad"}));
  }
}

CLI::Validator refine_modes = CLI::IsMember({"split", "majority"});

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic refinement of radar moving-instance predictions"};
  app.require_subcommand(1);
  app.set_version_flag("--version", RADFINER_VERSION);

  radfiner::GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "synthetic scans plus surrogate backbone predictions");
  add_common(g, gen.common, false);
  g->add_option("--out", gen.out_dir, "output directory")->required();
  g->add_option("--count", gen.count, "number of scans")->required();
  g->add_option("--prefix", gen.prefix, "scan id prefix");

  radfiner::TrainOptions tr;
  auto* t = app.add_subcommand("train", "train the semantic head");
  add_common(t, tr.common, true);
  t->add_option("--data", tr.data_dir, "directory with scans.txt")->required()->check(CLI::ExistingDirectory);
  t->add_option("--val", tr.val_dir, "validation directory with scans.txt and pred.txt")
      ->check(CLI::ExistingDirectory);
  t->add_option("--out", tr.out_dir, "output directory")->required();
  t->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber);
  t->add_option("--batch-size", tr.batch_size)->check(CLI::PositiveNumber);
  t->add_option("--lr", tr.lr)->check(CLI::PositiveNumber);
  t->add_option("--lr-drop-epoch", tr.lr_drop_epoch)->check(CLI::NonNegativeNumber);
  t->add_option("--d1", tr.d1)->check(CLI::PositiveNumber);
  t->add_option("--d2", tr.d2)->check(CLI::PositiveNumber);
  t->add_option("--p-instance", tr.p_instance)->check(CLI::Range(0.0, 1.0));
  t->add_option("--p-scan", tr.p_scan)->check(CLI::Range(0.0, 1.0));
  t->add_option("--clutter-source", tr.clutter_source)->check(CLI::IsMember({"synthetic", "sampled"}));
  t->add_option("--refine-mode", tr.refine_mode, "refinement used for validation")->check(refine_modes);
  t->add_option("--checkpoint-every", tr.checkpoint_every, "epochs between checkpoints (0: final only)");

  radfiner::EvalOptions ev;
  auto* e = app.add_subcommand("eval", "score backbone or refined predictions");
  add_common(e, ev.common, true);
  e->add_option("--data", ev.data_dir, "directory with scans.txt")->required()->check(CLI::ExistingDirectory);
  e->add_option("--pred", ev.pred, "backbone prediction file (default <data>/pred.txt)")->check(CLI::ExistingFile);
  e->add_option("--checkpoint", ev.checkpoint, "trained model; omit to score the backbone alone")
      ->check(CLI::ExistingFile);
  e->add_option("--network-config", ev.network_config)->check(CLI::ExistingFile);
  e->add_flag("--refine", ev.refine, "split instances by predicted class");
  e->add_option("--refine-mode", ev.refine_mode)->check(refine_modes);
  e->add_option("--out", ev.out_dir, "directory for metrics.txt, metrics.csv, panoptic.txt");

  radfiner::RefineOptions rf;
  auto* r = app.add_subcommand("refine", "write refined panoptic predictions");
  add_common(r, rf.common, true);
  r->add_option("--data", rf.data_dir)->required()->check(CLI::ExistingDirectory);
  r->add_option("--pred", rf.pred)->check(CLI::ExistingFile);
  r->add_option("--checkpoint", rf.checkpoint)->required()->check(CLI::ExistingFile);
  r->add_option("--network-config", rf.network_config)->check(CLI::ExistingFile);
  r->add_option("--refine-mode", rf.refine_mode)->check(refine_modes);
  r->add_option("--out", rf.out, "output prediction file")->required();

  radfiner::GradcheckOptions gc;
  auto* c = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  add_common(c, gc.common, true);
  c->add_option("--points", gc.points)->check(CLI::PositiveNumber);
  c->add_option("--d1", gc.d1)->check(CLI::PositiveNumber);
  c->add_option("--d2", gc.d2)->check(CLI::PositiveNumber);
  c->add_option("--step", gc.step)->check(CLI::PositiveNumber);
  c->add_option("--tolerance", gc.tolerance)->check(CLI::PositiveNumber);
  c->add_option("--out", gc.out, "report file");

  radfiner::BenchOptions bn;
  auto* b = app.add_subcommand("bench", "per-scan latency of select, forward and refine");
  add_common(b, bn.common, true);
  b->add_option("--checkpoint", bn.checkpoint)->check(CLI::ExistingFile);
  b->add_option("--network-config", bn.network_config)->check(CLI::ExistingFile);
  b->add_option("--data", bn.data_dir)->check(CLI::ExistingDirectory);
  b->add_option("--scans", bn.scans)->check(CLI::PositiveNumber);
  b->add_option("--scan-points", bn.scan_points)->check(CLI::PositiveNumber);
  b->add_option("--repetitions", bn.repetitions)->check(CLI::PositiveNumber);
  b->add_option("--warmup", bn.warmup);
  b->add_option("--d1", bn.d1)->check(CLI::PositiveNumber);
  b->add_option("--d2", bn.d2)->check(CLI::PositiveNumber);
  b->add_option("--refine-mode", bn.refine_mode)->check(refine_modes);
  b->add_option("--ball-query-points", bn.ball_query_points)->check(CLI::PositiveNumber);
  b->add_option("--out", bn.out, "directory for bench.txt and manifest.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? radfiner::kExitOk : radfiner::kExitUsage;
  }

  auto& out = std::cout;
  auto& err = std::cerr;
  if (g->parsed()) return radfiner::cmd_generate(gen, out, err);
  if (t->parsed()) return radfiner::cmd_train(tr, out, err);
  if (e->parsed()) return radfiner::cmd_eval(ev, out, err);
  if (r->parsed()) return radfiner::cmd_refine(rf, out, err);
  if (c->parsed()) return radfiner::cmd_gradcheck(gc, out, err);
  if (b->parsed()) return radfiner::cmd_bench(bn, out, err);
  return radfiner::kExitUsage;
}
