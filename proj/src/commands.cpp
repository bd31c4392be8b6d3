#include "radfiner/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "radfiner/checkpoint.hpp"
#include "radfiner/error.hpp"
#include "radfiner/gradcheck.hpp"
#include "radfiner/neighborhood.hpp"
#include "radfiner/parallel.hpp"
#include "radfiner/pipeline.hpp"
#include "radfiner/synth.hpp"

namespace radfiner {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string cpu_model() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) return line.substr(line.find_first_not_of(' ', colon + 1));
    }
  }
  return "unknown";
}

json hardware() {
  return {{"cpu", cpu_model()},
          {"hardware_threads", std::thread::hardware_concurrency()},
          {"compiler", __VERSION__}};
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

void write_manifest(const fs::path& dir, json manifest) {
  manifest["tool_version"] = RADFINER_VERSION;
  manifest["hardware"] = hardware();
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

json config_json(const KeyValueConfig& kv) {
  json j = json::object();
  for (const auto& [k, v] : kv.values()) j[k] = v;
  return j;
}

KeyValueConfig load_config(const CommonOptions& c) {
  return c.config ? KeyValueConfig::load(*c.config) : KeyValueConfig{};
}

void apply_network_overrides(NetworkConfig& net, const CommonOptions& c) {
  if (c.radius) net.radius = *c.radius;
  if (c.nmax) net.nmax = *c.nmax;
  if (c.attn_pad) net.attn_pad = parse_padding_mode(*c.attn_pad);
  net.validate();
}

fs::path pred_path(const fs::path& data_dir, const std::optional<fs::path>& pred) {
  return pred ? *pred : data_dir / "pred.txt";
}

RefinerNet load_network(const fs::path& checkpoint, const std::optional<fs::path>& network_config,
                        const CommonOptions& common) {
  const fs::path cfg_path = network_config ? *network_config : checkpoint.parent_path() / "network.cfg";
  auto cfg = NetworkConfig::load(cfg_path);
  apply_network_overrides(cfg, common);
  RefinerNet net(cfg);
  nn::load_checkpoint(net.params(), checkpoint);
  return net;
}

RefineMode refine_mode_or(const std::optional<std::string>& text, RefineMode fallback) {
  return text ? parse_refine_mode(*text) : fallback;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace

// ---- generate ---------------------------------------------------------------

int cmd_generate(const GenerateOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto t0 = Clock::now();
    auto kv = load_config(opt.common);
    auto scene = SceneConfig::from_keyvalue(kv);
    auto sur = SurrogateConfig::from_keyvalue(kv);
    if (opt.common.seed) scene.seed = sur.seed = *opt.common.seed;
    const auto scans = generate_corpus(scene, opt.count, scene.seed, opt.prefix, opt.common.workers);
    std::vector<MovingPrediction> preds(scans.size());
    std::vector<SurrogateStats> stats(scans.size());
    parallel_for(scans.size(), opt.common.workers,
                 [&](std::size_t s) { preds[s] = surrogate_backbone(scans[s], sur, sur.seed, &stats[s]); });
    fs::create_directories(opt.out_dir);
    save_dataset(scans, opt.out_dir / "scans.txt");
    save_predictions(preds, opt.out_dir / "pred.txt");

    SurrogateStats total;
    std::size_t points = 0;
    for (std::size_t s = 0; s < scans.size(); ++s) {
      total.boundary_eligible += stats[s].boundary_eligible;
      total.boundary_flagged += stats[s].boundary_flagged;
      total.missed += stats[s].missed;
      total.clutter_instances += stats[s].clutter_instances;
      total.merges += stats[s].merges;
      points += scans[s].size();
    }
    const double elapsed = seconds_since(t0);
    write_manifest(opt.out_dir,
                   {{"command", "generate"},
                    {"config", config_json(kv)},
                    {"count", opt.count},
                    {"prefix", opt.prefix},
                    {"scene_seed", scene.seed},
                    {"surrogate_seed", sur.seed},
                    {"surrogate", {{"eps_boundary", sur.eps_boundary}, {"eps_clutter", sur.eps_clutter},
                                   {"eps_merge", sur.eps_merge}, {"eps_miss", sur.eps_miss},
                                   {"merge_gap", sur.merge_gap}}},
                    {"workers", opt.common.workers},
                    {"outputs", {(opt.out_dir / "scans.txt").string(), (opt.out_dir / "pred.txt").string()}},
                    {"injected", {{"missed", total.missed}, {"boundary_flagged", total.boundary_flagged},
                                  {"boundary_eligible", total.boundary_eligible},
                                  {"clutter_instances", total.clutter_instances}, {"merges", total.merges}}},
                    {"seconds", elapsed}});
    out << "generated " << scans.size() << " scans (" << points << " points) in " << opt.out_dir.string() << "\n";
    return kExitOk;
  });
}

// ---- train ------------------------------------------------------------------

std::string format_history(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,ce,lovasz,consistency,total,val_PQ,val_mIoU,lr,consistency_hard\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + format_real(r.loss.ce) + "," + format_real(r.loss.lovasz) + "," +
           format_real(r.loss.consistency) + "," + format_real(r.loss.total) + "," +
           (r.has_validation ? format_real(r.val_pq) : "") + "," + (r.has_validation ? format_real(r.val_miou) : "") +
           "," + format_real(r.lr) + "," + format_real(r.consistency_hard) + "\n";
  }
  return out;
}

int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto t0 = Clock::now();
    auto kv = load_config(opt.common);
    auto net_cfg = NetworkConfig::from_keyvalue(kv);
    if (opt.d1) net_cfg.d1 = *opt.d1;
    if (opt.d2) net_cfg.d2 = *opt.d2;
    if (opt.common.seed) net_cfg.seed = *opt.common.seed;
    apply_network_overrides(net_cfg, opt.common);

    auto train_cfg = TrainConfig::from_keyvalue(kv);
    if (opt.epochs) train_cfg.epochs = *opt.epochs;
    if (opt.batch_size) train_cfg.batch_size = *opt.batch_size;
    if (opt.lr) train_cfg.lr = *opt.lr;
    if (opt.lr_drop_epoch) train_cfg.lr_drop_epoch = *opt.lr_drop_epoch;
    if (opt.common.seed) train_cfg.seed = *opt.common.seed;
    // A shortened run keeps the drop inside the schedule.
    if (!opt.lr_drop_epoch && train_cfg.lr_drop_epoch >= train_cfg.epochs) {
      train_cfg.lr_drop_epoch = std::max(0, train_cfg.epochs * 3 / 4);
    }
    train_cfg.workers = opt.common.workers;
    train_cfg.validate();

    auto aug = AugmentConfig::from_keyvalue(kv);
    if (opt.p_instance) aug.p_instance = *opt.p_instance;
    if (opt.p_scan) aug.p_scan = *opt.p_scan;
    if (opt.clutter_source) aug.clutter_source = parse_clutter_source(*opt.clutter_source);
    if (opt.common.seed) aug.seed = *opt.common.seed;
    aug.validate();
    const RefineMode mode = refine_mode_or(opt.refine_mode, RefineMode::Split);

    const auto scans = load_dataset(opt.data_dir / "scans.txt");
    std::vector<RadarScan> val_scans;
    std::vector<MovingPrediction> val_preds;
    ValidationSplit val;
    if (opt.val_dir) {
      val_scans = load_dataset(*opt.val_dir / "scans.txt");
      val_preds = load_predictions(*opt.val_dir / "pred.txt");
      check_aligned(val_scans, val_preds);
      val = {&val_scans, &val_preds, mode};
    }

    fs::create_directories(opt.out_dir);
    write_text(opt.out_dir / "network.cfg", net_cfg.to_text());
    RefinerNet net(net_cfg);
    std::vector<EpochRecord> history;
    const auto history_path = opt.out_dir / "history.csv";
    auto on_epoch = [&](const EpochRecord& rec, RefinerNet& model) {
      history.push_back(rec);
      write_text(history_path, format_history(history));
      if (opt.checkpoint_every > 0 && (rec.epoch % opt.checkpoint_every == 0 || rec.epoch == train_cfg.epochs)) {
        std::ostringstream name;
        name << "ckpt_epoch" << std::setw(2) << std::setfill('0') << rec.epoch << ".txt";
        nn::save_checkpoint(model.params(), opt.out_dir / name.str());
      }
      out << "epoch " << rec.epoch << " total " << format_real(rec.loss.total);
      if (rec.has_validation) out << " val_PQ " << format_real(rec.val_pq);
      out << " lr " << format_real(rec.lr) << "\n" << std::flush;
    };
    train(net, scans, train_cfg, aug, opt.val_dir ? &val : nullptr, on_epoch);
    nn::save_checkpoint(net.params(), opt.out_dir / "model.ckpt");

    write_manifest(opt.out_dir,
                   {{"command", "train"},
                    {"config", config_json(kv)},
                    {"network", net_cfg.to_text()},
                    {"train", {{"epochs", train_cfg.epochs}, {"batch_size", train_cfg.batch_size},
                               {"lr", train_cfg.lr}, {"lr_drop_epoch", train_cfg.lr_drop_epoch},
                               {"lr_drop_factor", train_cfg.lr_drop_factor}, {"weight_decay", train_cfg.weight_decay},
                               {"seed", train_cfg.seed}}},
                    {"augment", {{"p_instance", aug.p_instance}, {"p_scan", aug.p_scan},
                                 {"boundary_sigma", aug.boundary_sigma}, {"clutter_min", aug.clutter_min},
                                 {"clutter_max", aug.clutter_max}, {"clutter_spread", aug.clutter_spread},
                                 {"clutter_source", to_string(aug.clutter_source)}, {"seed", aug.seed}}},
                    {"refine_mode", to_string(mode)},
                    {"workers", opt.common.workers},
                    {"inputs", {(opt.data_dir / "scans.txt").string(),
                                opt.val_dir ? (*opt.val_dir / "scans.txt").string() : std::string()}},
                    {"outputs", {history_path.string(), (opt.out_dir / "model.ckpt").string()}},
                    {"seconds", seconds_since(t0)}});
    return kExitOk;
  });
}

// ---- eval / refine ----------------------------------------------------------

int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto t0 = Clock::now();
    const auto scans = load_dataset(opt.data_dir / "scans.txt");
    const auto pred_file = pred_path(opt.data_dir, opt.pred);
    const auto backbone = load_predictions(pred_file);
    check_aligned(scans, backbone);

    EvalResult result;
    std::string source = "surrogate";
    RefineMode mode = refine_mode_or(opt.refine_mode, RefineMode::Split);
    if (opt.checkpoint) {
      source = "checkpoint";
      auto net = load_network(*opt.checkpoint, opt.network_config, opt.common);
      // Without refinement each backbone instance keeps its grouping and takes a class vote.
      if (!opt.refine) mode = RefineMode::Majority;
      result = evaluate_network(net, scans, backbone, mode, opt.common.workers);
    } else {
      result = evaluate_majority_true(scans, backbone, opt.common.workers);
    }

    const auto report = format_report(result.stats);
    out << report;
    if (opt.out_dir) {
      write_text(*opt.out_dir / "metrics.txt", report);
      write_text(*opt.out_dir / "metrics.csv", format_metrics_csv(result.stats));
      save_panoptic(result.predictions, *opt.out_dir / "panoptic.txt");
      const auto pq = panoptic_quality(result.stats);
      write_manifest(*opt.out_dir, {{"command", "eval"},
                                    {"source", source},
                                    {"refine", opt.refine},
                                    {"refine_mode", to_string(mode)},
                                    {"inputs", {(opt.data_dir / "scans.txt").string(), pred_file.string(),
                                                opt.checkpoint ? opt.checkpoint->string() : std::string()}},
                                    {"pq", pq.mean},
                                    {"pq_things", pq.mean_things},
                                    {"miou", mean_iou(result.stats).mean},
                                    {"workers", opt.common.workers},
                                    {"seconds", seconds_since(t0)}});
    }
    return kExitOk;
  });
}

int cmd_refine(const RefineOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto scans = load_dataset(opt.data_dir / "scans.txt");
    const auto backbone = load_predictions(pred_path(opt.data_dir, opt.pred));
    check_aligned(scans, backbone);
    auto net = load_network(opt.checkpoint, opt.network_config, opt.common);
    const auto mode = refine_mode_or(opt.refine_mode, RefineMode::Split);
    const auto result = evaluate_network(net, scans, backbone, mode, opt.common.workers);
    if (opt.out.has_parent_path()) fs::create_directories(opt.out.parent_path());
    save_panoptic(result.predictions, opt.out);
    out << "refined " << result.predictions.size() << " scans (" << to_string(mode) << ") -> " << opt.out.string()
        << "\n";
    return kExitOk;
  });
}

// ---- gradcheck --------------------------------------------------------------

namespace {

struct ToyProblem {
  PointBatch batch;
  std::vector<int> targets;
  std::vector<InstanceId> ids;
};

ToyProblem toy_problem(std::size_t n, std::uint64_t seed) {
  Rng rng = derive_rng(seed, 0x70f);
  ToyProblem t;
  nn::Tensor coords({n, 2}), feats({n, 5});
  for (std::size_t i = 0; i < n; ++i) {
    const double x = uniform(rng, 0.0, 8.0), y = uniform(rng, 0.0, 8.0);
    coords.at(i, 0) = x;
    coords.at(i, 1) = y;
    feats.at(i, 0) = x;
    feats.at(i, 1) = y;
    feats.at(i, 2) = 0.0;
    feats.at(i, 3) = normal(rng, 0.0, 5.0);
    feats.at(i, 4) = normal(rng, 0.0, 4.0);
    t.targets.push_back(uniform_int(rng, 0, kNumClasses - 1));
    t.ids.push_back(static_cast<InstanceId>(uniform_int(rng, 0, 4)));
  }
  t.batch = PointBatch::single(std::move(coords), std::move(feats));
  return t;
}

}  // namespace

int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto t0 = Clock::now();
    auto kv = load_config(opt.common);
    auto cfg = NetworkConfig::from_keyvalue(kv);
    if (!opt.common.config) {
      cfg.d1 = 8;
      cfg.d2 = 16;
    }
    if (opt.d1) cfg.d1 = *opt.d1;
    if (opt.d2) cfg.d2 = *opt.d2;
    if (opt.common.seed) cfg.seed = *opt.common.seed;
    apply_network_overrides(cfg, opt.common);
    RefinerNet net(cfg);
    // Check at a generic point. With every beta at its initial zero, a
    // symmetric neighborhood puts all self-edge ReLU inputs on the kink.
    Rng jitter = derive_rng(cfg.seed, 0x91);
    for (nn::Param* p : net.params().trainable()) {
      if (p->name.ends_with(".beta")) {
        for (auto& v : p->value.values()) v = uniform(jitter, -0.3, 0.3);
      } else if (p->name.ends_with(".gamma")) {
        for (auto& v : p->value.values()) v = uniform(jitter, 0.5, 1.5);
      }
    }
    const auto toy = toy_problem(opt.points, cfg.seed);
    const auto nb = net.neighborhood(toy.batch);

    // Populate the running statistics from batch statistics, then check in
    // inference mode where every normalization is a smooth affine map.
    for (int k = 0; k < 60; ++k) {
      nn::Graph g;
      net.forward(g, toy.batch, nb, nn::Mode::Training);
    }

    using Pick = nn::Var (*)(const LossTerms&);
    const std::vector<std::pair<std::string, Pick>> components = {
        {"total", [](const LossTerms& t) { return t.total; }},
        {"cross_entropy", [](const LossTerms& t) { return t.ce; }},
        {"lovasz", [](const LossTerms& t) { return t.lovasz; }},
        {"consistency", [](const LossTerms& t) { return t.consistency; }},
    };
    auto params = net.params().trainable();
    std::ostringstream report;
    report << std::scientific << std::setprecision(3);
    double worst = 0.0;
    for (const auto& [name, pick] : components) {
      auto builder = [&, pick = pick](nn::Graph& g) {
        auto logits = net.forward(g, toy.batch, nb, nn::Mode::Inference);
        return pick(combined_loss(logits, toy.targets, toy.ids));
      };
      const auto r = nn::gradient_check(builder, params, opt.step);
      report << "component " << name << " max_rel_err " << r.max_relative_error << " roundoff " << r.roundoff()
             << " beyond_roundoff " << r.unexplained(opt.tolerance) << "\n";
      if (name == "total") {
        for (const auto& p : r.params) {
          report << "  param " << std::left << std::setw(32) << p.name << " entries " << std::setw(6) << p.entries
                 << " max_rel_err " << p.max_relative_error << "\n";
        }
      }
      worst = std::max(worst, r.max_relative_error);
    }
    const bool ok = worst < opt.tolerance;
    report << "max_rel_err " << worst << " tolerance " << opt.tolerance << (ok ? " PASS" : " FAIL") << "\n";
    report << std::fixed << std::setprecision(2) << "seconds " << seconds_since(t0) << "\n";
    out << report.str();
    if (opt.out) write_text(*opt.out, report.str());
    return ok ? kExitOk : kExitNumerical;
  });
}

// ---- bench ------------------------------------------------------------------

BenchStats summarize_latencies(std::vector<double> ms) {
  BenchStats s;
  s.samples = ms.size();
  if (ms.empty()) return s;
  std::sort(ms.begin(), ms.end());
  double sum = 0.0;
  for (double v : ms) sum += v;
  s.mean_ms = sum / static_cast<double>(ms.size());
  const std::size_t n = ms.size();
  s.median_ms = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  s.p95_ms = ms[std::min(n, std::max<std::size_t>(rank, 1)) - 1];
  return s;
}

RadarScan bench_scene(std::size_t points, std::uint64_t seed, const std::string& scan_id) {
  auto cfg = SceneConfig::defaults();
  cfg.instances_min = 5;
  cfg.instances_max = 7;
  cfg.static_min = cfg.static_max = static_cast<int>(points);
  auto scan = generate_scene(cfg, seed, scan_id);
  // Trim static points from the back until the size matches.
  for (std::size_t i = scan.size(); i-- > 0 && scan.size() > points;) {
    if (is_thing(scan.gt[i].semantic)) continue;
    scan.points.erase(scan.points.begin() + static_cast<std::ptrdiff_t>(i));
    scan.gt.erase(scan.gt.begin() + static_cast<std::ptrdiff_t>(i));
  }
  if (scan.size() != points) throw DataError("bench_scene: cannot reach the requested point count");
  return scan;
}

int cmd_bench(const BenchOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::optional<RefinerNet> net;
    if (opt.checkpoint) {
      net.emplace(load_network(*opt.checkpoint, opt.network_config, opt.common));
    } else {
      auto cfg = opt.common.config ? NetworkConfig::from_keyvalue(load_config(opt.common)) : NetworkConfig{};
      if (opt.d1) cfg.d1 = *opt.d1;
      if (opt.d2) cfg.d2 = *opt.d2;
      if (opt.common.seed) cfg.seed = *opt.common.seed;
      apply_network_overrides(cfg, opt.common);
      net.emplace(cfg);
    }
    const auto mode = refine_mode_or(opt.refine_mode, RefineMode::Split);
    const std::uint64_t seed = opt.common.seed.value_or(1);

    std::vector<RadarScan> scans;
    std::vector<MovingPrediction> backbone;
    if (opt.data_dir) {
      scans = load_dataset(*opt.data_dir / "scans.txt");
      backbone = load_predictions(*opt.data_dir / "pred.txt");
      check_aligned(scans, backbone);
    } else {
      scans.resize(opt.scans);
      backbone.resize(opt.scans);
      SurrogateConfig sur;
      parallel_for(opt.scans, opt.common.workers, [&](std::size_t s) {
        scans[s] = bench_scene(opt.scan_points, derive_rng(seed, s, 0xbe7c)(), "bench" + std::to_string(s));
        backbone[s] = surrogate_backbone(scans[s], sur, seed);
      });
    }
    if (scans.empty()) throw DataError("bench: no scans");

    for (std::size_t k = 0; k < opt.warmup; ++k) predict_scan(*net, scans[k % scans.size()], backbone[k % scans.size()], mode);

    std::vector<double> latencies;
    std::size_t moving = 0;
    for (std::size_t rep = 0; rep < opt.repetitions; ++rep) {
      for (std::size_t s = 0; s < scans.size(); ++s) {
        const auto t0 = Clock::now();
        const auto pred = predict_scan(*net, scans[s], backbone[s], mode);
        latencies.push_back(1e3 * seconds_since(t0));
        if (rep == 0) {
          for (auto m : backbone[s].moving) moving += m;
        }
      }
    }
    const auto st = summarize_latencies(latencies);

    // Ball query: grid index against the quadratic reference on one point set.
    Rng rng = derive_rng(seed, 0xba11);
    const std::size_t nq = opt.ball_query_points;
    nn::Tensor coords({nq, 2});
    for (std::size_t i = 0; i < nq; ++i) {
      const double r = std::sqrt(uniform(rng, 9.0, 3600.0));
      const double a = uniform(rng, -std::numbers::pi / 3, std::numbers::pi / 3);
      coords.at(i, 0) = r * std::cos(a);
      coords.at(i, 1) = r * std::sin(a);
    }
    const auto& cfg = net->config();
    auto time_it = [&](auto&& fn) {
      std::vector<double> runs;
      for (int k = 0; k < 5; ++k) {
        const auto t0 = Clock::now();
        fn();
        runs.push_back(1e3 * seconds_since(t0));
      }
      std::sort(runs.begin(), runs.end());
      return runs[runs.size() / 2];
    };
    Neighborhood grid_nb, ref_nb;
    const double grid_ms = time_it([&] { grid_nb = ball_query(coords, cfg.radius, cfg.nmax); });
    const double ref_ms = time_it([&] { ref_nb = ball_query_reference(coords, cfg.radius, cfg.nmax); });
    if (!(grid_nb == ref_nb)) throw NumericalError("bench: grid ball query disagrees with the reference");

    std::ostringstream report;
    report << std::fixed << std::setprecision(3);
    report << "config d1=" << cfg.d1 << " d2=" << cfg.d2 << " radius=" << cfg.radius << " nmax=" << cfg.nmax
           << " refine=" << to_string(mode) << "\n";
    report << "scans " << scans.size() << " repetitions " << opt.repetitions << " warmup " << opt.warmup
           << " mean_moving_points " << static_cast<double>(moving) / static_cast<double>(scans.size()) << "\n";
    report << "latency_ms samples " << st.samples << " mean " << st.mean_ms << " median " << st.median_ms << " p95 "
           << st.p95_ms << "\n";
    report << "ball_query n " << nq << " grid_ms " << grid_ms << " reference_ms " << ref_ms << " speedup "
           << ref_ms / grid_ms << "\n";
    out << report.str();
    if (opt.out) {
      write_text(*opt.out / "bench.txt", report.str());
      write_manifest(*opt.out, {{"command", "bench"},
                                {"network", cfg.to_text()},
                                {"scans", scans.size()},
                                {"scan_points", opt.data_dir ? 0 : opt.scan_points},
                                {"repetitions", opt.repetitions},
                                {"warmup", opt.warmup},
                                {"mean_ms", st.mean_ms},
                                {"median_ms", st.median_ms},
                                {"p95_ms", st.p95_ms},
                                {"ball_query_speedup", ref_ms / grid_ms},
                                {"seed", seed}});
    }
    return kExitOk;
  });
}

}  // namespace radfiner
