#include <doctest.h>

#include <map>
#include <set>

#include "radfiner/error.hpp"
#include "radfiner/metrics.hpp"
#include "radfiner/refine.hpp"
#include "radfiner/synth.hpp"
#include "support.hpp"

using namespace radfiner;

namespace {

using C = SemanticClass;

struct Fuzz {
  std::vector<InstanceId> ids;
  std::vector<SemanticClass> classes;
};

Fuzz fuzz_input(std::uint64_t seed) {
  Rng rng = derive_rng(seed, 0xf022);
  const auto n = static_cast<std::size_t>(uniform_int(rng, 0, 60));
  const int max_id = uniform_int(rng, 0, 8);
  Fuzz f;
  for (std::size_t i = 0; i < n; ++i) {
    f.ids.push_back(static_cast<InstanceId>(uniform_int(rng, 0, max_id)) * 3);  // sparse id values
    f.classes.push_back(class_from_code(uniform_int(rng, 0, 5)));
  }
  return f;
}

PanopticPrediction as_panoptic(const RefinedInstances& r) { return {"fuzz", r.semantic, r.instance_id}; }

}  // namespace

TEST_CASE("split refinement examples") {
  auto r = refine_instances(std::vector<InstanceId>{1, 1, 1}, std::vector<C>{C::Car, C::Car, C::Truck});
  CHECK(r.instance_id == std::vector<InstanceId>{1, 1, 2});
  CHECK(r.semantic == std::vector<C>{C::Car, C::Car, C::Truck});

  r = refine_instances(std::vector<InstanceId>{1, 1}, std::vector<C>{C::Car, C::Car});
  CHECK(r.instance_id == std::vector<InstanceId>{1, 1});

  r = refine_instances(std::vector<InstanceId>{1, 1}, std::vector<C>{C::Static, C::Car});
  CHECK(r.instance_id == std::vector<InstanceId>{0, 1});
  CHECK(r.semantic[0] == C::Static);

  // fresh ids follow (original id, class code) order
  r = refine_instances(std::vector<InstanceId>{9, 4, 9, 4, 0},
                       std::vector<C>{C::Bike, C::Truck, C::Car, C::Car, C::Pedestrian});
  // groups: (0,ped)=1, (4,car)=2, (4,truck)=3, (9,car)=4, (9,bike)=5
  CHECK(r.instance_id == std::vector<InstanceId>{5, 3, 4, 2, 1});
}

TEST_CASE("majority refinement") {
  auto r = refine_instances(std::vector<InstanceId>{1, 1, 1, 2, 2}, std::vector<C>{C::Car, C::Truck, C::Car, C::Bike, C::Static},
                            RefineMode::Majority);
  CHECK(r.semantic == std::vector<C>{C::Car, C::Car, C::Car, C::Static, C::Static});
  CHECK(r.instance_id == std::vector<InstanceId>{1, 1, 1, 0, 0});
  r = refine_instances(std::vector<InstanceId>{5, 5, 5}, std::vector<C>{C::Static, C::Static, C::Car}, RefineMode::Majority);
  CHECK(r.instance_id == std::vector<InstanceId>{0, 0, 0});
  CHECK(parse_refine_mode("majority") == RefineMode::Majority);
  CHECK_THROWS_AS(parse_refine_mode("vote"), DataError);
}

TEST_CASE("empty input") {
  const auto r = refine_instances({}, {});
  CHECK(r.instance_id.empty());
  CHECK(r.semantic.empty());
  CHECK(refinement_is_idempotent(PanopticPrediction{"e", {}, {}}));
}

TEST_CASE("assembly") {
  RadarScan scan;
  scan.scan_id = "a";
  scan.points = {{0, 5, 0, 1, 0}, {1, 5, 0, 1, 4}, {1.5, 5, 0, 1, 4}, {30, 5, 0, 1, 0}};
  scan.gt = {{C::Static, 0}, {C::Car, 1}, {C::Car, 1}, {C::Static, 0}};

  SUBCASE("all static backbone") {
    const MovingPrediction mp{"a", {0, 0, 0, 0}, {0, 0, 0, 0}};
    const auto sel = select_moving(scan, mp);
    const auto out = assemble_panoptic(scan, mp, refine_instances({}, {}), sel.index_map);
    CHECK(out.semantic == std::vector<C>(4, C::Static));
    CHECK(out.instance_id == std::vector<InstanceId>(4, 0));
  }
  SUBCASE("a pure car the classifier agrees with") {
    const MovingPrediction mp{"a", {0, 1, 1, 0}, {0, 7, 7, 0}};
    const auto sel = select_moving(scan, mp);
    const auto out = assemble_panoptic(
        scan, mp, refine_instances(std::vector<InstanceId>{7, 7}, std::vector<C>{C::Car, C::Car}), sel.index_map);
    CHECK(out.semantic == std::vector<C>{C::Static, C::Car, C::Car, C::Static});
    CHECK(out.instance_id[1] == out.instance_id[2]);
    CHECK(out.instance_id[1] != 0);
  }
  SUBCASE("bad index map") {
    const MovingPrediction mp{"a", {0, 1, 1, 0}, {0, 7, 7, 0}};
    const std::vector<std::size_t> bad{1, 9};
    CHECK_THROWS(assemble_panoptic(
        scan, mp, refine_instances(std::vector<InstanceId>{7, 7}, std::vector<C>{C::Car, C::Car}), bad));
  }
}

TEST_CASE("a merged car and truck come apart again") {
  auto cfg = SceneConfig::defaults();
  cfg.class_weights = {0, 1, 0, 0, 0, 1};
  cfg.instances_min = cfg.instances_max = 2;
  cfg.adjacent_probability = 1.0;
  SurrogateConfig sc;
  sc.eps_boundary = sc.eps_clutter = sc.eps_miss = 0.0;
  sc.eps_merge = 1.0;
  sc.merge_gap = 100.0;
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 5 && seed < 200; ++seed) {
    const auto scan = generate_scene(cfg, seed, "merge");
    std::set<C> kinds;
    for (const auto& l : scan.gt)
      if (is_thing(l.semantic)) kinds.insert(l.semantic);
    if (kinds.size() != 2) continue;
    SurrogateStats st;
    const auto mp = surrogate_backbone(scan, sc, seed, &st);
    REQUIRE(st.merges == 1);
    std::set<InstanceId> merged;
    for (std::size_t i = 0; i < mp.size(); ++i)
      if (mp.moving[i]) merged.insert(mp.instance_id[i]);
    CHECK(merged.size() == 1);

    const auto sel = select_moving(scan, mp);
    std::vector<InstanceId> ids;
    std::vector<C> classes;
    for (auto i : sel.index_map) {
      ids.push_back(mp.instance_id[i]);
      classes.push_back(scan.gt[i].semantic);
    }
    const auto out = assemble_panoptic(scan, mp, refine_instances(ids, classes), sel.index_map);
    std::set<InstanceId> refined;
    for (auto id : out.instance_id)
      if (id) refined.insert(id);
    CHECK(refined.size() == 2);
    CHECK(panoptic_quality(scan_stats(ground_truth_panoptic(scan), out)).mean == 1.0);
    ++checked;
  }
  CHECK(checked == 5);
}

TEST_CASE("refinement properties on 1000 fuzzed inputs") {
  for (auto mode : {RefineMode::Split, RefineMode::Majority}) {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const auto f = fuzz_input(seed);
      const auto r = refine_instances(f.ids, f.classes, mode);
      // conservation
      REQUIRE(r.instance_id.size() == f.ids.size());
      REQUIRE(r.semantic.size() == f.ids.size());
      std::map<InstanceId, std::set<C>> classes_of;
      std::map<InstanceId, std::set<InstanceId>> origins_of;
      for (std::size_t i = 0; i < f.ids.size(); ++i) {
        CHECK((r.instance_id[i] == 0) == (r.semantic[i] == C::Static));
        if (r.instance_id[i] == 0) continue;
        classes_of[r.instance_id[i]].insert(r.semantic[i]);
        origins_of[r.instance_id[i]].insert(f.ids[i]);
        if (mode == RefineMode::Split) CHECK(r.semantic[i] == f.classes[i]);
      }
      for (const auto& [id, set] : classes_of) CHECK(set.size() == 1);  // purity
      for (const auto& [id, set] : origins_of) CHECK(set.size() == 1);  // no merges
      const auto p = as_panoptic(r);
      CHECK(refinement_is_idempotent(p, mode));
      CHECK(refine_panoptic(p, mode) == p);
    }
  }
}

TEST_CASE("split group count") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto f = fuzz_input(seed);
    std::set<std::pair<InstanceId, int>> groups;
    for (std::size_t i = 0; i < f.ids.size(); ++i)
      if (f.classes[i] != C::Static) groups.insert({f.ids[i], code(f.classes[i])});
    const auto r = refine_instances(f.ids, f.classes);
    std::set<InstanceId> ids(r.instance_id.begin(), r.instance_id.end());
    ids.erase(0);
    CHECK(ids.size() == groups.size());
    if (!ids.empty()) {
      CHECK(*ids.begin() == 1);
      CHECK(*ids.rbegin() == groups.size());
    }
  }
}

TEST_CASE("pure predictions only get their instances renamed") {
  const auto scans = generate_corpus(SceneConfig::defaults(), 30, 21, "g");
  for (const auto& s : scans) {
    const auto mp = surrogate_backbone(s, SurrogateConfig{}, 3);
    for (const auto& base : {majority_true_panoptic(s, mp), ground_truth_panoptic(s)}) {
      validate(base);
      const auto once = refine_panoptic(base);
      CHECK(once.semantic == base.semantic);
      std::map<InstanceId, InstanceId> forward, backward;
      for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(forward.emplace(base.instance_id[i], once.instance_id[i]).first->second == once.instance_id[i]);
        CHECK(backward.emplace(once.instance_id[i], base.instance_id[i]).first->second == base.instance_id[i]);
      }
      CHECK(refinement_is_idempotent(once));
    }
  }
}

TEST_CASE("majority-true baseline") {
  RadarScan scan;
  scan.scan_id = "b";
  scan.points.assign(6, RadarPoint{});
  for (std::size_t i = 0; i < 6; ++i) scan.points[i].x = static_cast<double>(i);
  scan.gt = {{C::Car, 1}, {C::Car, 1}, {C::Truck, 2}, {C::Static, 0}, {C::Static, 0}, {C::Bike, 3}};
  // instance 4 merges car and truck, instance 5 is pure clutter, point 5 is a moving point without an id
  const MovingPrediction mp{"b", {1, 1, 1, 1, 0, 1}, {4, 4, 4, 5, 0, 0}};
  const auto out = majority_true_panoptic(scan, mp);
  CHECK(out.semantic == std::vector<C>{C::Car, C::Car, C::Car, C::Static, C::Static, C::Bike});
  CHECK(out.instance_id[0] == out.instance_id[2]);
  CHECK(out.instance_id[3] == 0);
  CHECK(out.instance_id[5] != 0);
  CHECK(out.instance_id[5] != out.instance_id[0]);
}
