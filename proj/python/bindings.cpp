#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "radfiner/error.hpp"
#include "radfiner/metrics.hpp"
#include "radfiner/neighborhood.hpp"
#include "radfiner/refine.hpp"
#include "radfiner/synth.hpp"

namespace py = pybind11;
using namespace radfiner;

namespace {

using Doubles = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Ints = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;

nn::Tensor coords_tensor(const Doubles& coords) {
  if (coords.ndim() != 2 || coords.shape(1) != 2) throw DataError("coords must have shape (N, 2)");
  const auto n = static_cast<std::size_t>(coords.shape(0));
  return nn::Tensor({n, 2}, std::vector<double>(coords.data(), coords.data() + 2 * n));
}

std::vector<std::size_t> offsets(const std::optional<Ints>& segments) {
  std::vector<std::size_t> out;
  if (!segments) return out;
  for (py::ssize_t k = 0; k < segments->size(); ++k) {
    if (segments->data()[k] < 0) throw DataError("segment offsets must be non-negative");
    out.push_back(static_cast<std::size_t>(segments->data()[k]));
  }
  return out;
}

py::tuple neighborhood_arrays(const Neighborhood& nb) {
  const auto n = static_cast<py::ssize_t>(nb.num_points), k = static_cast<py::ssize_t>(nb.max_neighbors);
  py::array_t<std::int64_t> indices({n, k});
  py::array_t<bool> valid({n, k});
  py::array_t<double> rel({n, k, py::ssize_t{2}});
  for (std::size_t s = 0; s < nb.indices.size(); ++s) {
    indices.mutable_data()[s] = static_cast<std::int64_t>(nb.indices[s]);
    valid.mutable_data()[s] = nb.valid[s] != 0;
  }
  std::copy(nb.rel_pos.begin(), nb.rel_pos.end(), rel.mutable_data());
  return py::make_tuple(indices, valid, rel);
}

std::vector<InstanceId> to_ids(const Ints& a) {
  std::vector<InstanceId> out(static_cast<std::size_t>(a.size()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (a.data()[i] < 0) throw DataError("instance ids must be non-negative");
    out[i] = static_cast<InstanceId>(a.data()[i]);
  }
  return out;
}

std::vector<SemanticClass> to_classes(const Ints& a) {
  std::vector<SemanticClass> out;
  out.reserve(static_cast<std::size_t>(a.size()));
  for (py::ssize_t i = 0; i < a.size(); ++i) out.push_back(class_from_code(static_cast<int>(a.data()[i])));
  return out;
}

PanopticPrediction panoptic(const Ints& ids, const Ints& classes) {
  PanopticPrediction p;
  p.scan_id = "python";
  p.instance_id = to_ids(ids);
  p.semantic = to_classes(classes);
  return p;
}

template <typename T>
py::array_t<std::int64_t> int_array(const std::vector<T>& v) {
  py::array_t<std::int64_t> out(static_cast<py::ssize_t>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if constexpr (std::is_same_v<T, SemanticClass>) {
      out.mutable_data()[i] = code(v[i]);
    } else {
      out.mutable_data()[i] = static_cast<std::int64_t>(v[i]);
    }
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_radfiner, m) {
  m.doc() = "Bindings for the radfiner core library";
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

  py::list names;
  for (auto c : kAllClasses) names.append(std::string(class_name(c)));
  m.attr("CLASS_NAMES") = names;

  m.def(
      "ball_query",
      [](const Doubles& coords, double radius, std::size_t max_neighbors, std::optional<Ints> segments) {
        const auto seg = offsets(segments);
        return neighborhood_arrays(ball_query(coords_tensor(coords), radius, max_neighbors, seg));
      },
      py::arg("coords"), py::arg("radius"), py::arg("max_neighbors"), py::arg("segments") = py::none(),
      "Grid ball query. Returns (indices, valid, rel_pos) with slot 0 holding the anchor itself.");
  m.def(
      "ball_query_reference",
      [](const Doubles& coords, double radius, std::size_t max_neighbors, std::optional<Ints> segments) {
        const auto seg = offsets(segments);
        return neighborhood_arrays(ball_query_reference(coords_tensor(coords), radius, max_neighbors, seg));
      },
      py::arg("coords"), py::arg("radius"), py::arg("max_neighbors"), py::arg("segments") = py::none());

  m.def(
      "refine_instances",
      [](const Ints& ids, const Ints& classes, const std::string& mode) {
        if (ids.size() != classes.size()) throw DataError("ids and classes differ in length");
        const auto r = refine_instances(to_ids(ids), to_classes(classes), parse_refine_mode(mode));
        return py::make_tuple(int_array(r.instance_id), int_array(r.semantic));
      },
      py::arg("instance_ids"), py::arg("classes"), py::arg("mode") = "split",
      "Splits (or relabels, mode='majority') instances so each carries one class.");

  m.def(
      "panoptic_quality",
      [](const Ints& gt_ids, const Ints& gt_classes, const Ints& pred_ids, const Ints& pred_classes) {
        const auto stats = scan_stats(panoptic(gt_ids, gt_classes), panoptic(pred_ids, pred_classes));
        const auto pq = panoptic_quality(stats);
        py::dict per_class;
        for (auto c : kAllClasses) {
          if (pq.present[code(c)]) per_class[py::str(std::string(class_name(c)))] = pq.pq[code(c)];
        }
        py::dict out;
        out["pq"] = pq.mean;
        out["pq_things"] = pq.mean_things;
        out["per_class"] = per_class;
        out["miou"] = mean_iou(stats).mean;
        return out;
      },
      py::arg("gt_ids"), py::arg("gt_classes"), py::arg("pred_ids"), py::arg("pred_classes"),
      "Single-scan panoptic quality; static counts as one segment per side.");

  m.def(
      "generate_scene",
      [](std::uint64_t seed) {
        const auto scan = generate_scene(SceneConfig::defaults(), seed, "scene");
        const auto n = static_cast<py::ssize_t>(scan.size());
        py::array_t<double> points({n, py::ssize_t{4}});
        std::vector<InstanceId> ids;
        std::vector<SemanticClass> classes;
        for (std::size_t i = 0; i < scan.size(); ++i) {
          const auto& p = scan.points[i];
          double* row = points.mutable_data() + 4 * i;
          row[0] = p.x;
          row[1] = p.y;
          row[2] = p.rcs;
          row[3] = p.doppler;
          ids.push_back(scan.gt[i].instance_id);
          classes.push_back(scan.gt[i].semantic);
        }
        py::dict out;
        out["points"] = points;  // x, y, rcs, doppler
        out["instance_id"] = int_array(ids);
        out["semantic"] = int_array(classes);
        return out;
      },
      py::arg("seed"), "One synthetic scene with the default scene config.");
}
