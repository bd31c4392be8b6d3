#include "radfiner/scan.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "radfiner/error.hpp"

namespace radfiner {

namespace {

constexpr std::string_view kScanHeader = "#radfiner-scans v1";
constexpr std::string_view kPredHeader = "#radfiner-pred v1";

constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "static", "car", "pedestrian", "pedestrian-group", "bike", "truck"};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

// Splits a text buffer into lines and tracks the current line number for
// error messages.
class LineReader {
 public:
  LineReader(std::string_view text, std::string_view origin) : text_(text), origin_(origin) {}

  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    auto end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    line = text_.substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    ++lineno_;
    return true;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(std::string(origin_) + ":" + std::to_string(lineno_) + ": " + msg);
  }

  int lineno() const { return lineno_; }

 private:
  std::string_view text_;
  std::string_view origin_;
  std::size_t pos_ = 0;
  int lineno_ = 0;
};

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_real(const LineReader& rd, std::string_view tok, std::string_view field) {
  double v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    rd.fail("field '" + std::string(field) + "': not a number: '" + std::string(tok) + "'");
  }
  if (!std::isfinite(v)) rd.fail("field '" + std::string(field) + "': not finite");
  return v;
}

std::uint64_t parse_uint(const LineReader& rd, std::string_view tok, std::string_view field) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    rd.fail("field '" + std::string(field) + "': not a non-negative integer: '" + std::string(tok) + "'");
  }
  return v;
}

struct BlockHeader {
  std::string scan_id;
  std::size_t count = 0;
};

BlockHeader parse_block_header(const LineReader& rd, std::string_view line) {
  auto tok = split_ws(line);
  if (tok.size() != 3 || tok[0] != "scan") rd.fail("field 'scan': expected 'scan <scan_id> <N>'");
  return {std::string(tok[1]), static_cast<std::size_t>(parse_uint(rd, tok[2], "N"))};
}

void expect_header(LineReader& rd, std::string_view expected) {
  std::string_view line;
  if (!rd.next(line) || line != expected) rd.fail("field 'header': expected '" + std::string(expected) + "'");
}

void check_unique(std::unordered_set<std::string>& seen, const std::string& id, const LineReader& rd) {
  if (!seen.insert(id).second) rd.fail("duplicate scan_id '" + id + "'");
}

InstanceId to_instance(const LineReader& rd, std::uint64_t v) {
  if (v > std::numeric_limits<InstanceId>::max()) rd.fail("field 'instance_id': out of range");
  return static_cast<InstanceId>(v);
}

SemanticClass parse_class(const LineReader& rd, std::string_view tok) {
  auto v = parse_uint(rd, tok, "sem_code");
  if (v >= kNumClasses) rd.fail("field 'sem_code': code out of range: " + std::string(tok));
  return static_cast<SemanticClass>(v);
}

void check_panoptic_purity(const std::string& scan_id, const std::vector<SemanticClass>& sem,
                           const std::vector<InstanceId>& ids, std::string_view what) {
  std::map<InstanceId, SemanticClass> owner;
  for (std::size_t i = 0; i < sem.size(); ++i) {
    const bool is_static = sem[i] == SemanticClass::Static;
    if (is_static != (ids[i] == 0)) {
      throw DataError(std::string(what) + " scan '" + scan_id + "' point " + std::to_string(i) +
                      ": static class must coincide with instance id 0");
    }
    if (ids[i] == 0) continue;
    auto [it, inserted] = owner.emplace(ids[i], sem[i]);
    if (!inserted && it->second != sem[i]) {
      throw DataError(std::string(what) + " scan '" + scan_id + "' point " + std::to_string(i) +
                      ": instance " + std::to_string(ids[i]) + " mixes semantic classes");
    }
  }
}

}  // namespace

SemanticClass class_from_code(int c) {
  if (c < 0 || c >= kNumClasses) throw DataError("semantic code out of range: " + std::to_string(c));
  return static_cast<SemanticClass>(c);
}

std::string_view class_name(SemanticClass c) { return kClassNames.at(code(c)); }

std::string format_real(double v) {
  char buf[512];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
  if (ec != std::errc()) throw DataError("cannot format real value");
  return std::string(buf, p);
}

void validate(const RadarScan& scan) {
  const auto& id = scan.scan_id;
  if (id.empty() || id.find_first_of(" \t\n\r") != std::string::npos) {
    throw DataError("scan_id '" + id + "' is empty or contains whitespace");
  }
  if (scan.points.empty()) throw DataError("scan '" + id + "' has no points");
  if (scan.points.size() != scan.gt.size()) {
    throw DataError("scan '" + id + "': points and labels differ in length");
  }
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    const auto& p = scan.points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.rcs) || !std::isfinite(p.doppler)) {
      throw DataError("scan '" + id + "' point " + std::to_string(i) + ": non-finite value");
    }
    if (p.z != 0.0) throw DataError("scan '" + id + "' point " + std::to_string(i) + ": z must be 0");
  }
  std::vector<SemanticClass> sem;
  std::vector<InstanceId> ids;
  for (const auto& l : scan.gt) {
    sem.push_back(l.semantic);
    ids.push_back(l.instance_id);
  }
  check_panoptic_purity(id, sem, ids, "ground truth");
}

void validate(const MovingPrediction& pred) {
  if (pred.moving.size() != pred.instance_id.size()) {
    throw DataError("prediction '" + pred.scan_id + "': column lengths differ");
  }
  for (std::size_t i = 0; i < pred.moving.size(); ++i) {
    if (pred.moving[i] > 1) throw DataError("prediction '" + pred.scan_id + "' point " + std::to_string(i) + ": moving flag must be 0 or 1");
    if (!pred.moving[i] && pred.instance_id[i] != 0) {
      throw DataError("prediction '" + pred.scan_id + "' point " + std::to_string(i) +
                      ": static point carries instance id");
    }
  }
}

void validate(const PanopticPrediction& pred) {
  if (pred.semantic.size() != pred.instance_id.size()) {
    throw DataError("panoptic prediction '" + pred.scan_id + "': column lengths differ");
  }
  check_panoptic_purity(pred.scan_id, pred.semantic, pred.instance_id, "panoptic prediction");
}

PanopticPrediction ground_truth_panoptic(const RadarScan& scan) {
  PanopticPrediction out{scan.scan_id, {}, {}};
  out.semantic.reserve(scan.size());
  out.instance_id.reserve(scan.size());
  for (const auto& l : scan.gt) {
    out.semantic.push_back(l.semantic);
    out.instance_id.push_back(l.instance_id);
  }
  return out;
}

std::vector<RadarScan> parse_dataset(std::string_view text, std::string_view origin) {
  LineReader rd(text, origin);
  expect_header(rd, kScanHeader);
  std::vector<RadarScan> scans;
  std::unordered_set<std::string> seen;
  std::string_view line;
  while (rd.next(line)) {
    if (line.empty()) continue;
    auto hdr = parse_block_header(rd, line);
    check_unique(seen, hdr.scan_id, rd);
    RadarScan scan;
    scan.scan_id = hdr.scan_id;
    scan.points.reserve(hdr.count);
    scan.gt.reserve(hdr.count);
    for (std::size_t i = 0; i < hdr.count; ++i) {
      if (!rd.next(line)) rd.fail("unexpected end of file inside scan '" + hdr.scan_id + "'");
      auto tok = split_ws(line);
      if (tok.size() != 7) rd.fail("field 'point': expected 7 columns, found " + std::to_string(tok.size()));
      RadarPoint p{parse_real(rd, tok[0], "x"), parse_real(rd, tok[1], "y"), parse_real(rd, tok[2], "z"),
                   parse_real(rd, tok[3], "rcs"), parse_real(rd, tok[4], "doppler")};
      PanopticLabel l{parse_class(rd, tok[5]), to_instance(rd, parse_uint(rd, tok[6], "instance_id"))};
      scan.points.push_back(p);
      scan.gt.push_back(l);
    }
    validate(scan);
    scans.push_back(std::move(scan));
  }
  return scans;
}

std::string format_dataset(const std::vector<RadarScan>& scans) {
  std::string out(kScanHeader);
  out += '\n';
  for (const auto& scan : scans) {
    validate(scan);
    out += "scan " + scan.scan_id + " " + std::to_string(scan.size()) + "\n";
    for (std::size_t i = 0; i < scan.size(); ++i) {
      const auto& p = scan.points[i];
      const auto& l = scan.gt[i];
      out += format_real(p.x) + ' ' + format_real(p.y) + ' ' + format_real(p.z) + ' ' + format_real(p.rcs) + ' ' +
             format_real(p.doppler) + ' ' + std::to_string(code(l.semantic)) + ' ' +
             std::to_string(l.instance_id) + '\n';
    }
  }
  return out;
}

std::vector<RadarScan> load_dataset(const std::filesystem::path& path) {
  return parse_dataset(read_file(path), path.string());
}

void save_dataset(const std::vector<RadarScan>& scans, const std::filesystem::path& path) {
  write_file(path, format_dataset(scans));
}

namespace {

struct RawPrediction {
  std::string scan_id;
  std::vector<std::uint8_t> moving;
  std::vector<InstanceId> ids;
  std::vector<SemanticClass> sem;
  bool has_sem = false;
};

std::vector<RawPrediction> parse_raw_predictions(std::string_view text, std::string_view origin) {
  LineReader rd(text, origin);
  expect_header(rd, kPredHeader);
  std::vector<RawPrediction> out;
  std::unordered_set<std::string> seen;
  std::optional<bool> file_has_sem;
  std::string_view line;
  while (rd.next(line)) {
    if (line.empty()) continue;
    auto hdr = parse_block_header(rd, line);
    check_unique(seen, hdr.scan_id, rd);
    RawPrediction p;
    p.scan_id = hdr.scan_id;
    for (std::size_t i = 0; i < hdr.count; ++i) {
      if (!rd.next(line)) rd.fail("unexpected end of file inside scan '" + hdr.scan_id + "'");
      auto tok = split_ws(line);
      if (tok.size() != 2 && tok.size() != 3) rd.fail("field 'point': expected 2 or 3 columns");
      const bool has_sem = tok.size() == 3;
      if (file_has_sem && *file_has_sem != has_sem) rd.fail("field 'sem_code': inconsistent column count");
      file_has_sem = has_sem;
      auto mv = parse_uint(rd, tok[0], "moving");
      if (mv > 1) rd.fail("field 'moving': expected 0 or 1");
      p.moving.push_back(static_cast<std::uint8_t>(mv));
      p.ids.push_back(to_instance(rd, parse_uint(rd, tok[1], "instance_id")));
      if (has_sem) p.sem.push_back(parse_class(rd, tok[2]));
    }
    p.has_sem = file_has_sem.value_or(false);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

std::vector<MovingPrediction> parse_predictions(std::string_view text, std::string_view origin) {
  std::vector<MovingPrediction> out;
  for (auto& raw : parse_raw_predictions(text, origin)) {
    MovingPrediction p{raw.scan_id, std::move(raw.moving), std::move(raw.ids)};
    validate(p);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PanopticPrediction> parse_panoptic(std::string_view text, std::string_view origin) {
  std::vector<PanopticPrediction> out;
  for (auto& raw : parse_raw_predictions(text, origin)) {
    if (!raw.has_sem && !raw.moving.empty()) {
      throw DataError(std::string(origin) + ": scan '" + raw.scan_id + "' lacks the sem_code column");
    }
    PanopticPrediction p{raw.scan_id, std::move(raw.sem), std::move(raw.ids)};
    validate(p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (raw.moving[i] != (p.semantic[i] != SemanticClass::Static ? 1 : 0)) {
        throw DataError(std::string(origin) + ": scan '" + p.scan_id + "' point " + std::to_string(i) +
                        ": moving flag disagrees with sem_code");
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::string format_predictions(const std::vector<MovingPrediction>& preds) {
  std::string out(kPredHeader);
  out += '\n';
  for (const auto& p : preds) {
    validate(p);
    out += "scan " + p.scan_id + " " + std::to_string(p.size()) + "\n";
    for (std::size_t i = 0; i < p.size(); ++i) {
      out += std::to_string(p.moving[i]) + ' ' + std::to_string(p.instance_id[i]) + '\n';
    }
  }
  return out;
}

std::string format_panoptic(const std::vector<PanopticPrediction>& preds) {
  std::string out(kPredHeader);
  out += '\n';
  for (const auto& p : preds) {
    validate(p);
    out += "scan " + p.scan_id + " " + std::to_string(p.size()) + "\n";
    for (std::size_t i = 0; i < p.size(); ++i) {
      const int moving = p.semantic[i] != SemanticClass::Static ? 1 : 0;
      out += std::to_string(moving) + ' ' + std::to_string(p.instance_id[i]) + ' ' +
             std::to_string(code(p.semantic[i])) + '\n';
    }
  }
  return out;
}

std::vector<MovingPrediction> load_predictions(const std::filesystem::path& path) {
  return parse_predictions(read_file(path), path.string());
}

std::vector<PanopticPrediction> load_panoptic(const std::filesystem::path& path) {
  return parse_panoptic(read_file(path), path.string());
}

void save_predictions(const std::vector<MovingPrediction>& preds, const std::filesystem::path& path) {
  write_file(path, format_predictions(preds));
}

void save_panoptic(const std::vector<PanopticPrediction>& preds, const std::filesystem::path& path) {
  write_file(path, format_panoptic(preds));
}

MovingSelection select_points(const RadarScan& scan, const std::vector<std::uint8_t>& mask) {
  if (mask.size() != scan.size()) {
    throw DataError("scan '" + scan.scan_id + "': selection mask length does not match point count");
  }
  MovingSelection sel;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) sel.index_map.push_back(i);
  }
  const std::size_t n = sel.index_map.size();
  sel.coords = nn::Tensor({n, 2});
  sel.features = nn::Tensor({n, 5});
  for (std::size_t r = 0; r < n; ++r) {
    const auto& p = scan.points[sel.index_map[r]];
    sel.coords.at(r, 0) = p.x;
    sel.coords.at(r, 1) = p.y;
    auto f = sel.features.row(r);
    f[0] = p.x;
    f[1] = p.y;
    f[2] = p.z;
    f[3] = p.rcs;
    f[4] = p.doppler;
  }
  return sel;
}

MovingSelection select_moving(const RadarScan& scan, const MovingPrediction& pred) {
  if (pred.size() != scan.size()) {
    throw DataError("prediction for scan '" + scan.scan_id + "' is not aligned with the scan");
  }
  return select_points(scan, pred.moving);
}

}  // namespace radfiner
