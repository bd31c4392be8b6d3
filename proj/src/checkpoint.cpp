#include "radfiner/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "radfiner/error.hpp"
#include "radfiner/scan.hpp"

namespace radfiner::nn {

namespace {
constexpr const char* kHeader = "#radfiner-ckpt v1";
}

std::string format_checkpoint(const ParamStore& store) {
  std::string out = std::string(kHeader) + "\n";
  for (const Param* p : store.all()) {
    out += p->name + ' ' + std::to_string(p->value.rank());
    for (auto d : p->value.shape()) out += ' ' + std::to_string(d);
    for (double v : p->value.values()) out += ' ' + format_real(v);
    out += '\n';
  }
  return out;
}

void save_checkpoint(const ParamStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << format_checkpoint(store);
}

void parse_checkpoint(ParamStore& store, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw DataError(origin + ":1: missing checkpoint header");
  std::set<std::string> seen;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name;
    std::size_t rank = 0;
    ls >> name >> rank;
    auto fail = [&](const std::string& msg) {
      throw DataError(origin + ":" + std::to_string(lineno) + ": " + msg);
    };
    if (!ls || !store.contains(name)) fail("unknown parameter '" + name + "'");
    Param& p = store.get(name);
    Shape shape(rank);
    for (auto& d : shape) ls >> d;
    if (!ls || shape != p.value.shape()) fail("shape mismatch for '" + name + "'");
    for (auto& v : p.value.values()) {
      std::string tok;
      ls >> tok;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) fail("bad value for '" + name + "'");
    }
    std::string extra;
    if (ls >> extra) fail("trailing values for '" + name + "'");
    seen.insert(name);
  }
  for (const Param* p : store.all()) {
    if (!seen.count(p->name)) throw DataError(origin + ": checkpoint lacks parameter '" + p->name + "'");
  }
}

void load_checkpoint(ParamStore& store, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  parse_checkpoint(store, ss.str(), path.string());
}

}  // namespace radfiner::nn
