#pragma once

#include <filesystem>
#include <string>

#include "radfiner/graph.hpp"

namespace radfiner::nn {

// Checkpoint text: `#radfiner-ckpt v1`, then one line per parameter in name
// order: `name rank d0 .. d{rank-1} v0 v1 ...`. Running statistics are stored
// alongside learned weights.
std::string format_checkpoint(const ParamStore& store);
void save_checkpoint(const ParamStore& store, const std::filesystem::path& path);

/// Overwrites every parameter of `store`; the file must name exactly the
/// store's parameters with matching shapes.
void parse_checkpoint(ParamStore& store, const std::string& text, const std::string& origin = "<memory>");
void load_checkpoint(ParamStore& store, const std::filesystem::path& path);

}  // namespace radfiner::nn
