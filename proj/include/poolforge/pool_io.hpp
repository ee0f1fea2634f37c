#pragma once

#include "poolforge/core.hpp"

#include <string>

namespace poolforge {

// Pools persist as line-delimited JSON: one header object carrying the cell
// coordinate, then one record object per line. config_hash ties artifacts to
// the run configuration that produced them.
void save_pool(const std::string& path, const Pool& pool, const std::string& config_hash);

struct LoadedPool {
    Pool pool;
    std::string config_hash;
};

LoadedPool load_pool(const std::string& path);

// JSON round-trip helpers for single records (used by tests and tooling).
std::string record_to_json(const OutputRecord& rec);
OutputRecord record_from_json(const std::string& line, const CellCoord& cell, Stage stage);

} // namespace poolforge
