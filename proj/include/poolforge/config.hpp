#pragma once

#include "poolforge/backend.hpp"
#include "poolforge/core.hpp"
#include "poolforge/embedding.hpp"
#include "poolforge/manifest.hpp"
#include "poolforge/orchestrator.hpp"
#include "poolforge/quality.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace poolforge {

struct BackendConfig {
    std::string type = "mock"; // mock | http
    int concurrency = 8;
    int retries = 3;
    int backoff_ms = 100;
    HttpBackendConfig http;
};

struct EmbedderConfig {
    std::string type = "mock"; // mock | http
    int mock_dim = 64;
    std::string cache_dir;     // default <output_dir>/emb_cache
    HttpEmbedderConfig http;
};

// Per-family quality source. stories/aut: "mock" or "file"; slogans adds
// "lexical" (the built-in phrase-boilerplate pipeline, the default).
struct QualityConfig {
    std::string stories = "mock";
    std::string aut = "mock";
    std::string slogans = "lexical";
    std::map<std::string, std::string> files;    // prompt_id -> score CSV
    std::string file_scorer_id = "external";
    ScoreKind file_kind = ScoreKind::higher_better;
};

struct SeedConfig {
    std::uint64_t run = 1;
    std::uint64_t partition = 2;
    std::uint64_t rarefaction = 3;
    std::uint64_t bootstrap = 4;
};

struct ConfigOverrides {
    std::optional<std::uint64_t> seed;       // replaces seeds.run
    std::optional<std::string> backend_type; // mock | http
};

// The declarative run description. Defaults are injected at load time and
// recorded in the run manifest, so a config file can be minimal.
struct RunConfig {
    std::vector<std::string> models;
    std::vector<std::string> prompts; // empty = every manifest prompt
    std::vector<Method> methods;
    std::vector<Strategy> strategies;
    int n = 150;
    std::string output_dir;
    std::string manifest_path;
    std::string templates_dir;
    BackendConfig backend;
    EmbedderConfig embedder;
    QualityConfig quality;
    SeedConfig seeds;
    PartitionPolicy partition_policy = PartitionPolicy::consecutive;
    AnchorObjective anchor_objective = AnchorObjective::max_min;
    StrataParseMode strata_parse = StrataParseMode::strict;
    int planning_retries = 2;
    int rarefaction_repeats = 200;
    int bootstrap_replicates = 1000;

    static RunConfig load(const std::string& path, const ConfigOverrides& overrides = {});
    static RunConfig from_json_text(const std::string& text, const ConfigOverrides& overrides = {});

    // Canonical JSON with every default filled in.
    std::string to_json_text() const;
    // Hash of the effective config; stamped into every artifact.
    std::string config_hash() const;

    // The full requested cell grid, manifest-validated.
    std::vector<CellCoord> cells(const TaskManifest& manifest) const;

    void validate(const TaskManifest& manifest) const;
};

// Compiled-in source-tree assets, overridable via POOLFORGE_ASSETS.
std::string default_assets_dir();

} // namespace poolforge
