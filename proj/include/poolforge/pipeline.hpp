#pragma once

#include "poolforge/analysis.hpp"
#include "poolforge/config.hpp"
#include "poolforge/core.hpp"
#include "poolforge/manifest.hpp"
#include "poolforge/prompts.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace poolforge {

struct StageOptions {
    std::vector<std::string> only_cells; // cell keys; empty = all
    bool resume = false;                 // explicit resume (skipping is always on)
};

struct StageOutcome {
    std::string stage;
    int succeeded = 0;
    int failed = 0;
    int skipped = 0;
    std::vector<std::string> failure_messages;

    bool ok() const { return failed == 0; }
};

// Stage-separated run over a single output directory. Each stage reads the
// previous stage's artifacts and writes its own; every artifact carries the
// config hash.
class Pipeline {
public:
    explicit Pipeline(RunConfig config);

    const RunConfig& config() const { return config_; }
    const TaskManifest& manifest() const { return manifest_; }
    const PromptKit& kit() const { return kit_; }

    StageOutcome generate(const StageOptions& opts = {});
    StageOutcome embed(const StageOptions& opts = {});
    StageOutcome score(const StageOptions& opts = {});
    StageOutcome analyze(const StageOptions& opts = {});
    StageOutcome report(const StageOptions& opts = {});

    // Rendered-prompt audit dump (canonical placeholder texts).
    void export_prompts(const std::string& out_dir) const;
    // Judge prompt assets for an external scoring run.
    void export_judge_prompts(const std::string& out_dir) const;

    // Paths.
    std::string cell_dir(const CellCoord& cell) const;
    std::string analysis_dir() const;
    std::string report_dir() const;

    // Backend factory honoring the config (exposed so tests can count calls).
    std::shared_ptr<GenerationBackend> make_backend() const;
    void set_backend_for_testing(std::shared_ptr<GenerationBackend> backend);

private:
    struct CellData; // loaded artifacts during analyze

    std::vector<CellCoord> selected_cells(const StageOptions& opts) const;
    bool cell_generated(const CellCoord& cell) const;
    std::unique_ptr<Embedder> make_embedder() const;
    CellUsage load_cell_usage(const CellCoord& cell) const;
    void record_failures(const std::string& stage,
                         const std::vector<std::pair<std::string, std::string>>& failures);

    RunConfig config_;
    TaskManifest manifest_;
    PromptKit kit_;
    std::string hash_;
    std::shared_ptr<GenerationBackend> backend_override_;
};

// Convenience for the CLI: map a stage outcome to an exit code
// (0 ok, 2 partial failure).
int exit_code_for(const StageOutcome& outcome);

} // namespace poolforge
