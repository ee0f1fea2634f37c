#pragma once

#include "poolforge/core.hpp"
#include "poolforge/manifest.hpp"

#include <array>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace poolforge {

// One fully assembled backend request.
struct PromptPayload {
    std::string system_text;
    std::string user_text;
    double temperature = 1.0;
    int max_output_tokens = 0;

    bool operator==(const PromptPayload&) const = default;
};

struct StratumSpec {
    int stratum_id = 0; // 1..5
    std::string name;
    std::string description;
    std::string generation_instruction;
    std::string why_broad;
    std::string why_distinct;

    bool operator==(const StratumSpec&) const = default;
};

// Validated five-direction plan returned by the planning call.
struct StrataPlan {
    std::string task_id;
    std::array<StratumSpec, 5> strata; // ordered by stratum_id 1..5

    bool operator==(const StrataPlan&) const = default;
};

// Either a plan or the full list of violated requirements.
struct StrataParseResult {
    std::optional<StrataPlan> plan;
    std::vector<std::string> errors;

    bool ok() const { return plan.has_value(); }
};

enum class StrataParseMode {
    strict,  // text must be bare JSON
    lenient, // markdown fences and text around the JSON object are stripped first
};

// Context a method needs beyond the cell itself: the assigned stratum for
// strat, anchor texts for the two-stage methods. Anchor order is
// [self, peers...] for self/peer1/peer2 and the three shared anchors for repr.
struct MethodContext {
    std::optional<StratumSpec> stratum;
    std::vector<std::string> anchor_texts;
};

// Renders byte-exact prompt payloads from the template assets.
class PromptKit {
public:
    PromptKit(TaskManifest manifest, std::string templates_dir);

    const TaskManifest& manifest() const { return manifest_; }

    // Task-specific instructions for a prompt condition (placeholders filled).
    std::string task_text(const std::string& prompt_id) const;

    // user = task ++ strategy modifier ++ method block; shared system text.
    // stage=seed for the two-stage methods renders the indep form.
    PromptPayload build_prompt(const CellCoord& cell, Stage stage, const MethodContext& ctx) const;

    // Planning call for strat: its own system text, temperature 0, ceiling 1600.
    PromptPayload build_planning_prompt(const std::string& prompt_id, int pool_size) const;

    // Judge prompts for external slogan scoring runs. The candidate slot stays
    // a placeholder unless a slogan is supplied.
    std::string judge_system_text() const;
    std::string judge_user_text(const std::string& prompt_id,
                                const std::string& candidate_slogan = "{{CANDIDATE_SLOGAN}}") const;

    std::string shared_system_text() const;
    std::string planning_system_text() const;
    std::string modifier_text(Strategy s) const;
    std::string method_block(const CellCoord& cell, const MethodContext& ctx) const;

    static StrataParseResult parse_strata(const std::string& raw_text,
                                          StrataParseMode mode = StrataParseMode::strict);
    static std::string serialize_strata(const StrataPlan& plan);

    // Slot i belongs to stratum (i mod k) + 1.
    static std::vector<int> assign_strata(int n, int k);

    static constexpr double kGenerationTemperature = 1.0;
    static constexpr double kPlanningTemperature = 0.0;
    static constexpr int kPlanningMaxTokens = 1600;
    static int max_output_tokens(Family f); // 2048 stories, 768 aut, 512 slogans

private:
    std::string load_template(const std::string& name) const;

    TaskManifest manifest_;
    std::string templates_dir_;
    // Template files are immutable for the life of the kit; cached after the
    // first read so per-call rendering stays cheap under fan-out.
    mutable std::mutex cache_mutex_;
    mutable std::map<std::string, std::string> template_cache_;
};

// {{NAME}} substitution; unknown or leftover placeholders are errors.
std::string render_template(const std::string& text,
                            const std::map<std::string, std::string>& values);

} // namespace poolforge
