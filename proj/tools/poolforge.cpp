#include "poolforge/config.hpp"
#include "poolforge/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

using poolforge::ConfigOverrides;
using poolforge::Pipeline;
using poolforge::RunConfig;
using poolforge::StageOptions;
using poolforge::StageOutcome;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> only_cells;
    std::string backend;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool resume = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Run config JSON")->required();
    cmd->add_option("--only-cells", args.only_cells,
                    "Restrict to these cell keys (model|prompt|method|strategy)");
    cmd->add_option("--backend", args.backend, "Override backend type (mock|http)")
        ->check(CLI::IsMember({"mock", "http"}));
    cmd->add_option("--seed-override", args.seed, "Override the run seed")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_flag("--resume", args.resume, "Resume a partial run (completed cells are skipped)");
}

Pipeline make_pipeline(const CommonArgs& args) {
    ConfigOverrides overrides;
    if (args.seed_set) overrides.seed = args.seed;
    if (!args.backend.empty()) overrides.backend_type = args.backend;
    return Pipeline(RunConfig::load(args.config_path, overrides));
}

int run_stage(const CommonArgs& args, const std::string& stage) {
    Pipeline pipeline = make_pipeline(args);
    StageOptions opts;
    opts.only_cells = args.only_cells;
    opts.resume = args.resume;

    StageOutcome outcome;
    if (stage == "generate") outcome = pipeline.generate(opts);
    else if (stage == "embed") outcome = pipeline.embed(opts);
    else if (stage == "score") outcome = pipeline.score(opts);
    else if (stage == "analyze") outcome = pipeline.analyze(opts);
    else outcome = pipeline.report(opts);

    std::printf("%s: %d succeeded, %d skipped, %d failed\n", outcome.stage.c_str(),
                outcome.succeeded, outcome.skipped, outcome.failed);
    for (const auto& msg : outcome.failure_messages) {
        std::fprintf(stderr, "  failed %s\n", msg.c_str());
    }
    return poolforge::exit_code_for(outcome);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"poolforge - candidate-pool diversification harness"};
    app.require_subcommand(1);

    CommonArgs gen_args, embed_args, score_args, analyze_args, report_args;
    CLI::App* gen = app.add_subcommand("generate", "Generate pools for every requested cell");
    add_common(gen, gen_args);
    CLI::App* embed = app.add_subcommand("embed", "Embed evaluated pools");
    add_common(embed, embed_args);
    CLI::App* score = app.add_subcommand("score", "Compute or ingest quality scores");
    add_common(score, score_args);
    CLI::App* analyze = app.add_subcommand("analyze", "Metrics, rarefaction, contrasts");
    add_common(analyze, analyze_args);
    CLI::App* report = app.add_subcommand("report", "Assemble the report bundle CSVs");
    add_common(report, report_args);

    // Audit exports.
    std::string prompts_out = "prompt_export";
    std::string prompts_config;
    CLI::App* prompts = app.add_subcommand("prompts", "Prompt asset utilities");
    CLI::App* prompts_export = prompts->add_subcommand("export", "Dump every rendered prompt");
    prompts_export->add_option("--out", prompts_out, "Output directory");
    prompts_export->add_option("--config", prompts_config, "Optional run config (for manifest)");

    std::string judge_out = "judge_export";
    std::string judge_config;
    CLI::App* judge = app.add_subcommand("judge-prompts", "Slogan judge prompt utilities");
    CLI::App* judge_export = judge->add_subcommand("export", "Dump the judge prompts");
    judge_export->add_option("--out", judge_out, "Output directory");
    judge_export->add_option("--config", judge_config, "Optional run config (for manifest)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return run_stage(gen_args, "generate");
        if (embed->parsed()) return run_stage(embed_args, "embed");
        if (score->parsed()) return run_stage(score_args, "score");
        if (analyze->parsed()) return run_stage(analyze_args, "analyze");
        if (report->parsed()) return run_stage(report_args, "report");

        auto export_pipeline = [](const std::string& config_path) {
            if (!config_path.empty()) return Pipeline(RunConfig::load(config_path));
            const std::string assets = poolforge::default_assets_dir();
            RunConfig cfg;
            cfg.models = {"export"};
            cfg.methods = {poolforge::Method::indep};
            cfg.strategies = {poolforge::Strategy::neutral};
            cfg.output_dir = ".poolforge-export";
            cfg.manifest_path = assets + "/manifest.json";
            cfg.templates_dir = assets + "/templates";
            return Pipeline(cfg);
        };
        if (prompts_export->parsed()) {
            export_pipeline(prompts_config).export_prompts(prompts_out);
            std::printf("prompts exported to %s\n", prompts_out.c_str());
            return 0;
        }
        if (judge_export->parsed()) {
            export_pipeline(judge_config).export_judge_prompts(judge_out);
            std::printf("judge prompts exported to %s\n", judge_out.c_str());
            return 0;
        }
        std::fprintf(stderr, "no subcommand\n");
        return 1;
    } catch (const poolforge::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
