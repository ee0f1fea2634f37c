#include "poolforge/pipeline.hpp"

#include "poolforge/csv.hpp"
#include "poolforge/diversity.hpp"
#include "poolforge/geometry.hpp"
#include "poolforge/hashing.hpp"
#include "poolforge/orchestrator.hpp"
#include "poolforge/pool_io.hpp"
#include "poolforge/quality.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace poolforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    return buf;
}

json usage_to_json(const TokenUsage& u) {
    return json{{"prompt_tokens", u.prompt_tokens},
                {"completion_tokens", u.completion_tokens},
                {"source", to_string(u.source)}};
}

TokenUsage usage_from_json(const json& j) {
    TokenUsage u;
    u.prompt_tokens = j.at("prompt_tokens").get<std::int64_t>();
    u.completion_tokens = j.at("completion_tokens").get<std::int64_t>();
    auto source = parse_usage_source(j.at("source").get<std::string>());
    if (!source) throw Error("artifact: bad usage source");
    u.source = *source;
    return u;
}

void write_json_file(const std::string& path, const json& j) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("artifact: cannot open " + path);
    out << j.dump(2) << "\n";
    if (!out) throw Error("artifact: write failed for " + path);
}

json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("artifact: cannot open " + path);
    return json::parse(in);
}

TokenUsage sum_usage(const Pool& pool) {
    TokenUsage total;
    total.source = UsageSource::backend_reported;
    for (const auto& rec : pool.records) total += rec.usage;
    return total;
}

double mock_quality_score(std::uint64_t run_seed, const std::string& key) {
    const std::uint64_t h = mix64(run_seed, fnv1a64("quality|" + key));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Canonical placeholder texts used by the audit export, mirroring the
// angle-bracket markers of the documented templates.
MethodContext canonical_context(Method m) {
    MethodContext ctx;
    switch (m) {
        case Method::strat: {
            StratumSpec s;
            s.stratum_id = 1;
            s.name = "<stratum name>";
            s.description = "<stratum description>";
            s.generation_instruction = "<stratum generation instruction>";
            s.why_broad = "<why broad>";
            s.why_distinct = "<why distinct>";
            ctx.stratum = s;
            break;
        }
        case Method::self:
            ctx.anchor_texts = {"<self response>"};
            break;
        case Method::peer1:
            ctx.anchor_texts = {"<self response>", "<peer response>"};
            break;
        case Method::peer2:
            ctx.anchor_texts = {"<self response>", "<peer response 1>", "<peer response 2>"};
            break;
        case Method::repr:
            ctx.anchor_texts = {"<representative response 1>", "<representative response 2>",
                                "<representative response 3>"};
            break;
        default:
            break;
    }
    return ctx;
}

void write_text_file(const std::string& path, const std::string& text) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text << "\n";
    if (!out) throw Error("export: write failed for " + path);
}

} // namespace

int exit_code_for(const StageOutcome& outcome) {
    return outcome.ok() ? 0 : 2;
}

Pipeline::Pipeline(RunConfig config)
    : config_(std::move(config)),
      manifest_(TaskManifest::load(config_.manifest_path)),
      kit_(manifest_, config_.templates_dir),
      hash_(config_.config_hash()) {
    config_.validate(manifest_);
}

std::string Pipeline::cell_dir(const CellCoord& cell) const {
    return config_.output_dir + "/cells/" + cell.dir_name();
}

std::string Pipeline::analysis_dir() const {
    return config_.output_dir + "/analysis";
}

std::string Pipeline::report_dir() const {
    return config_.output_dir + "/report";
}

std::shared_ptr<GenerationBackend> Pipeline::make_backend() const {
    if (backend_override_) return backend_override_;
    std::shared_ptr<GenerationBackend> inner;
    if (config_.backend.type == "mock") {
        inner = std::make_shared<MockBackend>(config_.seeds.run);
    } else {
        inner = std::make_shared<HttpBackend>(config_.backend.http);
    }
    return std::make_shared<RetryingBackend>(inner, config_.backend.retries,
                                             config_.backend.backoff_ms);
}

void Pipeline::set_backend_for_testing(std::shared_ptr<GenerationBackend> backend) {
    backend_override_ = std::move(backend);
}

std::unique_ptr<Embedder> Pipeline::make_embedder() const {
    if (config_.embedder.type == "mock") {
        return std::make_unique<MockEmbedder>(config_.embedder.mock_dim, config_.seeds.run);
    }
    return std::make_unique<HttpEmbedder>(config_.embedder.http);
}

std::vector<CellCoord> Pipeline::selected_cells(const StageOptions& opts) const {
    std::vector<CellCoord> all = config_.cells(manifest_);
    if (opts.only_cells.empty()) return all;

    std::set<std::string> wanted(opts.only_cells.begin(), opts.only_cells.end());
    std::vector<CellCoord> out;
    for (auto& cell : all) {
        if (wanted.count(cell.key())) out.push_back(cell);
    }
    if (out.empty()) throw Error("stage: --only-cells matched no requested cell");
    return out;
}

bool Pipeline::cell_generated(const CellCoord& cell) const {
    const std::string dir = cell_dir(cell);
    const std::string evaluated = dir + "/evaluated.jsonl";
    if (!fs::exists(evaluated)) return false;
    try {
        LoadedPool loaded = load_pool(evaluated);
        if (loaded.config_hash != hash_ || loaded.pool.n() != config_.n) return false;
        if (is_two_stage(cell.method)) {
            LoadedPool seed = load_pool(dir + "/seed.jsonl");
            if (seed.config_hash != hash_ || seed.pool.n() != config_.n) return false;
        }
        if (cell.method == Method::strat) {
            json planning = read_json_file(dir + "/planning.json");
            if (planning.value("config_hash", "") != hash_) return false;
        }
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

void Pipeline::record_failures(const std::string& stage,
                               const std::vector<std::pair<std::string, std::string>>& failures) {
    const std::string path = config_.output_dir + "/failures.json";
    json all = json::object();
    if (fs::exists(path)) {
        try {
            all = read_json_file(path);
        } catch (const std::exception&) {
            all = json::object();
        }
    }
    json entries = json::array();
    for (const auto& [cell, error] : failures) {
        entries.push_back({{"cell", cell}, {"error", error}});
    }
    all[stage] = std::move(entries);
    write_json_file(path, all);
}

// ---------------------------------------------------------------------------
// generate

StageOutcome Pipeline::generate(const StageOptions& opts) {
    StageOutcome outcome;
    outcome.stage = "generate";
    fs::create_directories(config_.output_dir);

    auto backend = make_backend();
    auto embedder = make_embedder();
    EmbeddingCache cache(config_.embedder.cache_dir);

    RunOptions run_opts;
    run_opts.concurrency = config_.backend.concurrency;
    run_opts.partition_policy = config_.partition_policy;
    run_opts.partition_seed = config_.seeds.partition;
    run_opts.strata_parse = config_.strata_parse;
    run_opts.planning_retries = config_.planning_retries;
    run_opts.anchor_objective = config_.anchor_objective;

    std::vector<std::pair<std::string, std::string>> failures;

    for (const CellCoord& cell : selected_cells(opts)) {
        if (cell_generated(cell)) {
            outcome.skipped++;
            continue;
        }
        const std::string dir = cell_dir(cell);
        fs::create_directories(dir);
        const std::string started = now_iso8601();
        try {
            json meta{{"config_hash", hash_},
                      {"cell", cell.key()},
                      {"n", config_.n},
                      {"backend", backend->id()},
                      {"partition_policy", to_string(config_.partition_policy)},
                      {"seeds",
                       {{"run", config_.seeds.run}, {"partition", config_.seeds.partition}}},
                      {"started", started}};
            std::vector<std::string> warnings;

            if (cell.method == Method::indep) {
                IndepResult res = run_indep(kit_, cell, config_.n, *backend, run_opts);
                warnings = res.warnings;
                save_pool(dir + "/evaluated.jsonl", res.evaluated, hash_);
            } else if (cell.method == Method::strat) {
                StratResult res = run_strat(kit_, cell, config_.n, *backend, run_opts);
                warnings = res.warnings;
                save_pool(dir + "/evaluated.jsonl", res.evaluated, hash_);
                json planning{{"config_hash", hash_},
                              {"raw_text", res.planning.raw_text},
                              {"plan", json::parse(PromptKit::serialize_strata(res.planning.plan))},
                              {"usage", usage_to_json(res.planning.usage)},
                              {"attempts", res.planning.attempts}};
                write_json_file(dir + "/planning.json", planning);
            } else {
                TwoStageResult res = run_two_stage(kit_, cell, config_.n, *backend, run_opts,
                                                   embedder.get(), &cache);
                warnings = res.warnings;
                save_pool(dir + "/seed.jsonl", res.seed, hash_);
                save_pool(dir + "/evaluated.jsonl", res.evaluated, hash_);
                if (cell.method == Method::repr) {
                    meta["repr_anchor_slots"] = res.repr_anchor_slots;
                    meta["anchor_embedder"] = embedder->id();
                }
                if (cell.method == Method::peer1 || cell.method == Method::peer2) {
                    meta["partition"] = {{"arity", res.partition.arity},
                                         {"groups", res.partition.groups}};
                }
            }

            meta["warnings"] = warnings;
            meta["finished"] = now_iso8601();
            write_json_file(dir + "/run_meta.json", meta);
            outcome.succeeded++;
        } catch (const std::exception& e) {
            // Partial artifacts stay on disk for inspection and resume.
            failures.emplace_back(cell.key(), e.what());
            outcome.failed++;
            outcome.failure_messages.push_back(cell.key() + ": " + e.what());
        }
    }

    record_failures(outcome.stage, failures);
    return outcome;
}

// ---------------------------------------------------------------------------
// embed

StageOutcome Pipeline::embed(const StageOptions& opts) {
    StageOutcome outcome;
    outcome.stage = "embed";

    auto embedder = make_embedder();
    EmbeddingCache cache(config_.embedder.cache_dir);

    std::vector<std::pair<std::string, std::string>> failures;
    bool any_pool = false;

    for (const CellCoord& cell : selected_cells(opts)) {
        const std::string dir = cell_dir(cell);
        const std::string pool_path = dir + "/evaluated.jsonl";
        if (!fs::exists(pool_path)) {
            failures.emplace_back(cell.key(), "pool missing; run the generate stage");
            outcome.failed++;
            outcome.failure_messages.push_back(cell.key() + ": pool missing");
            continue;
        }
        any_pool = true;

        const std::string meta_path = dir + "/embeddings.json";
        if (fs::exists(meta_path)) {
            try {
                json meta = read_json_file(meta_path);
                if (meta.value("config_hash", "") == hash_) {
                    outcome.skipped++;
                    continue;
                }
            } catch (const std::exception&) {
            }
        }

        try {
            LoadedPool loaded = load_pool(pool_path);
            if (loaded.config_hash != hash_) {
                throw Error("pool was produced by config " + loaded.config_hash +
                            ", current is " + hash_);
            }
            EmbeddingSet set = embed_pool(loaded.pool, *embedder, &cache);
            std::vector<std::string> hashes;
            hashes.reserve(static_cast<size_t>(loaded.pool.n()));
            std::vector<std::string> texts(static_cast<size_t>(loaded.pool.n()));
            for (const auto& rec : loaded.pool.records) {
                texts[static_cast<size_t>(rec.slot)] = rec.text;
            }
            for (const auto& t : texts) hashes.push_back(text_hash(t));
            save_embeddings(dir + "/embeddings", set, hashes);

            json meta = read_json_file(meta_path);
            meta["config_hash"] = hash_;
            write_json_file(meta_path, meta);
            outcome.succeeded++;
        } catch (const std::exception& e) {
            failures.emplace_back(cell.key(), e.what());
            outcome.failed++;
            outcome.failure_messages.push_back(cell.key() + ": " + e.what());
        }
    }

    if (!any_pool) {
        throw Error("embed: no generated pools found; run the generate stage first");
    }
    record_failures(outcome.stage, failures);
    return outcome;
}

// ---------------------------------------------------------------------------
// score

StageOutcome Pipeline::score(const StageOptions& opts) {
    StageOutcome outcome;
    outcome.stage = "score";
    (void)opts; // scoring standardizes within task over every generated cell

    const std::vector<CellCoord> cells = config_.cells(manifest_);
    std::vector<std::pair<std::string, std::string>> failures;

    // Group evaluated outputs by prompt condition (the standardization task).
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> task_outputs;
    bool any_pool = false;
    for (const CellCoord& cell : cells) {
        const std::string pool_path = cell_dir(cell) + "/evaluated.jsonl";
        if (!fs::exists(pool_path)) continue;
        LoadedPool loaded = load_pool(pool_path);
        if (loaded.config_hash != hash_) {
            throw Error("score: pool for " + cell.key() + " has a different config hash");
        }
        any_pool = true;
        for (const auto& rec : loaded.pool.records) {
            task_outputs[cell.prompt_id].emplace_back(output_key(cell, rec.slot), rec.text);
        }
    }
    if (!any_pool) throw Error("score: no generated pools found; run the generate stage first");

    const std::string scores_dir = config_.output_dir + "/scores";
    fs::create_directories(scores_dir);
    json scores_meta{{"config_hash", hash_}, {"scorers", json::object()}};

    for (auto& [prompt_id, outputs] : task_outputs) {
        const Family family = manifest_.family_of(prompt_id);
        const std::string mode = family == Family::stories ? config_.quality.stories
                                 : family == Family::aut   ? config_.quality.aut
                                                           : config_.quality.slogans;
        try {
            std::vector<std::string> keys;
            std::vector<std::string> texts;
            keys.reserve(outputs.size());
            for (auto& [key, text] : outputs) {
                keys.push_back(key);
                texts.push_back(text);
            }

            std::map<std::string, double> raw;
            std::map<std::string, double> qz;
            std::string scorer_id;

            if (mode == "lexical") {
                if (family != Family::slogans) {
                    throw Error("lexical scoring is defined for slogan tasks only");
                }
                scorer_id = "slogan_boilerplate";
                std::vector<std::vector<std::string>> tokens;
                tokens.reserve(texts.size());
                for (const auto& t : texts) tokens.push_back(normalize_slogan(t));
                const NgramIndex index = NgramIndex::build(tokens);
                for (size_t i = 0; i < keys.size(); ++i) {
                    raw[keys[i]] = boilerplate_score(tokens[i], index);
                }
                ScoreTable table;
                table.scorer_id = scorer_id;
                table.task_id = prompt_id;
                table.kind = ScoreKind::boilerplate;
                table.scores.insert(raw.begin(), raw.end());
                qz = standardized_quality(table);
            } else if (mode == "mock") {
                scorer_id = "mock";
                ScoreTable table;
                table.scorer_id = scorer_id;
                table.task_id = prompt_id;
                for (const auto& key : keys) {
                    table.scores[key] = mock_quality_score(config_.seeds.run, key);
                }
                raw.insert(table.scores.begin(), table.scores.end());
                qz = standardized_quality(table);
            } else if (mode == "file") {
                auto it = config_.quality.files.find(prompt_id);
                if (it == config_.quality.files.end()) {
                    throw Error("no score file configured for task " + prompt_id);
                }
                scorer_id = config_.quality.file_scorer_id;
                ScoreTable table = ingest_scores(it->second, scorer_id, prompt_id, keys,
                                                 config_.quality.file_kind);
                raw.insert(table.scores.begin(), table.scores.end());
                qz = standardized_quality(table);
            } else {
                throw Error("unknown quality mode \"" + mode + "\"");
            }

            CsvWriter csv(scores_dir + "/" + prompt_id + ".csv");
            csv.row({"output_key", "raw", "qz"});
            for (const auto& [key, z] : qz) {
                const double raw_value = raw.count(key) ? raw.at(key) : 0.0;
                csv.row({key, csv_num(raw_value), csv_num(z)});
            }
            scores_meta["scorers"][prompt_id] = scorer_id;
            outcome.succeeded++;
        } catch (const std::exception& e) {
            failures.emplace_back(prompt_id, e.what());
            outcome.failed++;
            outcome.failure_messages.push_back(prompt_id + ": " + e.what());
        }
    }

    write_json_file(scores_dir + "/meta.json", scores_meta);
    record_failures(outcome.stage, failures);
    return outcome;
}

// ---------------------------------------------------------------------------
// analyze

struct Pipeline::CellData {
    CellCoord cell;
    Pool evaluated;
    CellUsage usage;
    Eigen::MatrixXd dist;
    std::vector<int> labels;   // region per slot
    double quality = 0;
};

CellUsage Pipeline::load_cell_usage(const CellCoord& cell) const {
    const std::string dir = cell_dir(cell);
    CellUsage usage;
    usage.cell = cell;
    usage.evaluated = sum_usage(load_pool(dir + "/evaluated.jsonl").pool);
    if (is_two_stage(cell.method)) {
        usage.seed = sum_usage(load_pool(dir + "/seed.jsonl").pool);
    }
    if (cell.method == Method::strat) {
        json planning = read_json_file(dir + "/planning.json");
        usage.planning = usage_from_json(planning.at("usage"));
    }
    return usage;
}

StageOutcome Pipeline::analyze(const StageOptions& opts) {
    StageOutcome outcome;
    outcome.stage = "analyze";
    (void)opts; // analysis always covers the full grid

    const std::vector<CellCoord> cells = config_.cells(manifest_);
    std::vector<std::pair<std::string, std::string>> failures;

    // Upstream presence checks with stage-naming errors.
    bool any_embeddings = false;
    for (const CellCoord& cell : cells) {
        if (fs::exists(cell_dir(cell) + "/embeddings.json")) {
            any_embeddings = true;
            break;
        }
    }
    if (!any_embeddings) {
        throw Error("analyze: embeddings missing; run the embed stage first");
    }
    if (!fs::exists(config_.output_dir + "/scores/meta.json")) {
        throw Error("analyze: scores missing; run the score stage first");
    }
    json scores_meta = read_json_file(config_.output_dir + "/scores/meta.json");
    if (scores_meta.value("config_hash", "") != hash_) {
        throw Error("analyze: scores were produced by a different config hash");
    }

    // Quality tables per prompt.
    std::map<std::string, std::map<std::string, double>> qz_by_prompt;
    for (const auto& cond : manifest_.conditions()) {
        const std::string path = config_.output_dir + "/scores/" + cond.id + ".csv";
        if (!fs::exists(path)) continue;
        std::ifstream in(path);
        std::string line;
        std::getline(in, line); // header
        auto& table = qz_by_prompt[cond.id];
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const size_t c2 = line.rfind(',');
            const size_t c1 = line.rfind(',', c2 - 1);
            table[line.substr(0, c1)] = std::stod(line.substr(c2 + 1));
        }
    }

    // Load complete cells; record the rest as failures.
    std::vector<CellData> data;
    std::set<std::string> loaded_keys;
    for (const CellCoord& cell : cells) {
        const std::string dir = cell_dir(cell);
        try {
            if (!fs::exists(dir + "/evaluated.jsonl")) {
                throw Error("pool missing; run the generate stage");
            }
            if (!fs::exists(dir + "/embeddings.json")) {
                throw Error("embeddings missing; run the embed stage");
            }
            json emb_meta = read_json_file(dir + "/embeddings.json");
            if (emb_meta.value("config_hash", "") != hash_) {
                throw Error("embeddings have a different config hash");
            }
            LoadedPool loaded = load_pool(dir + "/evaluated.jsonl");
            if (loaded.config_hash != hash_) throw Error("pool has a different config hash");

            CellData cd;
            cd.cell = cell;
            cd.evaluated = std::move(loaded.pool);
            cd.usage = load_cell_usage(cell);
            data.push_back(std::move(cd));
            loaded_keys.insert(cell.key());
        } catch (const std::exception& e) {
            failures.emplace_back(cell.key(), e.what());
            outcome.failed++;
            outcome.failure_messages.push_back(cell.key() + ": " + e.what());
        }
    }

    // Prompt-level regions over the pooled evaluated outputs.
    fs::create_directories(analysis_dir() + "/regions");
    std::map<std::string, RegionModel> regions;
    std::map<std::string, std::vector<const CellData*>> by_prompt;
    for (const auto& cd : data) by_prompt[cd.cell.prompt_id].push_back(&cd);

    for (auto& [prompt_id, group] : by_prompt) {
        std::vector<std::string> keys;
        Eigen::MatrixXd pooled;
        Eigen::Index rows = 0;
        for (const CellData* cd : group) rows += cd->evaluated.n();
        Eigen::Index row = 0;
        for (const CellData* cd : group) {
            EmbeddingSet set = load_embeddings(cell_dir(cd->cell) + "/embeddings");
            if (pooled.size() == 0) pooled.resize(rows, set.vectors.cols());
            for (int slot = 0; slot < cd->evaluated.n(); ++slot) {
                pooled.row(row++) = set.vectors.row(slot);
                keys.push_back(output_key(cd->cell, slot));
            }
        }
        RegionModel model = fit_regions(prompt_id, manifest_.family_of(prompt_id), keys, pooled);
        save_region_model(analysis_dir() + "/regions/" + prompt_id + ".json", model);
        regions.emplace(prompt_id, std::move(model));
    }

    // Per-cell metrics, rarefaction, and bootstrap replicates.
    std::map<std::string, std::map<std::string, double>> point;        // metric -> cell -> value
    std::map<std::string, std::map<std::string, std::vector<double>>> reps; // metric -> cell -> reps
    const std::vector<std::string> ci_metrics{"d_pair", "d_ent", "quality"};
    json summaries = json::array();

    // Baselines first so first-hit targets exist for every cell of the group.
    std::map<std::string, const CellData*> by_key;
    for (auto& cd : data) by_key[cd.cell.key()] = &cd;

    auto baseline_key = [](const CellCoord& cell) {
        CellCoord b = cell;
        b.method = Method::indep;
        b.strategy = Strategy::neutral;
        return b.key();
    };

    for (auto& cd : data) {
        try {
            EmbeddingSet set = load_embeddings(cell_dir(cd.cell) + "/embeddings");
            cd.dist = distance_matrix(set.vectors);
            const RegionModel& model = regions.at(cd.cell.prompt_id);
            cd.labels.resize(static_cast<size_t>(cd.evaluated.n()));
            for (int slot = 0; slot < cd.evaluated.n(); ++slot) {
                cd.labels[static_cast<size_t>(slot)] = model.labels.at(output_key(cd.cell, slot));
            }
            auto qz_it = qz_by_prompt.find(cd.cell.prompt_id);
            if (qz_it == qz_by_prompt.end()) {
                throw Error("scores missing; run the score stage");
            }
            cd.quality = cell_quality(cd.evaluated, qz_it->second);
        } catch (const std::exception& e) {
            failures.emplace_back(cd.cell.key(), e.what());
            outcome.failed++;
            outcome.failure_messages.push_back(cd.cell.key() + ": " + e.what());
            loaded_keys.erase(cd.cell.key());
        }
    }

    for (auto& cd : data) {
        if (!loaded_keys.count(cd.cell.key())) continue;
        try {
            auto base_it = by_key.find(baseline_key(cd.cell));
            if (base_it == by_key.end() || !loaded_keys.count(baseline_key(cd.cell))) {
                throw Error("baseline cell " + baseline_key(cd.cell) + " missing from the run");
            }
            const CellData& base = *base_it->second;
            const RegionModel& model = regions.at(cd.cell.prompt_id);

            CellSummary s;
            s.cell = cd.cell;
            s.n = cd.evaluated.n();
            s.diversity.d_pair = d_pair(cd.dist);
            s.diversity.d_nn = d_nn(cd.dist);
            s.diversity.d_med = d_med(cd.dist);
            s.diversity.d_mst = d_mst(cd.dist);
            s.diversity.d_ent = d_ent(cd.labels, model.k);
            s.quality = cd.quality;
            s.pipeline_tokens = pipeline_tokens(cd.usage);
            s.r_tok = r_tok(cd.usage, base.usage);
            s.usage_proxy_estimated = cd.usage.proxy_estimated();

            const std::uint64_t rare_seed = mix64(config_.seeds.rarefaction, fnv1a64(cd.cell.key()));
            RarefactionCurve pair_curve =
                rarefy_pair(cd.dist, config_.rarefaction_repeats, mix64(rare_seed, 1));
            RarefactionCurve ent_curve = rarefy_ent(cd.labels, model.k, config_.rarefaction_repeats,
                                                    mix64(rare_seed, 2));
            s.d_pair_auc = rarefaction_auc(pair_curve);
            s.d_ent_auc = rarefaction_auc(ent_curve);

            const double target_pair = d_pair(base.dist);
            const double target_ent = d_ent(base.labels, model.k);
            s.first_hit_d_pair = first_hit_summary(pair_curve, target_pair);
            s.first_hit_d_ent = first_hit_summary(ent_curve, target_ent);

            // Per-cell artifacts.
            const std::string dir = cell_dir(cd.cell);
            {
                CsvWriter csv(dir + "/rarefaction.csv");
                csv.row({"model", "prompt", "family", "method", "strategy", "metric", "q",
                         "replicate", "value"});
                for (const RarefactionCurve* curve : {&pair_curve, &ent_curve}) {
                    for (int q = 1; q <= curve->n; ++q) {
                        for (int r = 0; r < curve->repeats; ++r) {
                            csv.row({cd.cell.model_id, cd.cell.prompt_id,
                                     to_string(cd.cell.family), to_string(cd.cell.method),
                                     to_string(cd.cell.strategy), to_string(curve->metric),
                                     std::to_string(q), std::to_string(r),
                                     csv_num(curve->values[static_cast<size_t>(q - 1)]
                                                          [static_cast<size_t>(r)])});
                        }
                    }
                }
            }

            json mj{{"config_hash", hash_},
                    {"cell", cd.cell.key()},
                    {"model", cd.cell.model_id},
                    {"prompt", cd.cell.prompt_id},
                    {"family", to_string(cd.cell.family)},
                    {"method", to_string(cd.cell.method)},
                    {"strategy", to_string(cd.cell.strategy)},
                    {"n", s.n},
                    {"d_pair", s.diversity.d_pair},
                    {"d_nn", s.diversity.d_nn},
                    {"d_med", s.diversity.d_med},
                    {"d_mst", s.diversity.d_mst},
                    {"d_ent", s.diversity.d_ent},
                    {"quality", s.quality},
                    {"pipeline_tokens", s.pipeline_tokens},
                    {"r_tok", s.r_tok},
                    {"usage_proxy_estimated", s.usage_proxy_estimated},
                    {"d_pair_auc", s.d_pair_auc},
                    {"d_ent_auc", s.d_ent_auc},
                    {"first_hit_d_pair",
                     {{"mean_q", s.first_hit_d_pair.mean_q},
                      {"reached", s.first_hit_d_pair.reached},
                      {"not_reached", s.first_hit_d_pair.not_reached}}},
                    {"first_hit_d_ent",
                     {{"mean_q", s.first_hit_d_ent.mean_q},
                      {"reached", s.first_hit_d_ent.reached},
                      {"not_reached", s.first_hit_d_ent.not_reached}}},
                    {"d_pair_curve", pair_curve.means},
                    {"d_ent_curve", ent_curve.means}};
            write_json_file(dir + "/metrics.json", mj);

            // Values and replicate vectors for the contrast layer.
            point["d_pair"][cd.cell.key()] = s.diversity.d_pair;
            point["d_nn"][cd.cell.key()] = s.diversity.d_nn;
            point["d_med"][cd.cell.key()] = s.diversity.d_med;
            point["d_mst"][cd.cell.key()] = s.diversity.d_mst;
            point["d_ent"][cd.cell.key()] = s.diversity.d_ent;
            point["quality"][cd.cell.key()] = s.quality;
            point["r_tok"][cd.cell.key()] = s.r_tok;
            point["pipeline_tokens"][cd.cell.key()] = static_cast<double>(s.pipeline_tokens);

            const int n = cd.evaluated.n();
            const int k = model.k;
            const Eigen::MatrixXd& dist = cd.dist;
            const std::vector<int>& labels = cd.labels;
            std::vector<double> qz_by_slot(static_cast<size_t>(n));
            const auto& qz = qz_by_prompt.at(cd.cell.prompt_id);
            for (int slot = 0; slot < n; ++slot) {
                qz_by_slot[static_cast<size_t>(slot)] = qz.at(output_key(cd.cell, slot));
            }

            for (const std::string& metric : ci_metrics) {
                const std::uint64_t boot_seed =
                    mix64(config_.seeds.bootstrap, fnv1a64(cd.cell.key() + "|" + metric));
                std::function<double(std::span<const int>)> stat;
                if (metric == "d_pair") {
                    stat = [&dist](std::span<const int> idx) { return d_pair(dist, idx); };
                } else if (metric == "d_ent") {
                    stat = [&labels, k](std::span<const int> idx) { return d_ent(labels, idx, k); };
                } else {
                    stat = [&qz_by_slot](std::span<const int> idx) {
                        double sum = 0;
                        for (int i : idx) sum += qz_by_slot[static_cast<size_t>(i)];
                        return sum / static_cast<double>(idx.size());
                    };
                }
                reps[metric][cd.cell.key()] =
                    bootstrap_replicates(n, config_.bootstrap_replicates, boot_seed, stat);
            }
            summaries.push_back(std::move(mj));
            outcome.succeeded++;
        } catch (const std::exception& e) {
            failures.emplace_back(cd.cell.key(), e.what());
            outcome.failed++;
            outcome.failure_messages.push_back(cd.cell.key() + ": " + e.what());
            loaded_keys.erase(cd.cell.key());
        }
    }

    write_json_file(analysis_dir() + "/summaries.json",
                    json{{"config_hash", hash_}, {"cells", summaries}});

    // -----------------------------------------------------------------------
    // Contrasts: per prompt, then family design averages, with replicate CIs
    // for d_pair / d_ent / quality and point values for the rest.
    const std::vector<std::string> contrast_metrics{"d_pair", "d_nn",    "d_med", "d_mst",
                                                    "d_ent",  "quality", "r_tok"};
    json contrasts = json::array();
    json design_rows = json::array();
    json efficiency_rows = json::array();

    auto has_ci = [&](const std::string& metric) {
        return std::find(ci_metrics.begin(), ci_metrics.end(), metric) != ci_metrics.end();
    };
    auto rep_delta = [&](const std::string& metric, const std::string& a, const std::string& b) {
        const auto& ra = reps.at(metric).at(a);
        const auto& rb = reps.at(metric).at(b);
        std::vector<double> out(ra.size());
        for (size_t i = 0; i < ra.size(); ++i) out[i] = ra[i] - rb[i];
        return out;
    };

    // family -> prompts present in the run, manifest order.
    std::map<std::string, std::vector<std::string>> family_prompts;
    std::vector<std::string> run_prompts =
        config_.prompts.empty() ? manifest_.prompt_ids() : config_.prompts;
    for (const auto& p : run_prompts) {
        family_prompts[to_string(manifest_.family_of(p))].push_back(p);
    }

    struct DesignAcc {
        double sum = 0;
        std::vector<double> rep_sum;
        int count = 0;
        bool complete = true;
    };
    // key: model|family|method|strategy|kind|metric
    std::map<std::string, DesignAcc> design;

    for (const CellCoord& cell : cells) {
        if (!loaded_keys.count(cell.key())) continue;
        const std::string bkey = baseline_key(cell);
        if (!loaded_keys.count(bkey)) continue;

        for (const std::string& metric : contrast_metrics) {
            // Baseline contrast (defined for every cell; baseline row is 0).
            const double value = point.at(metric).at(cell.key()) - point.at(metric).at(bkey);
            json row{{"model", cell.model_id},
                     {"prompt", cell.prompt_id},
                     {"family", to_string(cell.family)},
                     {"method", to_string(cell.method)},
                     {"strategy", to_string(cell.strategy)},
                     {"kind", "base"},
                     {"metric", metric},
                     {"value", value}};
            std::vector<double> rd;
            if (has_ci(metric)) {
                rd = rep_delta(metric, cell.key(), bkey);
                ContrastEstimate est = contrast_from_replicates(value, rd, ContrastKind::base);
                row["ci_low"] = est.ci_low;
                row["ci_high"] = est.ci_high;
                row["replicates"] = est.replicates;
            }
            contrasts.push_back(row);

            auto& acc = design[cell.model_id + "|" + to_string(cell.family) + "|" +
                               to_string(cell.method) + "|" + to_string(cell.strategy) +
                               "|base|" + metric];
            acc.sum += value;
            acc.count++;
            if (has_ci(metric)) {
                if (acc.rep_sum.empty()) acc.rep_sum.assign(rd.size(), 0.0);
                for (size_t i = 0; i < rd.size(); ++i) acc.rep_sum[i] += rd[i];
            }

            // Divergence contrast, emitted once per (model, prompt, method).
            if (cell.strategy == Strategy::diverge) {
                CellCoord neutral = cell;
                neutral.strategy = Strategy::neutral;
                if (loaded_keys.count(neutral.key())) {
                    const double dv =
                        point.at(metric).at(cell.key()) - point.at(metric).at(neutral.key());
                    json drow{{"model", cell.model_id},
                              {"prompt", cell.prompt_id},
                              {"family", to_string(cell.family)},
                              {"method", to_string(cell.method)},
                              {"strategy", ""},
                              {"kind", "diverge"},
                              {"metric", metric},
                              {"value", dv}};
                    std::vector<double> rdd;
                    if (has_ci(metric)) {
                        rdd = rep_delta(metric, cell.key(), neutral.key());
                        ContrastEstimate est =
                            contrast_from_replicates(dv, rdd, ContrastKind::diverge);
                        drow["ci_low"] = est.ci_low;
                        drow["ci_high"] = est.ci_high;
                        drow["replicates"] = est.replicates;
                    }
                    contrasts.push_back(drow);

                    auto& dacc = design[cell.model_id + "|" + to_string(cell.family) + "|" +
                                        to_string(cell.method) + "||diverge|" + metric];
                    dacc.sum += dv;
                    dacc.count++;
                    if (has_ci(metric)) {
                        if (dacc.rep_sum.empty()) dacc.rep_sum.assign(rdd.size(), 0.0);
                        for (size_t i = 0; i < rdd.size(); ++i) dacc.rep_sum[i] += rdd[i];
                    }
                }
            }
        }

        // Token-efficiency rows: baseline-contrast gain per 100k pipeline tokens.
        for (const std::string& metric : {std::string("d_pair"), std::string("quality")}) {
            const double delta = point.at(metric).at(cell.key()) - point.at(metric).at(bkey);
            const auto tokens =
                static_cast<std::int64_t>(point.at("pipeline_tokens").at(cell.key()));
            const double eff = efficiency(delta, tokens);
            std::vector<double> rd = rep_delta(metric, cell.key(), bkey);
            for (double& v : rd) v = efficiency(v, tokens);
            ContrastEstimate est = contrast_from_replicates(eff, rd, ContrastKind::base);
            efficiency_rows.push_back(json{{"model", cell.model_id},
                                           {"prompt", cell.prompt_id},
                                           {"family", to_string(cell.family)},
                                           {"method", to_string(cell.method)},
                                           {"strategy", to_string(cell.strategy)},
                                           {"metric", metric},
                                           {"delta_per_100k", eff},
                                           {"ci_low", est.ci_low},
                                           {"ci_high", est.ci_high},
                                           {"replicates", est.replicates}});
        }
    }

    // Design averages: unweighted over the family's prompts; incomplete
    // families are dropped (a failed cell already appears under failures).
    for (auto& [key, acc] : design) {
        std::istringstream is(key);
        std::string model, family, method, strategy, kind, metric;
        std::getline(is, model, '|');
        std::getline(is, family, '|');
        std::getline(is, method, '|');
        std::getline(is, strategy, '|');
        std::getline(is, kind, '|');
        std::getline(is, metric, '|');

        if (acc.count != static_cast<int>(family_prompts[family].size())) continue;

        const double avg = acc.sum / acc.count;
        json row{{"model", model},   {"family", family}, {"method", method},
                 {"strategy", strategy}, {"kind", kind},     {"metric", metric},
                 {"value", avg}};
        if (!acc.rep_sum.empty()) {
            std::vector<double> avg_reps(acc.rep_sum.size());
            for (size_t i = 0; i < acc.rep_sum.size(); ++i) avg_reps[i] = acc.rep_sum[i] / acc.count;
            ContrastEstimate est = contrast_from_replicates(
                avg, avg_reps, kind == "base" ? ContrastKind::base : ContrastKind::diverge);
            row["ci_low"] = est.ci_low;
            row["ci_high"] = est.ci_high;
            row["replicates"] = est.replicates;
        }
        design_rows.push_back(std::move(row));
    }

    write_json_file(analysis_dir() + "/contrasts.json",
                    json{{"config_hash", hash_},
                         {"prompt_level", contrasts},
                         {"design_average", design_rows}});
    write_json_file(analysis_dir() + "/efficiency.json",
                    json{{"config_hash", hash_}, {"rows", efficiency_rows}});

    record_failures(outcome.stage, failures);
    return outcome;
}

// ---------------------------------------------------------------------------
// report

StageOutcome Pipeline::report(const StageOptions& opts) {
    StageOutcome outcome;
    outcome.stage = "report";
    (void)opts;

    const std::string adir = analysis_dir();
    if (!fs::exists(adir + "/summaries.json")) {
        throw Error("report: analysis missing; run the analyze stage first");
    }
    json summaries = read_json_file(adir + "/summaries.json");
    json contrasts = read_json_file(adir + "/contrasts.json");
    json efficiency_rows = read_json_file(adir + "/efficiency.json");
    for (const json* doc : {&summaries, &contrasts, &efficiency_rows}) {
        if (doc->value("config_hash", "") != hash_) {
            throw Error("report: analysis artifacts have a different config hash");
        }
    }

    const std::string rdir = report_dir();
    fs::create_directories(rdir);

    // Requested-cell coverage: every grid cell is summarized or failed.
    std::set<std::string> summarized;
    for (const auto& row : summaries["cells"]) {
        summarized.insert(row.at("cell").get<std::string>());
    }
    std::set<std::string> failed;
    const std::string failures_path = config_.output_dir + "/failures.json";
    json failures = json::object();
    if (fs::exists(failures_path)) {
        failures = read_json_file(failures_path);
        for (auto it = failures.begin(); it != failures.end(); ++it) {
            for (const auto& entry : it.value()) {
                failed.insert(entry.at("cell").get<std::string>());
            }
        }
    }
    std::vector<std::string> unaccounted;
    for (const CellCoord& cell : config_.cells(manifest_)) {
        if (!summarized.count(cell.key()) && !failed.count(cell.key())) {
            unaccounted.push_back(cell.key());
        }
    }
    if (!unaccounted.empty()) {
        throw Error("report: cells neither summarized nor listed under failures: " +
                    unaccounted.front() + (unaccounted.size() > 1 ? " (and others)" : ""));
    }

    {
        CsvWriter csv(rdir + "/cell_summaries.csv");
        csv.row({"model", "prompt", "family", "method", "strategy", "n", "d_pair", "d_nn",
                 "d_med", "d_mst", "d_ent", "quality", "pipeline_tokens", "r_tok",
                 "usage_proxy_estimated", "d_pair_auc", "d_ent_auc", "first_hit_d_pair_mean",
                 "first_hit_d_pair_not_reached", "first_hit_d_ent_mean",
                 "first_hit_d_ent_not_reached"});
        for (const auto& s : summaries["cells"]) {
            csv.row({s.at("model").get<std::string>(), s.at("prompt").get<std::string>(),
                     s.at("family").get<std::string>(), s.at("method").get<std::string>(),
                     s.at("strategy").get<std::string>(), std::to_string(s.at("n").get<int>()),
                     csv_num(s.at("d_pair").get<double>()), csv_num(s.at("d_nn").get<double>()),
                     csv_num(s.at("d_med").get<double>()), csv_num(s.at("d_mst").get<double>()),
                     csv_num(s.at("d_ent").get<double>()), csv_num(s.at("quality").get<double>()),
                     std::to_string(s.at("pipeline_tokens").get<std::int64_t>()),
                     csv_num(s.at("r_tok").get<double>()),
                     s.at("usage_proxy_estimated").get<bool>() ? "true" : "false",
                     csv_num(s.at("d_pair_auc").get<double>()),
                     csv_num(s.at("d_ent_auc").get<double>()),
                     csv_num(s.at("first_hit_d_pair").at("mean_q").get<double>()),
                     std::to_string(s.at("first_hit_d_pair").at("not_reached").get<int>()),
                     csv_num(s.at("first_hit_d_ent").at("mean_q").get<double>()),
                     std::to_string(s.at("first_hit_d_ent").at("not_reached").get<int>())});
        }
    }

    auto contrast_csv = [&](const std::string& path, const json& rows, bool with_prompt) {
        CsvWriter csv(path);
        std::vector<std::string> header{"model"};
        if (with_prompt) header.push_back("prompt");
        for (const char* h : {"family", "method", "strategy", "kind", "metric", "value",
                              "ci_low", "ci_high", "replicates"}) {
            header.push_back(h);
        }
        csv.row(header);
        for (const auto& r : rows) {
            std::vector<std::string> row{r.at("model").get<std::string>()};
            if (with_prompt) row.push_back(r.at("prompt").get<std::string>());
            row.push_back(r.at("family").get<std::string>());
            row.push_back(r.at("method").get<std::string>());
            row.push_back(r.at("strategy").get<std::string>());
            row.push_back(r.at("kind").get<std::string>());
            row.push_back(r.at("metric").get<std::string>());
            row.push_back(csv_num(r.at("value").get<double>()));
            if (r.contains("ci_low")) {
                row.push_back(csv_num(r.at("ci_low").get<double>()));
                row.push_back(csv_num(r.at("ci_high").get<double>()));
                row.push_back(std::to_string(r.at("replicates").get<int>()));
            } else {
                row.push_back("NA");
                row.push_back("NA");
                row.push_back("0");
            }
            csv.row(row);
        }
    };
    contrast_csv(rdir + "/contrasts_prompt.csv", contrasts["prompt_level"], true);
    contrast_csv(rdir + "/contrasts_design.csv", contrasts["design_average"], false);

    {
        CsvWriter csv(rdir + "/efficiency.csv");
        csv.row({"model", "prompt", "family", "method", "strategy", "metric", "delta_per_100k",
                 "ci_low", "ci_high", "replicates"});
        for (const auto& r : efficiency_rows["rows"]) {
            csv.row({r.at("model").get<std::string>(), r.at("prompt").get<std::string>(),
                     r.at("family").get<std::string>(), r.at("method").get<std::string>(),
                     r.at("strategy").get<std::string>(), r.at("metric").get<std::string>(),
                     csv_num(r.at("delta_per_100k").get<double>()),
                     csv_num(r.at("ci_low").get<double>()),
                     csv_num(r.at("ci_high").get<double>()),
                     std::to_string(r.at("replicates").get<int>())});
        }
    }

    // Rarefaction tables: long concatenation plus the mean curves.
    {
        std::ofstream longcsv(rdir + "/rarefaction_long.csv", std::ios::binary);
        longcsv << "model,prompt,family,method,strategy,metric,q,replicate,value\n";
        CsvWriter meancsv(rdir + "/rarefaction_mean.csv");
        meancsv.row({"model", "prompt", "family", "method", "strategy", "metric", "q", "mean"});
        for (const auto& s : summaries["cells"]) {
            CellCoord cell;
            cell.model_id = s.at("model").get<std::string>();
            cell.prompt_id = s.at("prompt").get<std::string>();
            cell.family = *parse_family(s.at("family").get<std::string>());
            cell.method = *parse_method(s.at("method").get<std::string>());
            cell.strategy = *parse_strategy(s.at("strategy").get<std::string>());

            std::ifstream in(cell_dir(cell) + "/rarefaction.csv", std::ios::binary);
            if (!in) throw Error("report: missing rarefaction.csv for " + cell.key());
            std::string line;
            std::getline(in, line); // header
            while (std::getline(in, line)) {
                if (!line.empty()) longcsv << line << "\n";
            }

            for (const char* metric : {"d_pair", "d_ent"}) {
                const auto& curve = s.at(std::string(metric) + "_curve");
                for (size_t q = 0; q < curve.size(); ++q) {
                    meancsv.row({cell.model_id, cell.prompt_id, to_string(cell.family),
                                 to_string(cell.method), to_string(cell.strategy), metric,
                                 std::to_string(q + 1), csv_num(curve[q].get<double>())});
                }
            }
        }
        if (!longcsv) throw Error("report: write failed for rarefaction_long.csv");
    }

    json manifest_json{{"config_hash", hash_},
                       {"generated_at", now_iso8601()},
                       {"config", json::parse(config_.to_json_text())},
                       {"failures", failures},
                       {"cells_summarized", static_cast<int>(summarized.size())}};
    write_json_file(rdir + "/run_manifest.json", manifest_json);

    outcome.succeeded = static_cast<int>(summarized.size());
    record_failures(outcome.stage, {});
    return outcome;
}

// ---------------------------------------------------------------------------
// exports

void Pipeline::export_prompts(const std::string& out_dir) const {
    fs::create_directories(out_dir);

    write_text_file(out_dir + "/system_shared.txt", kit_.shared_system_text());
    write_text_file(out_dir + "/system_planning.txt", kit_.planning_system_text());
    write_text_file(out_dir + "/modifier_neutral.txt", kit_.modifier_text(Strategy::neutral));
    write_text_file(out_dir + "/modifier_diverge.txt", kit_.modifier_text(Strategy::diverge));

    for (const auto& cond : manifest_.conditions()) {
        write_text_file(out_dir + "/task__" + cond.id + ".txt", kit_.task_text(cond.id));
        write_text_file(out_dir + "/planning__" + cond.id + ".txt",
                        kit_.build_planning_prompt(cond.id, 150).user_text);
        for (Method method : {Method::indep, Method::strat, Method::repr, Method::self,
                              Method::peer1, Method::peer2}) {
            for (Strategy strategy : {Strategy::neutral, Strategy::diverge}) {
                CellCoord cell;
                cell.model_id = "export";
                cell.prompt_id = cond.id;
                cell.family = cond.family;
                cell.method = method;
                cell.strategy = strategy;
                PromptPayload p =
                    kit_.build_prompt(cell, Stage::evaluated, canonical_context(method));
                const std::string name = out_dir + "/prompt__" + cond.id + "__" +
                                         to_string(method) + "__" + to_string(strategy) + ".txt";
                write_text_file(name, p.user_text);
            }
        }
    }
    export_judge_prompts(out_dir);
}

void Pipeline::export_judge_prompts(const std::string& out_dir) const {
    fs::create_directories(out_dir);
    write_text_file(out_dir + "/judge_system.txt", kit_.judge_system_text());
    for (const auto& cond : manifest_.conditions()) {
        if (cond.family != Family::slogans) continue;
        write_text_file(out_dir + "/judge_user__" + cond.id + ".txt", kit_.judge_user_text(cond.id));
    }
}

} // namespace poolforge
