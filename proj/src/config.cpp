#include "poolforge/config.hpp"

#include "poolforge/hashing.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace poolforge {

using nlohmann::json;

std::string default_assets_dir() {
    const char* env = std::getenv("POOLFORGE_ASSETS");
    if (env != nullptr && *env != '\0') return env;
#ifdef POOLFORGE_SOURCE_ASSETS
    return POOLFORGE_SOURCE_ASSETS;
#else
    return "assets";
#endif
}

namespace {

HttpBackendConfig parse_http_backend(const json& j) {
    HttpBackendConfig h;
    h.base_url = j.value("base_url", h.base_url);
    h.path = j.value("path", h.path);
    h.model = j.value("model", h.model);
    h.api_key_env = j.value("api_key_env", h.api_key_env);
    h.timeout_seconds = j.value("timeout_seconds", h.timeout_seconds);
    return h;
}

HttpEmbedderConfig parse_http_embedder(const json& j) {
    HttpEmbedderConfig h;
    h.base_url = j.value("base_url", h.base_url);
    h.path = j.value("path", h.path);
    h.model = j.value("model", h.model);
    h.api_key_env = j.value("api_key_env", h.api_key_env);
    h.timeout_seconds = j.value("timeout_seconds", h.timeout_seconds);
    h.batch_size = j.value("batch_size", h.batch_size);
    return h;
}

json http_backend_json(const HttpBackendConfig& h) {
    return json{{"base_url", h.base_url},
                {"path", h.path},
                {"model", h.model},
                {"api_key_env", h.api_key_env},
                {"timeout_seconds", h.timeout_seconds}};
}

json http_embedder_json(const HttpEmbedderConfig& h) {
    return json{{"base_url", h.base_url}, {"path", h.path},
                {"model", h.model},       {"api_key_env", h.api_key_env},
                {"timeout_seconds", h.timeout_seconds}, {"batch_size", h.batch_size}};
}

} // namespace

RunConfig RunConfig::load(const std::string& path, const ConfigOverrides& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str(), overrides);
}

RunConfig RunConfig::from_json_text(const std::string& text, const ConfigOverrides& overrides) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(std::string("config: invalid JSON: ") + e.what());
    }

    RunConfig c;
    if (!j.contains("models") || !j["models"].is_array() || j["models"].empty()) {
        throw Error("config: \"models\" must be a non-empty array");
    }
    for (const auto& m : j["models"]) c.models.push_back(m.get<std::string>());

    if (j.contains("prompts")) {
        for (const auto& p : j["prompts"]) c.prompts.push_back(p.get<std::string>());
    }

    if (j.contains("methods")) {
        for (const auto& m : j["methods"]) {
            auto method = parse_method(m.get<std::string>());
            if (!method) throw Error("config: unknown method " + m.get<std::string>());
            c.methods.push_back(*method);
        }
    } else {
        c.methods = {Method::indep, Method::strat, Method::repr,
                     Method::self,  Method::peer1, Method::peer2};
    }

    if (j.contains("strategies")) {
        for (const auto& s : j["strategies"]) {
            auto strategy = parse_strategy(s.get<std::string>());
            if (!strategy) throw Error("config: unknown strategy " + s.get<std::string>());
            c.strategies.push_back(*strategy);
        }
    } else {
        c.strategies = {Strategy::neutral, Strategy::diverge};
    }

    c.n = j.value("n", 150);
    c.output_dir = j.value("output_dir", "");
    if (c.output_dir.empty()) throw Error("config: \"output_dir\" is required");

    const std::string assets = default_assets_dir();
    c.manifest_path = j.value("manifest", assets + "/manifest.json");
    c.templates_dir = j.value("templates_dir", assets + "/templates");

    if (j.contains("backend")) {
        const auto& b = j["backend"];
        c.backend.type = b.value("type", c.backend.type);
        c.backend.concurrency = b.value("concurrency", c.backend.concurrency);
        c.backend.retries = b.value("retries", c.backend.retries);
        c.backend.backoff_ms = b.value("backoff_ms", c.backend.backoff_ms);
        if (b.contains("http")) c.backend.http = parse_http_backend(b["http"]);
    }
    if (j.contains("embedder")) {
        const auto& e = j["embedder"];
        c.embedder.type = e.value("type", c.embedder.type);
        c.embedder.mock_dim = e.value("mock_dim", c.embedder.mock_dim);
        c.embedder.cache_dir = e.value("cache_dir", c.embedder.cache_dir);
        if (e.contains("http")) c.embedder.http = parse_http_embedder(e["http"]);
    }
    if (c.embedder.cache_dir.empty()) c.embedder.cache_dir = c.output_dir + "/emb_cache";

    if (j.contains("quality")) {
        const auto& q = j["quality"];
        c.quality.stories = q.value("stories", c.quality.stories);
        c.quality.aut = q.value("aut", c.quality.aut);
        c.quality.slogans = q.value("slogans", c.quality.slogans);
        c.quality.file_scorer_id = q.value("file_scorer_id", c.quality.file_scorer_id);
        if (q.contains("files")) {
            for (auto it = q["files"].begin(); it != q["files"].end(); ++it) {
                c.quality.files[it.key()] = it.value().get<std::string>();
            }
        }
        const std::string kind = q.value("file_kind", "higher_better");
        if (kind == "boilerplate") {
            c.quality.file_kind = ScoreKind::boilerplate;
        } else if (kind != "higher_better") {
            throw Error("config: unknown quality file_kind " + kind);
        }
    }

    if (j.contains("seeds")) {
        const auto& s = j["seeds"];
        c.seeds.run = s.value("run", c.seeds.run);
        c.seeds.partition = s.value("partition", c.seeds.partition);
        c.seeds.rarefaction = s.value("rarefaction", c.seeds.rarefaction);
        c.seeds.bootstrap = s.value("bootstrap", c.seeds.bootstrap);
    }

    const std::string policy = j.value("partition_policy", "consecutive");
    if (policy == "shuffled") {
        c.partition_policy = PartitionPolicy::shuffled;
    } else if (policy != "consecutive") {
        throw Error("config: unknown partition_policy " + policy);
    }

    const std::string objective = j.value("anchor_objective", "max_min");
    if (objective == "max_sum") {
        c.anchor_objective = AnchorObjective::max_sum;
    } else if (objective != "max_min") {
        throw Error("config: unknown anchor_objective " + objective);
    }

    const std::string parse_mode = j.value("strata_parse", "strict");
    if (parse_mode == "lenient") {
        c.strata_parse = StrataParseMode::lenient;
    } else if (parse_mode != "strict") {
        throw Error("config: unknown strata_parse mode " + parse_mode);
    }

    c.planning_retries = j.value("planning_retries", c.planning_retries);
    c.rarefaction_repeats = j.value("rarefaction_repeats", c.rarefaction_repeats);
    c.bootstrap_replicates = j.value("bootstrap_replicates", c.bootstrap_replicates);

    if (overrides.seed) c.seeds.run = *overrides.seed;
    if (overrides.backend_type) c.backend.type = *overrides.backend_type;

    if (c.backend.type != "mock" && c.backend.type != "http") {
        throw Error("config: backend type must be mock or http");
    }
    if (c.embedder.type != "mock" && c.embedder.type != "http") {
        throw Error("config: embedder type must be mock or http");
    }
    if (c.n < 2) throw Error("config: n must be >= 2");
    if (c.rarefaction_repeats < 1) throw Error("config: rarefaction_repeats must be >= 1");
    if (c.bootstrap_replicates < 100) throw Error("config: bootstrap_replicates must be >= 100");
    for (Method m : c.methods) {
        if (m == Method::peer1 && c.n % 2 != 0) {
            throw Error("config: peer1 needs n divisible by 2; adjust n");
        }
        if (m == Method::peer2 && c.n % 3 != 0) {
            throw Error("config: peer2 needs n divisible by 3; adjust n");
        }
    }
    return c;
}

std::string RunConfig::to_json_text() const {
    json methods = json::array();
    for (Method m : this->methods) methods.push_back(to_string(m));
    json strategies = json::array();
    for (Strategy s : this->strategies) strategies.push_back(to_string(s));

    json q{{"stories", quality.stories},
           {"aut", quality.aut},
           {"slogans", quality.slogans},
           {"file_scorer_id", quality.file_scorer_id},
           {"file_kind", quality.file_kind == ScoreKind::boilerplate ? "boilerplate"
                                                                     : "higher_better"}};
    if (!quality.files.empty()) {
        q["files"] = json::object();
        for (const auto& [k, v] : quality.files) q["files"][k] = v;
    }

    json j{{"models", models},
           {"prompts", prompts},
           {"methods", methods},
           {"strategies", strategies},
           {"n", n},
           {"output_dir", output_dir},
           {"manifest", manifest_path},
           {"templates_dir", templates_dir},
           {"backend",
            {{"type", backend.type},
             {"concurrency", backend.concurrency},
             {"retries", backend.retries},
             {"backoff_ms", backend.backoff_ms},
             {"http", http_backend_json(backend.http)}}},
           {"embedder",
            {{"type", embedder.type},
             {"mock_dim", embedder.mock_dim},
             {"cache_dir", embedder.cache_dir},
             {"http", http_embedder_json(embedder.http)}}},
           {"quality", std::move(q)},
           {"seeds",
            {{"run", seeds.run},
             {"partition", seeds.partition},
             {"rarefaction", seeds.rarefaction},
             {"bootstrap", seeds.bootstrap}}},
           {"partition_policy", to_string(partition_policy)},
           {"anchor_objective", anchor_objective == AnchorObjective::max_min ? "max_min" : "max_sum"},
           {"strata_parse", strata_parse == StrataParseMode::strict ? "strict" : "lenient"},
           {"planning_retries", planning_retries},
           {"rarefaction_repeats", rarefaction_repeats},
           {"bootstrap_replicates", bootstrap_replicates}};
    return j.dump(2);
}

std::string RunConfig::config_hash() const {
    // Filesystem locations are excluded: the same run configuration hashes
    // identically wherever its artifacts are stored.
    json j = json::parse(to_json_text());
    j["output_dir"] = "";
    j["manifest"] = "";
    j["templates_dir"] = "";
    j["embedder"]["cache_dir"] = "";
    if (j["quality"].contains("files")) {
        for (auto it = j["quality"]["files"].begin(); it != j["quality"]["files"].end(); ++it) {
            it.value() = "";
        }
    }
    return text_hash(j.dump());
}

void RunConfig::validate(const TaskManifest& manifest) const {
    for (const auto& p : prompts) {
        if (!manifest.contains(p)) throw Error("config: prompt " + p + " is not in the manifest");
    }
    if (methods.empty()) throw Error("config: no methods requested");
    if (strategies.empty()) throw Error("config: no strategies requested");
}

std::vector<CellCoord> RunConfig::cells(const TaskManifest& manifest) const {
    validate(manifest);
    std::vector<std::string> prompt_ids = prompts.empty() ? manifest.prompt_ids() : prompts;

    std::vector<CellCoord> out;
    for (const auto& model : models) {
        for (const auto& prompt : prompt_ids) {
            for (Method method : methods) {
                for (Strategy strategy : strategies) {
                    CellCoord cell;
                    cell.model_id = model;
                    cell.prompt_id = prompt;
                    cell.family = manifest.family_of(prompt);
                    cell.method = method;
                    cell.strategy = strategy;
                    out.push_back(std::move(cell));
                }
            }
        }
    }
    return out;
}

} // namespace poolforge
