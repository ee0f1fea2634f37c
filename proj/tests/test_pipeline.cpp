#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "poolforge/backend.hpp"
#include "poolforge/config.hpp"
#include "poolforge/pipeline.hpp"
#include "poolforge/pool_io.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

using namespace poolforge;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kAssets = POOLFORGE_SOURCE_ASSETS;

std::string fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("poolforge_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

RunConfig mini_config(const std::string& out_dir) {
    std::ostringstream cfg;
    cfg << R"({
      "models": ["mock-a"],
      "prompts": ["aut_shoe", "aut_key"],
      "methods": ["indep", "strat", "peer1"],
      "strategies": ["neutral", "diverge"],
      "n": 6,
      "output_dir": ")" << out_dir << R"(",
      "backend": {"type": "mock", "concurrency": 4},
      "embedder": {"type": "mock", "mock_dim": 24},
      "rarefaction_repeats": 20,
      "bootstrap_replicates": 100,
      "seeds": {"run": 7, "partition": 8, "rarefaction": 9, "bootstrap": 10}
    })";
    return RunConfig::from_json_text(cfg.str());
}

class CountingBackend : public GenerationBackend {
public:
    explicit CountingBackend(std::uint64_t seed) : inner_(seed) {}
    std::string id() const override { return inner_.id(); }
    GenerationResult generate(const PromptPayload& payload, const CallContext& ctx) override {
        calls++;
        return inner_.generate(payload, ctx);
    }
    std::atomic<int> calls{0};

private:
    MockBackend inner_;
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string first_line(const std::string& text) {
    return text.substr(0, text.find('\n'));
}

} // namespace

TEST_CASE("config defaults, seeds, and hash stability") {
    RunConfig a = mini_config("/tmp/poolforge_cfg_a");
    CHECK(a.methods.size() == 3);
    CHECK(a.seeds.run == 7);
    CHECK(a.backend.retries == 3); // default injected
    CHECK(a.config_hash() == a.config_hash());

    RunConfig b = mini_config("/tmp/poolforge_cfg_a");
    CHECK(a.config_hash() == b.config_hash());

    ConfigOverrides ov;
    ov.seed = 99;
    RunConfig c = RunConfig::from_json_text(
        "{\"models\":[\"m\"],\"output_dir\":\"/tmp/x\",\"n\":6}", ov);
    CHECK(c.seeds.run == 99);
    CHECK(c.methods.size() == 6); // all methods by default
    CHECK(c.config_hash() != a.config_hash());
}

TEST_CASE("config validation errors") {
    CHECK_THROWS_AS(RunConfig::from_json_text("{\"models\":[],\"output_dir\":\"x\"}"), Error);
    CHECK_THROWS_AS(RunConfig::from_json_text("{\"models\":[\"m\"]}"), Error);
    CHECK_THROWS_AS(RunConfig::from_json_text(
                        "{\"models\":[\"m\"],\"output_dir\":\"x\",\"n\":1}"),
                    Error);
    // peer1 needs even n
    CHECK_THROWS_WITH_AS(
        RunConfig::from_json_text(
            "{\"models\":[\"m\"],\"output_dir\":\"x\",\"n\":7,\"methods\":[\"peer1\"]}"),
        doctest::Contains("adjust n"), Error);
    CHECK_THROWS_AS(RunConfig::from_json_text("not json"), Error);
}

TEST_CASE("grid construction validates prompts against the manifest") {
    RunConfig cfg = mini_config(fresh_dir("grid"));
    cfg.prompts = {"aut_shoe", "nope"};
    TaskManifest manifest = TaskManifest::load(kAssets + "/manifest.json");
    CHECK_THROWS_AS(cfg.cells(manifest), Error);

    cfg.prompts = {"aut_shoe"};
    auto cells = cfg.cells(manifest);
    CHECK(cells.size() == 1 * 1 * 3 * 2);
}

TEST_CASE("mini mock pipeline: generate, embed, score, analyze, report") {
    const std::string out = fresh_dir("mini");
    Pipeline pipeline(mini_config(out));

    StageOutcome gen = pipeline.generate();
    CHECK(gen.ok());
    CHECK(gen.succeeded == 12);
    CHECK(gen.skipped == 0);

    // Grid: 1 model x 2 prompts x {indep,strat,peer1} x 2 strategies.
    CHECK(fs::exists(out + "/cells/mock-a__aut_shoe__indep__neutral/evaluated.jsonl"));
    CHECK(fs::exists(out + "/cells/mock-a__aut_shoe__strat__diverge/planning.json"));
    CHECK(fs::exists(out + "/cells/mock-a__aut_key__peer1__neutral/seed.jsonl"));

    StageOutcome emb = pipeline.embed();
    CHECK(emb.ok());
    CHECK(emb.succeeded == 12);

    StageOutcome sc = pipeline.score();
    CHECK(sc.ok());
    CHECK(fs::exists(out + "/scores/aut_shoe.csv"));

    StageOutcome an = pipeline.analyze();
    CHECK(an.ok());
    CHECK(an.succeeded == 12);
    CHECK(fs::exists(out + "/analysis/regions/aut_shoe.json"));
    CHECK(fs::exists(out + "/cells/mock-a__aut_shoe__indep__neutral/metrics.json"));

    StageOutcome rep = pipeline.report();
    CHECK(rep.ok());

    // One row per cell in the summary table.
    const std::string summaries = read_file(out + "/report/cell_summaries.csv");
    CHECK(std::count(summaries.begin(), summaries.end(), '\n') == 13); // header + 12 cells
    CHECK(first_line(summaries) ==
          "model,prompt,family,method,strategy,n,d_pair,d_nn,d_med,d_mst,d_ent,quality,"
          "pipeline_tokens,r_tok,usage_proxy_estimated,d_pair_auc,d_ent_auc,"
          "first_hit_d_pair_mean,first_hit_d_pair_not_reached,first_hit_d_ent_mean,"
          "first_hit_d_ent_not_reached");

    CHECK(first_line(read_file(out + "/report/contrasts_prompt.csv")) ==
          "model,prompt,family,method,strategy,kind,metric,value,ci_low,ci_high,replicates");
    CHECK(first_line(read_file(out + "/report/contrasts_design.csv")) ==
          "model,family,method,strategy,kind,metric,value,ci_low,ci_high,replicates");
    CHECK(first_line(read_file(out + "/report/efficiency.csv")) ==
          "model,prompt,family,method,strategy,metric,delta_per_100k,ci_low,ci_high,replicates");
    CHECK(first_line(read_file(out + "/report/rarefaction_long.csv")) ==
          "model,prompt,family,method,strategy,metric,q,replicate,value");
    CHECK(first_line(read_file(out + "/report/rarefaction_mean.csv")) ==
          "model,prompt,family,method,strategy,metric,q,mean");
    CHECK(fs::exists(out + "/report/run_manifest.json"));

    // r_tok of the baseline rows is exactly 1.
    std::istringstream rows(summaries);
    std::string line;
    std::getline(rows, line);
    int baseline_rows = 0;
    while (std::getline(rows, line)) {
        if (line.find(",indep,neutral,") != std::string::npos) {
            baseline_rows++;
            std::vector<std::string> fields;
            std::istringstream fs_(line);
            std::string f;
            while (std::getline(fs_, f, ',')) fields.push_back(f);
            CHECK(fields[13] == "1"); // r_tok column
        }
    }
    CHECK(baseline_rows == 2);
    fs::remove_all(out);
}

TEST_CASE("rerunning generate performs zero new backend calls") {
    const std::string out = fresh_dir("resume");
    Pipeline pipeline(mini_config(out));
    auto counting = std::make_shared<CountingBackend>(7);
    pipeline.set_backend_for_testing(counting);

    StageOutcome first = pipeline.generate();
    CHECK(first.ok());
    const int calls_after_first = counting->calls.load();
    CHECK(calls_after_first > 0);

    StageOutcome second = pipeline.generate();
    CHECK(second.ok());
    CHECK(second.skipped == 12);
    CHECK(counting->calls.load() == calls_after_first);
    fs::remove_all(out);
}

TEST_CASE("killed runs resume with only the missing cells executed") {
    const std::string out = fresh_dir("faultinject");
    Pipeline pipeline(mini_config(out));
    auto counting = std::make_shared<CountingBackend>(7);
    pipeline.set_backend_for_testing(counting);

    CHECK(pipeline.generate().ok());

    // Simulate a mid-run kill: one cell loses its evaluated pool, another
    // loses everything.
    fs::remove(out + "/cells/mock-a__aut_shoe__peer1__diverge/evaluated.jsonl");
    fs::remove_all(out + "/cells/mock-a__aut_key__strat__neutral");

    const int before = counting->calls.load();
    StageOutcome resumed = pipeline.generate(StageOptions{.resume = true});
    CHECK(resumed.ok());
    CHECK(resumed.skipped == 10);
    CHECK(resumed.succeeded == 2);
    CHECK(counting->calls.load() > before);

    // Regenerated artifacts are identical to an untouched clean run.
    const std::string clean = fresh_dir("faultinject_clean");
    RunConfig clean_cfg = mini_config(clean);
    Pipeline clean_pipeline(clean_cfg);
    CHECK(clean_pipeline.generate().ok());

    for (const char* rel : {"cells/mock-a__aut_shoe__peer1__diverge/evaluated.jsonl",
                            "cells/mock-a__aut_key__strat__neutral/evaluated.jsonl"}) {
        // Same bytes except the config-hash line content (same config -> same hash).
        CHECK(read_file(fs::path(out) / rel) == read_file(fs::path(clean) / rel));
    }
    fs::remove_all(out);
    fs::remove_all(clean);
}

TEST_CASE("stage ordering is enforced with stage-naming errors") {
    const std::string out = fresh_dir("ordering");
    Pipeline pipeline(mini_config(out));

    CHECK_THROWS_WITH_AS(pipeline.embed(), doctest::Contains("generate"), Error);
    CHECK_THROWS_WITH_AS(pipeline.score(), doctest::Contains("generate"), Error);
    CHECK_THROWS_WITH_AS(pipeline.analyze(), doctest::Contains("embed"), Error);
    CHECK_THROWS_WITH_AS(pipeline.report(), doctest::Contains("analyze"), Error);

    CHECK(pipeline.generate().ok());
    CHECK_THROWS_WITH_AS(pipeline.analyze(), doctest::Contains("embed"), Error);
    fs::remove_all(out);
}

TEST_CASE("artifacts from a different config hash are rejected") {
    const std::string out = fresh_dir("hashmix");
    RunConfig cfg = mini_config(out);
    Pipeline pipeline(cfg);
    CHECK(pipeline.generate().ok());
    CHECK(pipeline.embed().ok());
    CHECK(pipeline.score().ok());

    // Same output dir, different seed: a different run configuration.
    RunConfig other = cfg;
    other.seeds.run = 4242;
    Pipeline other_pipeline(other);
    CHECK_THROWS_WITH_AS(other_pipeline.score(), doctest::Contains("config hash"), Error);

    // Generate skips nothing: the cells belong to the old hash and rerun.
    StageOutcome regen = other_pipeline.generate();
    CHECK(regen.skipped == 0);
    CHECK(regen.succeeded == 12);
    fs::remove_all(out);
}

TEST_CASE("only-cells restricts generation to the named coordinates") {
    const std::string out = fresh_dir("onlycells");
    Pipeline pipeline(mini_config(out));
    StageOptions opts;
    opts.only_cells = {"mock-a|aut_shoe|indep|neutral", "mock-a|aut_key|strat|diverge"};
    StageOutcome gen = pipeline.generate(opts);
    CHECK(gen.succeeded == 2);
    CHECK(fs::exists(out + "/cells/mock-a__aut_shoe__indep__neutral/evaluated.jsonl"));
    CHECK(!fs::exists(out + "/cells/mock-a__aut_shoe__indep__diverge"));

    StageOptions none;
    none.only_cells = {"missing|missing|indep|neutral"};
    CHECK_THROWS_AS(pipeline.generate(none), Error);
    fs::remove_all(out);
}

TEST_CASE("failed cells keep partial artifacts and land in failures.json") {
    const std::string out = fresh_dir("failures");
    RunConfig cfg = mini_config(out);
    Pipeline pipeline(cfg);

    // Backend that fails the evaluated stage of one specific cell.
    class SelectiveBackend : public GenerationBackend {
    public:
        std::string id() const override { return "selective"; }
        GenerationResult generate(const PromptPayload& payload, const CallContext& ctx) override {
            if (ctx.cell.method == Method::peer1 && ctx.cell.prompt_id == "aut_key" &&
                ctx.stage == Stage::evaluated && ctx.cell.strategy == Strategy::diverge) {
                throw BackendError("provider exploded");
            }
            return inner.generate(payload, ctx);
        }
        MockBackend inner{7};
    };
    pipeline.set_backend_for_testing(std::make_shared<SelectiveBackend>());

    StageOutcome gen = pipeline.generate();
    CHECK(gen.failed == 1);
    CHECK(gen.succeeded == 11);
    CHECK(exit_code_for(gen) == 2);

    // Partial artifacts preserved: the seed pool was written before the failure.
    CHECK(fs::exists(out + "/cells/mock-a__aut_key__peer1__diverge/seed.jsonl"));
    CHECK(!fs::exists(out + "/cells/mock-a__aut_key__peer1__diverge/evaluated.jsonl"));

    json failures = json::parse(read_file(out + "/failures.json"));
    REQUIRE(failures.contains("generate"));
    CHECK(failures["generate"].size() == 1);
    CHECK(failures["generate"][0]["cell"] == "mock-a|aut_key|peer1|diverge");
    fs::remove_all(out);
}

TEST_CASE("prompt and judge exports write the documented file sets") {
    const std::string out = fresh_dir("export");
    RunConfig cfg = mini_config(fresh_dir("export_run"));
    Pipeline pipeline(cfg);

    pipeline.export_prompts(out + "/prompts");
    CHECK(fs::exists(out + "/prompts/system_shared.txt"));
    CHECK(fs::exists(out + "/prompts/modifier_diverge.txt"));
    CHECK(fs::exists(out + "/prompts/task__story_jungle.txt"));
    CHECK(fs::exists(out + "/prompts/planning__slogan_soda.txt"));
    CHECK(fs::exists(out + "/prompts/prompt__aut_shoe__peer2__diverge.txt"));
    CHECK(fs::exists(out + "/prompts/judge_system.txt"));
    CHECK(fs::exists(out + "/prompts/judge_user__slogan_blood.txt"));

    size_t count = 0;
    for (const auto& e : fs::directory_iterator(out + "/prompts")) {
        (void)e;
        count++;
    }
    CHECK(count == 176);

    pipeline.export_judge_prompts(out + "/judge");
    CHECK(fs::exists(out + "/judge/judge_system.txt"));
    CHECK(fs::exists(out + "/judge/judge_user__slogan_smartphone.txt"));
    const std::string judge_user = read_file(out + "/judge/judge_user__slogan_smartphone.txt");
    CHECK(judge_user.find("{{CANDIDATE_SLOGAN}}") != std::string::npos);
    CHECK(judge_user.find("marketing slogan") != std::string::npos);
    fs::remove_all(out);
}

// ---------------------------------------------------------------------------
// HTTP clients against a local server

TEST_CASE("http backend and embedder speak the wire format") {
    httplib::Server server;
    std::atomic<int> chat_hits{0};

    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        chat_hits++;
        json body = json::parse(req.body);
        REQUIRE(body.at("messages").size() == 2);
        json reply{{"choices",
                    json::array({{{"message",
                                   {{"role", "assistant"},
                                    {"content", "echo: " + body["model"].get<std::string>()}}}}})},
                   {"usage", {{"prompt_tokens", 42}, {"completion_tokens", 17}}}};
        res.set_content(reply.dump(), "application/json");
    });
    server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        json body = json::parse(req.body);
        json data = json::array();
        for (size_t i = 0; i < body.at("input").size(); ++i) {
            data.push_back({{"embedding", {1.0, 2.0, static_cast<double>(i)}}});
        }
        res.set_content(json{{"data", data}}.dump(), "application/json");
    });

    int port = 0;
    std::thread server_thread([&] {
        port = server.bind_to_any_port("127.0.0.1");
        server.listen_after_bind();
    });
    while (!server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(5));

    HttpBackendConfig bc;
    bc.base_url = "http://127.0.0.1:" + std::to_string(port);
    bc.model = "test-model";
    HttpBackend backend(bc);
    CallContext ctx;
    GenerationResult out = backend.generate(PromptPayload{"sys", "user", 1.0, 128}, ctx);
    CHECK(out.text == "echo: test-model");
    CHECK(out.usage.prompt_tokens == 42);
    CHECK(out.usage.completion_tokens == 17);
    CHECK(out.usage.source == UsageSource::backend_reported);
    CHECK(chat_hits.load() == 1);

    HttpEmbedderConfig ec;
    ec.base_url = bc.base_url;
    ec.model = "test-embedder";
    ec.batch_size = 2;
    HttpEmbedder embedder(ec);
    Eigen::MatrixXd vectors = embedder.embed({"a", "b", "c"});
    CHECK(vectors.rows() == 3);
    CHECK(vectors.cols() == 3);
    CHECK(vectors(0, 0) == 1.0);
    CHECK(vectors(2, 2) == 0.0); // batch-local index resets per batch

    server.stop();
    server_thread.join();
}

TEST_CASE("http backend reports retryable failures as BackendError") {
    HttpBackendConfig bc;
    bc.base_url = "http://127.0.0.1:1"; // nothing listens here
    bc.model = "m";
    bc.timeout_seconds = 1;
    HttpBackend backend(bc);
    CallContext ctx;
    CHECK_THROWS_AS(backend.generate(PromptPayload{"s", "u", 1.0, 8}, ctx), BackendError);
}
