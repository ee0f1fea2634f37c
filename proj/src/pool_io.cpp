#include "poolforge/pool_io.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace poolforge {

using nlohmann::json;

namespace {

json cell_to_json(const CellCoord& cell) {
    return json{{"model_id", cell.model_id},
                {"prompt_id", cell.prompt_id},
                {"family", to_string(cell.family)},
                {"method", to_string(cell.method)},
                {"strategy", to_string(cell.strategy)}};
}

CellCoord cell_from_json(const json& j) {
    CellCoord cell;
    cell.model_id = j.at("model_id").get<std::string>();
    cell.prompt_id = j.at("prompt_id").get<std::string>();
    auto family = parse_family(j.at("family").get<std::string>());
    auto method = parse_method(j.at("method").get<std::string>());
    auto strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (!family || !method || !strategy) throw Error("pool io: bad cell coordinate");
    cell.family = *family;
    cell.method = *method;
    cell.strategy = *strategy;
    return cell;
}

json record_to_json_obj(const OutputRecord& rec) {
    json j{{"slot", rec.slot},
           {"text", rec.text},
           {"usage",
            {{"prompt_tokens", rec.usage.prompt_tokens},
             {"completion_tokens", rec.usage.completion_tokens},
             {"source", to_string(rec.usage.source)}}}};
    if (rec.stratum_id) j["stratum_id"] = *rec.stratum_id;
    if (rec.anchor_slots) j["anchor_slots"] = *rec.anchor_slots;
    return j;
}

OutputRecord record_from_json_obj(const json& j, const CellCoord& cell, Stage stage) {
    OutputRecord rec;
    rec.cell = cell;
    rec.stage = stage;
    rec.slot = j.at("slot").get<int>();
    rec.text = j.at("text").get<std::string>();
    const auto& u = j.at("usage");
    rec.usage.prompt_tokens = u.at("prompt_tokens").get<std::int64_t>();
    rec.usage.completion_tokens = u.at("completion_tokens").get<std::int64_t>();
    auto source = parse_usage_source(u.at("source").get<std::string>());
    if (!source) throw Error("pool io: bad usage source");
    rec.usage.source = *source;
    if (j.contains("stratum_id")) rec.stratum_id = j["stratum_id"].get<int>();
    if (j.contains("anchor_slots")) rec.anchor_slots = j["anchor_slots"].get<std::vector<int>>();
    return rec;
}

} // namespace

std::string record_to_json(const OutputRecord& rec) {
    return record_to_json_obj(rec).dump();
}

OutputRecord record_from_json(const std::string& line, const CellCoord& cell, Stage stage) {
    return record_from_json_obj(json::parse(line), cell, stage);
}

void save_pool(const std::string& path, const Pool& pool, const std::string& config_hash) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error("save_pool: cannot open " + tmp);
        json header{{"schema", "poolforge.pool.v1"},
                    {"cell", cell_to_json(pool.cell)},
                    {"stage", to_string(pool.stage)},
                    {"n", pool.n()},
                    {"config_hash", config_hash}};
        out << header.dump() << "\n";
        for (const auto& rec : pool.records) {
            out << record_to_json_obj(rec).dump() << "\n";
        }
        if (!out) throw Error("save_pool: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

LoadedPool load_pool(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("load_pool: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw Error("load_pool: empty file " + path);
    json header = json::parse(line);
    if (header.value("schema", "") != "poolforge.pool.v1") {
        throw Error("load_pool: unknown schema in " + path);
    }

    LoadedPool loaded;
    loaded.config_hash = header.value("config_hash", "");
    loaded.pool.cell = cell_from_json(header.at("cell"));
    auto stage = parse_stage(header.at("stage").get<std::string>());
    if (!stage) throw Error("load_pool: bad stage in " + path);
    loaded.pool.stage = *stage;

    const int n = header.at("n").get<int>();
    loaded.pool.records.reserve(static_cast<size_t>(n));
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        loaded.pool.records.push_back(
            record_from_json_obj(json::parse(line), loaded.pool.cell, loaded.pool.stage));
    }
    if (loaded.pool.n() != n) {
        throw Error("load_pool: header says " + std::to_string(n) + " records, found " +
                    std::to_string(loaded.pool.n()) + " in " + path);
    }
    return loaded;
}

} // namespace poolforge
