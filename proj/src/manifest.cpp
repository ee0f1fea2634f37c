#include "poolforge/manifest.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace poolforge {

using nlohmann::json;

TaskManifest TaskManifest::load(const std::string& json_path) {
    std::ifstream in(json_path, std::ios::binary);
    if (!in) throw Error("manifest: cannot open " + json_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

TaskManifest TaskManifest::from_json_text(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(std::string("manifest: invalid JSON: ") + e.what());
    }
    if (!j.contains("prompts") || !j["prompts"].is_array()) {
        throw Error("manifest: missing \"prompts\" array");
    }

    TaskManifest m;
    for (const auto& p : j["prompts"]) {
        PromptCondition c;
        c.id = p.at("id").get<std::string>();
        auto fam = parse_family(p.at("family").get<std::string>());
        if (!fam) throw Error("manifest: unknown family for prompt " + c.id);
        c.family = *fam;
        c.template_name = p.at("template").get<std::string>();
        if (p.contains("params")) {
            for (auto it = p["params"].begin(); it != p["params"].end(); ++it) {
                c.params[it.key()] = it.value().get<std::string>();
            }
        }
        for (const auto& existing : m.conditions_) {
            if (existing.id == c.id) throw Error("manifest: duplicate prompt id " + c.id);
        }
        m.conditions_.push_back(std::move(c));
    }
    if (m.conditions_.empty()) throw Error("manifest: no prompt conditions");
    return m;
}

Family TaskManifest::family_of(const std::string& prompt_id) const {
    return condition(prompt_id).family;
}

const PromptCondition& TaskManifest::condition(const std::string& prompt_id) const {
    for (const auto& c : conditions_) {
        if (c.id == prompt_id) return c;
    }
    throw Error("manifest: unknown prompt id \"" + prompt_id + "\"");
}

bool TaskManifest::contains(const std::string& prompt_id) const {
    for (const auto& c : conditions_) {
        if (c.id == prompt_id) return true;
    }
    return false;
}

std::vector<std::string> TaskManifest::prompt_ids() const {
    std::vector<std::string> ids;
    ids.reserve(conditions_.size());
    for (const auto& c : conditions_) ids.push_back(c.id);
    return ids;
}

} // namespace poolforge
