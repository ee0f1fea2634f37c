#include "poolforge/prompts.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace poolforge {

using nlohmann::json;

namespace {

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("prompts: cannot open template " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string s = buf.str();
    // Assets are stored as POSIX text files; the trailing newline is not part
    // of the prompt.
    if (!s.empty() && s.back() == '\n') s.pop_back();
    return s;
}

std::string join_segments(const std::vector<std::string>& segments) {
    std::string out;
    for (const auto& seg : segments) {
        if (seg.empty()) continue;
        if (!out.empty()) out += "\n\n";
        out += seg;
    }
    return out;
}

std::string strip_ws(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Lenient recovery for providers that wrap JSON in fences or prose:
// take the substring between the first '{' and the last '}'.
std::string extract_json_object(const std::string& s) {
    size_t b = s.find('{');
    size_t e = s.rfind('}');
    if (b == std::string::npos || e == std::string::npos || e < b) return "";
    return s.substr(b, e - b + 1);
}

} // namespace

std::string render_template(const std::string& text,
                            const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(text.size());
    size_t pos = 0;
    while (pos < text.size()) {
        size_t open = text.find("{{", pos);
        if (open == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        out.append(text, pos, open - pos);
        size_t close = text.find("}}", open + 2);
        if (close == std::string::npos) {
            throw Error("template: unterminated placeholder near offset " + std::to_string(open));
        }
        std::string key = text.substr(open + 2, close - open - 2);
        auto it = values.find(key);
        if (it == values.end()) {
            throw Error("template: no value for placeholder {{" + key + "}}");
        }
        out.append(it->second);
        pos = close + 2;
    }
    return out;
}

PromptKit::PromptKit(TaskManifest manifest, std::string templates_dir)
    : manifest_(std::move(manifest)), templates_dir_(std::move(templates_dir)) {}

std::string PromptKit::load_template(const std::string& name) const {
    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        auto it = template_cache_.find(name);
        if (it != template_cache_.end()) return it->second;
    }
    std::string text = read_text_file(templates_dir_ + "/" + name);
    std::lock_guard<std::mutex> lock(cache_mutex_);
    template_cache_.emplace(name, text);
    return text;
}

int PromptKit::max_output_tokens(Family f) {
    switch (f) {
        case Family::stories: return 2048;
        case Family::aut: return 768;
        case Family::slogans: return 512;
    }
    return 0;
}

std::string PromptKit::task_text(const std::string& prompt_id) const {
    const PromptCondition& cond = manifest_.condition(prompt_id);
    return render_template(load_template(cond.template_name), cond.params);
}

std::string PromptKit::shared_system_text() const {
    return load_template("system_shared.txt");
}

std::string PromptKit::planning_system_text() const {
    return load_template("system_planning.txt");
}

std::string PromptKit::modifier_text(Strategy s) const {
    return load_template(s == Strategy::neutral ? "modifier_neutral.txt" : "modifier_diverge.txt");
}

std::string PromptKit::method_block(const CellCoord& cell, const MethodContext& ctx) const {
    const Method m = cell.method;
    if (m == Method::indep) return "";

    std::string final_sentence;
    if (cell.strategy == Strategy::neutral) {
        final_sentence = load_template("final_neutral.txt");
    } else if (m == Method::strat) {
        final_sentence = load_template("final_diverge_population.txt");
    } else {
        final_sentence = load_template("final_diverge_context.txt");
    }

    std::map<std::string, std::string> values;
    values["FINAL_SENTENCE"] = final_sentence;

    switch (m) {
        case Method::strat: {
            if (!ctx.stratum) throw Error("prompts: strat prompt requires a stratum");
            values["STRATUM_NAME"] = ctx.stratum->name;
            values["STRATUM_DESCRIPTION"] = ctx.stratum->description;
            values["STRATUM_INSTRUCTION"] = ctx.stratum->generation_instruction;
            return render_template(load_template("method_strat.txt"), values);
        }
        case Method::self: {
            if (ctx.anchor_texts.size() != 1) {
                throw Error("prompts: self prompt requires 1 anchor text");
            }
            values["SELF_RESPONSE"] = ctx.anchor_texts[0];
            return render_template(load_template("method_self.txt"), values);
        }
        case Method::peer1: {
            if (ctx.anchor_texts.size() != 2) {
                throw Error("prompts: peer1 prompt requires 2 anchor texts");
            }
            values["SELF_RESPONSE"] = ctx.anchor_texts[0];
            values["PEER_RESPONSE"] = ctx.anchor_texts[1];
            return render_template(load_template("method_peer1.txt"), values);
        }
        case Method::peer2: {
            if (ctx.anchor_texts.size() != 3) {
                throw Error("prompts: peer2 prompt requires 3 anchor texts");
            }
            values["SELF_RESPONSE"] = ctx.anchor_texts[0];
            values["PEER_RESPONSE_1"] = ctx.anchor_texts[1];
            values["PEER_RESPONSE_2"] = ctx.anchor_texts[2];
            return render_template(load_template("method_peer2.txt"), values);
        }
        case Method::repr: {
            if (ctx.anchor_texts.size() != 3) {
                throw Error("prompts: repr prompt requires 3 anchor texts");
            }
            values["ANCHOR_1"] = ctx.anchor_texts[0];
            values["ANCHOR_2"] = ctx.anchor_texts[1];
            values["ANCHOR_3"] = ctx.anchor_texts[2];
            return render_template(load_template("method_repr.txt"), values);
        }
        default:
            return "";
    }
}

PromptPayload PromptKit::build_prompt(const CellCoord& cell, Stage stage,
                                      const MethodContext& ctx) const {
    if (stage == Stage::seed && !is_two_stage(cell.method)) {
        throw Error("prompts: seed stage only exists for two-stage methods");
    }

    PromptPayload p;
    p.system_text = shared_system_text();
    p.temperature = kGenerationTemperature;
    p.max_output_tokens = max_output_tokens(cell.family);

    std::vector<std::string> segments;
    segments.push_back(task_text(cell.prompt_id));
    segments.push_back(modifier_text(cell.strategy));
    // Seed-stage calls use the indep form: no method block.
    if (stage == Stage::evaluated) {
        segments.push_back(method_block(cell, ctx));
    }
    p.user_text = join_segments(segments);
    return p;
}

PromptPayload PromptKit::build_planning_prompt(const std::string& prompt_id, int pool_size) const {
    PromptPayload p;
    p.system_text = planning_system_text();
    p.temperature = kPlanningTemperature;
    p.max_output_tokens = kPlanningMaxTokens;
    p.user_text = render_template(load_template("planning_user.txt"),
                                  {{"POOL_SIZE", std::to_string(pool_size)},
                                   {"TASK", task_text(prompt_id)}});
    return p;
}

std::string PromptKit::judge_system_text() const {
    return load_template("judge_system.txt");
}

std::string PromptKit::judge_user_text(const std::string& prompt_id,
                                       const std::string& candidate_slogan) const {
    const PromptCondition& cond = manifest_.condition(prompt_id);
    if (cond.family != Family::slogans) {
        throw Error("prompts: judge prompt is defined for slogan tasks only");
    }
    return render_template(load_template("judge_user.txt"),
                           {{"TASK_CONTEXT", task_text(prompt_id)},
                            {"CANDIDATE_SLOGAN", candidate_slogan}});
}

StrataParseResult PromptKit::parse_strata(const std::string& raw_text, StrataParseMode mode) {
    StrataParseResult result;
    auto fail = [&](const std::string& msg) { result.errors.push_back(msg); };

    std::string text = strip_ws(raw_text);
    if (mode == StrataParseMode::lenient) {
        std::string inner = extract_json_object(text);
        if (!inner.empty()) text = inner;
    }

    json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
        fail("response is not valid JSON");
        return result;
    }
    if (mode == StrataParseMode::strict) {
        // Bare JSON only: re-serialize boundaries must match the trimmed text.
        if (text.empty() || text.front() != '{' || text.back() != '}') {
            fail("response contains text outside the JSON object");
            return result;
        }
    }
    if (!j.is_object()) {
        fail("top-level JSON value is not an object");
        return result;
    }

    StrataPlan plan;
    if (!j.contains("task_id") || !j["task_id"].is_string() ||
        j["task_id"].get<std::string>().empty()) {
        fail("missing or empty task_id");
    } else {
        plan.task_id = j["task_id"].get<std::string>();
    }

    if (!j.contains("strata") || !j["strata"].is_array()) {
        fail("missing strata array");
        return result;
    }
    const auto& arr = j["strata"];
    if (arr.size() != 5) {
        fail("expected 5 strata, got " + std::to_string(arr.size()));
    }

    std::set<int> ids_seen;
    std::vector<StratumSpec> specs;
    for (size_t i = 0; i < arr.size(); ++i) {
        const auto& e = arr[i];
        const std::string at = "stratum entry " + std::to_string(i) + ": ";
        if (!e.is_object()) {
            fail(at + "not an object");
            continue;
        }
        StratumSpec s;
        if (!e.contains("stratum_id") || !e["stratum_id"].is_number_integer()) {
            fail(at + "missing integer stratum_id");
        } else {
            s.stratum_id = e["stratum_id"].get<int>();
            if (s.stratum_id < 1 || s.stratum_id > 5) fail(at + "stratum_id outside 1..5");
            if (!ids_seen.insert(s.stratum_id).second) {
                fail(at + "duplicate stratum_id " + std::to_string(s.stratum_id));
            }
        }
        auto field = [&](const char* name, std::string& dst) {
            if (!e.contains(name) || !e[name].is_string() || e[name].get<std::string>().empty()) {
                fail(at + std::string("missing or empty ") + name);
            } else {
                dst = e[name].get<std::string>();
            }
        };
        field("name", s.name);
        field("description", s.description);
        field("generation_instruction", s.generation_instruction);
        field("why_broad", s.why_broad);
        field("why_distinct", s.why_distinct);
        specs.push_back(std::move(s));
    }

    if (!result.errors.empty()) return result;

    std::sort(specs.begin(), specs.end(),
              [](const StratumSpec& a, const StratumSpec& b) { return a.stratum_id < b.stratum_id; });
    for (size_t i = 0; i < 5; ++i) plan.strata[i] = std::move(specs[i]);
    result.plan = std::move(plan);
    return result;
}

std::string PromptKit::serialize_strata(const StrataPlan& plan) {
    json j;
    j["task_id"] = plan.task_id;
    j["strata"] = json::array();
    for (const auto& s : plan.strata) {
        j["strata"].push_back({{"stratum_id", s.stratum_id},
                               {"name", s.name},
                               {"description", s.description},
                               {"generation_instruction", s.generation_instruction},
                               {"why_broad", s.why_broad},
                               {"why_distinct", s.why_distinct}});
    }
    return j.dump(2);
}

std::vector<int> PromptKit::assign_strata(int n, int k) {
    if (k < 1) throw Error("assign_strata: stratum count must be >= 1");
    if (n < 0) throw Error("assign_strata: negative pool size");
    std::vector<int> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = (i % k) + 1;
    return out;
}

} // namespace poolforge
