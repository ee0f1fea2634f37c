#include "poolforge/quality.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace poolforge {

namespace {

// Curly quotes and apostrophes standardized to their ASCII forms before
// anything else looks at the bytes.
std::string standardize_quotes(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size();) {
        if (i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xe2 &&
            static_cast<unsigned char>(s[i + 1]) == 0x80) {
            const unsigned char b = static_cast<unsigned char>(s[i + 2]);
            if (b == 0x98 || b == 0x99) { // single quotes
                out += '\'';
                i += 3;
                continue;
            }
            if (b == 0x9c || b == 0x9d) { // double quotes
                out += '"';
                i += 3;
                continue;
            }
        }
        out += s[i];
        ++i;
    }
    return out;
}

bool is_word_byte(unsigned char c) {
    return std::isalnum(c) != 0 || c >= 0x80;
}

} // namespace

std::vector<std::string> normalize_slogan(const std::string& text) {
    std::string s = standardize_quotes(text);
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

    // Strip surrounding quotes.
    size_t b = 0;
    size_t e = s.size();
    while (b < e && (std::isspace(static_cast<unsigned char>(s[b])) || s[b] == '"' || s[b] == '\'')) ++b;
    while (e > b && (std::isspace(static_cast<unsigned char>(s[e - 1])) || s[e - 1] == '"' || s[e - 1] == '\'')) --e;
    s = s.substr(b, e - b);

    // Drop punctuation except word-internal apostrophes and hyphens; split on
    // whitespace.
    std::vector<std::string> tokens;
    std::string cur;
    for (size_t i = 0; i < s.size(); ++i) {
        const unsigned char c = static_cast<unsigned char>(s[i]);
        if (std::isspace(c)) {
            if (!cur.empty()) {
                tokens.push_back(cur);
                cur.clear();
            }
        } else if (is_word_byte(c)) {
            cur += s[i];
        } else if ((c == '\'' || c == '-') && !cur.empty() && i + 1 < s.size() &&
                   is_word_byte(static_cast<unsigned char>(s[i + 1]))) {
            cur += s[i];
        }
        // anything else is removed
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

std::string NgramIndex::key_of(std::span<const std::string> gram) {
    std::string key;
    for (size_t i = 0; i < gram.size(); ++i) {
        if (i > 0) key += '\x1f';
        key += gram[i];
    }
    return key;
}

std::vector<std::vector<std::string>> NgramIndex::grams(std::span<const std::string> tokens,
                                                        int order) {
    std::vector<std::vector<std::string>> out;
    if (static_cast<int>(tokens.size()) < order) return out;
    for (size_t i = 0; i + static_cast<size_t>(order) <= tokens.size(); ++i) {
        out.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                         tokens.begin() + static_cast<std::ptrdiff_t>(i) + order);
    }
    return out;
}

NgramIndex NgramIndex::build(const std::vector<std::vector<std::string>>& corpus_tokens) {
    NgramIndex index;
    for (const auto& tokens : corpus_tokens) {
        for (int order = 2; order <= 3; ++order) {
            for (const auto& g : grams(tokens, order)) {
                index.counts_[key_of(g)]++;
                index.totals_[order - 2]++;
            }
        }
    }
    return index;
}

int NgramIndex::count(std::span<const std::string> gram) const {
    auto it = counts_.find(key_of(gram));
    return it == counts_.end() ? 0 : it->second;
}

long NgramIndex::total(int order) const {
    if (order < 2 || order > 3) throw Error("ngram index: only bigrams and trigrams are tracked");
    return totals_[order - 2];
}

double boilerplate_score(const std::vector<std::string>& tokens, const NgramIndex& index,
                         CommonnessMode mode) {
    double means[2] = {0.0, 0.0};
    for (int order = 2; order <= 3; ++order) {
        const auto own = NgramIndex::grams(tokens, order);
        if (own.empty()) continue; // mean over an empty set is 0 by convention

        // Multiplicity of each gram within x itself, for leave-one-out.
        std::unordered_map<std::string, int> own_counts;
        for (const auto& g : own) own_counts[NgramIndex::key_of(g)]++;

        double sum = 0;
        for (const auto& g : own) {
            const int corpus = index.count(g);
            const int self = own_counts[NgramIndex::key_of(g)];
            const int loo = corpus - self;
            if (loo < 0) {
                throw Error("boilerplate_score: slogan is not part of the indexed corpus");
            }
            if (mode == CommonnessMode::count) {
                sum += loo;
            } else {
                const long denom = index.total(order) - static_cast<long>(own.size());
                sum += denom > 0 ? static_cast<double>(loo) / static_cast<double>(denom) : 0.0;
            }
        }
        means[order - 2] = sum / static_cast<double>(own.size());
    }
    return 0.45 * means[0] + 0.55 * means[1];
}

std::vector<double> standardize(std::span<const double> raw) {
    if (raw.empty()) throw Error("standardize: empty task");
    const double n = static_cast<double>(raw.size());
    const double mean = std::accumulate(raw.begin(), raw.end(), 0.0) / n;
    double var = 0;
    for (double v : raw) var += (v - mean) * (v - mean);
    var /= n; // population variance
    const double sigma = std::sqrt(var);

    std::vector<double> z(raw.size(), 0.0);
    if (sigma > 0) {
        for (size_t i = 0; i < raw.size(); ++i) z[i] = (raw[i] - mean) / sigma;
    }
    return z;
}

ScoreTable ingest_scores(const std::string& csv_path, const std::string& scorer_id,
                         const std::string& task_id, const std::vector<std::string>& known_keys,
                         ScoreKind kind) {
    std::ifstream in(csv_path);
    if (!in) throw Error("ingest_scores: cannot open " + csv_path);

    std::set<std::string> known(known_keys.begin(), known_keys.end());
    ScoreTable table;
    table.scorer_id = scorer_id;
    table.task_id = task_id;
    table.kind = kind;

    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1 && line == "output_key,score") continue; // optional header

        const size_t comma = line.rfind(',');
        if (comma == std::string::npos) {
            throw Error("ingest_scores: line " + std::to_string(lineno) + " is not key,score");
        }
        const std::string key = line.substr(0, comma);
        const std::string score_text = line.substr(comma + 1);

        if (!known.count(key)) {
            throw Error("ingest_scores: unknown output key \"" + key + "\"");
        }
        if (table.scores.count(key)) {
            throw Error("ingest_scores: duplicate output key \"" + key + "\"");
        }
        try {
            size_t used = 0;
            const double value = std::stod(score_text, &used);
            if (used != score_text.size()) throw std::invalid_argument(score_text);
            table.scores[key] = value;
        } catch (const std::exception&) {
            throw Error("ingest_scores: non-numeric score \"" + score_text + "\" at line " +
                        std::to_string(lineno));
        }
    }
    return table;
}

std::map<std::string, double> standardized_quality(const ScoreTable& table) {
    // Sorted keys give a stable standardization order.
    std::vector<std::string> keys;
    keys.reserve(table.scores.size());
    for (const auto& [k, v] : table.scores) keys.push_back(k);
    std::sort(keys.begin(), keys.end());

    std::vector<double> raw;
    raw.reserve(keys.size());
    for (const auto& k : keys) raw.push_back(table.scores.at(k));

    std::vector<double> z = standardize(raw);
    const double sign = table.kind == ScoreKind::boilerplate ? -1.0 : 1.0;

    std::map<std::string, double> out;
    for (size_t i = 0; i < keys.size(); ++i) out[keys[i]] = sign * z[i];
    return out;
}

std::map<std::string, double> slogan_quality(const std::vector<std::string>& keys,
                                             const std::vector<std::string>& texts,
                                             CommonnessMode mode) {
    if (keys.size() != texts.size()) throw Error("slogan_quality: keys/texts size mismatch");
    if (keys.empty()) throw Error("slogan_quality: empty task");

    std::vector<std::vector<std::string>> tokens;
    tokens.reserve(texts.size());
    for (const auto& t : texts) tokens.push_back(normalize_slogan(t));

    const NgramIndex index = NgramIndex::build(tokens);

    ScoreTable table;
    table.scorer_id = "slogan_boilerplate";
    table.kind = ScoreKind::boilerplate;
    for (size_t i = 0; i < keys.size(); ++i) {
        table.scores[keys[i]] = boilerplate_score(tokens[i], index, mode);
    }
    return standardized_quality(table);
}

double cell_quality(const Pool& pool, const std::map<std::string, double>& qz) {
    if (pool.n() < 1) throw Error("cell_quality: empty pool");
    double sum = 0;
    std::vector<int> missing;
    for (const auto& rec : pool.records) {
        auto it = qz.find(output_key(pool.cell, rec.slot));
        if (it == qz.end()) {
            missing.push_back(rec.slot);
        } else {
            sum += it->second;
        }
    }
    if (!missing.empty()) {
        std::sort(missing.begin(), missing.end());
        std::string msg = "cell_quality: missing scores for slots";
        for (int s : missing) msg += " " + std::to_string(s);
        throw Error(msg);
    }
    return sum / pool.n();
}

} // namespace poolforge
