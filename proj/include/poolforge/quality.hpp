#pragma once

#include "poolforge/core.hpp"

#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace poolforge {

// Slogan normalization: lowercase, standardized quotes/apostrophes, outer
// quotes stripped, punctuation removed except word-internal apostrophes and
// hyphens, whitespace collapsed.
std::vector<std::string> normalize_slogan(const std::string& text);

// Word bigram/trigram counts over one slogan task's corpus. Supports
// leave-one-out subtraction of a slogan's own contribution.
class NgramIndex {
public:
    static NgramIndex build(const std::vector<std::vector<std::string>>& corpus_tokens);

    int count(std::span<const std::string> gram) const;
    // Total n-gram occurrences of one order across the corpus.
    long total(int order) const;

    static std::vector<std::vector<std::string>> grams(std::span<const std::string> tokens,
                                                       int order);
    static std::string key_of(std::span<const std::string> gram);

private:
    std::unordered_map<std::string, int> counts_;
    long totals_[2] = {0, 0}; // bigrams, trigrams
};

enum class CommonnessMode {
    count, // leave-one-out corpus count (default)
    share, // leave-one-out count / leave-one-out total for the order
};

// Phrase-boilerplate score B(x) = 0.45 * mean2 + 0.55 * mean3 of the
// leave-one-out commonness of x's bigrams and trigrams. x must already be
// counted in the index; a mean over an empty n-gram set is 0.
double boilerplate_score(const std::vector<std::string>& tokens, const NgramIndex& index,
                         CommonnessMode mode = CommonnessMode::count);

// Within-task z-scores with population standard deviation; a zero-variance
// task maps everything to 0.
std::vector<double> standardize(std::span<const double> raw);

enum class ScoreKind {
    higher_better, // raw proxy where larger means better quality
    boilerplate,   // template reuse; quality is the negated z-score
};

struct ScoreTable {
    std::string scorer_id;
    std::string task_id;
    ScoreKind kind = ScoreKind::higher_better;
    std::unordered_map<std::string, double> scores; // output_key -> raw score
};

// Parses a two-column CSV (output_key, score) and validates it against the
// known output keys.
ScoreTable ingest_scores(const std::string& csv_path, const std::string& scorer_id,
                         const std::string& task_id,
                         const std::vector<std::string>& known_keys,
                         ScoreKind kind = ScoreKind::higher_better);

// Within-task standardized quality per output. For boilerplate tables the
// sign is flipped so larger always means better.
std::map<std::string, double> standardized_quality(const ScoreTable& table);

// Full lexical slogan pipeline over one task corpus: normalize, index,
// B(x), z-score, negate.
std::map<std::string, double> slogan_quality(const std::vector<std::string>& keys,
                                             const std::vector<std::string>& texts,
                                             CommonnessMode mode = CommonnessMode::count);

// Mean standardized score over a pool's outputs; every output must be scored.
double cell_quality(const Pool& pool, const std::map<std::string, double>& qz);

} // namespace poolforge
