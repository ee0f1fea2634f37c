#pragma once

#include "poolforge/core.hpp"

#include <fstream>
#include <string>
#include <vector>

namespace poolforge {

// Minimal CSV emitter: fields containing commas, quotes, or newlines are
// quoted with doubled inner quotes.
class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw Error("csv: cannot open " + path);
        path_ = path;
    }

    void row(const std::vector<std::string>& fields) {
        for (size_t i = 0; i < fields.size(); ++i) {
            if (i > 0) out_ << ',';
            out_ << escape(fields[i]);
        }
        out_ << '\n';
        if (!out_) throw Error("csv: write failed for " + path_);
    }

    static std::string escape(const std::string& field) {
        if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
        std::string quoted = "\"";
        for (char c : field) {
            if (c == '"') quoted += "\"\"";
            else quoted += c;
        }
        quoted += '"';
        return quoted;
    }

private:
    std::ofstream out_;
    std::string path_;
};

// Fixed-precision float formatting so reruns are byte-identical.
std::string csv_num(double v);

} // namespace poolforge
