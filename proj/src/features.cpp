#include "mcqdiff/features.hpp"

#include <charconv>
#include <set>
#include <sstream>
#include <unordered_map>

#include "mcqdiff/errors.hpp"
#include "mcqdiff/util.hpp"

namespace mcqdiff {

int FeatureMatrix::column(const std::string& name) const {
    for (size_t i = 0; i < schema.size(); ++i)
        if (schema[i] == name) return static_cast<int>(i);
    return -1;
}

const std::vector<double>& FeatureMatrix::row_for(const std::string& id) const {
    for (size_t i = 0; i < ids.size(); ++i)
        if (ids[i] == id) return rows[i];
    throw ValidationError("feature matrix has no row for item '" + id + "'");
}

FeatureMatrix assemble_features(const std::vector<FeatureBlock>& blocks,
                                const std::vector<std::string>& item_ids) {
    FeatureMatrix m;
    std::set<std::string> seen_columns;
    for (const auto& block : blocks) {
        for (const auto& col : block.columns) {
            if (!seen_columns.insert(col).second)
                throw ValidationError("schema collision on column '" + col + "'");
            m.schema.push_back(col);
        }
    }
    m.ids = item_ids;
    m.rows.reserve(item_ids.size());
    for (const auto& id : item_ids) {
        std::vector<double> row;
        row.reserve(m.schema.size());
        for (const auto& block : blocks) {
            auto it = block.rows.find(id);
            if (it == block.rows.end())
                throw ValidationError("block '" + block.name + "' is missing item '" + id + "'");
            if (it->second.size() != block.columns.size())
                throw ValidationError("block '" + block.name + "' row width mismatch for item '" +
                                      id + "'");
            row.insert(row.end(), it->second.begin(), it->second.end());
        }
        m.rows.push_back(std::move(row));
    }
    return m;
}

FeatureMatrix select_rows(const FeatureMatrix& m, const std::vector<std::string>& ids) {
    std::unordered_map<std::string, size_t> index;
    for (size_t i = 0; i < m.ids.size(); ++i) index.emplace(m.ids[i], i);
    FeatureMatrix out;
    out.schema = m.schema;
    for (const auto& id : ids) {
        auto it = index.find(id);
        if (it == index.end())
            throw ValidationError("feature matrix has no row for item '" + id + "'");
        out.ids.push_back(id);
        out.rows.push_back(m.rows[it->second]);
    }
    return out;
}

namespace {

void check_csv_safe(const std::string& s, const char* what) {
    if (s.find_first_of(",\"\n\r") != std::string::npos)
        throw ValidationError(std::string(what) + " contains a CSV delimiter: " + s);
}

}  // namespace

std::string feature_matrix_to_csv(const FeatureMatrix& m) {
    std::string out = "id";
    for (const auto& col : m.schema) {
        check_csv_safe(col, "feature name");
        out += ',';
        out += col;
    }
    out += '\n';
    for (size_t i = 0; i < m.ids.size(); ++i) {
        check_csv_safe(m.ids[i], "item id");
        out += m.ids[i];
        for (double v : m.rows[i]) {
            out += ',';
            out += format_full(v);
        }
        out += '\n';
    }
    return out;
}

FeatureMatrix feature_matrix_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty feature matrix CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split_string(line, ',');
    if (header.empty() || header[0] != "id")
        throw ValidationError("feature matrix CSV must start with an 'id' column");

    FeatureMatrix m;
    m.schema.assign(header.begin() + 1, header.end());
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_string(line, ',');
        if (fields.size() != header.size())
            throw ValidationError("feature matrix CSV line " + std::to_string(line_no) +
                                  ": expected " + std::to_string(header.size()) +
                                  " fields, got " + std::to_string(fields.size()));
        m.ids.push_back(fields[0]);
        std::vector<double> row;
        row.reserve(fields.size() - 1);
        for (size_t i = 1; i < fields.size(); ++i) {
            double v = 0.0;
            auto res = std::from_chars(fields[i].data(), fields[i].data() + fields[i].size(), v);
            if (res.ec != std::errc() || res.ptr != fields[i].data() + fields[i].size())
                throw ValidationError("feature matrix CSV line " + std::to_string(line_no) +
                                      ": bad number '" + fields[i] + "'");
            row.push_back(v);
        }
        m.rows.push_back(std::move(row));
    }
    return m;
}

}  // namespace mcqdiff
