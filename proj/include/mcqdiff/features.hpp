#pragma once

#include <map>
#include <string>
#include <vector>

namespace mcqdiff {

/// One named group of columns with per-item values, joined by item id.
struct FeatureBlock {
    std::string name;
    std::vector<std::string> columns;  // fully qualified, e.g. "unc.qwen.first_token"
    std::map<std::string, std::vector<double>> rows;  // item id -> values
};

struct FeatureMatrix {
    std::vector<std::string> schema;
    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;

    size_t width() const { return schema.size(); }
    int column(const std::string& name) const;  // -1 when absent
    const std::vector<double>& row_for(const std::string& id) const;
};

/// Concatenates blocks in the given order; every block must cover every item
/// and schemas must not collide. Item order defines row order; values are
/// joined by id, so reordering items never changes an item's vector.
FeatureMatrix assemble_features(const std::vector<FeatureBlock>& blocks,
                                const std::vector<std::string>& item_ids);

FeatureMatrix select_rows(const FeatureMatrix& m, const std::vector<std::string>& ids);

/// Header line is the schema; rows are keyed by item id in the first column.
std::string feature_matrix_to_csv(const FeatureMatrix& m);
FeatureMatrix feature_matrix_from_csv(const std::string& csv);

}  // namespace mcqdiff
