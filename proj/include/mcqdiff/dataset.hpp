#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace mcqdiff {

/// One multiple-choice question: stem, 2-10 pairwise distinct choices, the
/// index of the correct choice, and one or more numeric difficulty labels.
struct MCQItem {
    std::string id;
    std::string stem;
    std::vector<std::string> choices;
    int correct_index = 0;
    std::map<std::string, double> labels;
    std::optional<std::string> group_id;  // shared reading passage, if any
    std::map<std::string, std::string> metadata;

    int n_choices() const { return static_cast<int>(choices.size()); }
    const std::string& correct_choice() const { return choices[static_cast<size_t>(correct_index)]; }
    bool has_label(const std::string& name) const { return labels.count(name) > 0; }
    double label(const std::string& name) const;  // throws ValidationError if absent

    /// Stem and all choices joined by single spaces; the unit of text
    /// vectorization (one document per item).
    std::string full_text() const;
};

class Dataset {
public:
    Dataset() = default;
    /// Validates per-item invariants and rejects duplicate ids.
    static Dataset from_items(std::vector<MCQItem> items);

    const std::vector<MCQItem>& items() const { return items_; }
    size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    bool contains(const std::string& id) const { return index_.count(id) > 0; }
    const MCQItem& by_id(const std::string& id) const;
    int max_choices() const;

private:
    std::vector<MCQItem> items_;  // file order
    std::unordered_map<std::string, size_t> index_;
};

/// Throws ValidationError describing the first violated invariant.
void validate_item(const MCQItem& item);

/// Parses a JSONL dataset file. Every item must carry all `required_labels`.
/// Errors report the 1-based line number.
Dataset parse_dataset(const std::string& path,
                      const std::vector<std::string>& required_labels = {});
Dataset parse_dataset_text(const std::string& text,
                           const std::vector<std::string>& required_labels = {},
                           const std::string& origin = "<memory>");

/// One JSON object per line, keys in sorted order, trailing newline.
std::string serialize_dataset(const Dataset& dataset);

enum class LabelTransform { Identity, Complement };

struct LabelSpec {
    std::string source_label;
    LabelTransform transform = LabelTransform::Identity;
    std::string target_name;
};

LabelSpec label_spec_from_string(const std::string& s);  // "complement:src:target"

/// Adds the target label to every item; the source label is retained.
/// Complement requires source values in [0, 1].
Dataset transform_labels(const Dataset& dataset, const LabelSpec& spec);

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> test;
    uint64_t seed = 0;
    double ratio = 0.7;
    bool group_aware = false;
};

struct FixedSplit {
    std::vector<std::string> train;
    std::vector<std::string> test;
};

/// Seeded train/test partition. Without group awareness |train| is
/// round(ratio*N); with it, whole groups are assigned in shuffled order until
/// the train side first reaches ratio*N items. A fixed split, when given,
/// must partition the dataset's id set exactly.
DatasetSplit split_dataset(const Dataset& dataset, double ratio, uint64_t seed,
                           bool group_aware,
                           const std::optional<FixedSplit>& fixed = std::nullopt);

std::string serialize_split(const DatasetSplit& split);
DatasetSplit parse_split_text(const std::string& json_text);
DatasetSplit parse_split(const std::string& path);

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    size_t count = 0;
};

/// Uniform-width histogram over [min, max] of the observed values; the
/// p_value label always uses the fixed range [0, 1].
std::vector<HistogramBin> difficulty_histogram(const Dataset& dataset,
                                               const std::string& label, int bins);

/// Fraction of items whose label is >= threshold.
double label_share_at_least(const Dataset& dataset, const std::string& label,
                            double threshold);

}  // namespace mcqdiff
