#include "mcqdiff/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mcqdiff/errors.hpp"
#include "mcqdiff/util.hpp"

using nlohmann::json;

namespace mcqdiff {

double MCQItem::label(const std::string& name) const {
    auto it = labels.find(name);
    if (it == labels.end())
        throw ValidationError("item '" + id + "' is missing label '" + name + "'");
    return it->second;
}

std::string MCQItem::full_text() const {
    std::string out = stem;
    for (const auto& c : choices) {
        if (!out.empty()) out += ' ';
        out += c;
    }
    return out;
}

void validate_item(const MCQItem& item) {
    if (item.id.empty()) throw ValidationError("item has empty id");
    if (item.choices.size() < 2 || item.choices.size() > 10)
        throw ValidationError("item '" + item.id + "' must have 2-10 choices, got " +
                              std::to_string(item.choices.size()));
    if (item.correct_index < 0 ||
        item.correct_index >= static_cast<int>(item.choices.size()))
        throw ValidationError("item '" + item.id + "': correct_index " +
                              std::to_string(item.correct_index) + " out of range for " +
                              std::to_string(item.choices.size()) + " choices");
    std::set<std::string> seen;
    for (const auto& c : item.choices) {
        if (!seen.insert(c).second)
            throw ValidationError("item '" + item.id + "' has duplicate choice: " + c);
    }
    for (const auto& [name, value] : item.labels) {
        if (!std::isfinite(value))
            throw ValidationError("item '" + item.id + "': label '" + name +
                                  "' is not finite");
        if (name == "p_value" && (value < 0.0 || value > 1.0))
            throw ValidationError("item '" + item.id + "': p_value " + format_full(value) +
                                  " outside [0,1]");
    }
}

Dataset Dataset::from_items(std::vector<MCQItem> items) {
    Dataset d;
    d.items_ = std::move(items);
    for (size_t i = 0; i < d.items_.size(); ++i) {
        validate_item(d.items_[i]);
        auto [it, inserted] = d.index_.emplace(d.items_[i].id, i);
        (void)it;
        if (!inserted)
            throw ValidationError("duplicate item id: " + d.items_[i].id);
    }
    return d;
}

const MCQItem& Dataset::by_id(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw ValidationError("unknown item id: " + id);
    return items_[it->second];
}

int Dataset::max_choices() const {
    int m = 0;
    for (const auto& item : items_) m = std::max(m, item.n_choices());
    return m;
}

namespace {

MCQItem item_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("item is not a JSON object");
    MCQItem item;
    item.id = j.at("id").get<std::string>();
    item.stem = j.at("stem").get<std::string>();
    for (const auto& c : j.at("choices")) item.choices.push_back(c.get<std::string>());
    if (!j.at("correct_index").is_number_integer())
        throw ValidationError("correct_index must be an integer");
    item.correct_index = j.at("correct_index").get<int>();
    if (j.contains("labels")) {
        for (const auto& [k, v] : j.at("labels").items()) {
            if (!v.is_number())
                throw ValidationError("label '" + k + "' is not numeric");
            item.labels[k] = v.get<double>();
        }
    }
    if (j.contains("group_id") && !j.at("group_id").is_null())
        item.group_id = j.at("group_id").get<std::string>();
    if (j.contains("metadata") && !j.at("metadata").is_null()) {
        for (const auto& [k, v] : j.at("metadata").items())
            item.metadata[k] = v.get<std::string>();
    }
    return item;
}

json item_to_json(const MCQItem& item) {
    json j;
    j["id"] = item.id;
    j["stem"] = item.stem;
    j["choices"] = item.choices;
    j["correct_index"] = item.correct_index;
    j["labels"] = json::object();
    for (const auto& [k, v] : item.labels) j["labels"][k] = v;
    j["group_id"] = item.group_id ? json(*item.group_id) : json(nullptr);
    j["metadata"] = json::object();
    for (const auto& [k, v] : item.metadata) j["metadata"][k] = v;
    return j;
}

}  // namespace

Dataset parse_dataset_text(const std::string& text,
                           const std::vector<std::string>& required_labels,
                           const std::string& origin) {
    std::vector<MCQItem> items;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        MCQItem item;
        try {
            item = item_from_json(json::parse(line));
        } catch (const json::exception& e) {
            throw ValidationError(origin + ":" + std::to_string(line_no) +
                                  ": malformed JSON line: " + e.what());
        }
        try {
            validate_item(item);
            for (const auto& name : required_labels) item.label(name);
        } catch (const ValidationError& e) {
            throw ValidationError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
        items.push_back(std::move(item));
    }
    try {
        return Dataset::from_items(std::move(items));
    } catch (const ValidationError& e) {
        throw ValidationError(origin + ": " + e.what());
    }
}

Dataset parse_dataset(const std::string& path,
                      const std::vector<std::string>& required_labels) {
    return parse_dataset_text(read_file(path), required_labels, path);
}

std::string serialize_dataset(const Dataset& dataset) {
    std::string out;
    for (const auto& item : dataset.items()) {
        out += item_to_json(item).dump();
        out += '\n';
    }
    return out;
}

LabelSpec label_spec_from_string(const std::string& s) {
    auto parts = split_string(s, ':');
    if (parts.size() != 3)
        throw ValidationError("label spec must be '<transform>:<source>:<target>', got: " + s);
    LabelSpec spec;
    if (parts[0] == "identity")
        spec.transform = LabelTransform::Identity;
    else if (parts[0] == "complement")
        spec.transform = LabelTransform::Complement;
    else
        throw ValidationError("unknown label transform: " + parts[0]);
    spec.source_label = parts[1];
    spec.target_name = parts[2];
    return spec;
}

Dataset transform_labels(const Dataset& dataset, const LabelSpec& spec) {
    std::vector<MCQItem> items = dataset.items();
    for (auto& item : items) {
        double v = item.label(spec.source_label);
        double out = v;
        if (spec.transform == LabelTransform::Complement) {
            if (v < 0.0 || v > 1.0)
                throw ValidationError("item '" + item.id + "': complement of label '" +
                                      spec.source_label + "' = " + format_full(v) +
                                      " outside [0,1]");
            out = 1.0 - v;
        }
        item.labels[spec.target_name] = out;
    }
    return Dataset::from_items(std::move(items));
}

DatasetSplit split_dataset(const Dataset& dataset, double ratio, uint64_t seed,
                           bool group_aware, const std::optional<FixedSplit>& fixed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw ValidationError("split ratio must lie in (0,1), got " + format_full(ratio));

    DatasetSplit split;
    split.seed = seed;
    split.ratio = ratio;
    split.group_aware = group_aware;

    if (fixed) {
        std::set<std::string> seen;
        for (const auto& side : {&fixed->train, &fixed->test}) {
            for (const auto& id : *side) {
                if (!dataset.contains(id))
                    throw ValidationError("fixed split references unknown id: " + id);
                if (!seen.insert(id).second)
                    throw ValidationError("fixed split lists id twice: " + id);
            }
        }
        if (seen.size() != dataset.size())
            throw ValidationError("fixed split does not cover the dataset (" +
                                  std::to_string(seen.size()) + " of " +
                                  std::to_string(dataset.size()) + " ids)");
        split.train = fixed->train;
        split.test = fixed->test;
        return split;
    }

    const size_t n = dataset.size();
    std::set<std::string> train_ids;
    std::mt19937_64 rng(seed);

    if (!group_aware) {
        std::vector<std::string> ids;
        ids.reserve(n);
        for (const auto& item : dataset.items()) ids.push_back(item.id);
        deterministic_shuffle(ids, rng);
        size_t n_train = static_cast<size_t>(std::llround(ratio * static_cast<double>(n)));
        for (size_t i = 0; i < n_train && i < ids.size(); ++i) train_ids.insert(ids[i]);
    } else {
        // whole groups, shuffled, assigned to train until it first reaches ratio*N
        std::vector<std::vector<std::string>> groups;
        std::unordered_map<std::string, size_t> group_index;
        for (const auto& item : dataset.items()) {
            std::string key = item.group_id ? ("g:" + *item.group_id) : ("i:" + item.id);
            auto it = group_index.find(key);
            if (it == group_index.end()) {
                group_index.emplace(key, groups.size());
                groups.push_back({item.id});
            } else {
                groups[it->second].push_back(item.id);
            }
        }
        deterministic_shuffle(groups, rng);
        const double target = ratio * static_cast<double>(n);
        for (const auto& g : groups) {
            if (static_cast<double>(train_ids.size()) >= target) break;
            for (const auto& id : g) train_ids.insert(id);
        }
    }

    for (const auto& item : dataset.items()) {
        if (train_ids.count(item.id))
            split.train.push_back(item.id);
        else
            split.test.push_back(item.id);
    }
    return split;
}

std::string serialize_split(const DatasetSplit& split) {
    json j;
    j["train"] = split.train;
    j["test"] = split.test;
    j["seed"] = split.seed;
    j["ratio"] = split.ratio;
    return j.dump();
}

DatasetSplit parse_split_text(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed split file: ") + e.what());
    }
    DatasetSplit split;
    for (const auto& id : j.at("train")) split.train.push_back(id.get<std::string>());
    for (const auto& id : j.at("test")) split.test.push_back(id.get<std::string>());
    if (j.contains("seed")) split.seed = j.at("seed").get<uint64_t>();
    if (j.contains("ratio")) split.ratio = j.at("ratio").get<double>();
    return split;
}

DatasetSplit parse_split(const std::string& path) {
    return parse_split_text(read_file(path));
}

std::vector<HistogramBin> difficulty_histogram(const Dataset& dataset,
                                               const std::string& label, int bins) {
    if (bins < 1) throw ValidationError("histogram needs at least 1 bin");
    std::vector<double> values;
    values.reserve(dataset.size());
    for (const auto& item : dataset.items()) values.push_back(item.label(label));

    double lo = 0.0, hi = 1.0;
    if (label != "p_value") {
        if (values.empty()) {
            hi = 0.0;
        } else {
            lo = *std::min_element(values.begin(), values.end());
            hi = *std::max_element(values.begin(), values.end());
        }
    }

    std::vector<HistogramBin> out(static_cast<size_t>(bins));
    const double width = (hi - lo) / bins;
    for (int b = 0; b < bins; ++b) {
        out[static_cast<size_t>(b)].lo = lo + width * b;
        out[static_cast<size_t>(b)].hi = (b == bins - 1) ? hi : lo + width * (b + 1);
    }
    for (double v : values) {
        int b = 0;
        if (hi > lo) {
            b = static_cast<int>((v - lo) / (hi - lo) * bins);
            b = std::clamp(b, 0, bins - 1);
        }
        ++out[static_cast<size_t>(b)].count;
    }
    return out;
}

double label_share_at_least(const Dataset& dataset, const std::string& label,
                            double threshold) {
    if (dataset.empty()) return 0.0;
    size_t hits = 0;
    for (const auto& item : dataset.items())
        if (item.label(label) >= threshold) ++hits;
    return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

}  // namespace mcqdiff
