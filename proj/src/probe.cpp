#include "mcqdiff/probe.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mcqdiff/errors.hpp"
#include "mcqdiff/prompt.hpp"
#include "mcqdiff/util.hpp"

using nlohmann::json;

namespace mcqdiff {

namespace {

std::string cache_key(const std::string& item_id, const std::string& model_name,
                      const std::vector<int>& permutation) {
    std::string key = item_id;
    key += '\x1f';
    key += model_name;
    key += '\x1f';
    for (size_t i = 0; i < permutation.size(); ++i) {
        if (i) key += ',';
        key += std::to_string(permutation[i]);
    }
    return key;
}

json record_to_json(const ProbeRecord& r) {
    json j;
    j["item_id"] = r.item_id;
    j["model_name"] = r.model_name;
    j["permutation"] = r.permutation;
    j["letter_probs"] = json::object();
    for (const auto& [letter, prob] : r.letter_probs)
        j["letter_probs"][std::string(1, letter)] = prob;
    j["selected_letter"] = std::string(1, r.selected_letter);
    j["raw_response_digest"] = r.raw_response_digest;
    return j;
}

ProbeRecord record_from_json(const json& j) {
    ProbeRecord r;
    r.item_id = j.at("item_id").get<std::string>();
    r.model_name = j.at("model_name").get<std::string>();
    for (const auto& v : j.at("permutation")) r.permutation.push_back(v.get<int>());
    for (const auto& [k, v] : j.at("letter_probs").items()) {
        if (k.size() != 1) throw ValidationError("bad letter key in probe cache: " + k);
        r.letter_probs[k[0]] = v.get<double>();
    }
    std::string sel = j.at("selected_letter").get<std::string>();
    if (sel.size() != 1) throw ValidationError("bad selected_letter in probe cache");
    r.selected_letter = sel[0];
    if (j.contains("raw_response_digest"))
        r.raw_response_digest = j.at("raw_response_digest").get<std::string>();
    return r;
}

void validate_record_for_item(const MCQItem& item, const ProbeRecord& r) {
    const int n = item.n_choices();
    if (static_cast<int>(r.permutation.size()) != n)
        throw ValidationError("probe record for item '" + item.id +
                              "' has wrong permutation size");
    std::set<int> seen(r.permutation.begin(), r.permutation.end());
    if (static_cast<int>(seen.size()) != n || *seen.begin() != 0 || *seen.rbegin() != n - 1)
        throw ValidationError("probe record for item '" + item.id +
                              "' has an invalid permutation");
    for (const auto& [letter, prob] : r.letter_probs) {
        if (letter < 'A' || letter >= static_cast<char>('A' + n))
            throw ValidationError("probe record for item '" + item.id +
                                  "' assigns probability to unknown letter " +
                                  std::string(1, letter));
        if (prob < 0.0 || prob > 1.0 || !std::isfinite(prob))
            throw ValidationError("probe record for item '" + item.id +
                                  "' has probability outside [0,1]");
    }
}

double prob_at_position(const ProbeRecord& r, int position) {
    auto it = r.letter_probs.find(static_cast<char>('A' + position));
    return it == r.letter_probs.end() ? 0.0 : it->second;
}

}  // namespace

int select_position(const std::map<char, double>& letter_probs,
                    const std::vector<int>& permutation) {
    const int n = static_cast<int>(permutation.size());
    double best = -1.0;
    int best_pos = 0;
    for (int pos = 0; pos < n; ++pos) {
        auto it = letter_probs.find(static_cast<char>('A' + pos));
        double p = it == letter_probs.end() ? 0.0 : it->second;
        if (p > best ||
            (p == best && permutation[pos] < permutation[best_pos])) {
            best = p;
            best_pos = pos;
        }
    }
    return best_pos;
}

std::vector<double> normalized_choice_means(const MCQItem& item,
                                            const std::vector<ProbeRecord>& records) {
    if (records.empty())
        throw ValidationError("no probe records for item '" + item.id + "'");
    const int n = item.n_choices();
    std::vector<double> mean(static_cast<size_t>(n), 0.0);
    for (const auto& r : records) {
        validate_record_for_item(item, r);
        for (int pos = 0; pos < n; ++pos)
            mean[static_cast<size_t>(r.permutation[static_cast<size_t>(pos)])] +=
                prob_at_position(r, pos);
    }
    for (double& m : mean) m /= static_cast<double>(records.size());
    double sum = 0.0;
    for (double m : mean) sum += m;
    if (sum > 0.0) {
        for (double& m : mean) m /= sum;
    } else {
        for (double& m : mean) m = 1.0 / static_cast<double>(n);
    }
    return mean;
}

UncertaintyFeatures compute_uncertainty_features(const MCQItem& item,
                                                 const std::vector<ProbeRecord>& records) {
    std::set<std::vector<int>> perms;
    for (const auto& r : records) {
        if (!perms.insert(r.permutation).second)
            throw ValidationError("duplicate ordering in probe records for item '" +
                                  item.id + "'");
    }

    auto norm = normalized_choice_means(item, records);

    size_t correct_selections = 0;
    for (const auto& r : records) {
        int pos = select_position(r.letter_probs, r.permutation);
        if (r.permutation[static_cast<size_t>(pos)] == item.correct_index)
            ++correct_selections;
    }

    UncertaintyFeatures out;
    out.item_id = item.id;
    out.model_name = records.front().model_name;
    out.first_token = norm[static_cast<size_t>(item.correct_index)];
    out.order_sensitivity =
        static_cast<double>(correct_selections) / static_cast<double>(records.size());
    out.n_orderings = static_cast<int>(records.size());
    return out;
}

ProbeCache::ProbeCache(std::string path) : path_(std::move(path)) {
    if (file_exists(path_)) {
        std::istringstream in(read_file(path_));
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                ProbeRecord r = record_from_json(json::parse(line));
                records_[cache_key(r.item_id, r.model_name, r.permutation)] = std::move(r);
            } catch (const json::exception& e) {
                throw ValidationError(path_ + ":" + std::to_string(line_no) +
                                      ": malformed probe cache line: " + e.what());
            }
        }
    } else {
        // fail early if the cache location is not writable
        write_file(path_, "");
    }
}

const ProbeRecord* ProbeCache::find(const std::string& item_id,
                                    const std::string& model_name,
                                    const std::vector<int>& permutation) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = records_.find(cache_key(item_id, model_name, permutation));
    return it == records_.end() ? nullptr : &it->second;
}

void ProbeCache::put(const ProbeRecord& record) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = cache_key(record.item_id, record.model_name, record.permutation);
    if (records_.count(key)) return;
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw ValidationError("cannot append to probe cache: " + path_);
    out << record_to_json(record).dump() << '\n';
    out.flush();
    records_.emplace(std::move(key), record);
}

size_t ProbeCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return records_.size();
}

std::vector<ProbeRecord> ProbeCache::records_for(const std::string& item_id,
                                                 const std::string& model_name) const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<ProbeRecord> out;
    for (const auto& [key, record] : records_) {
        if (record.item_id == item_id && record.model_name == model_name)
            out.push_back(record);
    }
    return out;
}

namespace {

struct ProbeTask {
    const MCQItem* item;
    const Ordering* ordering;
};

// runs the endpoint's pending tasks with bounded parallelism; completed
// records land in the cache regardless of how the run ends
void run_endpoint_tasks(const ModelEndpoint& endpoint, const std::vector<ProbeTask>& tasks,
                        ProbeCache& cache) {
    if (tasks.empty()) return;
    std::atomic<size_t> next{0};
    std::atomic<bool> abort{false};
    std::mutex error_mutex;
    std::string first_error;

    auto worker = [&]() {
        while (!abort.load()) {
            size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const ProbeTask& task = tasks[i];
            try {
                std::string prompt = render_prompt(*task.item, *task.ordering);
                auto letters = choice_letters(task.item->n_choices());
                auto dist = query_first_token_distribution(endpoint, prompt, letters);
                ProbeRecord record;
                record.item_id = task.item->id;
                record.model_name = endpoint.name;
                record.permutation = task.ordering->permutation;
                record.letter_probs = dist.letter_probs;
                int pos = select_position(record.letter_probs, record.permutation);
                record.selected_letter = static_cast<char>('A' + pos);
                record.raw_response_digest = dist.raw_digest;
                cache.put(record);
            } catch (const std::exception& e) {
                {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (first_error.empty()) first_error = e.what();
                }
                abort.store(true);
                return;
            }
        }
    };

    size_t n_threads = std::min<size_t>(static_cast<size_t>(endpoint.max_inflight),
                                        tasks.size());
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    if (!first_error.empty())
        throw EndpointError("probing aborted (cache is resumable): " + first_error);
}

std::vector<ProbeRecord> expected_records(const MCQItem& item, const std::string& model,
                                          const std::vector<Ordering>& orderings,
                                          const ProbeCache& cache) {
    std::vector<ProbeRecord> records;
    records.reserve(orderings.size());
    for (const auto& ordering : orderings) {
        const ProbeRecord* r = cache.find(item.id, model, ordering.permutation);
        if (!r)
            throw ValidationError("missing ordering record for item '" + item.id +
                                  "', model '" + model + "'");
        records.push_back(*r);
    }
    return records;
}

}  // namespace

UncertaintyMatrix probe_dataset(const Dataset& dataset,
                                const std::vector<ModelEndpoint>& endpoints,
                                const std::string& cache_path, uint64_t seed,
                                int orderings_count) {
    if (endpoints.empty()) throw ValidationError("no inference endpoints configured");
    const int max_choices = dataset.max_choices();
    for (const auto& e : endpoints) {
        if (e.top_k < 2 * max_choices)
            throw ValidationError("endpoint '" + e.name + "': top_k " +
                                  std::to_string(e.top_k) + " < 2 x " +
                                  std::to_string(max_choices) +
                                  " choices; letter variants would not fit");
    }

    ProbeCache cache(cache_path);

    // orderings are generated once per item and shared across all models
    std::vector<std::vector<Ordering>> orderings;
    orderings.reserve(dataset.size());
    for (const auto& item : dataset.items())
        orderings.push_back(orderings_for_item(item, seed, orderings_count));

    for (const auto& endpoint : endpoints) {
        std::vector<ProbeTask> tasks;
        for (size_t i = 0; i < dataset.size(); ++i) {
            const MCQItem& item = dataset.items()[i];
            for (const Ordering& ordering : orderings[i]) {
                if (!cache.find(item.id, endpoint.name, ordering.permutation))
                    tasks.push_back(ProbeTask{&item, &ordering});
            }
        }
        run_endpoint_tasks(endpoint, tasks, cache);
    }

    UncertaintyMatrix m;
    for (const auto& e : endpoints) {
        m.model_names.push_back(e.name);
        m.columns.push_back("unc." + e.name + ".first_token");
        m.columns.push_back("unc." + e.name + ".order_sensitivity");
    }
    for (size_t i = 0; i < dataset.size(); ++i) {
        const MCQItem& item = dataset.items()[i];
        std::vector<double> row;
        row.reserve(endpoints.size() * 2);
        for (const auto& e : endpoints) {
            auto records = expected_records(item, e.name, orderings[i], cache);
            auto features = compute_uncertainty_features(item, records);
            row.push_back(features.first_token);
            row.push_back(features.order_sensitivity);
        }
        m.item_ids.push_back(item.id);
        m.rows.push_back(std::move(row));
    }
    return m;
}

std::string uncertainty_matrix_to_csv(const UncertaintyMatrix& m) {
    std::string out = "id";
    for (const auto& c : m.columns) out += "," + c;
    out += '\n';
    for (size_t i = 0; i < m.item_ids.size(); ++i) {
        out += m.item_ids[i];
        for (double v : m.rows[i]) out += "," + format_full(v);
        out += '\n';
    }
    return out;
}

std::vector<ModelCorrectness> correctness_report(const Dataset& dataset,
                                                 const std::vector<ModelEndpoint>& endpoints,
                                                 const ProbeCache& cache, uint64_t seed,
                                                 int orderings_count) {
    std::vector<ModelCorrectness> rows;
    for (const auto& endpoint : endpoints) {
        ModelCorrectness row;
        row.model_name = endpoint.name;
        double ft_correct_sum = 0.0, ft_incorrect_sum = 0.0;
        double os_correct_sum = 0.0, os_incorrect_sum = 0.0;

        for (const auto& item : dataset.items()) {
            auto orderings = orderings_for_item(item, seed, orderings_count);
            auto records = expected_records(item, endpoint.name, orderings, cache);
            const int n = item.n_choices();

            // majority vote over per-ordering selections, ties to lowest index
            std::vector<size_t> votes(static_cast<size_t>(n), 0);
            for (const auto& r : records) {
                int pos = select_position(r.letter_probs, r.permutation);
                ++votes[static_cast<size_t>(r.permutation[static_cast<size_t>(pos)])];
            }
            int chosen = 0;
            for (int c = 1; c < n; ++c)
                if (votes[static_cast<size_t>(c)] > votes[static_cast<size_t>(chosen)])
                    chosen = c;

            auto norm = normalized_choice_means(item, records);
            double ft_certainty = norm[static_cast<size_t>(chosen)];
            double os_certainty = static_cast<double>(votes[static_cast<size_t>(chosen)]) /
                                  static_cast<double>(records.size());

            if (chosen == item.correct_index) {
                ++row.n_correct;
                ft_correct_sum += ft_certainty;
                os_correct_sum += os_certainty;
            } else {
                ++row.n_incorrect;
                ft_incorrect_sum += ft_certainty;
                os_incorrect_sum += os_certainty;
            }
        }

        const size_t total = row.n_correct + row.n_incorrect;
        row.correctness =
            total == 0 ? 0.0 : static_cast<double>(row.n_correct) / static_cast<double>(total);
        if (row.n_correct > 0) {
            row.first_token_correct = ft_correct_sum / static_cast<double>(row.n_correct);
            row.order_correct = os_correct_sum / static_cast<double>(row.n_correct);
        }
        if (row.n_incorrect > 0) {
            row.first_token_incorrect =
                ft_incorrect_sum / static_cast<double>(row.n_incorrect);
            row.order_incorrect = os_incorrect_sum / static_cast<double>(row.n_incorrect);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

std::string opt3(const std::optional<double>& v) {
    return v ? format_fixed(*v, 3) : std::string("-");
}

}  // namespace

std::string render_correctness_row(const ModelCorrectness& row) {
    std::string out = "| " + row.model_name + " | " + format_fixed(row.correctness, 3);
    out += " | " + opt3(row.first_token_correct) + " / " + opt3(row.first_token_incorrect);
    out += " | " + opt3(row.order_correct) + " / " + opt3(row.order_incorrect) + " |";
    return out;
}

std::string render_correctness_report(const std::vector<ModelCorrectness>& rows) {
    std::string out =
        "| Model | Correctness | 1st Token (correct/incorrect) | "
        "Choice Order (correct/incorrect) |\n";
    out += "|---|---|---|---|\n";
    for (const auto& row : rows) out += render_correctness_row(row) + "\n";
    return out;
}

}  // namespace mcqdiff
