#include "mcqdiff/report.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "mcqdiff/errors.hpp"
#include "mcqdiff/util.hpp"

using nlohmann::json;

namespace mcqdiff {

ReportFormat report_format_from_name(const std::string& name) {
    if (name == "csv") return ReportFormat::Csv;
    if (name == "markdown" || name == "md") return ReportFormat::Markdown;
    throw ValidationError("unknown report format: " + name);
}

namespace {

std::vector<std::string> ordered_unique(const std::vector<ExperimentResult>& results,
                                        bool datasets) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& r : results) {
        const std::string& key = datasets ? r.dataset_label : r.method_label;
        if (seen.insert(key).second) out.push_back(key);
    }
    return out;
}

// per-dataset minimal mean RMSE among successful rows
std::map<std::string, double> best_per_dataset(const std::vector<ExperimentResult>& results) {
    std::map<std::string, double> best;
    for (const auto& r : results) {
        if (!r.error.empty()) continue;
        auto it = best.find(r.dataset_label);
        if (it == best.end() || r.mean_rmse < it->second) best[r.dataset_label] = r.mean_rmse;
    }
    return best;
}

std::string render_csv(const GridReport& report) {
    auto best = best_per_dataset(report.results);
    std::string out = "method,dataset,mean_rmse,std_rmse,dummy_rmse,repetitions,best,error\n";
    for (const auto& r : report.results) {
        out += r.method_label + "," + r.dataset_label + ",";
        if (r.error.empty()) {
            bool is_best = best.count(r.dataset_label) && r.mean_rmse == best[r.dataset_label];
            out += format_fixed(r.mean_rmse, 4) + "," + format_fixed(r.std_rmse, 4) + "," +
                   format_fixed(r.dummy_rmse, 4) + "," +
                   std::to_string(r.per_rep_rmse.size()) + "," +
                   (is_best ? "true" : "false") + ",";
        } else {
            std::string msg = r.error;
            for (char& c : msg)
                if (c == ',' || c == '\n' || c == '\r') c = ';';
            out += ",,,,false," + msg;
        }
        out += '\n';
    }
    return out;
}

std::string render_markdown(const GridReport& report) {
    const auto methods = ordered_unique(report.results, false);
    const auto datasets = ordered_unique(report.results, true);
    const auto best = best_per_dataset(report.results);

    // one result per (method, dataset); later duplicates are ignored
    std::map<std::pair<std::string, std::string>, const ExperimentResult*> cell;
    for (const auto& r : report.results)
        cell.emplace(std::make_pair(r.method_label, r.dataset_label), &r);

    std::string out = "| Method |";
    for (const auto& d : datasets) out += " " + d + " |";
    out += "\n|---|";
    for (size_t i = 0; i < datasets.size(); ++i) out += "---|";
    out += "\n";

    // baselines: the per-dataset dummy plus any static reference rows
    out += "| Dummy Regressor |";
    for (const auto& d : datasets) {
        std::string value = "-";
        for (const auto& m : methods) {
            auto it = cell.find({m, d});
            if (it != cell.end() && it->second->error.empty()) {
                value = format_fixed(it->second->dummy_rmse, 4);
                break;
            }
        }
        out += " " + value + " |";
    }
    out += "\n";
    for (const auto& ref : report.references) {
        out += "| " + ref.method + " |";
        for (const auto& d : datasets) {
            auto it = ref.values.find(d);
            out += it == ref.values.end() ? " - |" : " " + format_fixed(it->second, 4) + " |";
        }
        out += "\n";
    }

    for (const auto& m : methods) {
        out += "| " + m + " |";
        for (const auto& d : datasets) {
            auto it = cell.find({m, d});
            if (it == cell.end()) {
                out += " - |";
            } else if (!it->second->error.empty()) {
                out += " error |";
            } else {
                std::string value = format_fixed(it->second->mean_rmse, 4);
                if (best.count(d) && it->second->mean_rmse == best.at(d))
                    value = "**" + value + "**";
                out += " " + value + " |";
            }
        }
        out += "\n";
    }
    return out;
}

}  // namespace

std::string render_report(const GridReport& report, ReportFormat format) {
    if (report.results.empty()) throw ValidationError("cannot render an empty result set");
    return format == ReportFormat::Csv ? render_csv(report) : render_markdown(report);
}

std::string results_to_json_text(const GridReport& report) {
    json j;
    json results = json::array();
    for (const auto& r : report.results) {
        json jr;
        jr["spec_digest"] = r.spec_digest;
        jr["method_label"] = r.method_label;
        jr["dataset_label"] = r.dataset_label;
        jr["per_rep_rmse"] = r.per_rep_rmse;
        jr["mean_rmse"] = r.mean_rmse;
        jr["std_rmse"] = r.std_rmse;
        jr["dummy_rmse"] = r.dummy_rmse;
        jr["error"] = r.error;
        results.push_back(jr);
    }
    j["results"] = results;
    json refs = json::array();
    for (const auto& ref : report.references) {
        json jr;
        jr["method"] = ref.method;
        jr["values"] = json::object();
        for (const auto& [k, v] : ref.values) jr["values"][k] = v;
        refs.push_back(jr);
    }
    j["references"] = refs;
    return j.dump(2) + "\n";
}

GridReport results_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed results file: ") + e.what());
    }
    GridReport report;
    for (const auto& jr : j.at("results")) {
        ExperimentResult r;
        r.spec_digest = jr.at("spec_digest").get<std::string>();
        r.method_label = jr.at("method_label").get<std::string>();
        r.dataset_label = jr.at("dataset_label").get<std::string>();
        for (const auto& v : jr.at("per_rep_rmse")) r.per_rep_rmse.push_back(v.get<double>());
        r.mean_rmse = jr.at("mean_rmse").get<double>();
        r.std_rmse = jr.at("std_rmse").get<double>();
        r.dummy_rmse = jr.at("dummy_rmse").get<double>();
        r.error = jr.at("error").get<std::string>();
        report.results.push_back(std::move(r));
    }
    if (j.contains("references")) {
        for (const auto& jr : j.at("references")) {
            ReferenceRow ref;
            ref.method = jr.at("method").get<std::string>();
            for (const auto& [k, v] : jr.at("values").items())
                ref.values[k] = v.get<double>();
            report.references.push_back(std::move(ref));
        }
    }
    return report;
}

std::string render_histogram_report(const Dataset& dataset, const std::string& label,
                                    int bins, double share_threshold, ReportFormat format) {
    auto histogram = difficulty_histogram(dataset, label, bins);
    double share = label_share_at_least(dataset, label, share_threshold);

    if (format == ReportFormat::Csv) {
        std::string out = "bin_lo,bin_hi,count\n";
        for (const auto& bin : histogram)
            out += format_fixed(bin.lo, 4) + "," + format_fixed(bin.hi, 4) + "," +
                   std::to_string(bin.count) + "\n";
        out += "share_at_least_" + format_fixed(share_threshold, 2) + "," +
               format_fixed(share, 4) + ",\n";
        return out;
    }

    std::string out = "| Bin | Count |\n|---|---|\n";
    for (const auto& bin : histogram)
        out += "| [" + format_fixed(bin.lo, 4) + ", " + format_fixed(bin.hi, 4) + "] | " +
               std::to_string(bin.count) + " |\n";
    out += "\nShare of items with " + label + " >= " + format_fixed(share_threshold, 2) +
           ": " + format_fixed(share * 100.0, 1) + "%\n";
    return out;
}

}  // namespace mcqdiff
