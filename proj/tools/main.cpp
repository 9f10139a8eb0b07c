#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <iostream>
#include <set>
#include <thread>

#include <json.hpp>

#include "mcqdiff/dataset.hpp"
#include "mcqdiff/errors.hpp"
#include "mcqdiff/experiment.hpp"
#include "mcqdiff/forest.hpp"
#include "mcqdiff/importance.hpp"
#include "mcqdiff/probe.hpp"
#include "mcqdiff/report.hpp"
#include "mcqdiff/shap.hpp"
#include "mcqdiff/util.hpp"

using namespace mcqdiff;
using nlohmann::json;

namespace {

struct GlobalOptions {
    uint64_t seed = 0;
    std::string cache_dir = ".mcqdiff_cache";
    std::string config;
};

std::vector<std::string> parse_label_list(const std::string& csv) {
    std::vector<std::string> out;
    for (const auto& part : split_string(csv, ','))
        if (!part.empty()) out.push_back(part);
    return out;
}

ExperimentSpec load_spec(const GlobalOptions& global, const std::string& config_flag) {
    const std::string& path = !config_flag.empty() ? config_flag : global.config;
    if (path.empty()) throw ValidationError("no experiment config given (use --config)");
    return ExperimentSpec::load(path);
}

RunContext make_context(const GlobalOptions& global, const std::string& endpoints_override) {
    RunContext ctx;
    ctx.cache_dir = global.cache_dir;
    if (!endpoints_override.empty())
        ctx.endpoints_override = EndpointsConfig::load(endpoints_override);
    return ctx;
}

EndpointsConfig resolve_endpoints(const ExperimentSpec& spec, const RunContext& ctx) {
    if (ctx.endpoints_override) return *ctx.endpoints_override;
    if (spec.endpoints_path.empty()) return EndpointsConfig{};  // text-only specs need none
    return EndpointsConfig::load(spec.endpoints_path);
}

void print_dataset_summary(const Dataset& dataset) {
    std::set<std::string> labels;
    int min_choices = 10, max_choices = 2;
    for (const auto& item : dataset.items()) {
        for (const auto& [name, value] : item.labels) labels.insert(name);
        min_choices = std::min(min_choices, item.n_choices());
        max_choices = std::max(max_choices, item.n_choices());
    }
    std::cout << "items: " << dataset.size() << "\n";
    if (!dataset.empty()) std::cout << "choices: " << min_choices << "-" << max_choices << "\n";
    std::cout << "labels:";
    for (const auto& l : labels) std::cout << " " << l;
    std::cout << "\n";
}

// loads dataset/split/features for the verbs that need a fitted matrix
struct PreparedExperiment {
    Dataset dataset;
    DatasetSplit split;
    FeatureMatrix features;
    FeatureMatrix X_train;
    std::vector<double> y_train;
};

PreparedExperiment prepare(const ExperimentSpec& spec, const RunContext& ctx) {
    PreparedExperiment prep;
    std::vector<std::string> required = spec.required_labels;
    required.push_back(spec.label);
    prep.dataset = parse_dataset(spec.dataset_path, required);
    prep.split = resolve_split(spec, prep.dataset);
    EndpointsConfig endpoints = resolve_endpoints(spec, ctx);
    prep.features = build_features(spec, prep.dataset, prep.split, endpoints, ctx.cache_dir);
    prep.X_train = select_rows(prep.features, prep.split.train);
    for (const auto& id : prep.split.train)
        prep.y_train.push_back(prep.dataset.by_id(id).label(spec.label));
    return prep;
}

int run(int argc, char** argv) {
    CLI::App app{"mcqdiff: estimate multiple-choice question difficulty from "
                 "LLM uncertainty and text features"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions global;
    app.add_option("--seed", global.seed, "Global random seed")->capture_default_str();
    app.add_option("--cache-dir", global.cache_dir, "Probe/embedding cache directory")
        ->capture_default_str();
    app.add_option("--config", global.config, "Experiment config file");

    auto* ingest = app.add_subcommand("ingest", "Validate a dataset and print statistics");
    std::string ingest_dataset, ingest_labels, ingest_out, ingest_histogram;
    std::string ingest_histogram_label = "p_value", ingest_format = "markdown";
    std::vector<std::string> ingest_transforms;
    int ingest_bins = 10;
    double ingest_share = 0.6;
    ingest->add_option("--dataset", ingest_dataset, "JSONL dataset")->required();
    ingest->add_option("--labels", ingest_labels, "Comma-separated required labels");
    ingest->add_option("--transform", ingest_transforms,
                       "Label transform '<identity|complement>:<source>:<target>'");
    ingest->add_option("--out", ingest_out, "Write the validated/transformed dataset here");
    ingest->add_option("--histogram", ingest_histogram, "Write a difficulty histogram here");
    ingest->add_option("--histogram-label", ingest_histogram_label, "Histogram label")
        ->capture_default_str();
    ingest->add_option("--bins", ingest_bins, "Histogram bins")->capture_default_str();
    ingest->add_option("--share-threshold", ingest_share, "Easy-share threshold")
        ->capture_default_str();
    ingest->add_option("--format", ingest_format, "Histogram format: markdown|csv")
        ->capture_default_str();

    auto* split_cmd = app.add_subcommand("split", "Create a train/test split file");
    std::string split_dataset_path, split_out;
    double split_ratio = 0.7;
    bool split_group_aware = false;
    split_cmd->add_option("--dataset", split_dataset_path, "JSONL dataset")->required();
    split_cmd->add_option("--ratio", split_ratio, "Train fraction")->capture_default_str();
    split_cmd->add_flag("--group-aware", split_group_aware,
                        "Keep shared-passage groups on one side");
    split_cmd->add_option("--out", split_out, "Split file to write")->required();

    auto* probe_cmd = app.add_subcommand("probe", "Query inference endpoints for uncertainty");
    std::string probe_dataset_path, probe_endpoints, probe_out, probe_correctness;
    int probe_orderings = 10;
    probe_cmd->add_option("--dataset", probe_dataset_path, "JSONL dataset")->required();
    probe_cmd->add_option("--endpoints", probe_endpoints, "Endpoints config")->required();
    probe_cmd->add_option("--out", probe_out, "Uncertainty matrix CSV")->required();
    probe_cmd->add_option("--correctness-report", probe_correctness,
                          "Write the per-model correctness table here");
    probe_cmd->add_option("--orderings", probe_orderings, "Orderings per item")
        ->capture_default_str();

    auto* featurize = app.add_subcommand("featurize", "Build the feature matrix");
    std::string feat_config, feat_out, feat_split_out, feat_endpoints;
    featurize->add_option("--config", feat_config, "Experiment config");
    featurize->add_option("--endpoints", feat_endpoints, "Endpoints config override");
    featurize->add_option("--out", feat_out, "Feature matrix CSV")->required();
    featurize->add_option("--split-out", feat_split_out, "Also write the resolved split");

    auto* train = app.add_subcommand("train", "Train a forest on the train side");
    std::string train_config, train_model_out, train_endpoints;
    int train_repetition = 0;
    train->add_option("--config", train_config, "Experiment config");
    train->add_option("--endpoints", train_endpoints, "Endpoints config override");
    train->add_option("--repetition", train_repetition, "Repetition index for the forest seed")
        ->capture_default_str();
    train->add_option("--model-out", train_model_out, "Model file to write")->required();

    auto* evaluate = app.add_subcommand("evaluate", "Run one experiment end to end");
    std::string eval_config, eval_results_out, eval_endpoints;
    evaluate->add_option("--config", eval_config, "Experiment config");
    evaluate->add_option("--endpoints", eval_endpoints, "Endpoints config override");
    evaluate->add_option("--results-out", eval_results_out, "Write the result as JSON");

    auto* grid = app.add_subcommand("grid", "Run a grid of experiments");
    std::string grid_config, grid_results_out, grid_out, grid_endpoints;
    std::string grid_format = "markdown";
    grid->add_option("--config", grid_config, "Grid config");
    grid->add_option("--endpoints", grid_endpoints, "Endpoints config override");
    grid->add_option("--results-out", grid_results_out, "Results JSON to write");
    grid->add_option("--out", grid_out, "Rendered report to write");
    grid->add_option("--format", grid_format, "Report format: markdown|csv")
        ->capture_default_str();

    auto* explain = app.add_subcommand("explain", "Shapley attribution for a trained forest");
    std::string explain_config, explain_model, explain_csv, explain_svg, explain_perm;
    std::string explain_on = "test", explain_endpoints;
    int explain_top_k = 10, explain_perm_repeats = 5;
    explain->add_option("--config", explain_config, "Experiment config");
    explain->add_option("--endpoints", explain_endpoints, "Endpoints config override");
    explain->add_option("--model", explain_model, "Load this model instead of training");
    explain->add_option("--on", explain_on, "Explain test or train items")
        ->capture_default_str();
    explain->add_option("--top-k", explain_top_k, "Features in the summary")
        ->capture_default_str();
    explain->add_option("--csv", explain_csv, "Per-item contributions CSV");
    explain->add_option("--svg", explain_svg, "Summary bar chart SVG");
    explain->add_option("--permutation-out", explain_perm, "Permutation importance CSV");
    explain->add_option("--permutation-repeats", explain_perm_repeats, "Permutation repeats")
        ->capture_default_str();

    auto* report_cmd = app.add_subcommand("report", "Render saved grid results");
    std::string report_results, report_out, report_format = "markdown";
    std::string report_hist_dataset, report_hist_label = "p_value";
    int report_hist_bins = 10;
    double report_hist_share = 0.6;
    report_cmd->add_option("--results", report_results, "Results JSON from 'grid'")->required();
    report_cmd->add_option("--out", report_out, "Report file to write");
    report_cmd->add_option("--format", report_format, "markdown|csv")->capture_default_str();
    report_cmd->add_option("--histogram-dataset", report_hist_dataset,
                           "Append a difficulty histogram for this dataset");
    report_cmd->add_option("--histogram-label", report_hist_label, "Histogram label")
        ->capture_default_str();
    report_cmd->add_option("--histogram-bins", report_hist_bins, "Histogram bins")
        ->capture_default_str();
    report_cmd->add_option("--histogram-share-threshold", report_hist_share,
                           "Easy-share threshold")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    if (ingest->parsed()) {
        Dataset dataset = parse_dataset(ingest_dataset, parse_label_list(ingest_labels));
        for (const auto& t : ingest_transforms)
            dataset = transform_labels(dataset, label_spec_from_string(t));
        print_dataset_summary(dataset);
        if (!ingest_out.empty()) write_file(ingest_out, serialize_dataset(dataset));
        if (!ingest_histogram.empty())
            write_file(ingest_histogram,
                       render_histogram_report(dataset, ingest_histogram_label, ingest_bins,
                                               ingest_share,
                                               report_format_from_name(ingest_format)));
        bool have_label = !dataset.empty();
        for (const auto& item : dataset.items())
            if (!item.has_label(ingest_histogram_label)) have_label = false;
        if (have_label)
            std::cout << "share(" << ingest_histogram_label
                      << " >= " << format_fixed(ingest_share, 2) << "): "
                      << format_fixed(label_share_at_least(dataset, ingest_histogram_label,
                                                           ingest_share) * 100.0, 1)
                      << "%\n";
        return 0;
    }

    if (split_cmd->parsed()) {
        Dataset dataset = parse_dataset(split_dataset_path);
        DatasetSplit split = split_dataset(dataset, split_ratio, global.seed, split_group_aware);
        write_file(split_out, serialize_split(split));
        std::cout << "train: " << split.train.size() << "  test: " << split.test.size() << "\n";
        return 0;
    }

    if (probe_cmd->parsed()) {
        Dataset dataset = parse_dataset(probe_dataset_path);
        EndpointsConfig endpoints = EndpointsConfig::load(probe_endpoints);
        if (endpoints.inference.empty())
            throw ValidationError("endpoints config has no inference endpoints");
        std::filesystem::create_directories(global.cache_dir);
        const std::string cache_path = global.cache_dir + "/probe_cache.jsonl";
        auto matrix =
            probe_dataset(dataset, endpoints.inference, cache_path, global.seed, probe_orderings);
        write_file(probe_out, uncertainty_matrix_to_csv(matrix));
        std::cout << "probed " << matrix.item_ids.size() << " items x "
                  << matrix.model_names.size() << " models\n";
        if (!probe_correctness.empty()) {
            ProbeCache cache(cache_path);
            auto rows = correctness_report(dataset, endpoints.inference, cache, global.seed,
                                           probe_orderings);
            write_file(probe_correctness, render_correctness_report(rows));
        }
        return 0;
    }

    if (featurize->parsed()) {
        ExperimentSpec spec = load_spec(global, feat_config);
        RunContext ctx = make_context(global, feat_endpoints);
        PreparedExperiment prep = prepare(spec, ctx);
        write_file(feat_out, feature_matrix_to_csv(prep.features));
        if (!feat_split_out.empty()) write_file(feat_split_out, serialize_split(prep.split));
        std::cout << "features: " << prep.features.ids.size() << " rows x "
                  << prep.features.width() << " columns\n";
        return 0;
    }

    if (train->parsed()) {
        ExperimentSpec spec = load_spec(global, train_config);
        RunContext ctx = make_context(global, train_endpoints);
        PreparedExperiment prep = prepare(spec, ctx);
        ForestConfig config;
        config.seed = repetition_seed(spec.seed, train_repetition);
        RandomForestModel model = fit_forest(prep.X_train, prep.y_train, config);
        model.save(train_model_out);
        std::cout << "trained " << model.trees.size() << " trees on "
                  << prep.X_train.rows.size() << " rows\n";
        return 0;
    }

    if (evaluate->parsed()) {
        ExperimentSpec spec = load_spec(global, eval_config);
        RunContext ctx = make_context(global, eval_endpoints);
        ExperimentResult result = run_experiment(spec, ctx);
        std::cout << "method: " << result.method_label << "\n"
                  << "dataset: " << result.dataset_label << "\n"
                  << "mean RMSE: " << format_fixed(result.mean_rmse, 4) << "\n"
                  << "std: " << format_fixed(result.std_rmse, 4) << "\n"
                  << "dummy RMSE: " << format_fixed(result.dummy_rmse, 4) << "\n";
        if (!eval_results_out.empty())
            write_file(eval_results_out, results_to_json_text(GridReport{{result}, {}}));
        return 0;
    }

    if (grid->parsed()) {
        const std::string& path = !grid_config.empty() ? grid_config : global.config;
        if (path.empty()) throw ValidationError("no grid config given (use --config)");
        json j;
        try {
            j = json::parse(read_file(path));
        } catch (const json::exception& e) {
            throw ValidationError(std::string("malformed grid config: ") + e.what());
        }
        std::vector<ExperimentSpec> specs;
        for (const auto& entry : j.at("experiments"))
            specs.push_back(ExperimentSpec::from_json_text(entry.dump()));
        GridReport report;
        if (j.contains("references")) {
            for (const auto& entry : j.at("references")) {
                ReferenceRow ref;
                ref.method = entry.at("method").get<std::string>();
                for (const auto& [k, v] : entry.at("values").items())
                    ref.values[k] = v.get<double>();
                report.references.push_back(std::move(ref));
            }
        }
        RunContext ctx = make_context(global, grid_endpoints);
        report.results = run_grid(specs, ctx);
        if (!grid_results_out.empty()) write_file(grid_results_out, results_to_json_text(report));
        if (!grid_out.empty())
            write_file(grid_out, render_report(report, report_format_from_name(grid_format)));
        int failed = 0;
        for (const auto& r : report.results)
            if (!r.error.empty()) ++failed;
        std::cout << "grid: " << report.results.size() << " experiments, " << failed
                  << " failed\n";
        return failed == static_cast<int>(report.results.size()) && failed > 0 ? 1 : 0;
    }

    if (explain->parsed()) {
        ExperimentSpec spec = load_spec(global, explain_config);
        RunContext ctx = make_context(global, explain_endpoints);
        PreparedExperiment prep = prepare(spec, ctx);

        RandomForestModel model;
        if (!explain_model.empty()) {
            model = RandomForestModel::load(explain_model);
            if (model.feature_schema != prep.features.schema)
                throw ValidationError("loaded model schema does not match the feature matrix");
        } else {
            ForestConfig config;
            config.seed = repetition_seed(spec.seed, 0);
            model = fit_forest(prep.X_train, prep.y_train, config);
        }

        if (explain_on != "test" && explain_on != "train")
            throw ValidationError("--on must be 'test' or 'train'");
        const auto& ids = explain_on == "test" ? prep.split.test : prep.split.train;
        FeatureMatrix X_explain = select_rows(prep.features, ids);

        // explanations are independent; spread items over the cores
        std::vector<ShapExplanation> explanations(ids.size());
        std::atomic<size_t> next_item{0};
        auto explain_some = [&]() {
            while (true) {
                size_t i = next_item.fetch_add(1);
                if (i >= ids.size()) return;
                explanations[i] = forest_shap(model, X_explain.rows[i], ids[i]);
            }
        };
        size_t n_threads = std::min<size_t>(std::max(1u, std::thread::hardware_concurrency()),
                                            std::max<size_t>(1, ids.size()));
        std::vector<std::thread> workers;
        for (size_t t = 0; t < n_threads; ++t) workers.emplace_back(explain_some);
        for (auto& w : workers) w.join();
        auto ranking = shap_summary(explanations, prep.features.schema, explain_top_k);

        std::cout << "top features by mean |contribution| (" << explain_on << "):\n";
        for (const auto& row : ranking)
            std::cout << "  " << row.feature << "  "
                      << format_fixed(row.mean_abs_contribution, 6) << "\n";

        if (!explain_csv.empty())
            write_file(explain_csv, shap_details_csv(explanations, prep.features.schema, ranking));
        if (!explain_svg.empty()) write_file(explain_svg, shap_summary_svg(ranking));
        if (!explain_perm.empty()) {
            std::vector<double> y_explain;
            for (const auto& id : ids)
                y_explain.push_back(prep.dataset.by_id(id).label(spec.label));
            auto importance = permutation_importance(model, X_explain, y_explain,
                                                     explain_perm_repeats, spec.seed);
            std::string csv = "feature,mean_rmse_increase\n";
            for (size_t f = 0; f < prep.features.schema.size(); ++f)
                csv += prep.features.schema[f] + "," + format_fixed(importance[f], 6) + "\n";
            write_file(explain_perm, csv);
        }
        return 0;
    }

    if (report_cmd->parsed()) {
        GridReport report = results_from_json_text(read_file(report_results));
        ReportFormat format = report_format_from_name(report_format);
        std::string rendered = render_report(report, format);
        if (!report_hist_dataset.empty()) {
            Dataset dataset = parse_dataset(report_hist_dataset);
            rendered += "\n";
            rendered += render_histogram_report(dataset, report_hist_label, report_hist_bins,
                                                report_hist_share, format);
        }
        if (!report_out.empty())
            write_file(report_out, rendered);
        else
            std::cout << rendered;
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const EndpointError& e) {
        std::cerr << "endpoint error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
