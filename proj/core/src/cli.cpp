#include "xtail/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "xtail/common.hpp"
#include "xtail/corpus.hpp"
#include "xtail/metrics.hpp"
#include "xtail/pseudo.hpp"
#include "xtail/random.hpp"
#include "xtail/report.hpp"
#include "xtail/svm.hpp"
#include "xtail/theory.hpp"

namespace xtail::cli {

namespace {

namespace fs = std::filesystem;

std::int64_t prediction_k(const PipelineConfig& config) {
    std::int64_t k = config.macro_k;
    for (std::int64_t v : config.eval_ks) k = std::max(k, v);
    return k;
}

LoadedDataset load_configured(const PipelineConfig& config) {
    return load_dataset(config.resolved_train(), config.resolved_test(),
                        config.resolved_labels(), config.vocab);
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("io", "cannot create directory '" + dir.string() + "'");
}

fs::path sparse_model_path(const PipelineConfig& config) {
    return config.model_dir() / "sparse.bin";
}

fs::path pseudo_path(const PipelineConfig& config) {
    return config.model_dir() / "pseudo_labels.tsv";
}

void print_epoch_losses(const std::string& what, const std::vector<double>& losses) {
    std::cout << what << " loss per epoch:";
    for (double v : losses) std::cout << ' ' << format_general(v, 6);
    std::cout << '\n';
}

nlohmann::ordered_json trial_row(const TrialReport& r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::object();
    row["dim"] = r.dim;
    row["trials"] = r.trials;
    row["violations"] = r.violations;
    row["empirical"] = round6(r.empirical);
    row["bound"] = round6(r.bound);
    row["slack"] = round6(r.slack);
    row["vacuous"] = r.vacuous;
    row["within_bound"] = r.within_bound;
    return row;
}

void append_trial_tsv(std::ofstream& out, const std::string& family,
                      const TrialReport& r) {
    out << family << '\t' << r.dim << '\t' << r.trials << '\t' << r.violations << '\t'
        << format_fixed(r.empirical, 6) << '\t' << format_fixed(r.bound, 6) << '\t'
        << format_fixed(r.slack, 6) << '\t' << (r.vacuous ? 1 : 0) << '\t'
        << (r.within_bound ? 1 : 0) << '\n';
}

// Hand-built vectors with known margins, so the sweep runs without any
// trained artifacts. The pair instance has margin 1 and a small recorded
// approximation gap; the union instance puts each negative on its own
// coordinate, margin 1, no gap.
SparseVector unit_doc() {
    const double c = 1.0 / std::sqrt(2.0);
    return SparseVector::from_pairs({{0, c}, {1, c}});
}

MarginInstance synthetic_pair_instance() {
    MarginInstance inst;
    inst.phi = unit_doc();
    inst.v_pos = unit_doc();
    inst.v_neg = SparseVector::from_pairs({{2, 1.0}});
    inst.epsilon = 1.0;
    inst.delta = 0.05;
    return inst;
}

UnionInstance synthetic_union_instance(std::int64_t negatives) {
    UnionInstance inst;
    inst.phi = unit_doc();
    inst.v_pos = unit_doc();
    for (std::int64_t j = 0; j < negatives; ++j)
        inst.v_negs.push_back(
            SparseVector::from_pairs({{static_cast<TokenId>(2 + j), 1.0}}));
    inst.epsilon = 1.0;
    inst.delta = 0.0;
    return inst;
}

}  // namespace

void cmd_synth(const PipelineConfig& config) {
    SynthParams params = config.synth;
    params.seed = synth_seed(config);
    const RawDataset raw = synth_powerlaw(params);
    ensure_dir(config.data_dir());
    write_dataset_files(raw, config.data_dir());
    std::cout << "wrote " << raw.train.size() << " train and " << raw.test.size()
              << " test documents over " << raw.label_names.size() << " labels to "
              << config.data_dir().string() << '\n';
}

void cmd_train_sparse(const PipelineConfig& config, bool dump_features_flag) {
    const LoadedDataset loaded = load_configured(config);
    const std::vector<SparseVector> train_features =
        compute_features(loaded.data.train, loaded.vocabulary);

    SvmHyper hyper = config.svm;
    hyper.seed = svm_seed(config);
    TrainStats stats;
    const SparseLinearModel model =
        train_svm(loaded.data, train_features,
                  static_cast<std::int64_t>(loaded.vocabulary.size()), hyper, &stats);

    ensure_dir(config.model_dir());
    save_sparse_model(sparse_model_path(config), model);
    export_top_weights(config.model_dir() / "sparse_top_weights.tsv", model,
                       loaded.data.label_names, loaded.vocabulary);

    const std::vector<SparseVector> test_features =
        compute_features(loaded.data.test, loaded.vocabulary);
    const std::vector<RankedPrediction> preds =
        predict(nullptr, {}, &model, loaded.data.test, test_features, ScoreKind::Sparse,
                prediction_k(config));
    ensure_dir(config.pred_dir());
    write_predictions(config.pred_dir() / "sparse.tsv", preds);

    if (dump_features_flag) {
        dump_features(config.data_dir() / "train_features.tsv", loaded.data.train,
                      train_features);
        dump_features(config.data_dir() / "test_features.tsv", loaded.data.test,
                      test_features);
    }

    print_epoch_losses("hinge", stats.epoch_loss);
    std::cout << "wrote " << sparse_model_path(config).string() << " and "
              << (config.pred_dir() / "sparse.tsv").string() << '\n';
}

void cmd_keywords(const PipelineConfig& config) {
    const LoadedDataset loaded = load_configured(config);
    const SparseLinearModel model =
        normalize_for_theory(load_sparse_model(sparse_model_path(config)));
    const std::vector<PseudoLabel> pseudo =
        build_pseudo_labels(model, loaded.data, loaded.vocabulary, config.pseudo);

    ensure_dir(config.model_dir());
    write_pseudo_labels(pseudo_path(config), pseudo, loaded.vocabulary,
                        loaded.data.label_names);

    std::int64_t keyword_total = 0;
    for (const PseudoLabel& p : pseudo)
        keyword_total += static_cast<std::int64_t>(p.keyword_tokens.size());
    const double mean_keywords =
        pseudo.empty() ? 0.0
                       : static_cast<double>(keyword_total) /
                             static_cast<double>(pseudo.size());
    std::cout << "wrote " << pseudo.size() << " pseudo label descriptions ("
              << format_fixed(mean_keywords, 2) << " keywords per label) to "
              << pseudo_path(config).string() << '\n';
}

void cmd_train_encoder(const PipelineConfig& config, EncoderMode mode) {
    const LoadedDataset loaded = load_configured(config);
    const std::vector<SparseVector> train_features =
        compute_features(loaded.data.train, loaded.vocabulary);
    const std::vector<SparseVector> test_features =
        compute_features(loaded.data.test, loaded.vocabulary);

    EncoderConfig enc = config.encoder;
    enc.seed = encoder_seed(config);

    SparseLinearModel sparse;
    const SparseLinearModel* sparse_ptr = nullptr;
    std::vector<PseudoLabel> pseudo;
    if (mode != EncoderMode::Dense) {
        sparse = load_sparse_model(sparse_model_path(config));
        pseudo = read_pseudo_labels(pseudo_path(config), loaded.vocabulary,
                                    config.pseudo.max_len);
        sparse_ptr = &sparse;
    }

    TrainStats stats;
    const EncoderModel model =
        train_encoder(loaded.data, static_cast<std::int64_t>(loaded.vocabulary.size()),
                      train_features, pseudo, sparse_ptr, mode, enc, &stats);

    ensure_dir(config.model_dir());
    const fs::path model_path =
        config.model_dir() / ("encoder_" + to_string(mode) + ".bin");
    save_encoder_model(model_path, model);

    const std::int64_t k = prediction_k(config);
    const ScoreKind kind = mode == EncoderMode::Dense  ? ScoreKind::Dense
                           : mode == EncoderMode::Dual ? ScoreKind::Dual
                                                       : ScoreKind::Kde;
    ensure_dir(config.pred_dir());
    const std::vector<RankedPrediction> preds = predict(
        &model, pseudo, sparse_ptr, loaded.data.test, test_features, kind, k);
    write_predictions(config.pred_dir() / (to_string(mode) + ".tsv"), preds);
    if (mode == EncoderMode::Kde) {
        const std::vector<RankedPrediction> final_preds =
            predict(&model, pseudo, sparse_ptr, loaded.data.test, test_features,
                    ScoreKind::Final, k);
        write_predictions(config.pred_dir() / "final.tsv", final_preds);
    }

    print_epoch_losses(to_string(mode), stats.epoch_loss);
    std::cout << "wrote " << model_path.string() << " and "
              << (config.pred_dir() / (to_string(mode) + ".tsv")).string();
    if (mode == EncoderMode::Kde)
        std::cout << " and " << (config.pred_dir() / "final.tsv").string();
    std::cout << '\n';
}

void cmd_eval(const PipelineConfig& config, const fs::path& predictions,
              const std::optional<fs::path>& baseline,
              const std::optional<fs::path>& out) {
    const LoadedDataset loaded = load_configured(config);
    const std::vector<RankedPrediction> preds =
        read_predictions(predictions, loaded.data.num_labels());
    const std::vector<std::vector<LabelId>> aligned =
        align_predictions(preds, loaded.data);

    std::vector<std::vector<LabelId>> baseline_aligned;
    const std::vector<std::vector<LabelId>>* baseline_ptr = nullptr;
    if (baseline) {
        baseline_aligned = align_predictions(
            read_predictions(*baseline, loaded.data.num_labels()), loaded.data);
        baseline_ptr = &baseline_aligned;
    }

    const nlohmann::ordered_json report =
        build_eval_report(loaded.data, aligned, eval_options(config), baseline_ptr);

    fs::path out_path;
    if (out) {
        out_path = *out;
        if (out_path.has_parent_path()) ensure_dir(out_path.parent_path());
    } else {
        ensure_dir(config.report_dir());
        out_path = config.report_dir() / (predictions.stem().string() + ".json");
    }
    write_report(out_path, report);

    std::cout << predictions.stem().string() << ':';
    for (const auto& [key, value] : report["micro"].items())
        std::cout << ' ' << key << ' ' << format_fixed(value.get<double>(), 6);
    for (const auto& [key, value] : report["macro"].items()) {
        if (!value.is_number_float()) continue;
        std::cout << ' ' << key << ' ' << format_fixed(value.get<double>(), 6);
    }
    std::cout << '\n';
    std::cout << "wrote " << out_path.string() << '\n';
}

void cmd_theory(const PipelineConfig& config) {
    ensure_dir(config.theory_dir());
    const std::uint64_t base_seed = theory_seed(config);
    const std::int64_t trials = config.theory_trials;
    const std::int32_t threads = config.threads;

    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    doc["source"] = config.theory_source;
    doc["trials"] = trials;

    std::ofstream tsv(config.theory_dir() / "sweep.tsv", std::ios::binary);
    if (!tsv)
        throw Error("io", "cannot open '" +
                              (config.theory_dir() / "sweep.tsv").string() +
                              "' for writing");
    tsv << "family\tdim\ttrials\tviolations\tempirical\tbound\tslack\tvacuous\twithin_"
           "bound\n";

    if (config.theory_source == "synthetic") {
        const SparseVector a = unit_doc();
        const SparseVector b = SparseVector::from_pairs(
            {{1, 1.0 / std::sqrt(2.0)}, {2, 1.0 / std::sqrt(2.0)}});
        const MarginInstance pair_inst = synthetic_pair_instance();
        const UnionInstance union_inst =
            synthetic_union_instance(config.theory_negatives);

        nlohmann::ordered_json jl = nlohmann::ordered_json::array();
        nlohmann::ordered_json pair = nlohmann::ordered_json::array();
        nlohmann::ordered_json uni = nlohmann::ordered_json::array();
        for (std::int32_t dim : config.theory_dims) {
            const TrialReport r_jl =
                jl_concentration_trial(a, b, config.theory_gamma, dim, trials,
                                       derive_seed(base_seed, 1), threads);
            nlohmann::ordered_json row = trial_row(r_jl);
            row["gamma"] = config.theory_gamma;
            jl.push_back(std::move(row));
            append_trial_tsv(tsv, "jl", r_jl);

            const TrialReport r_pair = lemma2_trial(pair_inst, dim, trials,
                                                    derive_seed(base_seed, 2), threads);
            pair.push_back(trial_row(r_pair));
            append_trial_tsv(tsv, "pair", r_pair);

            const TrialReport r_uni = theorem1_trial(
                union_inst, dim, trials, derive_seed(base_seed, 3), threads);
            nlohmann::ordered_json urow = trial_row(r_uni);
            urow["negatives"] = static_cast<std::int64_t>(union_inst.v_negs.size());
            uni.push_back(std::move(urow));
            append_trial_tsv(tsv, "union", r_uni);
        }
        doc["jl"] = std::move(jl);
        doc["pair"] = std::move(pair);
        doc["union"] = std::move(uni);
    } else {
        const LoadedDataset loaded = load_configured(config);
        const std::vector<SparseVector> test_features =
            compute_features(loaded.data.test, loaded.vocabulary);
        const SparseLinearModel raw = load_sparse_model(sparse_model_path(config));
        const SparseLinearModel normalized = normalize_for_theory(raw);
        const std::vector<PseudoLabel> pseudo = read_pseudo_labels(
            pseudo_path(config), loaded.vocabulary, config.pseudo.max_len);

        const Lemma1Report lemma1 =
            check_lemma1(normalized, pseudo, test_features);
        nlohmann::ordered_json l1 = nlohmann::ordered_json::object();
        l1["checked"] = lemma1.checked;
        l1["violations"] = lemma1.violations;
        l1["max_gap"] = round6(lemma1.max_gap);
        doc["lemma1"] = std::move(l1);

        const std::vector<UnionInstance> instances =
            harvest_instances(normalized, pseudo, loaded.data.test, test_features,
                              config.theory_negatives, config.theory_instances);
        if (instances.empty())
            throw Error("data", "no margin instances could be harvested");

        nlohmann::ordered_json uni = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < instances.size(); ++i) {
            for (std::int32_t dim : config.theory_dims) {
                const TrialReport r = theorem1_trial(
                    instances[i], dim, trials,
                    derive_seed(base_seed, 100 + static_cast<std::int64_t>(i)),
                    threads);
                nlohmann::ordered_json row = trial_row(r);
                row["instance"] = static_cast<std::int64_t>(i);
                row["negatives"] =
                    static_cast<std::int64_t>(instances[i].v_negs.size());
                row["epsilon"] = round6(instances[i].epsilon);
                row["delta"] = round6(instances[i].delta);
                uni.push_back(std::move(row));
                append_trial_tsv(tsv, "union", r);
            }
        }
        doc["union"] = std::move(uni);
    }

    // The dimension each sweep would need before the union bound certifies
    // anything, and the bound value exactly at that gap.
    nlohmann::ordered_json gaps = nlohmann::ordered_json::array();
    for (std::int32_t dim : config.theory_dims) {
        const double gap = union_gap_requirement(config.theory_negatives, dim);
        nlohmann::ordered_json row = nlohmann::ordered_json::object();
        row["dim"] = dim;
        row["negatives"] = config.theory_negatives;
        row["gap"] = round6(gap);
        row["bound_at_gap"] =
            round6(theorem1_bound(gap, 0.0, dim, config.theory_negatives));
        gaps.push_back(std::move(row));
    }
    doc["gap_requirement"] = std::move(gaps);

    if (!tsv) throw Error("io", "failed writing theory sweep");
    tsv.close();
    write_report(config.theory_dir() / "sweep.json", doc);
    std::cout << "wrote " << (config.theory_dir() / "sweep.json").string() << " and "
              << (config.theory_dir() / "sweep.tsv").string() << '\n';
}

void cmd_report(const PipelineConfig& config) {
    static const std::vector<std::string> systems = {"sparse", "dense", "dual", "kde",
                                                     "final"};
    nlohmann::ordered_json summary = nlohmann::ordered_json::object();
    std::vector<std::string> found;
    for (const std::string& name : systems) {
        const fs::path path = config.report_dir() / (name + ".json");
        if (!fs::exists(path)) continue;
        summary[name] = read_report(path);
        found.push_back(name);
    }
    if (found.empty())
        throw Error("data",
                    "no reports found in '" + config.report_dir().string() + "'");

    // Header from the first report present; every report carries the same
    // metric keys because they come from one config.
    std::vector<std::string> columns;
    for (const auto& [key, value] : summary[found.front()]["micro"].items())
        columns.push_back(key);
    for (const auto& [key, value] : summary[found.front()]["macro"].items())
        if (value.is_number_float()) columns.push_back(key);

    std::string table = "system";
    for (const std::string& c : columns) table += '\t' + c;
    table += '\n';
    for (const std::string& name : found) {
        table += name;
        for (const std::string& c : columns) {
            const nlohmann::ordered_json& block =
                summary[name]["micro"].contains(c) ? summary[name]["micro"]
                                                   : summary[name]["macro"];
            table += '\t' + format_fixed(block[c].get<double>(), 6);
        }
        table += '\n';
    }

    ensure_dir(config.report_dir());
    const fs::path tsv_path = config.report_dir() / "summary.tsv";
    std::ofstream out(tsv_path, std::ios::binary);
    if (!out) throw Error("io", "cannot open '" + tsv_path.string() + "' for writing");
    out << table;
    if (!out) throw Error("io", "failed writing '" + tsv_path.string() + "'");
    out.close();

    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    doc["systems"] = std::move(summary);
    write_report(config.report_dir() / "summary.json", doc);

    std::cout << table;
    std::cout << "wrote " << (config.report_dir() / "summary.json").string() << " and "
              << tsv_path.string() << '\n';
}

int run(const std::vector<std::string>& args) {
    CLI::App app{"tail-aware extreme multi-label text classification pipeline"};
    app.require_subcommand(1);
    // Let the shared flags sit on either side of the subcommand name.
    app.fallthrough(true);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string workdir_flag;
    std::uint64_t seed_flag = 0;
    std::int32_t threads_flag = 0;
    app.add_option("--config", config_path, "flat key = value config file");
    app.add_option("--set", overrides, "config override key=value, repeatable");
    auto* workdir_opt = app.add_option("--workdir", workdir_flag, "working directory");
    auto* seed_opt = app.add_option("--seed", seed_flag, "master seed");
    auto* threads_opt =
        app.add_option("--threads", threads_flag, "worker threads for repeated trials");

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    bool dump_features_flag = false;
    CLI::App* train_sparse =
        app.add_subcommand("train-sparse", "train the one-vs-all sparse classifiers");
    train_sparse->add_flag("--dump-features", dump_features_flag,
                           "also write tf-idf features as TSV");
    CLI::App* keywords =
        app.add_subcommand("keywords", "mine keywords into pseudo label descriptions");
    std::string mode_name;
    CLI::App* train_encoder_cmd =
        app.add_subcommand("train-encoder", "train the dense encoder");
    train_encoder_cmd->add_option("--mode", mode_name, "dense, dual, or kde")
        ->required();
    std::string pred_path;
    std::string baseline_path;
    std::string out_path;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a prediction file");
    eval->add_option("--pred", pred_path, "prediction TSV to evaluate")->required();
    eval->add_option("--baseline", baseline_path,
                     "baseline prediction TSV for the paired sign test");
    eval->add_option("--out", out_path, "report output path");
    CLI::App* theory =
        app.add_subcommand("theory", "run projection concentration sweeps");
    CLI::App* report_cmd =
        app.add_subcommand("report", "aggregate evaluation reports into one table");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        PipelineConfig config;
        if (!config_path.empty()) load_config_file(config, config_path);
        apply_env_overrides(config);
        for (const std::string& kv : overrides) {
            const std::size_t eq = kv.find('=');
            if (eq == std::string::npos)
                throw Error("config", "--set expects key=value, got '" + kv + "'");
            apply_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (*workdir_opt) config.workdir = workdir_flag;
        if (*seed_opt) config.seed = seed_flag;
        if (*threads_opt) {
            if (threads_flag < 1) throw Error("config", "threads must be positive");
            config.threads = threads_flag;
        }

        if (synth->parsed()) {
            cmd_synth(config);
        } else if (train_sparse->parsed()) {
            cmd_train_sparse(config, dump_features_flag);
        } else if (keywords->parsed()) {
            cmd_keywords(config);
        } else if (train_encoder_cmd->parsed()) {
            cmd_train_encoder(config, encoder_mode_from_string(mode_name));
        } else if (eval->parsed()) {
            cmd_eval(config, pred_path,
                     baseline_path.empty()
                         ? std::nullopt
                         : std::optional<fs::path>(baseline_path),
                     out_path.empty() ? std::nullopt
                                      : std::optional<fs::path>(out_path));
        } else if (theory->parsed()) {
            cmd_theory(config);
        } else if (report_cmd->parsed()) {
            cmd_report(config);
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace xtail::cli
