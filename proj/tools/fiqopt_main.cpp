// fiqopt: optimize externally produced face-image quality scores against the
// structure of their embedding space, distill the result into a small
// regressor, and evaluate any scorer with error-versus-reject curves.

#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fiqopt/distill.hpp"
#include "fiqopt/evalharness.hpp"
#include "fiqopt/io.hpp"
#include "fiqopt/rankopt.hpp"
#include "fiqopt/synth.hpp"
#include "fiqopt/types.hpp"

namespace {

using nlohmann::json;

std::chrono::steady_clock::time_point g_start;

void log_line(const std::string& msg) { std::cerr << "[fiqopt] " << msg << "\n"; }

// Every subcommand that writes to a real path records what it did next to its
// primary output: resolved configuration, digests of the inputs as read, and
// the produced files.
void write_manifest(const std::string& out_path, const std::string& subcommand, json config,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
    if (out_path == "-") return;
    json doc;
    doc["subcommand"] = subcommand;
    doc["config"] = std::move(config);
    json digests = json::object();
    for (const std::string& path : inputs) digests[path] = fiqopt::digest_file(path);
    doc["inputs"] = std::move(digests);
    doc["outputs"] = outputs;
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - g_start;
    doc["duration_seconds"] = elapsed.count();
    const std::string path = out_path + ".manifest.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw fiqopt::IoError("cannot open file for writing: " + path);
    out << doc.dump(2) << '\n';
    if (!out) throw fiqopt::IoError("cannot write file: " + path);
    log_line("wrote " + path);
}

fiqopt::DatasetBundle load_bundle(const std::string& embeddings_path, const std::string& scores_path) {
    std::vector<fiqopt::EmbeddingRecord> records = fiqopt::load_embeddings(embeddings_path);
    fiqopt::QualityTable scores = fiqopt::load_quality_scores(scores_path);
    fiqopt::DatasetBundle bundle = fiqopt::validate_bundle(std::move(records), std::move(scores));
    log_line("loaded " + std::to_string(bundle.size()) + " embeddings (dim " +
             std::to_string(bundle.dimension()) + ", " + std::to_string(bundle.identity_count()) +
             " identities)");
    return bundle;
}

void emit_scores(const std::string& out_path, const fiqopt::QualityTable& table) {
    if (out_path == "-") {
        fiqopt::write_quality_scores(std::cout, table);
        std::cout.flush();
        if (!std::cout) throw fiqopt::IoError("cannot write scores to stdout");
    } else {
        fiqopt::write_quality_scores(std::filesystem::path(out_path), table);
        log_line("wrote " + out_path);
    }
}

struct SynthArgs {
    fiqopt::SynthConfig config;
    std::size_t images = 0;
    bool images_given = false;
    bool range_given = false;
    std::string out;
    std::string truth_out;
    std::string baseline_out;
};

int run_synth(SynthArgs& args) {
    if (args.images_given && args.range_given)
        throw fiqopt::ValidationError("pass either --images or --images-min/--images-max, not both");
    if (args.images_given) {
        args.config.images_min = args.images;
        args.config.images_max = args.images;
    }
    args.config.validate();

    const fiqopt::SynthDataset data = fiqopt::generate_synthetic(args.config);
    log_line("generated " + std::to_string(data.records.size()) + " embeddings for " +
             std::to_string(args.config.identities) + " identities");
    fiqopt::write_embeddings_binary(args.out, data.records);
    log_line("wrote " + args.out);
    std::vector<std::string> outputs{args.out};
    if (!args.truth_out.empty()) {
        fiqopt::write_quality_scores(std::filesystem::path(args.truth_out), data.truth);
        log_line("wrote " + args.truth_out);
        outputs.push_back(args.truth_out);
    }
    if (!args.baseline_out.empty()) {
        fiqopt::write_quality_scores(std::filesystem::path(args.baseline_out), data.baseline);
        log_line("wrote " + args.baseline_out);
        outputs.push_back(args.baseline_out);
    }

    json config{{"identities", args.config.identities},
                {"images_min", args.config.images_min},
                {"images_max", args.config.images_max},
                {"dimension", args.config.dimension},
                {"noise_floor", args.config.noise_floor},
                {"noise_ceil", args.config.noise_ceil},
                {"baseline_corruption", args.config.baseline_corruption},
                {"seed", args.config.seed}};
    write_manifest(args.out, "synth", std::move(config), {}, outputs);
    return 0;
}

struct OptimizeArgs {
    std::string embeddings;
    std::string scores;
    std::string out;
    std::string indices_out;
    fiqopt::OptimConfig config;
    unsigned threads = 1;
};

int run_optimize(OptimizeArgs& args) {
    args.config.validate();
    const fiqopt::DatasetBundle bundle = load_bundle(args.embeddings, args.scores);
    const fiqopt::OptimizedQualityTable result =
        fiqopt::optimize_labels(bundle, args.config, args.threads);
    log_line("optimized labels: N=" + std::to_string(bundle.size()) + ", L=" +
             std::to_string(result.pairs_per_repetition) + " pairs per repetition, R=" +
             std::to_string(args.config.repeats));

    emit_scores(args.out, result.scores);
    std::vector<std::string> outputs{args.out};
    if (args.out != "-") {
        const std::string meta_path = args.out + ".meta.json";
        json meta{{"theta", args.config.theta},
                  {"repeats", args.config.repeats},
                  {"clusters", args.config.clusters},
                  {"seed", args.config.seed},
                  {"N", bundle.size()},
                  {"L_per_repetition", result.pairs_per_repetition}};
        std::ofstream meta_out(meta_path, std::ios::binary | std::ios::trunc);
        if (!meta_out) throw fiqopt::IoError("cannot open file for writing: " + meta_path);
        meta_out << meta.dump(2) << '\n';
        if (!meta_out) throw fiqopt::IoError("cannot write file: " + meta_path);
        log_line("wrote " + meta_path);
        outputs.push_back(meta_path);
    }
    if (!args.indices_out.empty()) {
        std::ostringstream buf;
        buf << "image_id,baseline_rank,mean_opt_index\n";
        for (std::size_t i = 0; i < bundle.size(); ++i)
            buf << bundle.record(i).image_id << ',' << fiqopt::format_double(result.baseline_rank[i])
                << ',' << fiqopt::format_double(result.mean_index[i]) << '\n';
        std::ofstream idx_out(args.indices_out, std::ios::binary | std::ios::trunc);
        if (!idx_out) throw fiqopt::IoError("cannot open file for writing: " + args.indices_out);
        idx_out << buf.str();
        if (!idx_out) throw fiqopt::IoError("cannot write file: " + args.indices_out);
        log_line("wrote " + args.indices_out);
        outputs.push_back(args.indices_out);
    }

    json config{{"clusters", args.config.clusters},
                {"theta", args.config.theta},
                {"repeats", args.config.repeats},
                {"seed", args.config.seed},
                {"threads", args.threads}};
    write_manifest(args.out, "optimize", std::move(config), {args.embeddings, args.scores}, outputs);
    return 0;
}

struct TrainArgs {
    std::string embeddings;
    std::string scores;
    std::string out;
    fiqopt::TrainConfig config;
};

int run_train(TrainArgs& args) {
    args.config.validate();
    const fiqopt::DatasetBundle bundle = load_bundle(args.embeddings, args.scores);
    const fiqopt::QualityTable labels = fiqopt::normalize_scores(bundle.qualities());
    const fiqopt::TrainResult result = fiqopt::train_regressor(bundle, labels, args.config);
    log_line("trained " + std::string(result.model.hidden_width == 0 ? "linear" : "hidden") +
             " regressor: final L1 " + fiqopt::format_double(result.epoch_loss.back()));

    fiqopt::save_model(args.out, result.model);
    log_line("wrote " + args.out);
    const std::string loss_path = args.out + ".loss.csv";
    fiqopt::write_loss_trace(loss_path, result.epoch_loss);
    log_line("wrote " + loss_path);

    json config{{"learning_rate", args.config.learning_rate},
                {"epochs", args.config.epochs},
                {"batch_size", args.config.batch_size},
                {"hidden_width", args.config.hidden_width},
                {"seed", args.config.seed}};
    write_manifest(args.out, "train", std::move(config), {args.embeddings, args.scores},
                   {args.out, loss_path});
    return 0;
}

struct PredictArgs {
    std::string embeddings;
    std::string model;
    std::string out;
};

int run_predict(PredictArgs& args) {
    const std::vector<fiqopt::EmbeddingRecord> records = fiqopt::load_embeddings(args.embeddings);
    const fiqopt::RegressorModel model = fiqopt::load_model(args.model);
    log_line("loaded " + std::to_string(records.size()) + " embeddings and a " +
             (model.hidden_width == 0 ? std::string("linear") : std::string("hidden")) + " model");
    fiqopt::QualityTable predictions;
    for (const fiqopt::EmbeddingRecord& rec : records)
        predictions.insert(rec.image_id, fiqopt::predict_quality(model, rec.vector));
    emit_scores(args.out, predictions);

    write_manifest(args.out, "predict", json::object(), {args.embeddings, args.model}, {args.out});
    return 0;
}

struct EvaluateArgs {
    std::string embeddings;
    std::string scores;
    std::string out;
    double fmr = 1e-3;
    std::size_t genuine_cap = 50;
    std::size_t impostor_count = 0;
    double drop_max = 0.95;
    double drop_step = 0.01;
    std::uint64_t seed = 42;
};

int run_evaluate(EvaluateArgs& args) {
    const fiqopt::DatasetBundle bundle = load_bundle(args.embeddings, args.scores);
    const fiqopt::VerificationPairSet pairs =
        fiqopt::build_verification_pairs(bundle, args.seed, args.genuine_cap, args.impostor_count);
    log_line("verification pairs: " + std::to_string(pairs.genuine.size()) + " genuine, " +
             std::to_string(pairs.impostor.size()) + " impostor");
    const fiqopt::ErcCurve curve = fiqopt::erc_curve(pairs, bundle.qualities_by_record(), args.fmr,
                                                     args.drop_max, args.drop_step);
    log_line("threshold " + fiqopt::format_double(curve.threshold) + " at FMR " +
             fiqopt::format_double(curve.fmr_target) + ", ERC AUC " + fiqopt::format_double(curve.auc));

    std::vector<std::string> outputs{args.out};
    if (args.out == "-") {
        std::cout << "drop_rate,fnmr\n";
        for (std::size_t i = 0; i < curve.drop_rates.size(); ++i)
            std::cout << fiqopt::format_double(curve.drop_rates[i]) << ','
                      << fiqopt::format_double(curve.fnmr_values[i]) << '\n';
        std::cout.flush();
        if (!std::cout) throw fiqopt::IoError("cannot write curve to stdout");
    } else {
        fiqopt::write_erc_csv(args.out, curve);
        log_line("wrote " + args.out);
        const std::string summary_path = args.out + ".summary.json";
        fiqopt::write_erc_summary(summary_path, curve);
        log_line("wrote " + summary_path);
        outputs.push_back(summary_path);
    }

    json config{{"fmr", args.fmr},
                {"genuine_cap", args.genuine_cap},
                {"impostor_count", args.impostor_count},
                {"drop_max", args.drop_max},
                {"drop_step", args.drop_step},
                {"seed", args.seed}};
    write_manifest(args.out, "evaluate", std::move(config), {args.embeddings, args.scores}, outputs);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    g_start = std::chrono::steady_clock::now();
    CLI::App app{"Rank-based quality label optimization, distillation, and ERC evaluation\n"
                 "for embedding datasets"};
    app.require_subcommand(1);

    SynthArgs synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic embedding dataset");
    synth_cmd->add_option("--identities", synth.config.identities, "Number of identities");
    CLI::Option* images_opt = synth_cmd->add_option("--images", synth.images, "Images per identity");
    CLI::Option* images_min_opt =
        synth_cmd->add_option("--images-min", synth.config.images_min, "Minimum images per identity");
    CLI::Option* images_max_opt =
        synth_cmd->add_option("--images-max", synth.config.images_max, "Maximum images per identity");
    synth_cmd->add_option("--dimension", synth.config.dimension, "Embedding dimension");
    synth_cmd->add_option("--noise-floor", synth.config.noise_floor, "Lower bound of the noise scale");
    synth_cmd->add_option("--noise-ceil", synth.config.noise_ceil, "Upper bound of the noise scale");
    synth_cmd->add_option("--baseline-corruption", synth.config.baseline_corruption,
                          "Gaussian corruption applied to the baseline scores");
    synth_cmd->add_option("--seed", synth.config.seed, "Random seed");
    synth_cmd->add_option("--out", synth.out, "Output embedding file (FEMB)")->required();
    synth_cmd->add_option("--truth-out", synth.truth_out, "Ground-truth score CSV");
    synth_cmd->add_option("--baseline-out", synth.baseline_out, "Baseline score CSV");

    OptimizeArgs optimize;
    CLI::App* optimize_cmd = app.add_subcommand("optimize", "Optimize quality labels against the embedding space");
    optimize_cmd->add_option("--embeddings", optimize.embeddings, "Embedding file (FEMB or CSV)")->required();
    optimize_cmd->add_option("--scores", optimize.scores, "Baseline score CSV")->required();
    optimize_cmd->add_option("--out", optimize.out, "Optimized score CSV, or - for stdout")->required();
    optimize_cmd->add_option("--clusters", optimize.config.clusters, "Clusters per identity");
    optimize_cmd->add_option("--theta", optimize.config.theta, "Update rate in [0, 1]");
    optimize_cmd->add_option("--repeats", optimize.config.repeats, "Independent repetitions");
    optimize_cmd->add_option("--seed", optimize.config.seed, "Random seed");
    optimize_cmd->add_option("--threads", optimize.threads, "Worker threads (results do not depend on this)");
    optimize_cmd->add_option("--indices-out", optimize.indices_out,
                             "Per-image rank diagnostics CSV");

    TrainArgs train;
    CLI::App* train_cmd = app.add_subcommand("train", "Distill scores into an embedding regressor");
    train_cmd->add_option("--embeddings", train.embeddings, "Embedding file (FEMB or CSV)")->required();
    train_cmd->add_option("--scores", train.scores, "Training score CSV (normalized internally)")->required();
    train_cmd->add_option("--out", train.out, "Output model JSON")->required();
    train_cmd->add_option("--learning-rate", train.config.learning_rate, "SGD learning rate");
    train_cmd->add_option("--epochs", train.config.epochs, "Training epochs");
    train_cmd->add_option("--batch-size", train.config.batch_size, "Mini-batch size");
    train_cmd->add_option("--hidden-width", train.config.hidden_width, "Hidden units; 0 trains a linear model");
    train_cmd->add_option("--seed", train.config.seed, "Random seed");

    PredictArgs predict;
    CLI::App* predict_cmd = app.add_subcommand("predict", "Score embeddings with a trained model");
    predict_cmd->add_option("--embeddings", predict.embeddings, "Embedding file (FEMB or CSV)")->required();
    predict_cmd->add_option("--model", predict.model, "Model JSON from train")->required();
    predict_cmd->add_option("--out", predict.out, "Predicted score CSV, or - for stdout")->required();

    EvaluateArgs evaluate;
    CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate a quality scorer with an ERC curve");
    evaluate_cmd->add_option("--embeddings", evaluate.embeddings, "Embedding file (FEMB or CSV)")->required();
    evaluate_cmd->add_option("--scores", evaluate.scores, "Quality score CSV to evaluate")->required();
    evaluate_cmd->add_option("--out", evaluate.out, "ERC curve CSV, or - for stdout")->required();
    evaluate_cmd->add_option("--fmr", evaluate.fmr, "Target false match rate");
    evaluate_cmd->add_option("--genuine-cap", evaluate.genuine_cap, "Genuine pairs per identity");
    evaluate_cmd->add_option("--impostor-count", evaluate.impostor_count,
                             "Impostor pairs to draw (0 = 10x the image count)");
    evaluate_cmd->add_option("--drop-max", evaluate.drop_max, "Largest drop rate");
    evaluate_cmd->add_option("--drop-step", evaluate.drop_step, "Drop rate step");
    evaluate_cmd->add_option("--seed", evaluate.seed, "Random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "fiqopt: " << e.what() << "\n";
        return 1;
    }

    try {
        if (synth_cmd->parsed()) {
            synth.images_given = images_opt->count() > 0;
            synth.range_given = images_min_opt->count() > 0 || images_max_opt->count() > 0;
            return run_synth(synth);
        }
        if (optimize_cmd->parsed()) return run_optimize(optimize);
        if (train_cmd->parsed()) return run_train(train);
        if (predict_cmd->parsed()) return run_predict(predict);
        if (evaluate_cmd->parsed()) return run_evaluate(evaluate);
    } catch (const fiqopt::ValidationError& e) {
        std::cerr << "fiqopt: " << e.what() << "\n";
        return 1;
    } catch (const fiqopt::IoError& e) {
        std::cerr << "fiqopt: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "fiqopt: unexpected error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
