#include "moddrop/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "moddrop/checkpoint.hpp"
#include "moddrop/config.hpp"
#include "moddrop/data_synth.hpp"
#include "moddrop/error.hpp"
#include "moddrop/evaluation.hpp"
#include "moddrop/report.hpp"
#include "moddrop/trainer.hpp"

namespace fs = std::filesystem;

namespace moddrop {

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "Run configuration file (key=value lines)");
    cmd->add_option("--seed", o.seed, "Seed for both data synthesis and training");
    cmd->add_option("--set", o.sets, "Override one config key, e.g. --set train.epochs=5");
}

RunConfig load_config(const CommonOptions& o) {
    RunConfig cfg = o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
    for (const std::string& s : o.sets) cfg.apply_override(s);
    if (o.seed) {
        cfg.synth.seed = *o.seed;
        cfg.train.seed = *o.seed;
    }
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out || !(out << text)) {
        throw IoError("cannot write " + path.string());
    }
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
    }
}

Dataset load_existing_dataset(const std::string& dir) {
    if (dir.empty() || !fs::exists(fs::path(dir) / "manifest.txt")) {
        throw ConfigError("no dataset at '" + dir + "' (expected a manifest.txt written by 'gen')");
    }
    return load_dataset(dir);
}

// Dataset geometry overrides the synth section so model and data agree.
void adopt_dataset_shape(RunConfig& cfg, const Dataset& ds) {
    cfg.synth.modalities = ds.modality_names.size();
    cfg.synth.slices = ds.samples.front().slices();
    cfg.synth.size = ds.samples.front().height();
    cfg.subjects = ds.samples.size();
}

int cmd_gen(const CommonOptions& common, const std::string& out_dir, std::ostream& out) {
    RunConfig cfg = load_config(common);
    cfg.finalize();
    const Dataset ds = generate_dataset(cfg.synth, cfg.subjects);
    save_dataset(out_dir, ds);
    write_text(fs::path(out_dir) / "config.txt", cfg.canonical_text());
    out << "wrote " << ds.samples.size() << " subjects x " << ds.modality_names.size() << " modalities to "
        << out_dir << "\n";
    return kExitOk;
}

void write_training_outputs(const fs::path& dir, const std::string& stem, const TrainingResult& r) {
    save_checkpoint(dir / (stem + ".mdc"), r.best);
    save_checkpoint(dir / (stem + "_final.mdc"), r.final);
    write_text(dir / (stem + "_log.csv"), format_training_log(r.log));
}

int cmd_train(const CommonOptions& common, const std::string& regime_text, const std::string& data_dir,
              const std::string& out_dir, std::ostream& out) {
    RunConfig cfg = load_config(common);
    if (!regime_text.empty()) cfg.train.regime = Regime::parse(regime_text);
    const Dataset ds = load_existing_dataset(data_dir);
    adopt_dataset_shape(cfg, ds);
    const bool all_independent = cfg.train.regime.kind == RegimeKind::independent && !cfg.train.regime.code;
    if (all_independent) cfg.train.regime.code = ModalityCode::full(cfg.synth.modalities);
    cfg.finalize();
    ensure_dir(out_dir);
    write_text(fs::path(out_dir) / "config.txt", cfg.canonical_text());

    const auto progress = [&out, &cfg](const std::string& label) {
        return [&out, &cfg, label](const EpochLog& e) {
            if ((e.epoch + 1) % cfg.train.val_every == 0 || e.epoch + 1 == cfg.train.epochs) {
                out << label << " epoch " << e.epoch + 1 << "/" << cfg.train.epochs
                    << " focal_missing=" << e.focal_missing << " lr=" << e.lr << "\n";
            }
        };
    };

    if (all_independent) {
        for (const ModalityCode& code : enumerate_configs(cfg.synth.modalities)) {
            RunConfig one = cfg;
            one.train.regime = Regime::independent(code);
            const TrainingResult r = run_training(ds, one.train_setup(), progress("im_" + code.str()));
            write_training_outputs(out_dir, "im_" + code.str(), r);
        }
        out << "trained " << enumerate_configs(cfg.synth.modalities).size() << " independent models in " << out_dir
            << "\n";
        return kExitOk;
    }
    const std::string stem = cfg.train.regime.kind == RegimeKind::independent
                                 ? "im_" + cfg.train.regime.code->str()
                                 : cfg.train.regime.name();
    const TrainingResult r = run_training(ds, cfg.train_setup(), progress(stem));
    write_training_outputs(out_dir, stem, r);
    out << "best validation DSC " << r.best_val_dsc << " at epoch " << r.best_epoch << "; wrote "
        << (fs::path(out_dir) / (stem + ".mdc")).string() << "\n";
    return kExitOk;
}

std::vector<fs::path> expand_checkpoints(const std::vector<std::string>& inputs) {
    std::vector<fs::path> out;
    for (const std::string& in : inputs) {
        if (fs::is_directory(in)) {
            std::vector<fs::path> found;
            for (const auto& entry : fs::directory_iterator(in)) {
                const fs::path p = entry.path();
                const std::string name = p.filename().string();
                if (p.extension() == ".mdc" && name.rfind("im_", 0) == 0 &&
                    name.find("_final") == std::string::npos) {
                    found.push_back(p);
                }
            }
            std::sort(found.begin(), found.end());
            if (found.empty()) {
                throw ConfigError("directory " + in + " holds no im_<code>.mdc checkpoints");
            }
            out.insert(out.end(), found.begin(), found.end());
        } else {
            out.emplace_back(in);
        }
    }
    if (out.empty()) {
        throw ConfigError("eval needs at least one checkpoint");
    }
    return out;
}

int cmd_eval(const CommonOptions& common, const std::vector<std::string>& checkpoint_args,
             const std::string& data_dir, const std::string& out_csv, std::optional<double> threshold,
             std::ostream& out, std::ostream& err) {
    RunConfig cfg = load_config(common);
    if (threshold) cfg.eval.threshold = *threshold;
    const Dataset ds = load_existing_dataset(data_dir);
    adopt_dataset_shape(cfg, ds);
    cfg.finalize();

    std::vector<std::pair<ModalityCode, SegmentationModel>> independent;
    std::optional<SegmentationModel> unified;
    for (const fs::path& path : expand_checkpoints(checkpoint_args)) {
        const Checkpoint ckpt = load_checkpoint(path);
        if (ckpt.model.modalities != cfg.synth.modalities || ckpt.model.slices_per_modality != cfg.synth.slices) {
            throw ConfigError(path.string() + " was trained for " + std::to_string(ckpt.model.modalities) +
                              " modalities x " + std::to_string(ckpt.model.slices_per_modality) +
                              " slices; the dataset has " + std::to_string(cfg.synth.modalities) + " x " +
                              std::to_string(cfg.synth.slices));
        }
        if (ckpt.fixed_code) {
            independent.emplace_back(*ckpt.fixed_code, model_from_checkpoint(ckpt));
        } else if (unified || checkpoint_args.size() > 1) {
            throw ConfigError("eval takes one unified checkpoint or a full set of independent ones");
        } else {
            unified = model_from_checkpoint(ckpt);
        }
    }
    if (unified && !independent.empty()) {
        throw ConfigError("cannot mix unified and independent checkpoints");
    }

    const DatasetSplit split =
        split_subjects(ds.samples.size(), ds.seed, cfg.train.test_fraction, cfg.train.val_fraction);
    if (split.test.empty()) {
        throw ConfigError("dataset has no held-out test subjects");
    }
    const auto test = select_samples(ds, split.test);
    const std::vector<ConfigResult> results =
        unified ? evaluate_unified(*unified, test, cfg.eval) : evaluate_independent(independent, test, cfg.eval);
    const Report report = make_report(results, fs::path(out_csv).stem().string());
    for (const ConfigResult& c : results) {
        for (const std::string& w : c.report.warnings) err << "warning [" << c.code.str() << "]: " << w << "\n";
    }
    if (!out_csv.empty()) {
        if (fs::path(out_csv).has_parent_path()) ensure_dir(fs::path(out_csv).parent_path());
        save_report(out_csv, report);
    }
    out << format_report_table(report);
    return kExitOk;
}

int cmd_compare(const std::vector<std::string>& inputs, const std::vector<std::string>& assertions,
                const std::string& metric_list, std::ostream& out) {
    std::vector<Report> reports;
    for (const std::string& in : inputs) {
        const auto eq = in.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("compare inputs take the form NAME=report.csv, got '" + in + "'");
        }
        reports.push_back(load_report(in.substr(eq + 1), in.substr(0, eq)));
    }
    std::vector<Metric> metrics;
    if (metric_list == "all") {
        metrics.assign(std::begin(kAllMetrics), std::end(kAllMetrics));
    } else {
        std::istringstream is(metric_list);
        std::string item;
        while (std::getline(is, item, ',')) metrics.push_back(parse_metric(item));
    }
    std::vector<Assertion> parsed;
    for (const std::string& a : assertions) parsed.push_back(Assertion::parse(a));
    require_comparable(reports);
    out << format_comparison(reports, metrics);
    bool all_passed = true;
    for (const Assertion& a : parsed) {
        const AssertionResult r = evaluate_assertion(a, reports);
        out << r.message << "\n";
        all_passed = all_passed && r.passed;
    }
    return all_passed ? kExitOk : kExitAssertion;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Modality-dropout segmentation: synthesize data, train, evaluate, compare"};
    app.require_subcommand(1);

    CommonOptions gen_opts, train_opts, eval_opts;
    std::string gen_out;
    CLI::App* gen = app.add_subcommand("gen", "Synthesize a multi-modal lesion dataset");
    add_common(gen, gen_opts);
    gen->add_option("--out", gen_out, "Output dataset directory")->required();

    std::string regime, train_data, train_out;
    CLI::App* train = app.add_subcommand("train", "Train one regime; 'independent' trains every configuration");
    add_common(train, train_opts);
    train->add_option("--regime", regime, "moddrop | moddrop_plus | moddrop_plus_plus | independent[:<code>]");
    train->add_option("--data", train_data, "Dataset directory")->required();
    train->add_option("--out", train_out, "Output directory")->required();

    std::vector<std::string> checkpoints;
    std::string eval_data, eval_out;
    std::optional<double> threshold;
    CLI::App* eval = app.add_subcommand("eval", "Evaluate checkpoints on every modality configuration");
    add_common(eval, eval_opts);
    eval->add_option("checkpoints", checkpoints, "Unified checkpoint, or independent checkpoints / their directory")
        ->required();
    eval->add_option("--data", eval_data, "Dataset directory")->required();
    eval->add_option("--out", eval_out, "Report CSV path");
    eval->add_option("--threshold", threshold, "Probability threshold for lesion masks");

    std::vector<std::string> reports, assertions;
    std::string metrics = "all";
    CLI::App* compare = app.add_subcommand("compare", "Side-by-side comparison of reports");
    compare->add_option("reports", reports, "NAME=report.csv, at least two")->required();
    compare->add_option("--assert", assertions, "e.g. \"MD++>=MD on >=12/15 configs by DSC\"");
    compare->add_option("--metric", metrics, "Comma-separated metrics or 'all'");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen(gen_opts, gen_out, out);
        if (train->parsed()) return cmd_train(train_opts, regime, train_data, train_out, out);
        if (eval->parsed()) return cmd_eval(eval_opts, checkpoints, eval_data, eval_out, threshold, out, err);
        if (compare->parsed()) return cmd_compare(reports, assertions, metrics, out);
    } catch (const NumericsError& e) {
        err << "numeric failure: " << e.what() << "\n";
        return kExitNumerics;
    } catch (const DomainError& e) {
        err << "numeric failure: " << e.what() << "\n";
        return kExitNumerics;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const FormatError& e) {
        err << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace moddrop
