// mtwf: Wi-Fi RSSI fingerprint localization with mean-teacher SSL.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 training divergence.

#include "mtwf/ap_select.hpp"
#include "mtwf/dataset.hpp"
#include "mtwf/evaluate.hpp"
#include "mtwf/harness.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using mtwf::harness::ExperimentConfig;

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw mtwf::DataError("cannot read " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

// Options shared by the experiment-running subcommands. A config file (when
// given) provides the baseline; explicit flags override it field by field.
struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::string train_path;
    std::string validation_path;
    std::uint64_t seed = 0;
    std::uint64_t split_seed = 0;
    CLI::Option *o_config = nullptr, *o_out = nullptr, *o_train = nullptr,
                *o_validation = nullptr, *o_seed = nullptr, *o_split = nullptr;

    void attach(CLI::App* cmd) {
        o_config = cmd->add_option("--config", config_path,
                                   "JSON config file mirroring the experiment config");
        o_out = cmd->add_option("--out", out_dir, "output directory for run artifacts");
        o_seed = cmd->add_option("--seed", seed, "training seed");
        o_split = cmd->add_option("--split-seed", split_seed, "dataset split seed");
        o_train = cmd->add_option("--train", train_path, "training CSV path");
        o_validation = cmd->add_option("--validation", validation_path, "validation CSV path");
    }

    ExperimentConfig build(const std::string& scenario) const {
        ExperimentConfig cfg = config_path.empty()
                                   ? mtwf::harness::default_config(scenario)
                                   : ExperimentConfig::from_json(read_file(config_path));
        if (!scenario.empty()) cfg.scenario = scenario;
        if (*o_out) cfg.output_dir = out_dir;
        if (*o_seed) cfg.ssl.seed = seed;
        if (*o_split) cfg.split_seed = split_seed;
        if (*o_train) cfg.train_path = train_path;
        if (*o_validation) cfg.validation_path = validation_path;
        return cfg;
    }
};

void print_run(const mtwf::harness::RunRecord& rec) {
    std::cout << mtwf::evaluate::format_table(
        {{rec.config.strategy, mtwf::models::kind_name(rec.config.model), rec.report.gamma,
          rec.report.evaal_error}});
    std::cout << "run dir: " << rec.run_dir << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wi-Fi fingerprint indoor localization: mean-teacher SSL harness"};
    app.require_subcommand(1);

    // ---- ingest ----
    auto* ingest = app.add_subcommand("ingest", "validate dataset CSVs and print summaries");
    std::vector<std::string> ingest_files;
    ingest->add_option("files", ingest_files, "CSV files (default: resolved data directory)");

    // ---- select-aps ----
    auto* select = app.add_subcommand("select-aps", "build and save the AP selection mask");
    CommonOpts sel_opts;
    sel_opts.attach(select);
    std::string sel_unlabeled;
    select->add_option("--unlabeled", sel_unlabeled,
                       "unlabeled CSV merged into the scan (default: none)");

    // ---- train ----
    auto* train = app.add_subcommand("train", "run one training experiment");
    CommonOpts tr_opts;
    tr_opts.attach(train);
    std::string tr_scenario = "hybrid", tr_model = "simo", tr_strategy = "ssl",
                tr_noise = "gaussian";
    int tr_case = 4, tr_periods = 1;
    std::size_t tr_max_epochs = 0, tr_pre_epochs = 0, tr_sae_epochs = 0, tr_batch = 0;
    bool tr_nosel = false;
    train->add_option("--scenario", tr_scenario, "hybrid | online")
        ->check(CLI::IsMember({"hybrid", "online"}));
    auto* o_case = train->add_option("--case", tr_case, "hybrid case 1..4 (labeled quarters)")
                       ->check(CLI::Range(1, 4));
    auto* o_periods = train->add_option("--periods", tr_periods, "online retraining periods")
                          ->check(CLI::PositiveNumber);
    auto* o_model = train->add_option("--model", tr_model, "simo | cnnloc")
                        ->check(CLI::IsMember({"simo", "cnnloc"}));
    auto* o_strategy = train->add_option("--strategy", tr_strategy, "sl | ssl")
                           ->check(CLI::IsMember({"sl", "ssl"}));
    auto* o_noise = train->add_option("--noise", tr_noise, "noise kind: gaussian | uniform")
                        ->check(CLI::IsMember({"gaussian", "uniform"}));
    auto* o_nosel = train->add_flag("--no-ap-selection", tr_nosel, "use all 520 AP columns");
    auto* o_maxep = train->add_option("--max-epochs", tr_max_epochs, "cap on training epochs");
    auto* o_preep =
        train->add_option("--pretrain-epochs", tr_pre_epochs, "cap on pre-training epochs");
    auto* o_saeep = train->add_option("--sae-epochs", tr_sae_epochs,
                                      "autoencoder reconstruction epochs (cnnloc)");
    auto* o_batch = train->add_option("--batch-size", tr_batch, "minibatch size");

    // ---- ablate ----
    auto* ablate = app.add_subcommand("ablate", "paired ablation runs");
    CommonOpts ab_opts;
    ab_opts.attach(ablate);
    std::string ab_what, ab_model = "simo", ab_strategy = "ssl", ab_noise = "gaussian";
    ablate->add_option("what", ab_what, "ap | noise")
        ->required()
        ->check(CLI::IsMember({"ap", "noise"}));
    ablate->add_option("--model", ab_model, "simo | cnnloc")
        ->check(CLI::IsMember({"simo", "cnnloc"}));
    ablate->add_option("--strategy", ab_strategy, "sl | ssl (ap ablation only)")
        ->check(CLI::IsMember({"sl", "ssl"}));
    ablate->add_option("--noise", ab_noise, "noise kind for the noise ablation")
        ->check(CLI::IsMember({"gaussian", "uniform"}));

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a test CSV");
    std::string ev_checkpoint, ev_test;
    eval->add_option("--checkpoint", ev_checkpoint, "checkpoint file")->required();
    eval->add_option("--test", ev_test, "test CSV")->required();

    // ---- report ----
    auto* report = app.add_subcommand("report", "aggregate run reports under a directory");
    std::string rp_dir;
    report->add_option("--dir", rp_dir, "directory containing run outputs")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*ingest) {
            std::vector<std::pair<std::string, mtwf::Role>> files;
            if (ingest_files.empty()) {
                std::string dir = mtwf::harness::default_data_dir();
                files = {{dir + "/trainingData.csv", mtwf::Role::Labeled},
                         {dir + "/validationData.csv", mtwf::Role::Test}};
            } else {
                for (const auto& f : ingest_files) files.emplace_back(f, mtwf::Role::Labeled);
            }
            for (const auto& [path, role] : files) {
                mtwf::Dataset d = mtwf::load_csv(path, role);
                mtwf::Dataset empty;
                empty.ap_ids = d.ap_ids;
                mtwf::SelectionMask mask = mtwf::build_mask(d, empty);
                std::cout << path << ": rows=" << d.size() << " aps=" << d.width()
                          << " informative=" << mask.size()
                          << " content=" << mtwf::to_hex(mtwf::content_hash(d)) << "\n";
            }
        } else if (*select) {
            ExperimentConfig cfg = sel_opts.build("hybrid");
            mtwf::harness::resolve_paths(cfg);
            mtwf::Dataset train_d = mtwf::load_csv(cfg.train_path, mtwf::Role::Labeled);
            mtwf::Dataset unl;
            if (!sel_unlabeled.empty()) {
                unl = mtwf::load_csv(sel_unlabeled, mtwf::Role::Unlabeled);
            } else {
                unl.ap_ids = train_d.ap_ids;
                unl.role = mtwf::Role::Unlabeled;
            }
            mtwf::SelectionMask mask = mtwf::build_mask(train_d, unl);
            std::filesystem::create_directories(cfg.output_dir);
            std::string out = cfg.output_dir + "/mask.txt";
            mtwf::save_mask(mask, out);
            std::cout << "retained " << mask.size() << " of " << train_d.width()
                      << " APs; mask written to " << out << "\n";
        } else if (*train) {
            ExperimentConfig cfg = tr_opts.build(tr_scenario);
            if (*o_case) cfg.case_index = tr_case;
            if (*o_periods) cfg.periods = tr_periods;
            if (*o_model) cfg.model = mtwf::models::kind_from_name(tr_model);
            if (*o_strategy) cfg.strategy = tr_strategy;
            if (*o_noise)
                cfg.noise.kind = tr_noise == "gaussian" ? mtwf::NoiseConfig::Kind::Gaussian
                                                        : mtwf::NoiseConfig::Kind::Uniform;
            if (*o_nosel) cfg.ap_selection = false;
            if (*o_maxep) cfg.ssl.max_epochs = tr_max_epochs;
            if (*o_preep) cfg.ssl.pretrain_max_epochs = tr_pre_epochs;
            if (*o_saeep) cfg.ssl.sae_epochs = tr_sae_epochs;
            if (*o_batch) cfg.ssl.batch_size = tr_batch;
            cfg.validate();
            print_run(mtwf::harness::run(cfg));
        } else if (*ablate) {
            ExperimentConfig cfg = ab_opts.build("hybrid");
            cfg.model = mtwf::models::kind_from_name(ab_model);
            cfg.strategy = ab_strategy;
            cfg.noise.kind = ab_noise == "gaussian" ? mtwf::NoiseConfig::Kind::Gaussian
                                                    : mtwf::NoiseConfig::Kind::Uniform;
            std::pair<mtwf::harness::RunRecord, mtwf::harness::RunRecord> pair =
                ab_what == "ap" ? mtwf::harness::run_ablation_ap(cfg)
                                : mtwf::harness::run_ablation_noise(cfg);
            print_run(pair.first);
            print_run(pair.second);
            mtwf::evaluate::ImprovementReport imp = mtwf::evaluate::improvement(
                pair.second.report.evaal_error, pair.first.report.evaal_error);
            std::cout << "eta: " << mtwf::format_double(imp.eta) << "%\n";
        } else if (*eval) {
            std::string model_name;
            mtwf::evaluate::EvalReport r =
                mtwf::harness::evaluate_checkpoint(ev_checkpoint, ev_test, &model_name);
            std::cout << mtwf::evaluate::report_json(r) << "\n";
            std::cout << mtwf::evaluate::format_table(
                {{"checkpoint", model_name, r.gamma, r.evaal_error}});
        } else if (*report) {
            std::cout << mtwf::harness::report_tree(rp_dir);
        }
    } catch (const mtwf::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const mtwf::TrainError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
