#include "mtwf/harness.hpp"

#include "mtwf/checkpoint.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mtwf::harness {

namespace fs = std::filesystem;
using nlohmann::json;

/* ------------------------------------------------------------------ */
/* Config                                                              */
/* ------------------------------------------------------------------ */

void ExperimentConfig::validate() const {
    if (scenario != "hybrid" && scenario != "online" && scenario != "ablation-ap" &&
        scenario != "ablation-noise")
        throw DataError("config: unknown scenario '" + scenario + "'");
    if (case_index < 1 || case_index > 4)
        throw DataError("config: case must be in 1..4");
    if (periods < 1)
        throw DataError("config: periods must be >= 1");
    if (strategy != "sl" && strategy != "ssl")
        throw DataError("config: strategy must be sl or ssl");
    ssl.validate();
    noise.validate();
}

ExperimentConfig default_config(const std::string& scenario) {
    ExperimentConfig cfg;
    cfg.scenario = scenario;
    if (scenario == "online") {
        cfg.ssl.alpha = 0.9;
        cfg.ssl.wc = 10.0;
        cfg.ssl.scheduler_patience = 10;
    }
    return cfg;
}

namespace {

json ssl_to_json(const mt::SslConfig& s) {
    return json{{"alpha", s.alpha},
                {"wc", s.wc},
                {"batch_size", s.batch_size},
                {"scheduler_patience", s.scheduler_patience},
                {"early_stop_patience", s.early_stop_patience},
                {"max_epochs", s.max_epochs},
                {"pretrain_max_epochs", s.pretrain_max_epochs},
                {"sae_epochs", s.sae_epochs},
                {"seed", s.seed}};
}

void ssl_from_json(const json& j, mt::SslConfig& s) {
    if (j.contains("alpha")) s.alpha = j["alpha"].get<double>();
    if (j.contains("wc")) s.wc = j["wc"].get<double>();
    if (j.contains("batch_size")) s.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("scheduler_patience")) s.scheduler_patience = j["scheduler_patience"].get<int>();
    if (j.contains("early_stop_patience"))
        s.early_stop_patience = j["early_stop_patience"].get<int>();
    if (j.contains("max_epochs")) s.max_epochs = j["max_epochs"].get<std::size_t>();
    if (j.contains("pretrain_max_epochs"))
        s.pretrain_max_epochs = j["pretrain_max_epochs"].get<std::size_t>();
    if (j.contains("sae_epochs")) s.sae_epochs = j["sae_epochs"].get<std::size_t>();
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
}

json noise_to_json(const NoiseConfig& n) {
    return json{{"kind", n.kind == NoiseConfig::Kind::Gaussian ? "gaussian" : "uniform"},
                {"mu", n.mu},
                {"sigma", n.sigma},
                {"clip", n.clip},
                {"uniform_lo", n.uniform_lo},
                {"uniform_hi", n.uniform_hi}};
}

void noise_from_json(const json& j, NoiseConfig& n) {
    if (j.contains("kind")) {
        std::string k = j["kind"].get<std::string>();
        if (k == "gaussian")
            n.kind = NoiseConfig::Kind::Gaussian;
        else if (k == "uniform")
            n.kind = NoiseConfig::Kind::Uniform;
        else
            throw DataError("config: unknown noise kind '" + k + "'");
    }
    if (j.contains("mu")) n.mu = j["mu"].get<double>();
    if (j.contains("sigma")) n.sigma = j["sigma"].get<double>();
    if (j.contains("clip")) n.clip = j["clip"].get<double>();
    if (j.contains("uniform_lo")) n.uniform_lo = j["uniform_lo"].get<double>();
    if (j.contains("uniform_hi")) n.uniform_hi = j["uniform_hi"].get<double>();
}

} // namespace

std::string ExperimentConfig::to_json() const {
    json j;
    j["scenario"] = scenario;
    j["case"] = case_index;
    j["periods"] = periods;
    j["model"] = models::kind_name(model);
    j["strategy"] = strategy;
    j["ssl"] = ssl_to_json(ssl);
    j["noise"] = noise_to_json(noise);
    j["train_path"] = train_path;
    j["validation_path"] = validation_path;
    j["output_dir"] = output_dir;
    j["split_seed"] = split_seed;
    j["ap_selection"] = ap_selection;
    return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded())
        throw DataError("config: invalid JSON");
    ExperimentConfig cfg = default_config(j.value("scenario", std::string("hybrid")));
    if (j.contains("case")) cfg.case_index = j["case"].get<int>();
    if (j.contains("periods")) cfg.periods = j["periods"].get<int>();
    if (j.contains("model")) cfg.model = models::kind_from_name(j["model"].get<std::string>());
    if (j.contains("strategy")) cfg.strategy = j["strategy"].get<std::string>();
    if (j.contains("ssl")) ssl_from_json(j["ssl"], cfg.ssl);
    if (j.contains("noise")) noise_from_json(j["noise"], cfg.noise);
    if (j.contains("train_path")) cfg.train_path = j["train_path"].get<std::string>();
    if (j.contains("validation_path"))
        cfg.validation_path = j["validation_path"].get<std::string>();
    if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("split_seed")) cfg.split_seed = j["split_seed"].get<std::uint64_t>();
    if (j.contains("ap_selection")) cfg.ap_selection = j["ap_selection"].get<bool>();
    cfg.validate();
    return cfg;
}

/* ------------------------------------------------------------------ */
/* Paths                                                               */
/* ------------------------------------------------------------------ */

std::string default_data_dir() {
    if (const char* env = std::getenv("MTWF_DATA_DIR"); env && *env)
        return env;
    return "data";
}

void resolve_paths(ExperimentConfig& cfg) {
    std::string dir = default_data_dir();
    if (cfg.train_path.empty()) cfg.train_path = dir + "/trainingData.csv";
    if (cfg.validation_path.empty()) cfg.validation_path = dir + "/validationData.csv";
    for (const std::string& p : {cfg.train_path, cfg.validation_path}) {
        if (!fs::exists(p))
            throw DataError("dataset not available: missing " + p +
                            " (place the UJIIndoorLoc CSVs as trainingData.csv and "
                            "validationData.csv under ./data or set MTWF_DATA_DIR)");
    }
}

/* ------------------------------------------------------------------ */
/* Run plumbing                                                        */
/* ------------------------------------------------------------------ */

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw DataError("cannot write " + path.string());
    os << text;
}

Matrix vstack(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols)
        throw DataError("vstack: column mismatch");
    Matrix out(a.rows + b.rows, a.cols);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + std::ptrdiff_t(a.v.size()));
    return out;
}

json mask_to_json(const SelectionMask& mask) {
    return json{{"fingerprint", to_hex(mask.source_fingerprint)}, {"ids", mask.selected_ids}};
}

SelectionMask mask_from_json(const json& j) {
    SelectionMask mask;
    mask.selected_ids = j.at("ids").get<std::vector<std::string>>();
    mask.source_fingerprint = std::stoull(j.at("fingerprint").get<std::string>(), nullptr, 16);
    return mask;
}

json scaler_to_json(const CoordScaler& s) {
    return json{{"lon_min", s.lon_min}, {"lon_max", s.lon_max}, {"lat_min", s.lat_min},
                {"lat_max", s.lat_max}, {"out_lo", s.out_lo},   {"out_hi", s.out_hi}};
}

CoordScaler scaler_from_json(const json& j) {
    CoordScaler s;
    s.lon_min = j.at("lon_min").get<double>();
    s.lon_max = j.at("lon_max").get<double>();
    s.lat_min = j.at("lat_min").get<double>();
    s.lat_max = j.at("lat_max").get<double>();
    s.out_lo = j.at("out_lo").get<double>();
    s.out_hi = j.at("out_hi").get<double>();
    return s;
}

std::string checkpoint_meta(const models::Model& m, const SelectionMask& mask,
                            const CoordScaler& scaler, const ExperimentConfig& cfg) {
    json j;
    j["model_spec"] = json::parse(models::spec_json(m));
    j["mask"] = mask_to_json(mask);
    j["scaler"] = scaler_to_json(scaler);
    j["run"] = json{{"scenario", cfg.scenario},
                    {"strategy", cfg.strategy},
                    {"seed", cfg.ssl.seed},
                    {"split_seed", cfg.split_seed}};
    return j.dump();
}

std::string run_dir_name(const ExperimentConfig& cfg) {
    std::ostringstream os;
    if (cfg.scenario == "online")
        os << "online_p" << cfg.periods;
    else
        os << "hybrid_case" << cfg.case_index;
    os << '_' << models::kind_name(cfg.model) << '_' << cfg.strategy;
    if (!cfg.ap_selection) os << "_nosel";
    os << "_seed" << cfg.ssl.seed;
    return os.str();
}

json report_summary_json(const evaluate::EvalReport& r) {
    return json{{"evaal_error", r.evaal_error}, {"gamma", r.gamma},   {"b_miss", r.b_miss},
                {"f_miss", r.f_miss},           {"mean_euc", r.mean_euc}, {"n", r.n}};
}

void write_run_record(const RunRecord& rec, const std::vector<std::string>& logs) {
    json j;
    j["config"] = json::parse(rec.config.to_json());
    j["seed"] = rec.seed;
    j["wall_seconds"] = rec.wall_seconds;
    j["labeled_hash"] = to_hex(rec.labeled_hash);
    j["report"] = report_summary_json(rec.report);
    j["checkpoint"] = "checkpoint.mtwf";
    j["logs"] = logs;
    write_text(fs::path(rec.run_dir) / "run.json", j.dump(2));
}

mt::GammaProbe make_gamma_probe(const models::Model& m, const Matrix& test_features,
                                const Dataset& truth, const CoordScaler& scaler) {
    return [&m, &test_features, &truth, &scaler](const nn::Parameters& p) {
        return evaluate::evaal(evaluate::predict(m, p, test_features, scaler), truth).gamma;
    };
}

// Train/evaluate one arm on prepared data and persist the run directory.
RunRecord execute_run(const ExperimentConfig& cfg, PreparedData& data) {
    auto t0 = std::chrono::steady_clock::now();

    models::Model model = models::build_model(cfg.model, data.mask.size());
    const CoordScaler& scaler = data.labeled_enc.scaler;

    fs::path run_dir = fs::path(cfg.output_dir) / run_dir_name(cfg);
    fs::create_directories(run_dir);
    write_text(run_dir / "config.json", cfg.to_json());
    save_mask(data.mask, (run_dir / "mask.txt").string());

    mt::GammaProbe probe = make_gamma_probe(model, data.test_enc.features, data.test, scaler);

    nn::Parameters params = models::init_params(model, derive_seed(cfg.ssl.seed, 0x171));
    if (cfg.model == models::ModelKind::CnnLoc)
        models::sae_pretrain(model, params, data.labeled_enc.features, cfg.ssl.sae_epochs,
                             cfg.ssl.batch_size, derive_seed(cfg.ssl.seed, 0x5ae));

    std::vector<std::string> logs;
    nn::Parameters final_params;
    if (cfg.strategy == "sl") {
        mt::SslConfig sl_cfg = cfg.ssl;
        sl_cfg.pretrain_max_epochs = cfg.ssl.max_epochs;
        std::ofstream log(run_dir / "train_log.csv", std::ios::binary | std::ios::trunc);
        final_params = mt::pretrain(model, std::move(params), data.labeled_enc, sl_cfg, &log,
                                    &probe);
        logs.push_back("train_log.csv");
    } else {
        std::ofstream pre_log(run_dir / "pretrain_log.csv", std::ios::binary | std::ios::trunc);
        nn::Parameters theta_p =
            mt::pretrain(model, std::move(params), data.labeled_enc, cfg.ssl, &pre_log, &probe);
        pre_log.close();
        std::ofstream ssl_log(run_dir / "ssl_log.csv", std::ios::binary | std::ios::trunc);
        final_params = mt::ssl_train(model, theta_p, data.labeled_enc, data.unlabeled_features,
                                     cfg.ssl, &ssl_log, &probe);
        logs.push_back("pretrain_log.csv");
        logs.push_back("ssl_log.csv");
    }

    auto preds = evaluate::predict(model, final_params, data.test_enc.features, scaler);
    evaluate::EvalReport report = evaluate::evaal(preds, data.test);

    checkpoint::save((run_dir / "checkpoint.mtwf").string(), final_params,
                     checkpoint_meta(model, data.mask, scaler, cfg));
    write_text(run_dir / "report.json", evaluate::report_json(report));
    write_text(run_dir / "report.txt",
               evaluate::format_table({{cfg.strategy, models::kind_name(cfg.model), report.gamma,
                                        report.evaal_error}}));

    RunRecord rec;
    rec.config = cfg;
    rec.seed = cfg.ssl.seed;
    rec.report = report;
    rec.labeled_hash = data.labeled_hash;
    rec.run_dir = run_dir.string();
    rec.checkpoint_path = (run_dir / "checkpoint.mtwf").string();
    rec.log_path = (run_dir / logs.back()).string();
    rec.report_path = (run_dir / "report.json").string();
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_record(rec, logs);
    return rec;
}

} // namespace

/* ------------------------------------------------------------------ */
/* Scenario preparation & runs                                         */
/* ------------------------------------------------------------------ */

PreparedData prepare_hybrid(const ExperimentConfig& cfg_in) {
    ExperimentConfig cfg = cfg_in;
    resolve_paths(cfg);
    Dataset train = load_csv(cfg.train_path, Role::Labeled);
    Dataset test = load_csv(cfg.validation_path, Role::Test);

    std::vector<Dataset> quarters = split_quarters(train, cfg.split_seed);
    std::vector<const Dataset*> lab_parts, unl_parts;
    for (int i = 0; i < 4; ++i)
        (i < cfg.case_index ? lab_parts : unl_parts).push_back(&quarters[std::size_t(i)]);

    PreparedData data;
    data.labeled = concat(lab_parts, Role::Labeled);
    data.labeled_hash = content_hash(data.labeled);

    Dataset unlabeled;
    if (!unl_parts.empty())
        unlabeled = as_unlabeled(concat(unl_parts, Role::Unlabeled));
    data.synthesized_unlabeled = unl_parts.empty();

    if (cfg.ap_selection) {
        if (!data.synthesized_unlabeled) {
            data.mask = build_mask(data.labeled, unlabeled);
        } else {
            // Case 4: the mask comes from the labeled data alone, before any
            // noise is injected.
            Dataset empty;
            empty.ap_ids = data.labeled.ap_ids;
            empty.role = Role::Unlabeled;
            data.mask = build_mask(data.labeled, empty);
        }
    } else {
        data.mask = full_mask(train);
    }

    Dataset masked_labeled = apply_mask(data.labeled, data.mask);
    data.test = apply_mask(test, data.mask);
    // Keep the truth labels from the original order; apply_mask preserves
    // rows, so data.test doubles as the ground truth.

    auto [lo, hi] = models::coord_range(cfg.model);
    data.labeled_enc = encode_labels(masked_labeled, nullptr, lo, hi);
    data.test_enc = encode_features(data.test);

    if (data.synthesized_unlabeled) {
        data.unlabeled_features = inject_noise(data.labeled_enc.features, cfg.noise,
                                               derive_seed(cfg.split_seed, 0x401e));
        data.unlabeled_hash = fnv1a_doubles(data.unlabeled_features.v.data(),
                                            data.unlabeled_features.v.size());
    } else {
        data.unlabeled_features = feature_matrix(apply_mask(unlabeled, data.mask));
        data.unlabeled_hash = content_hash(unlabeled);
    }
    return data;
}

RunRecord run_hybrid_case(const ExperimentConfig& cfg_in) {
    ExperimentConfig cfg = cfg_in;
    cfg.validate();
    resolve_paths(cfg);
    PreparedData data = prepare_hybrid(cfg);
    return execute_run(cfg, data);
}

RunRecord run_online(const ExperimentConfig& cfg_in) {
    ExperimentConfig cfg = cfg_in;
    cfg.validate();
    resolve_paths(cfg);

    // The reference model is the fully supervised Case-4 network trained on
    // the initial database; reuse its checkpoint when present.
    ExperimentConfig ref_cfg = default_config("hybrid");
    ref_cfg.case_index = 4;
    ref_cfg.model = cfg.model;
    ref_cfg.strategy = "sl";
    ref_cfg.ssl.seed = cfg.ssl.seed;
    ref_cfg.split_seed = cfg.split_seed;
    ref_cfg.noise = cfg.noise;
    ref_cfg.train_path = cfg.train_path;
    ref_cfg.validation_path = cfg.validation_path;
    ref_cfg.output_dir =
        (fs::path(cfg.output_dir) / ("online_ref_" + std::string(models::kind_name(cfg.model)) +
                                     "_seed" + std::to_string(cfg.ssl.seed)))
            .string();

    fs::path ref_ckpt = fs::path(ref_cfg.output_dir) / run_dir_name(ref_cfg) / "checkpoint.mtwf";
    if (!fs::exists(ref_ckpt)) {
        PreparedData ref_data = prepare_hybrid(ref_cfg);
        execute_run(ref_cfg, ref_data);
    }

    checkpoint::Snapshot snap = checkpoint::load(ref_ckpt.string());
    json meta = json::parse(snap.meta_json);
    models::Model model = models::model_from_json(meta.at("model_spec").dump());
    SelectionMask mask = mask_from_json(meta.at("mask"));
    CoordScaler scaler = scaler_from_json(meta.at("scaler"));

    Dataset train = load_csv(cfg.train_path, Role::Labeled);
    Dataset validation = load_csv(cfg.validation_path, Role::Test);
    OnlineSplit split = split_online(validation);

    PreparedData data;
    data.labeled = train;
    data.labeled_hash = content_hash(train);
    data.mask = mask;
    data.test = apply_mask(split.test_c, mask);
    data.labeled_enc = encode_labels(apply_mask(train, mask), &scaler);
    data.test_enc = encode_features(data.test);
    Matrix b_features = feature_matrix(apply_mask(split.unlabeled_b, mask));
    data.unlabeled_features = b_features;
    data.unlabeled_hash = content_hash(split.unlabeled_b);

    auto t0 = std::chrono::steady_clock::now();
    fs::path run_dir = fs::path(cfg.output_dir) / run_dir_name(cfg);
    fs::create_directories(run_dir);
    write_text(run_dir / "config.json", cfg.to_json());
    save_mask(mask, (run_dir / "mask.txt").string());

    mt::GammaProbe probe = make_gamma_probe(model, data.test_enc.features, data.test, scaler);

    std::vector<std::string> logs;
    nn::Parameters final_params = snap.params;
    if (cfg.strategy == "ssl") {
        // Stream B is consumed in `periods` timestamp-ordered chunks, each
        // continuing from the previous teacher.
        std::size_t n = b_features.rows;
        std::size_t done = 0;
        for (int p = 0; p < cfg.periods; ++p) {
            std::size_t begin = std::size_t(p) * n / std::size_t(cfg.periods);
            std::size_t end = std::size_t(p + 1) * n / std::size_t(cfg.periods);
            if (end <= begin) continue;
            Matrix chunk(end - begin, b_features.cols);
            std::copy(b_features.row(begin), b_features.row(begin) + chunk.v.size(),
                      chunk.v.begin());
            std::string log_name = p == 0 ? "ssl_log.csv" : "ssl_log_p" + std::to_string(p + 1) + ".csv";
            std::ofstream log(run_dir / log_name, std::ios::binary | std::ios::trunc);
            mt::SslConfig period_cfg = cfg.ssl;
            period_cfg.seed = derive_seed(cfg.ssl.seed, 0x9e10 + std::uint64_t(p));
            final_params = mt::ssl_train(model, final_params, data.labeled_enc, chunk,
                                         period_cfg, &log, &probe);
            logs.push_back(log_name);
            done += end - begin;
        }
        if (done != n)
            throw TrainError("online: period chunking failed to cover stream B");
    } else {
        // SL baseline: the frozen reference is evaluated on C unchanged.
        std::ofstream log(run_dir / "train_log.csv", std::ios::binary | std::ios::trunc);
        log << "epoch,ld,lc,lt,lr,gamma_dev\n";
        logs.push_back("train_log.csv");
    }

    auto preds = evaluate::predict(model, final_params, data.test_enc.features, scaler);
    evaluate::EvalReport report = evaluate::evaal(preds, data.test);

    checkpoint::save((run_dir / "checkpoint.mtwf").string(), final_params,
                     checkpoint_meta(model, mask, scaler, cfg));
    write_text(run_dir / "report.json", evaluate::report_json(report));
    write_text(run_dir / "report.txt",
               evaluate::format_table({{cfg.strategy, models::kind_name(cfg.model), report.gamma,
                                        report.evaal_error}}));

    RunRecord rec;
    rec.config = cfg;
    rec.seed = cfg.ssl.seed;
    rec.report = report;
    rec.labeled_hash = data.labeled_hash;
    rec.run_dir = run_dir.string();
    rec.checkpoint_path = (run_dir / "checkpoint.mtwf").string();
    rec.log_path = (run_dir / logs.back()).string();
    rec.report_path = (run_dir / "report.json").string();
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_record(rec, logs);
    return rec;
}

std::pair<RunRecord, RunRecord> run_ablation_ap(const ExperimentConfig& cfg_in) {
    ExperimentConfig with = cfg_in;
    with.scenario = "hybrid";
    with.case_index = 4;
    with.ap_selection = true;
    with.validate();
    ExperimentConfig without = with;
    without.ap_selection = false;

    RunRecord a = run_hybrid_case(with);
    RunRecord b = run_hybrid_case(without);

    fs::path dir = fs::path(cfg_in.output_dir) /
                   ("ablation_ap_" + std::string(models::kind_name(cfg_in.model)) + "_" +
                    cfg_in.strategy + "_seed" + std::to_string(cfg_in.ssl.seed));
    fs::create_directories(dir);
    evaluate::ImprovementReport imp = evaluate::improvement(b.report.evaal_error, a.report.evaal_error);
    json j;
    j["with_selection"] = report_summary_json(a.report);
    j["without_selection"] = report_summary_json(b.report);
    j["eta_selection_vs_none"] = imp.eta;
    write_text(dir / "summary.json", j.dump(2));
    std::ostringstream table;
    table << evaluate::format_table(
        {{a.config.strategy + "+sel", models::kind_name(a.config.model), a.report.gamma,
          a.report.evaal_error},
         {b.config.strategy + "-sel", models::kind_name(b.config.model), b.report.gamma,
          b.report.evaal_error}});
    table << "eta (selection vs none): " << format_double(imp.eta) << "%\n";
    write_text(dir / "summary.txt", table.str());
    return {a, b};
}

std::pair<RunRecord, RunRecord> run_ablation_noise(const ExperimentConfig& cfg_in) {
    ExperimentConfig ssl_cfg = cfg_in;
    ssl_cfg.scenario = "hybrid";
    ssl_cfg.case_index = 4;
    ssl_cfg.ap_selection = true;
    ssl_cfg.strategy = "ssl";
    ssl_cfg.validate();
    ExperimentConfig sl_cfg = ssl_cfg;
    sl_cfg.strategy = "sl";

    resolve_paths(ssl_cfg);
    resolve_paths(sl_cfg);

    PreparedData ssl_data = prepare_hybrid(ssl_cfg);
    RunRecord a = execute_run(ssl_cfg, ssl_data);

    // SL arm: same split and the same noised features, but used as extra
    // labeled rows (targets duplicated) instead of as an unlabeled stream.
    PreparedData sl_data = prepare_hybrid(sl_cfg);
    sl_data.labeled_enc.features = vstack(sl_data.labeled_enc.features, sl_data.unlabeled_features);
    sl_data.labeled_enc.bf_targets = vstack(sl_data.labeled_enc.bf_targets, sl_data.labeled_enc.bf_targets);
    sl_data.labeled_enc.coord_targets =
        vstack(sl_data.labeled_enc.coord_targets, sl_data.labeled_enc.coord_targets);
    sl_data.unlabeled_features = Matrix{};
    RunRecord b = execute_run(sl_cfg, sl_data);

    const char* kind =
        cfg_in.noise.kind == NoiseConfig::Kind::Gaussian ? "gaussian" : "uniform";
    fs::path dir = fs::path(cfg_in.output_dir) /
                   ("ablation_noise_" + std::string(kind) + "_" +
                    std::string(models::kind_name(cfg_in.model)) + "_seed" +
                    std::to_string(cfg_in.ssl.seed));
    fs::create_directories(dir);
    evaluate::ImprovementReport imp = evaluate::improvement(b.report.evaal_error, a.report.evaal_error);
    json j;
    j["ssl_noise_unlabeled"] = report_summary_json(a.report);
    j["sl_noise_concat"] = report_summary_json(b.report);
    j["eta_ssl_vs_sl"] = imp.eta;
    j["noise_kind"] = kind;
    write_text(dir / "summary.json", j.dump(2));
    std::ostringstream table;
    table << evaluate::format_table(
        {{"ssl", models::kind_name(cfg_in.model), a.report.gamma, a.report.evaal_error},
         {"sl+noise", models::kind_name(cfg_in.model), b.report.gamma, b.report.evaal_error}});
    table << "eta (ssl vs sl): " << format_double(imp.eta) << "%\n";
    write_text(dir / "summary.txt", table.str());
    return {a, b};
}

RunRecord run(const ExperimentConfig& cfg) {
    if (cfg.scenario == "hybrid") return run_hybrid_case(cfg);
    if (cfg.scenario == "online") return run_online(cfg);
    if (cfg.scenario == "ablation-ap") return run_ablation_ap(cfg).first;
    if (cfg.scenario == "ablation-noise") return run_ablation_noise(cfg).first;
    throw DataError("unknown scenario: " + cfg.scenario);
}

/* ------------------------------------------------------------------ */
/* Checkpoint evaluation & report aggregation                          */
/* ------------------------------------------------------------------ */

evaluate::EvalReport evaluate_checkpoint(const std::string& checkpoint_path,
                                         const std::string& test_path,
                                         std::string* model_name) {
    checkpoint::Snapshot snap = checkpoint::load(checkpoint_path);
    json meta = json::parse(snap.meta_json, nullptr, false);
    if (meta.is_discarded() || !meta.contains("model_spec"))
        throw DataError("checkpoint has no model metadata: " + checkpoint_path);
    models::Model model = models::model_from_json(meta.at("model_spec").dump());
    SelectionMask mask = mask_from_json(meta.at("mask"));
    CoordScaler scaler = scaler_from_json(meta.at("scaler"));
    if (model_name) *model_name = models::kind_name(model.kind);

    Dataset test = apply_mask(load_csv(test_path, Role::Test), mask);
    EncodedBatch enc = encode_features(test);
    auto preds = evaluate::predict(model, snap.params, enc.features, scaler);
    return evaluate::evaal(preds, test);
}

std::string report_tree(const std::string& dir) {
    if (!fs::exists(dir))
        throw DataError("report: no such directory: " + dir);

    struct Row {
        std::string rel;
        std::string strategy;
        std::string model;
        double gamma, evaal;
    };
    std::vector<Row> rows;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().filename() != "run.json") continue;
        std::ifstream is(entry.path());
        json j = json::parse(is, nullptr, false);
        if (j.is_discarded()) continue;
        Row r;
        r.rel = fs::relative(entry.path().parent_path(), dir).string();
        r.strategy = j.at("config").value("strategy", "?");
        r.model = j.at("config").value("model", "?");
        r.gamma = j.at("report").value("gamma", 0.0);
        r.evaal = j.at("report").value("evaal_error", 0.0);
        rows.push_back(std::move(r));
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.rel < b.rel; });
    if (rows.empty())
        return "no runs found under " + dir + "\n";

    std::vector<evaluate::TableRow> table;
    table.reserve(rows.size());
    for (const auto& r : rows)
        table.push_back({r.strategy + " " + r.rel, r.model, r.gamma, r.evaal});
    std::ostringstream os;
    os << evaluate::format_table(table);

    // Recomputed relative improvement for sl/ssl pairs that differ only in
    // the strategy token of their run directory name.
    auto pair_key = [](const Row& r) {
        std::string key = r.rel;
        auto strip = [&key](const std::string& tok) {
            auto at = key.find(tok);
            if (at != std::string::npos) key.erase(at, tok.size());
        };
        strip("_ssl");
        strip("_sl");
        return key;
    };
    for (const auto& a : rows) {
        if (a.strategy != "ssl") continue;
        for (const auto& b : rows) {
            if (b.strategy != "sl" || b.model != a.model) continue;
            if (pair_key(a) != pair_key(b)) continue;
            evaluate::ImprovementReport imp = evaluate::improvement(b.evaal, a.evaal);
            os << "eta " << a.model << " (" << a.rel << " vs " << b.rel
               << "): " << format_double(imp.eta) << "%\n";
        }
    }
    return os.str();
}

} // namespace mtwf::harness
