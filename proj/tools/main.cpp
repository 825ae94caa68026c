#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rngml/errors.hpp"
#include "rngml/extractor.hpp"
#include "rngml/lcg.hpp"
#include "rngml/rcnn.hpp"
#include "rngml/report.hpp"
#include "rngml/signal.hpp"
#include "rngml/stats.hpp"
#include "rngml/stream.hpp"
#include "rngml/sts.hpp"

namespace fs = std::filesystem;
using namespace rngml;

namespace {

std::string hex_digest(const SampleStream& s) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "0x%016" PRIx64, header_digest(s));
    return buf;
}

void make_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

SampleStream load_input(const std::string& path) {
    if (!fs::exists(path)) throw IoError("no such stream file: " + path);
    return load_stream(path);
}

// drop low bits when the caller wants a coarser alphabet (0 = keep as is)
SampleStream apply_msb(SampleStream s, int msb) {
    if (msb == 0) return s;
    require(msb >= 1 && msb <= s.bit_depth,
            "--msb must be between 1 and the stream bit depth");
    return truncate_to_msb(s, msb);
}

Json input_echo(const std::string& path, const SampleStream& s, int msb,
                bool with_msb) {
    Json j{{"file", path},
           {"stage", to_string(s.stage)},
           {"scenario", to_string(s.scenario)},
           {"stream_seed", s.seed},
           {"bit_depth", s.bit_depth},
           {"samples", s.values.size()}};
    if (with_msb) j["msb"] = msb;
    return j;
}

void emit(const Json& report, const std::string& schema_name,
          const std::string& path) {
    require_finite(report);
    validate_schema(report, report_schema(schema_name));
    write_json_file(report, path);
}

// ---- simulate ----------------------------------------------------------

struct SimulateArgs {
    std::string config_path;
    std::string out_dir;
    std::string scenario;  // empty = both
    std::string stage;     // empty = all
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void run_simulate(const SimulateArgs& a) {
    ChainConfig cfg = chain_config_from_json(load_json_file(a.config_path));
    if (a.seed_set) cfg.seed = a.seed;
    validate_config(cfg);
    make_out_dir(a.out_dir);

    std::vector<Scenario> scenarios;
    if (a.scenario.empty()) {
        scenarios = {Scenario::classical, Scenario::quantum_classical};
    } else {
        Scenario sc = scenario_from_string(a.scenario);
        require(sc != Scenario::none,
                "--scenario must be classical or quantum_classical");
        scenarios = {sc};
    }
    if (!a.stage.empty()) stage_from_string(a.stage);  // reject bad names early

    std::vector<Json> files;
    for (Scenario sc : scenarios) {
        auto streams = run_chain(cfg, sc);
        for (const auto& [stage, stream] : streams) {
            if (!a.stage.empty() && to_string(stage) != a.stage) continue;
            const std::string name =
                to_string(sc) + "_" + to_string(stage) + ".rns";
            store_stream(stream, a.out_dir + "/" + name);
            files.push_back({{"name", name},
                             {"stage", to_string(stage)},
                             {"scenario", to_string(sc)},
                             {"digest", hex_digest(stream)},
                             {"samples", stream.values.size()}});
        }
    }
    std::sort(files.begin(), files.end(),
              [](const Json& x, const Json& y) {
                  return x.at("name").get<std::string>() <
                         y.at("name").get<std::string>();
              });

    Json scenario_names = Json::array();
    for (Scenario sc : scenarios) scenario_names.push_back(to_string(sc));
    Json manifest{{"command", "simulate"},
                  {"version", kToolVersion},
                  {"config", chain_config_to_json(cfg)},
                  {"scenarios", scenario_names},
                  {"files", files}};
    emit(manifest, "manifest", a.out_dir + "/manifest.json");
    std::fprintf(stderr, "wrote %zu stream files and manifest.json to %s\n",
                 files.size(), a.out_dir.c_str());
}

// ---- attack ------------------------------------------------------------

struct AttackArgs {
    std::string stream_path;
    std::string out_dir;
    std::size_t window = 100;
    std::size_t stride = 1;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::size_t test_sets = 5;
    double val_fraction = 0.2;
    int msb = 0;
    std::uint64_t seed = 1;
    std::uint64_t model_seed = 7;
    std::size_t epochs = 20;
    std::size_t batch = 256;
    std::size_t patience = 4;
    double learning_rate = 1e-3;
    bool verbose = false;
};

void run_attack_cmd(const AttackArgs& a) {
    SampleStream s = apply_msb(load_input(a.stream_path), a.msb);
    make_out_dir(a.out_dir);

    AttackConfig cfg;
    cfg.window = a.window;
    cfg.stride = a.stride;
    cfg.train_symbols = a.train_size;
    cfg.test_symbols = a.test_size;
    cfg.n_testsets = a.test_sets;
    cfg.val_fraction = a.val_fraction;
    cfg.train.max_epochs = a.epochs;
    cfg.train.batch = a.batch;
    cfg.train.patience = a.patience;
    cfg.train.adam.lr = a.learning_rate;
    cfg.train.seed = a.seed;
    cfg.train.log = a.verbose;
    cfg.model_seed = a.model_seed;

    Model trained;
    AttackReport rep = run_attack(s, cfg, &trained);

    // analysis series for external plotting
    const std::vector<double> x = stream_to_doubles(s);
    write_histogram_csv(histogram(s), a.out_dir + "/histogram.csv");
    write_autocorr_csv(
        autocorrelation(x, std::min<std::size_t>(1000, x.size() - 1)),
        a.out_dir + "/autocorr.csv");
    std::size_t segment = 8;
    while (segment * 2 <= std::min<std::size_t>(4096, x.size())) segment *= 2;
    write_psd_csv(welch_psd(x, segment), a.out_dir + "/psd.csv");

    Json train_loss = Json::array(), val_loss = Json::array(),
         val_acc = Json::array();
    for (const EpochRecord& e : rep.training.history) {
        train_loss.push_back(e.train_loss);
        val_loss.push_back(e.val_loss);
        val_acc.push_back(e.val_accuracy);
    }
    Json report{
        {"command", "attack"},
        {"version", kToolVersion},
        {"input", input_echo(a.stream_path, s, a.msb, true)},
        {"attack",
         {{"window", a.window},
          {"stride", a.stride},
          {"train_symbols", a.train_size},
          {"test_symbols", a.test_size},
          {"test_sets", a.test_sets},
          {"val_fraction", a.val_fraction},
          {"seed", a.seed},
          {"model_seed", a.model_seed},
          {"max_epochs", a.epochs},
          {"batch", a.batch},
          {"patience", a.patience},
          {"learning_rate", a.learning_rate}}},
        {"model",
         {{"alphabet", rep.alphabet},
          {"stack", trained.plan.two_convs ? "full" : "reduced"},
          {"parameters", parameter_count(trained.spec)}}},
        {"training",
         {{"epochs_run", rep.training.history.size()},
          {"best_epoch", rep.training.best_epoch},
          {"best_val_loss", rep.training.best_val_loss},
          {"best_val_accuracy", rep.training.best_val_accuracy},
          {"train_loss", train_loss},
          {"val_loss", val_loss},
          {"val_accuracy", val_acc}}},
        {"results",
         {{"windows_per_set", rep.eval.windows_per_set},
          {"p_g", rep.eval.p_g},
          {"mode_symbol", rep.guess.mode_symbol},
          {"p_ml_per_set", rep.eval.per_testset_accuracy},
          {"p_ml_mean", rep.eval.p_ml_mean},
          {"p_ml_sd", rep.eval.p_ml_sd},
          {"advantage_sigma", rep.eval.advantage_sigma},
          {"min_entropy_bits", min_entropy(rep.eval.p_g)}}}};
    emit(report, "attack_report", a.out_dir + "/report.json");
    std::fprintf(stderr,
                 "p_ml %.5f  p_g %.5f  advantage %.2f sigma  (%s)\n",
                 rep.eval.p_ml_mean, rep.eval.p_g, rep.eval.advantage_sigma,
                 (a.out_dir + "/report.json").c_str());
}

// ---- sts ---------------------------------------------------------------

struct StsArgs {
    std::string stream_path;
    std::string out_dir;
    std::size_t sequences = 0;
    std::size_t seq_len = 0;
    int msb = 0;
};

void run_sts_cmd(const StsArgs& a) {
    SampleStream s = apply_msb(load_input(a.stream_path), a.msb);
    require(s.bit_depth == 8,
            "battery needs byte-oriented input; pass --msb 8 for wider streams");
    make_out_dir(a.out_dir);

    sts::BatteryParams params;
    sts::BatteryResult res =
        sts::run_battery(sts::bytes_to_bits(s), a.sequences, a.seq_len, params);

    Json tests = Json::array();
    for (const sts::TestResult& t : res.per_test)
        tests.push_back({{"name", t.name},
                         {"proportion", t.proportion},
                         {"uniformity_p", t.uniformity_p},
                         {"proportion_pass", t.proportion_pass},
                         {"uniformity_pass", t.uniformity_pass},
                         {"pass", t.pass}});
    Json report{{"command", "sts"},
                {"version", kToolVersion},
                {"input", input_echo(a.stream_path, s, a.msb, true)},
                {"battery",
                 {{"n_sequences", res.n_sequences},
                  {"seq_len", res.seq_len},
                  {"alpha", res.alpha},
                  {"proportion_lo", res.proportion_lo},
                  {"proportion_hi", res.proportion_hi},
                  {"tests", tests},
                  {"total_passed", res.total_passed}}}};
    emit(report, "sts_report", a.out_dir + "/report.json");
    std::fprintf(stderr, "battery: %zu of %zu tests passed (%s)\n",
                 res.total_passed, res.per_test.size(),
                 (a.out_dir + "/report.json").c_str());
}

// ---- extract -----------------------------------------------------------

struct ExtractArgs {
    std::string stream_path;
    std::string out_dir;
    double sd_m = 0.0;
    double sd_e = 0.0;
    std::uint64_t seed = 1;
    std::size_t in_block = 1024;
    double safety = 0.5;
    double fullscale = 0.0;  // 0 = read from the stream header
    int adc_bits = 0;        // 0 = read from the stream header
};

void run_extract_cmd(const ExtractArgs& a) {
    SampleStream s = load_input(a.stream_path);
    require(a.sd_m > a.sd_e,
            "measured deviation must exceed the classical part: with sd_m <= "
            "sd_e no quantum entropy is left to extract");
    make_out_dir(a.out_dir);

    double fullscale = a.fullscale;
    if (fullscale == 0.0) {
        require(s.extra.count("fullscale") == 1,
                "stream header has no fullscale entry; pass --fullscale");
        fullscale = std::stod(s.extra.at("fullscale"));
    }
    int adc_bits = a.adc_bits;
    if (adc_bits == 0) {
        require(s.extra.count("adc_bits") == 1,
                "stream header has no adc_bits entry; pass --adc-bits");
        adc_bits = std::stoi(s.extra.at("adc_bits"));
    }

    const double h = conditional_min_entropy(a.sd_m, a.sd_e, adc_bits,
                                             fullscale, s.bit_depth);
    ExtractorConfig cfg =
        make_extractor_config(a.in_block, h, s.bit_depth, a.safety, a.seed);
    SampleStream out = extract_stream(s, cfg, h);
    const std::string out_file = a.out_dir + "/hashed.rns";
    store_stream(out, out_file);

    Json report{
        {"command", "extract"},
        {"version", kToolVersion},
        {"input", input_echo(a.stream_path, s, 0, false)},
        {"extraction",
         {{"sd_m", a.sd_m},
          {"sd_e", a.sd_e},
          {"adc_bits", adc_bits},
          {"fullscale", fullscale},
          {"keep_bits", s.bit_depth},
          {"h_min_cond_bits", h},
          {"safety_factor", a.safety},
          {"extraction_ratio", extraction_ratio(h, s.bit_depth, a.safety)},
          {"in_block_bits", cfg.in_block_bits},
          {"out_block_bits", cfg.out_block_bits},
          {"seed", a.seed},
          {"seed_hex", seed_to_hex(cfg.seed_bits)}}},
        {"output",
         {{"file", "hashed.rns"},
          {"bytes", out.values.size()},
          {"digest", hex_digest(out)}}}};
    emit(report, "extract_report", a.out_dir + "/report.json");
    std::fprintf(stderr,
                 "conditional min-entropy %.3f bits/sample, wrote %zu bytes "
                 "(%s)\n",
                 h, out.values.size(), out_file.c_str());
}

// ---- lcg ---------------------------------------------------------------

struct LcgArgs {
    std::string out_file;
    std::uint64_t a = 0;
    std::uint64_t c = 0;
    std::uint64_t m = 0;
    std::uint64_t seed = 1;
    std::size_t count = 0;
};

void run_lcg_cmd(const LcgArgs& a) {
    LcgParams p{a.a, a.c, a.m};
    validate_lcg(p);
    SampleStream s = lcg_stream(p, a.seed, a.count);
    store_stream(s, a.out_file);
    std::fprintf(stderr, "wrote %zu bytes to %s\n", s.values.size(),
                 a.out_file.c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "randomness measurement chain toolkit: simulate a balanced detector "
        "chain, train a predictor against recorded streams, run the "
        "statistical battery, extract hashed output. Set RNGML_THREADS to "
        "control worker threads."};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand(
        "simulate", "run the measurement chain and write stage streams");
    c_sim->add_option("--config", sim.config_path, "chain config JSON")
        ->required();
    c_sim->add_option("--out", sim.out_dir, "output directory")->required();
    c_sim->add_option("--scenario", sim.scenario,
                      "only this scenario (classical|quantum_classical)");
    c_sim->add_option("--stage", sim.stage, "only this stage");
    auto* sim_seed = c_sim->add_option("--seed", sim.seed,
                                       "override the config seed");
    c_sim->callback([&] {
        sim.seed_set = sim_seed->count() > 0;
        run_simulate(sim);
    });

    AttackArgs atk;
    auto* c_atk = app.add_subcommand(
        "attack", "train the predictor on a stream and report its edge");
    c_atk->add_option("stream", atk.stream_path, "input stream file")
        ->required();
    c_atk->add_option("--out", atk.out_dir, "output directory")->required();
    c_atk->add_option("--window", atk.window, "symbols per input window");
    c_atk->add_option("--stride", atk.stride, "window start spacing");
    c_atk->add_option("--train-size", atk.train_size,
                      "training region length in symbols")
        ->required();
    c_atk->add_option("--test-size", atk.test_size,
                      "length of each held-out region in symbols")
        ->required();
    c_atk->add_option("--test-sets", atk.test_sets, "number of held-out regions");
    c_atk->add_option("--val-fraction", atk.val_fraction,
                      "trailing fraction of training windows used for "
                      "early stopping");
    c_atk->add_option("--msb", atk.msb,
                      "keep only this many top bits per symbol (0 = all)");
    c_atk->add_option("--seed", atk.seed, "training shuffle seed");
    c_atk->add_option("--model-seed", atk.model_seed, "weight init seed");
    c_atk->add_option("--epochs", atk.epochs, "max training epochs");
    c_atk->add_option("--batch", atk.batch, "minibatch size");
    c_atk->add_option("--patience", atk.patience,
                      "epochs without val improvement before stopping");
    c_atk->add_option("--lr", atk.learning_rate, "Adam learning rate");
    c_atk->add_flag("--verbose", atk.verbose, "epoch progress on stderr");
    c_atk->callback([&] { run_attack_cmd(atk); });

    StsArgs sts;
    auto* c_sts = app.add_subcommand(
        "sts", "run the statistical test battery over a byte stream");
    c_sts->add_option("stream", sts.stream_path, "input stream file")
        ->required();
    c_sts->add_option("--out", sts.out_dir, "output directory")->required();
    c_sts->add_option("--sequences", sts.sequences, "number of sequences")
        ->required();
    c_sts->add_option("--seq-len", sts.seq_len, "bits per sequence")
        ->required();
    c_sts->add_option("--msb", sts.msb,
                      "truncate symbols to this many top bits first");
    c_sts->callback([&] { run_sts_cmd(sts); });

    ExtractArgs ext;
    auto* c_ext = app.add_subcommand(
        "extract", "hash a raw stream down to its quantum entropy content");
    c_ext->add_option("stream", ext.stream_path, "input stream file")
        ->required();
    c_ext->add_option("--out", ext.out_dir, "output directory")->required();
    c_ext->add_option("--sd-m", ext.sd_m,
                      "measured total deviation, input units")
        ->required();
    c_ext->add_option("--sd-e", ext.sd_e,
                      "classical (predictable) deviation, input units")
        ->required();
    c_ext->add_option("--seed", ext.seed, "hash seed");
    c_ext->add_option("--in-block", ext.in_block, "input block size in bits");
    c_ext->add_option("--safety", ext.safety, "fraction of the entropy kept");
    c_ext->add_option("--fullscale", ext.fullscale,
                      "quantizer fullscale (default: stream header)");
    c_ext->add_option("--adc-bits", ext.adc_bits,
                      "quantizer depth (default: stream header)");
    c_ext->callback([&] { run_extract_cmd(ext); });

    LcgArgs lcg;
    auto* c_lcg = app.add_subcommand(
        "lcg", "write a congruential generator byte stream");
    c_lcg->add_option("--out", lcg.out_file, "output stream file")->required();
    c_lcg->add_option("--a", lcg.a, "multiplier")->required();
    c_lcg->add_option("--c", lcg.c, "increment")->required();
    c_lcg->add_option("--m", lcg.m, "modulus")->required();
    c_lcg->add_option("--seed", lcg.seed, "initial state");
    c_lcg->add_option("--count", lcg.count, "bytes to emit")->required();
    c_lcg->callback([&] { run_lcg_cmd(lcg); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ContractError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
