#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <rngml/dataprep.hpp>
#include <rngml/extractor.hpp>
#include <rngml/report.hpp>
#include <rngml/stats.hpp>
#include <rngml/stream.hpp>

using namespace rngml;
namespace fs = std::filesystem;

namespace {

// Exit code of the tool run with the given arguments, output discarded.
int run_cli(const std::string& args) {
    const std::string cmd = std::string(RNGML_BIN) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "cannot open " << p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::path("cli_tmp") / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Small chain config shared by the simulate/sts/extract cases below.
fs::path tiny_config(unsigned long long seed = 7) {
    const fs::path dir = fs::path("cli_tmp");
    fs::create_directories(dir);
    const fs::path p = dir / ("tiny_" + std::to_string(seed) + ".json");
    std::ofstream out(p);
    out << "{\n"
           "  \"n_samples\": 256, \"oversample\": 4,\n"
           "  \"quantum_sd\": 3.1622776601683795, \"electronic_sd\": 1.0,\n"
           "  \"lo_sd\": 6.0, \"tones\": [], \"cmrr_epsilon\": 0.05,\n"
           "  \"demod_freqs\": [0.3125, 0.1875],\n"
           "  \"lpf_cutoff\": 1.0, \"lpf_taps\": 201,\n"
           "  \"adc_bits\": 16, \"adc_fullscale\": 160.0,\n"
           "  \"seed\": " << seed << "\n}\n";
    return p;
}

// LCG byte stream fixture reused by the attack and battery cases.
fs::path lcg_fixture() {
    static fs::path p;
    if (p.empty()) {
        fs::create_directories("cli_tmp");
        p = fs::path("cli_tmp") / "lcg16.rns";
        REQUIRE(run_cli("lcg --out " + p.string() +
                        " --a 1103515245 --c 12345 --m 65536 --seed 1"
                        " --count 30000") == 0);
    }
    return p;
}

std::uint64_t parse_digest(const std::string& hex) {
    REQUIRE(hex.substr(0, 2) == "0x");
    return std::stoull(hex.substr(2), nullptr, 16);
}

std::size_t count_lines(const fs::path& p) {
    const std::string text = slurp(p);
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

} // namespace

TEST_CASE("cli: version, help, and subcommand requirements") {
    CHECK(run_cli("--version") == 0);
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("") == 2);          // a subcommand is required
    CHECK(run_cli("bogus") == 2);     // unknown subcommand
    CHECK(run_cli("simulate --no-such-flag") == 2);
}

TEST_CASE("cli: published schema files match the embedded copies") {
    for (const char* name :
         {"manifest", "attack_report", "sts_report", "extract_report"}) {
        const fs::path p = fs::path(RNGML_SOURCE_DIR) / "schemas" /
                           (std::string(name) + ".schema.json");
        const Json published = Json::parse(slurp(p));
        CHECK_MESSAGE(published == report_schema(name), name);
    }
}

TEST_CASE("cli: simulate writes streams and a schema-valid manifest") {
    const fs::path cfg = tiny_config();
    const fs::path out = fresh_dir("sim_full");
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " +
                    out.string()) == 0);

    const Json manifest = load_json_file((out / "manifest.json").string());
    CHECK_NOTHROW(validate_schema(manifest, report_schema("manifest")));
    CHECK(manifest.at("command") == "simulate");
    CHECK(manifest.at("scenarios") == Json::array({"classical", "quantum_classical"}));

    const Json& files = manifest.at("files");
    REQUIRE(files.size() == 16);
    for (const Json& entry : files) {
        const fs::path f = out / entry.at("name").get<std::string>();
        REQUIRE(fs::exists(f));
        const SampleStream s = load_stream(f.string());
        CHECK(header_digest(s) == parse_digest(entry.at("digest")));
        CHECK(s.values.size() == entry.at("samples").get<std::size_t>());
        CHECK(to_string(s.stage) == entry.at("stage").get<std::string>());
        CHECK(to_string(s.scenario) == entry.at("scenario").get<std::string>());
    }

    // config echo parses back into the same chain configuration
    const Json& echo = manifest.at("config");
    CHECK(chain_config_to_json(chain_config_from_json(echo)) == echo);
}

TEST_CASE("cli: simulate reruns byte-identical, new seeds differ") {
    const fs::path cfg = tiny_config();
    const fs::path out1 = fresh_dir("sim_rep1");
    const fs::path out2 = fresh_dir("sim_rep2");
    const fs::path out3 = fresh_dir("sim_rep3");
    const std::string base = "simulate --config " + cfg.string() + " --out ";
    REQUIRE(run_cli(base + out1.string()) == 0);
    REQUIRE(run_cli(base + out2.string()) == 0);
    REQUIRE(run_cli(base + out3.string() + " --seed 9") == 0);

    CHECK(slurp(out1 / "manifest.json") == slurp(out2 / "manifest.json"));
    CHECK(slurp(out1 / "quantum_classical_diff.rns") ==
          slurp(out2 / "quantum_classical_diff.rns"));
    CHECK(slurp(out1 / "classical_lpf1.rns") == slurp(out2 / "classical_lpf1.rns"));

    CHECK(slurp(out1 / "quantum_classical_diff.rns") !=
          slurp(out3 / "quantum_classical_diff.rns"));
    const Json m3 = load_json_file((out3 / "manifest.json").string());
    CHECK(m3.at("config").at("seed") == 9);
}

TEST_CASE("cli: simulate scenario and stage filters") {
    const fs::path cfg = tiny_config();

    const fs::path cls = fresh_dir("sim_cls");
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " +
                    cls.string() + " --scenario classical") == 0);
    const Json m1 = load_json_file((cls / "manifest.json").string());
    REQUIRE(m1.at("files").size() == 8);
    for (const Json& e : m1.at("files"))
        CHECK(e.at("scenario") == "classical");
    CHECK(m1.at("scenarios") == Json::array({"classical"}));

    const fs::path dif = fresh_dir("sim_diff");
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " +
                    dif.string() + " --stage diff") == 0);
    const Json m2 = load_json_file((dif / "manifest.json").string());
    REQUIRE(m2.at("files").size() == 2);
    for (const Json& e : m2.at("files"))
        CHECK(e.at("stage") == "diff");

    CHECK(run_cli("simulate --config " + cfg.string() +
                  " --out cli_tmp/x --stage nope") == 2);
    CHECK(run_cli("simulate --config " + cfg.string() +
                  " --out cli_tmp/x --scenario none") == 2);
}

TEST_CASE("cli: simulate rejects broken configs with contract exit codes") {
    fs::create_directories("cli_tmp");
    {
        std::ofstream out("cli_tmp/unknown_key.json");
        out << "{\"n_samples\": 256, \"bogus_key\": 1}\n";
    }
    {
        std::ofstream out("cli_tmp/broken.json");
        out << "not json {\n";
    }
    {
        std::ofstream out("cli_tmp/zero_samples.json");
        out << "{\"n_samples\": 0}\n";
    }
    CHECK(run_cli("simulate --config cli_tmp/unknown_key.json --out cli_tmp/x") == 2);
    CHECK(run_cli("simulate --config cli_tmp/broken.json --out cli_tmp/x") == 2);
    CHECK(run_cli("simulate --config cli_tmp/zero_samples.json --out cli_tmp/x") == 2);
    CHECK(run_cli("simulate --config cli_tmp/no_such_file.json --out cli_tmp/x") == 3);
}

TEST_CASE("cli: lcg emits deterministic byte streams") {
    const fs::path p = lcg_fixture();
    const SampleStream s = load_stream(p.string());
    CHECK(s.bit_depth == 8);
    CHECK(s.unsigned_range);
    CHECK(s.stage == Stage::lcg);
    CHECK(s.values.size() == 30000);
    for (std::size_t i = 0; i < s.values.size(); i += 997)
        CHECK((s.values[i] >= 0 && s.values[i] <= 255));

    const fs::path again = fs::path("cli_tmp") / "lcg16_again.rns";
    REQUIRE(run_cli("lcg --out " + again.string() +
                    " --a 1103515245 --c 12345 --m 65536 --seed 1"
                    " --count 30000") == 0);
    CHECK(slurp(p) == slurp(again));

    const fs::path other = fs::path("cli_tmp") / "lcg16_seed2.rns";
    REQUIRE(run_cli("lcg --out " + other.string() +
                    " --a 1103515245 --c 12345 --m 65536 --seed 2"
                    " --count 30000") == 0);
    CHECK(slurp(p) != slurp(other));

    CHECK(run_cli("lcg --out cli_tmp/x.rns --a 5 --c 1 --m 0 --count 10") == 2);
}

TEST_CASE("cli: attack writes a schema-valid report plus diagnostics") {
    const fs::path p = lcg_fixture();
    const fs::path out = fresh_dir("atk");
    const std::string args = "attack " + p.string() + " --out " + out.string() +
                             " --window 10 --stride 3 --train-size 20000"
                             " --test-size 2000 --test-sets 2 --epochs 1"
                             " --seed 5 --model-seed 7";
    REQUIRE(run_cli(args) == 0);

    const Json report = load_json_file((out / "report.json").string());
    CHECK_NOTHROW(validate_schema(report, report_schema("attack_report")));
    CHECK(report.at("command") == "attack");
    CHECK(report.at("input").at("samples") == 30000);
    CHECK(report.at("model").at("alphabet") == 256);
    CHECK(report.at("model").at("stack") == "reduced");
    CHECK(report.at("model").at("parameters").get<std::uint64_t>() > 0);
    CHECK(report.at("training").at("epochs_run") == 1);
    CHECK(report.at("results").at("windows_per_set") ==
          window_count(2000, 10, 3));
    CHECK(report.at("results").at("p_ml_per_set").size() == 2);

    // diagnostics: full symbol histogram, 1000 lags, one Welch segment
    CHECK(count_lines(out / "histogram.csv") == 257);
    CHECK(count_lines(out / "autocorr.csv") == 1002);
    CHECK(count_lines(out / "psd.csv") == 2050);

    const fs::path out2 = fresh_dir("atk_rep");
    REQUIRE(run_cli("attack " + p.string() + " --out " + out2.string() +
                    " --window 10 --stride 3 --train-size 20000"
                    " --test-size 2000 --test-sets 2 --epochs 1"
                    " --seed 5 --model-seed 7") == 0);
    CHECK(slurp(out / "report.json") == slurp(out2 / "report.json"));
}

TEST_CASE("cli: attack rejects impossible splits and bad truncation") {
    const fs::path p = lcg_fixture();
    CHECK(run_cli("attack " + p.string() +
                  " --out cli_tmp/x --window 10 --stride 3"
                  " --train-size 500000 --test-size 2000") == 2);
    CHECK(run_cli("attack " + p.string() +
                  " --out cli_tmp/x --window 10 --stride 3"
                  " --train-size 1000 --test-size 100 --msb 20") == 2);
    CHECK(run_cli("attack cli_tmp/no_such.rns --out cli_tmp/x"
                  " --train-size 10 --test-size 10") == 3);
}

TEST_CASE("cli: sts reports one row per battery test") {
    const fs::path p = lcg_fixture();
    const fs::path out = fresh_dir("sts");
    REQUIRE(run_cli("sts " + p.string() + " --out " + out.string() +
                    " --sequences 10 --seq-len 20000") == 0);

    const Json report = load_json_file((out / "report.json").string());
    CHECK_NOTHROW(validate_schema(report, report_schema("sts_report")));
    const Json& battery = report.at("battery");
    CHECK(battery.at("n_sequences") == 10);
    CHECK(battery.at("seq_len") == 20000);
    REQUIRE(battery.at("tests").size() == 8);
    std::size_t passed = 0;
    for (const Json& row : battery.at("tests")) {
        CHECK(row.at("uniformity_p").get<double>() >= 0.0);
        CHECK(row.at("proportion").get<double>() <= 1.0);
        if (row.at("pass").get<bool>()) ++passed;
        CHECK(row.at("pass").get<bool>() ==
              (row.at("uniformity_pass").get<bool>() &&
               row.at("proportion_pass").get<bool>()));
    }
    CHECK(battery.at("total_passed") == passed);

    const fs::path out2 = fresh_dir("sts_rep");
    REQUIRE(run_cli("sts " + p.string() + " --out " + out2.string() +
                    " --sequences 10 --seq-len 20000") == 0);
    CHECK(slurp(out / "report.json") == slurp(out2 / "report.json"));
}

TEST_CASE("cli: sts needs byte input and enough bits") {
    const fs::path cfg = tiny_config();
    const fs::path sim = fresh_dir("sts_sim");
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " +
                    sim.string() + " --stage diff"
                    " --scenario quantum_classical") == 0);
    const std::string stream = (sim / "quantum_classical_diff.rns").string();

    // 13-bit codes are not bytes until truncated
    CHECK(run_cli("sts " + stream + " --out cli_tmp/x --sequences 2"
                  " --seq-len 128") == 2);
    CHECK(run_cli("sts " + stream + " --out cli_tmp/sts_msb --sequences 2"
                  " --seq-len 1024 --msb 8") == 0);
    // 256 bytes cannot feed 10 x 20 kbit
    CHECK(run_cli("sts " + stream + " --out cli_tmp/x --sequences 10"
                  " --seq-len 20000 --msb 8") == 2);
}

TEST_CASE("cli: extract echoes the entropy bound it applied") {
    const fs::path cfg = tiny_config();
    const fs::path sim = fresh_dir("ext_sim");
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " +
                    sim.string() + " --stage diff"
                    " --scenario quantum_classical") == 0);
    const std::string stream = (sim / "quantum_classical_diff.rns").string();

    const fs::path out = fresh_dir("ext");
    REQUIRE(run_cli("extract " + stream + " --out " + out.string() +
                    " --sd-m 1.658 --sd-e 0.5 --seed 11") == 0);

    const Json report = load_json_file((out / "report.json").string());
    CHECK_NOTHROW(validate_schema(report, report_schema("extract_report")));
    const Json& ext = report.at("extraction");

    // the numbers in the report are the library computation, bit for bit
    const double h = conditional_min_entropy(1.658, 0.5, 16, 160.0, 13);
    CHECK(ext.at("h_min_cond_bits").get<double>() == h);
    CHECK(ext.at("extraction_ratio").get<double>() ==
          extraction_ratio(h, 13, 0.5));
    const ExtractorConfig ec = make_extractor_config(1024, h, 13, 0.5, 11);
    CHECK(ext.at("out_block_bits") == ec.out_block_bits);
    CHECK(ext.at("seed_hex") == seed_to_hex(ec.seed_bits));

    const SampleStream hashed = load_stream((out / "hashed.rns").string());
    CHECK(hashed.bit_depth == 8);
    CHECK(hashed.stage == Stage::hashed);
    CHECK(hashed.values.size() == report.at("output").at("bytes"));
    CHECK(header_digest(hashed) ==
          parse_digest(report.at("output").at("digest")));

    const fs::path out2 = fresh_dir("ext_rep");
    REQUIRE(run_cli("extract " + stream + " --out " + out2.string() +
                    " --sd-m 1.658 --sd-e 0.5 --seed 11") == 0);
    CHECK(slurp(out / "hashed.rns") == slurp(out2 / "hashed.rns"));
    CHECK(slurp(out / "report.json") == slurp(out2 / "report.json"));
}

TEST_CASE("cli: extract refuses classical-dominated input") {
    const fs::path cfg = tiny_config();
    const fs::path sim = fresh_dir("ext_ref_sim");
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " +
                    sim.string() + " --stage diff"
                    " --scenario quantum_classical") == 0);
    const std::string stream = (sim / "quantum_classical_diff.rns").string();

    const fs::path out = fresh_dir("ext_refuse");
    CHECK(run_cli("extract " + stream + " --out " + out.string() +
                  " --sd-m 0.4 --sd-e 0.5") == 2);
    CHECK_FALSE(fs::exists(out / "hashed.rns"));
}
