#include "rngml/report.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "rngml/errors.hpp"

namespace rngml {

Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void write_json_file(const Json& value, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << value.dump(2) << '\n';
    if (!out) throw IoError("short write to " + path);
}

void require_finite(const Json& value) {
    if (value.is_number_float()) {
        require(std::isfinite(value.get<double>()),
                "report contains a non-finite number");
    } else if (value.is_object() || value.is_array()) {
        for (const auto& item : value) require_finite(item);
    }
}

namespace {

bool is_integerish(const Json& v) {
    return v.is_number_integer() || v.is_number_unsigned();
}

void check_schema(const Json& v, const Json& s, const std::string& path) {
    if (s.contains("enum")) {
        bool hit = false;
        for (const auto& option : s.at("enum"))
            if (v == option) hit = true;
        require(hit, "schema: " + path + ": value not in enum");
    }
    const std::string type = s.value("type", "");
    if (type == "object") {
        require(v.is_object(), "schema: " + path + ": expected object");
        const Json props = s.value("properties", Json::object());
        if (s.contains("required"))
            for (const auto& key : s.at("required"))
                require(v.contains(key.get<std::string>()),
                        "schema: " + path + ": missing required key " +
                            key.get<std::string>());
        const bool closed = s.contains("additionalProperties") &&
                            s.at("additionalProperties") == false;
        for (const auto& [key, child] : v.items()) {
            if (props.contains(key)) {
                check_schema(child, props.at(key), path + "." + key);
            } else {
                require(!closed, "schema: " + path + ": unknown key " + key);
            }
        }
    } else if (type == "array") {
        require(v.is_array(), "schema: " + path + ": expected array");
        if (s.contains("items")) {
            std::size_t i = 0;
            for (const auto& item : v)
                check_schema(item, s.at("items"),
                             path + "[" + std::to_string(i++) + "]");
        }
    } else if (type == "string") {
        require(v.is_string(), "schema: " + path + ": expected string");
    } else if (type == "integer") {
        require(is_integerish(v), "schema: " + path + ": expected integer");
    } else if (type == "number") {
        require(v.is_number(), "schema: " + path + ": expected number");
    } else if (type == "boolean") {
        require(v.is_boolean(), "schema: " + path + ": expected boolean");
    } else if (!type.empty()) {
        throw ContractError("schema: " + path + ": unsupported type " + type);
    }
}

// ---- embedded schemas -------------------------------------------------
// the same documents are published under schemas/; a test asserts the two
// copies stay semantically identical

const char* kConfigSchema = R"json({
  "type": "object",
  "additionalProperties": false,
  "required": ["n_samples", "oversample", "quantum_sd", "electronic_sd",
               "lo_sd", "tones", "cmrr_epsilon", "demod_freqs", "lpf_cutoff",
               "lpf_taps", "adc_bits", "adc_fullscale", "seed"],
  "properties": {
    "n_samples": {"type": "integer"},
    "oversample": {"type": "integer"},
    "quantum_sd": {"type": "number"},
    "electronic_sd": {"type": "number"},
    "lo_sd": {"type": "number"},
    "tones": {"type": "array", "items": {
      "type": "object",
      "additionalProperties": false,
      "required": ["freq", "amplitude", "phase", "kind"],
      "properties": {
        "freq": {"type": "number"},
        "amplitude": {"type": "number"},
        "phase": {"type": "number"},
        "kind": {"type": "string",
                 "enum": ["common_mode", "detector1_only", "detector2_only"]}
      }}},
    "cmrr_epsilon": {"type": "number"},
    "demod_freqs": {"type": "array", "items": {"type": "number"}},
    "lpf_cutoff": {"type": "number"},
    "lpf_taps": {"type": "integer"},
    "adc_bits": {"type": "integer"},
    "adc_fullscale": {"type": "number"},
    "seed": {"type": "integer"}
  }
})json";

std::string input_schema(bool with_msb) {
    std::string required =
        R"(["file", "stage", "scenario", "stream_seed", "bit_depth", "samples")";
    required += with_msb ? R"(, "msb"])" : "]";
    std::string props = R"(
        "file": {"type": "string"},
        "stage": {"type": "string"},
        "scenario": {"type": "string"},
        "stream_seed": {"type": "integer"},
        "bit_depth": {"type": "integer"},
        "samples": {"type": "integer"})";
    if (with_msb) props += R"(,
        "msb": {"type": "integer"})";
    return R"({"type": "object", "additionalProperties": false, "required": )" +
           required + R"(, "properties": {)" + props + "}}";
}

std::string manifest_schema() {
    return std::string(R"json({
  "type": "object",
  "additionalProperties": false,
  "required": ["command", "version", "config", "scenarios", "files"],
  "properties": {
    "command": {"type": "string", "enum": ["simulate"]},
    "version": {"type": "string"},
    "config": )json") +
           kConfigSchema + R"json(,
    "scenarios": {"type": "array", "items":
      {"type": "string", "enum": ["classical", "quantum_classical"]}},
    "files": {"type": "array", "items": {
      "type": "object",
      "additionalProperties": false,
      "required": ["name", "stage", "scenario", "digest", "samples"],
      "properties": {
        "name": {"type": "string"},
        "stage": {"type": "string"},
        "scenario": {"type": "string"},
        "digest": {"type": "string"},
        "samples": {"type": "integer"}
      }}}
  }
})json";
}

std::string attack_schema() {
    return std::string(R"json({
  "type": "object",
  "additionalProperties": false,
  "required": ["command", "version", "input", "attack", "model", "training",
               "results"],
  "properties": {
    "command": {"type": "string", "enum": ["attack"]},
    "version": {"type": "string"},
    "input": )json") +
           input_schema(true) + R"json(,
    "attack": {
      "type": "object",
      "additionalProperties": false,
      "required": ["window", "stride", "train_symbols", "test_symbols",
                   "test_sets", "val_fraction", "seed", "model_seed",
                   "max_epochs", "batch", "patience", "learning_rate"],
      "properties": {
        "window": {"type": "integer"},
        "stride": {"type": "integer"},
        "train_symbols": {"type": "integer"},
        "test_symbols": {"type": "integer"},
        "test_sets": {"type": "integer"},
        "val_fraction": {"type": "number"},
        "seed": {"type": "integer"},
        "model_seed": {"type": "integer"},
        "max_epochs": {"type": "integer"},
        "batch": {"type": "integer"},
        "patience": {"type": "integer"},
        "learning_rate": {"type": "number"}
      }},
    "model": {
      "type": "object",
      "additionalProperties": false,
      "required": ["alphabet", "stack", "parameters"],
      "properties": {
        "alphabet": {"type": "integer"},
        "stack": {"type": "string", "enum": ["full", "reduced"]},
        "parameters": {"type": "integer"}
      }},
    "training": {
      "type": "object",
      "additionalProperties": false,
      "required": ["epochs_run", "best_epoch", "best_val_loss",
                   "best_val_accuracy", "train_loss", "val_loss",
                   "val_accuracy"],
      "properties": {
        "epochs_run": {"type": "integer"},
        "best_epoch": {"type": "integer"},
        "best_val_loss": {"type": "number"},
        "best_val_accuracy": {"type": "number"},
        "train_loss": {"type": "array", "items": {"type": "number"}},
        "val_loss": {"type": "array", "items": {"type": "number"}},
        "val_accuracy": {"type": "array", "items": {"type": "number"}}
      }},
    "results": {
      "type": "object",
      "additionalProperties": false,
      "required": ["windows_per_set", "p_g", "mode_symbol", "p_ml_per_set",
                   "p_ml_mean", "p_ml_sd", "advantage_sigma",
                   "min_entropy_bits"],
      "properties": {
        "windows_per_set": {"type": "integer"},
        "p_g": {"type": "number"},
        "mode_symbol": {"type": "integer"},
        "p_ml_per_set": {"type": "array", "items": {"type": "number"}},
        "p_ml_mean": {"type": "number"},
        "p_ml_sd": {"type": "number"},
        "advantage_sigma": {"type": "number"},
        "min_entropy_bits": {"type": "number"}
      }}
  }
})json";
}

std::string sts_schema() {
    return std::string(R"json({
  "type": "object",
  "additionalProperties": false,
  "required": ["command", "version", "input", "battery"],
  "properties": {
    "command": {"type": "string", "enum": ["sts"]},
    "version": {"type": "string"},
    "input": )json") +
           input_schema(true) + R"json(,
    "battery": {
      "type": "object",
      "additionalProperties": false,
      "required": ["n_sequences", "seq_len", "alpha", "proportion_lo",
                   "proportion_hi", "tests", "total_passed"],
      "properties": {
        "n_sequences": {"type": "integer"},
        "seq_len": {"type": "integer"},
        "alpha": {"type": "number"},
        "proportion_lo": {"type": "number"},
        "proportion_hi": {"type": "number"},
        "tests": {"type": "array", "items": {
          "type": "object",
          "additionalProperties": false,
          "required": ["name", "proportion", "uniformity_p",
                       "proportion_pass", "uniformity_pass", "pass"],
          "properties": {
            "name": {"type": "string"},
            "proportion": {"type": "number"},
            "uniformity_p": {"type": "number"},
            "proportion_pass": {"type": "boolean"},
            "uniformity_pass": {"type": "boolean"},
            "pass": {"type": "boolean"}
          }}},
        "total_passed": {"type": "integer"}
      }}
  }
})json";
}

std::string extract_schema() {
    return std::string(R"json({
  "type": "object",
  "additionalProperties": false,
  "required": ["command", "version", "input", "extraction", "output"],
  "properties": {
    "command": {"type": "string", "enum": ["extract"]},
    "version": {"type": "string"},
    "input": )json") +
           input_schema(false) + R"json(,
    "extraction": {
      "type": "object",
      "additionalProperties": false,
      "required": ["sd_m", "sd_e", "adc_bits", "fullscale", "keep_bits",
                   "h_min_cond_bits", "safety_factor", "extraction_ratio",
                   "in_block_bits", "out_block_bits", "seed", "seed_hex"],
      "properties": {
        "sd_m": {"type": "number"},
        "sd_e": {"type": "number"},
        "adc_bits": {"type": "integer"},
        "fullscale": {"type": "number"},
        "keep_bits": {"type": "integer"},
        "h_min_cond_bits": {"type": "number"},
        "safety_factor": {"type": "number"},
        "extraction_ratio": {"type": "number"},
        "in_block_bits": {"type": "integer"},
        "out_block_bits": {"type": "integer"},
        "seed": {"type": "integer"},
        "seed_hex": {"type": "string"}
      }},
    "output": {
      "type": "object",
      "additionalProperties": false,
      "required": ["file", "bytes", "digest"],
      "properties": {
        "file": {"type": "string"},
        "bytes": {"type": "integer"},
        "digest": {"type": "string"}
      }}
  }
})json";
}

} // namespace

void validate_schema(const Json& value, const Json& schema) {
    check_schema(value, schema, "$");
}

const Json& report_schema(const std::string& name) {
    static const std::map<std::string, Json> schemas = [] {
        std::map<std::string, Json> m;
        m["manifest"] = Json::parse(manifest_schema());
        m["attack_report"] = Json::parse(attack_schema());
        m["sts_report"] = Json::parse(sts_schema());
        m["extract_report"] = Json::parse(extract_schema());
        return m;
    }();
    auto it = schemas.find(name);
    require(it != schemas.end(), "no schema named " + name);
    return it->second;
}

namespace {

std::uint64_t get_uint(const Json& j, const std::string& key,
                       std::uint64_t fallback) {
    if (!j.contains(key)) return fallback;
    const Json& v = j.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ParseError("config: " + key + " must be a non-negative integer");
}

double get_double(const Json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    const Json& v = j.at(key);
    if (!v.is_number()) throw ParseError("config: " + key + " must be a number");
    return v.get<double>();
}

} // namespace

ChainConfig chain_config_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("config: expected a JSON object");
    static const char* known[] = {
        "n_samples",  "oversample",  "quantum_sd", "electronic_sd",
        "lo_sd",      "tones",       "cmrr_epsilon", "demod_freqs",
        "lpf_cutoff", "lpf_taps",    "adc_bits",   "adc_fullscale",
        "seed"};
    for (const auto& [key, ignored] : j.items()) {
        (void)ignored;
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ParseError("config: unknown key " + key);
    }

    ChainConfig cfg;
    cfg.n_samples = get_uint(j, "n_samples", cfg.n_samples);
    cfg.oversample = get_uint(j, "oversample", cfg.oversample);
    cfg.quantum_sd = get_double(j, "quantum_sd", cfg.quantum_sd);
    cfg.electronic_sd = get_double(j, "electronic_sd", cfg.electronic_sd);
    cfg.lo_sd = get_double(j, "lo_sd", cfg.lo_sd);
    cfg.cmrr_epsilon = get_double(j, "cmrr_epsilon", cfg.cmrr_epsilon);
    cfg.lpf_cutoff = get_double(j, "lpf_cutoff", cfg.lpf_cutoff);
    cfg.lpf_taps = get_uint(j, "lpf_taps", cfg.lpf_taps);
    cfg.adc_bits = static_cast<int>(get_uint(j, "adc_bits",
                                             static_cast<std::uint64_t>(cfg.adc_bits)));
    cfg.adc_fullscale = get_double(j, "adc_fullscale", cfg.adc_fullscale);
    cfg.seed = get_uint(j, "seed", cfg.seed);

    if (j.contains("demod_freqs")) {
        const Json& d = j.at("demod_freqs");
        if (!d.is_array() || d.size() != 2)
            throw ParseError("config: demod_freqs must be an array of two numbers");
        for (std::size_t i = 0; i < 2; ++i) {
            if (!d[i].is_number())
                throw ParseError("config: demod_freqs must be numbers");
            cfg.demod_freqs[i] = d[i].get<double>();
        }
    }
    if (j.contains("tones")) {
        const Json& ts = j.at("tones");
        if (!ts.is_array()) throw ParseError("config: tones must be an array");
        for (const Json& t : ts) {
            if (!t.is_object()) throw ParseError("config: each tone must be an object");
            for (const auto& [key, ignored] : t.items()) {
                (void)ignored;
                if (key != "freq" && key != "amplitude" && key != "phase" &&
                    key != "kind")
                    throw ParseError("config: unknown tone key " + key);
            }
            ToneSpec tone;
            tone.freq = get_double(t, "freq", 0.0);
            tone.amplitude = get_double(t, "amplitude", 0.0);
            tone.phase = get_double(t, "phase", 0.0);
            if (!t.contains("kind") || !t.at("kind").is_string())
                throw ParseError("config: tone kind must be a string");
            tone.kind = tone_kind_from_string(t.at("kind").get<std::string>());
            cfg.tones.push_back(tone);
        }
    }
    return cfg;
}

Json chain_config_to_json(const ChainConfig& cfg) {
    Json tones = Json::array();
    for (const ToneSpec& t : cfg.tones)
        tones.push_back({{"freq", t.freq},
                         {"amplitude", t.amplitude},
                         {"phase", t.phase},
                         {"kind", to_string(t.kind)}});
    return Json{{"n_samples", cfg.n_samples},
                {"oversample", cfg.oversample},
                {"quantum_sd", cfg.quantum_sd},
                {"electronic_sd", cfg.electronic_sd},
                {"lo_sd", cfg.lo_sd},
                {"tones", tones},
                {"cmrr_epsilon", cfg.cmrr_epsilon},
                {"demod_freqs", Json::array({cfg.demod_freqs[0],
                                             cfg.demod_freqs[1]})},
                {"lpf_cutoff", cfg.lpf_cutoff},
                {"lpf_taps", cfg.lpf_taps},
                {"adc_bits", cfg.adc_bits},
                {"adc_fullscale", cfg.adc_fullscale},
                {"seed", cfg.seed}};
}

} // namespace rngml
