#pragma once

#include <string>

#include <json.hpp>

#include "rngml/signal.hpp"

namespace rngml {

// Reports and manifests are JSON documents with sorted keys and no
// timestamps, so a rerun with the same seeds is byte-identical. Every
// document kind has a schema shipped under schemas/ and embedded here; the
// tool refuses to emit a document its own schema rejects.

using Json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

// throws IoError when unreadable, ParseError when not valid JSON
Json load_json_file(const std::string& path);

// pretty-printed with two-space indent and a trailing newline
void write_json_file(const Json& value, const std::string& path);

// Structural validation against the subset of JSON Schema the shipped
// schemas use: type, properties, required, additionalProperties, items,
// enum. Throws ContractError naming the offending path.
void validate_schema(const Json& value, const Json& schema);

// every number in the document must be finite, NaN serializes as null
void require_finite(const Json& value);

// embedded copy of schemas/<name>.schema.json; name is one of
// "manifest", "attack_report", "sts_report", "extract_report"
const Json& report_schema(const std::string& name);

// Strict ChainConfig (de)serialization: unknown keys are parse errors,
// every field optional with the header defaults. lo_on is not a config
// key - the scenario argument of run_chain decides it.
ChainConfig chain_config_from_json(const Json& j);
Json chain_config_to_json(const ChainConfig& cfg);

} // namespace rngml
