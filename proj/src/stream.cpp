#include "rngml/stream.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "rngml/errors.hpp"

namespace rngml {

std::string to_string(Stage s) {
    switch (s) {
        case Stage::det1: return "det1";
        case Stage::det2: return "det2";
        case Stage::diff: return "diff";
        case Stage::sum: return "sum";
        case Stage::demod1: return "demod1";
        case Stage::demod2: return "demod2";
        case Stage::lpf1: return "lpf1";
        case Stage::lpf2: return "lpf2";
        case Stage::lcg: return "lcg";
        case Stage::hashed: return "hashed";
    }
    throw ContractError("unknown stage enum value");
}

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::classical: return "classical";
        case Scenario::quantum_classical: return "quantum_classical";
        case Scenario::none: return "none";
    }
    throw ContractError("unknown scenario enum value");
}

Stage stage_from_string(const std::string& s) {
    static const std::map<std::string, Stage> table = {
        {"det1", Stage::det1},     {"det2", Stage::det2},
        {"diff", Stage::diff},     {"sum", Stage::sum},
        {"demod1", Stage::demod1}, {"demod2", Stage::demod2},
        {"lpf1", Stage::lpf1},     {"lpf2", Stage::lpf2},
        {"lcg", Stage::lcg},       {"hashed", Stage::hashed},
    };
    auto it = table.find(s);
    if (it == table.end()) throw ParseError("unknown stage name: " + s);
    return it->second;
}

Scenario scenario_from_string(const std::string& s) {
    if (s == "classical") return Scenario::classical;
    if (s == "quantum_classical") return Scenario::quantum_classical;
    if (s == "none") return Scenario::none;
    throw ParseError("unknown scenario name: " + s);
}

std::int64_t SampleStream::min_value() const {
    return unsigned_range ? 0 : -(std::int64_t(1) << (bit_depth - 1));
}

std::int64_t SampleStream::max_value() const {
    return unsigned_range ? (std::int64_t(1) << bit_depth) - 1
                          : (std::int64_t(1) << (bit_depth - 1)) - 1;
}

namespace {

void validate(const SampleStream& s) {
    require(s.bit_depth >= 1 && s.bit_depth <= 16,
            "bit_depth must be in [1, 16], got " + std::to_string(s.bit_depth));
    require(!(s.unsigned_range && s.bit_depth > 15),
            "unsigned streams are limited to 15 bits (int16 payload)");
    require(s.rate_ratio.num > 0 && s.rate_ratio.den > 0,
            "rate_ratio must be positive");
    const std::int64_t lo = s.min_value(), hi = s.max_value();
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        const std::int64_t v = s.values[i];
        if (v < lo || v > hi) {
            std::ostringstream os;
            os << "sample " << i << " = " << v << " outside declared range ["
               << lo << ", " << hi << "] for bit_depth " << s.bit_depth
               << (s.unsigned_range ? " unsigned" : "");
            throw ContractError(os.str());
        }
    }
}

} // namespace

std::string stream_header_bytes(const SampleStream& s) {
    std::ostringstream os;
    os << "format_version 1\n";
    os << "count " << s.values.size() << "\n";
    os << "bit_depth " << s.bit_depth << "\n";
    os << "stage " << to_string(s.stage) << "\n";
    os << "scenario " << to_string(s.scenario) << "\n";
    os << "seed " << s.seed << "\n";
    os << "unsigned " << (s.unsigned_range ? 1 : 0) << "\n";
    os << "rate_ratio " << s.rate_ratio.num << "/" << s.rate_ratio.den << "\n";
    for (const auto& [k, v] : s.extra) os << k << " " << v << "\n";
    os << "\n";
    return os.str();
}

std::uint64_t header_digest(const SampleStream& s) {
    const std::string h = stream_header_bytes(s);
    std::uint64_t d = 0xcbf29ce484222325ULL;
    for (unsigned char c : h) {
        d ^= c;
        d *= 0x100000001b3ULL;
    }
    return d;
}

void store_stream(const SampleStream& s, const std::string& path) {
    validate(s);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    const std::string header = stream_header_bytes(s);
    out.write(header.data(), std::streamsize(header.size()));
    std::vector<unsigned char> buf(s.values.size() * 2);
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        const std::uint16_t w = static_cast<std::uint16_t>(s.values[i]);
        buf[2 * i] = static_cast<unsigned char>(w & 0xff);
        buf[2 * i + 1] = static_cast<unsigned char>(w >> 8);
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              std::streamsize(buf.size()));
    if (!out) throw IoError("write failed: " + path);
}

SampleStream load_stream(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);

    SampleStream s;
    std::map<std::string, std::string> fields;
    std::string line;
    while (true) {
        if (!std::getline(in, line))
            throw ParseError(path + ": header not terminated by blank line");
        if (line.empty()) break;
        const auto sp = line.find(' ');
        if (sp == std::string::npos || sp == 0)
            throw ParseError(path + ": malformed header line '" + line + "'");
        const std::string key = line.substr(0, sp);
        if (fields.count(key))
            throw ParseError(path + ": duplicate header key '" + key + "'");
        fields[key] = line.substr(sp + 1);
    }

    auto take = [&](const char* key) {
        auto it = fields.find(key);
        if (it == fields.end())
            throw ParseError(path + ": missing header key '" + std::string(key) + "'");
        std::string v = it->second;
        fields.erase(it);
        return v;
    };
    auto to_u64 = [&](const std::string& v, const char* what) {
        try {
            std::size_t pos = 0;
            unsigned long long r = std::stoull(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return static_cast<std::uint64_t>(r);
        } catch (const std::exception&) {
            throw ParseError(path + ": bad integer for " + std::string(what) +
                             ": '" + v + "'");
        }
    };

    if (take("format_version") != "1")
        throw ParseError(path + ": unsupported format_version");
    const std::uint64_t count = to_u64(take("count"), "count");
    s.bit_depth = static_cast<int>(to_u64(take("bit_depth"), "bit_depth"));
    s.stage = stage_from_string(take("stage"));
    s.scenario = scenario_from_string(take("scenario"));
    s.seed = to_u64(take("seed"), "seed");
    if (fields.count("unsigned"))
        s.unsigned_range = to_u64(take("unsigned"), "unsigned") != 0;
    if (fields.count("rate_ratio")) {
        const std::string v = take("rate_ratio");
        const auto slash = v.find('/');
        if (slash == std::string::npos)
            throw ParseError(path + ": rate_ratio must be num/den, got '" + v + "'");
        s.rate_ratio.num = std::int64_t(to_u64(v.substr(0, slash), "rate_ratio"));
        s.rate_ratio.den = std::int64_t(to_u64(v.substr(slash + 1), "rate_ratio"));
    }
    s.extra = std::move(fields);

    std::vector<unsigned char> buf(count * 2);
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
    if (static_cast<std::uint64_t>(in.gcount()) != count * 2) {
        std::ostringstream os;
        os << path << ": payload count mismatch: header says " << count
           << " samples (" << count * 2 << " bytes) but only " << in.gcount()
           << " bytes present";
        throw ParseError(os.str());
    }
    char probe;
    if (in.read(&probe, 1))
        throw ParseError(path + ": trailing bytes after declared payload");

    s.values.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint16_t w = static_cast<std::uint16_t>(buf[2 * i]) |
                                (static_cast<std::uint16_t>(buf[2 * i + 1]) << 8);
        s.values[i] = static_cast<std::int16_t>(w);
    }
    try {
        validate(s);
    } catch (const ContractError& e) {
        throw ParseError(path + ": " + e.what());
    }
    return s;
}

SampleStream truncate_to_msb(const SampleStream& s, int bits) {
    require(bits >= 1 && bits <= s.bit_depth,
            "truncate_to_msb: target bits must be in [1, bit_depth]");
    SampleStream out = s;
    out.bit_depth = bits;
    const int shift = s.bit_depth - bits;
    if (shift > 0) {
        for (auto& v : out.values)
            v = static_cast<std::int16_t>(v >> shift);
    }
    return out;
}

} // namespace rngml
