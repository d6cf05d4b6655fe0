#include "imit/cli/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "imit/core/error.hpp"
#include "imit/core/hash.hpp"

namespace imit {

namespace {

std::vector<unsigned char> encode_le(const std::vector<double>& values) {
    std::vector<unsigned char> bytes(values.size() * 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, &values[i], 8);
        for (int b = 0; b < 8; ++b)
            bytes[i * 8 + std::size_t(b)] = static_cast<unsigned char>(bits >> (8 * b));
    }
    return bytes;
}

std::vector<double> decode_le(const std::vector<unsigned char>& bytes) {
    std::vector<double> values(bytes.size() / 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 7; b >= 0; --b)
            bits = (bits << 8) | bytes[i * 8 + std::size_t(b)];
        std::memcpy(&values[i], &bits, 8);
    }
    return values;
}

// Metadata values may hold spaces; keys may not.
std::string escape_meta(const std::string& v) {
    std::string out;
    for (const char c : v) {
        if (c == '\n') out += "\\n";
        else if (c == '\\') out += "\\\\";
        else out += c;
    }
    return out;
}

std::string unescape_meta(const std::string& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] == '\\' && i + 1 < v.size()) {
            ++i;
            out += v[i] == 'n' ? '\n' : v[i];
        } else {
            out += v[i];
        }
    }
    return out;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamVector& params,
                     const std::map<std::string, std::string>& meta) {
    const std::vector<unsigned char> bytes = encode_le(params.flat());
    const std::uint64_t hash = fnv1a64(bytes.data(), bytes.size());

    std::ostringstream manifest;
    manifest << "checkpoint-version 1\n";
    manifest << "array-file " << path.substr(path.find_last_of('/') + 1) << ".f64\n";
    manifest << "array-hash " << hex64(hash) << "\n";
    manifest << "values " << params.size() << "\n";
    manifest << "entries " << params.entry_count() << "\n";
    for (std::size_t i = 0; i < params.entry_count(); ++i) {
        const ParamVector::Entry& e = params.entry(i);
        manifest << "entry " << e.name << " offset " << e.offset << " shape "
                 << unsigned(e.shape.rank);
        for (const std::size_t ext : e.shape.extents()) manifest << " " << ext;
        manifest << "\n";
    }
    for (const auto& [k, v] : meta) {
        require(k.find(' ') == std::string::npos && !k.empty(),
                "checkpoint: metadata key '" + k + "' must be non-empty without spaces");
        manifest << "meta " << k << " " << escape_meta(v) << "\n";
    }

    std::ofstream mf(path, std::ios::binary);
    if (!mf) throw UsageError("checkpoint: cannot write '" + path + "'");
    mf << manifest.str();
    std::ofstream af(path + ".f64", std::ios::binary);
    if (!af) throw UsageError("checkpoint: cannot write '" + path + ".f64'");
    af.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream mf(path, std::ios::binary);
    if (!mf) throw UsageError("checkpoint: cannot read '" + path + "'");

    Checkpoint ckpt;
    std::string line;
    std::string expected_hash;
    std::size_t values = 0, entries = 0, seen_entries = 0;
    std::size_t line_no = 0;
    while (std::getline(mf, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        const auto malformed = [&](const std::string& why) {
            return UsageError("checkpoint manifest '" + path + "' line " +
                              std::to_string(line_no) + ": " + why);
        };
        if (tag == "checkpoint-version") {
            int v = 0;
            if (!(ss >> v) || v != 1) throw malformed("unsupported version");
        } else if (tag == "array-file") {
            std::string name;
            ss >> name;  // informational; the array always sits next to the manifest
        } else if (tag == "array-hash") {
            if (!(ss >> expected_hash)) throw malformed("missing hash value");
        } else if (tag == "values") {
            if (!(ss >> values)) throw malformed("missing value count");
        } else if (tag == "entries") {
            if (!(ss >> entries)) throw malformed("missing entry count");
        } else if (tag == "entry") {
            std::string name, offset_kw, shape_kw;
            std::size_t offset = 0;
            unsigned rank = 0;
            if (!(ss >> name >> offset_kw >> offset >> shape_kw >> rank) ||
                offset_kw != "offset" || shape_kw != "shape")
                throw malformed("malformed entry record");
            if (rank > 2)
                throw malformed("parameter '" + name + "' has unsupported rank " +
                                std::to_string(rank));
            Shape shape;
            shape.rank = static_cast<std::uint8_t>(rank);
            if (rank >= 1 && !(ss >> shape.d0))
                throw malformed("parameter '" + name + "' is missing dimensions");
            if (rank == 2 && !(ss >> shape.d1))
                throw malformed("parameter '" + name + "' is missing dimensions");
            if (ckpt.params.size() != offset)
                throw malformed("parameter '" + name + "' expects offset " +
                                std::to_string(offset) + " but the layout is at " +
                                std::to_string(ckpt.params.size()));
            ckpt.params.add(name, shape);
            ++seen_entries;
        } else if (tag == "meta") {
            std::string key;
            if (!(ss >> key)) throw malformed("metadata record without a key");
            std::string rest;
            std::getline(ss, rest);
            if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
            ckpt.meta[key] = unescape_meta(rest);
        } else {
            throw malformed("unknown record '" + tag + "'");
        }
    }
    if (seen_entries != entries)
        throw UsageError("checkpoint manifest '" + path + "': expected " +
                         std::to_string(entries) + " entries, found " +
                         std::to_string(seen_entries));
    if (ckpt.params.size() != values)
        throw UsageError("checkpoint manifest '" + path + "': declared " +
                         std::to_string(values) + " values but the entries cover " +
                         std::to_string(ckpt.params.size()));

    const std::string array_path = path + ".f64";
    std::ifstream af(array_path, std::ios::binary);
    if (!af) throw UsageError("checkpoint: cannot read '" + array_path + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(af)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() != values * 8)
        throw UsageError("checkpoint array '" + array_path + "': expected " +
                         std::to_string(values * 8) + " bytes (" +
                         std::to_string(values) + " values), found " +
                         std::to_string(bytes.size()) + " bytes");
    const std::string actual_hash = hex64(fnv1a64(bytes.data(), bytes.size()));
    if (actual_hash != expected_hash)
        throw UsageError("checkpoint array '" + array_path + "': content hash " +
                         actual_hash + " does not match manifest hash " + expected_hash);
    ckpt.params.flat() = decode_le(bytes);
    return ckpt;
}

}  // namespace imit
