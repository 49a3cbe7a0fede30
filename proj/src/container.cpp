#include "rbff/container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include <openssl/evp.h>

#include "rbff/error.hpp"

namespace rbff {

namespace {

using nlohmann::json;

constexpr std::size_t kHeaderBytes = 16;

std::uint64_t read_u64_le(const char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
    return v;
}

void append_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_floats_le(std::string& out, std::span<const float> values) {
    const std::size_t start = out.size();
    out.resize(start + values.size() * sizeof(float));
    std::memcpy(out.data() + start, values.data(), values.size() * sizeof(float));
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = start; i < out.size(); i += 4) {
            std::swap(out[i], out[i + 3]);
            std::swap(out[i + 1], out[i + 2]);
        }
    }
}

std::vector<float> read_floats_le(std::string_view bytes) {
    std::vector<float> values(bytes.size() / sizeof(float));
    std::memcpy(values.data(), bytes.data(), values.size() * sizeof(float));
    if constexpr (std::endian::native == std::endian::big) {
        for (float& v : values) {
            auto u = std::bit_cast<std::uint32_t>(v);
            u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
            v = std::bit_cast<float>(u);
        }
    }
    return values;
}

template <typename T>
T require_field(const json& obj, const char* key, const std::string& context) {
    if (!obj.is_object() || !obj.contains(key))
        throw FormatError(context + ": missing field '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(context + ": field '" + key + "' has the wrong type");
    }
}

}  // namespace

std::int64_t TensorEntry::element_count() const {
    return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

void Container::add(std::string name, std::vector<std::int64_t> shape,
                    std::span<const float> values) {
    if (find(name)) throw ArgumentError("duplicate tensor name '" + name + "'");
    TensorEntry e{std::move(name), std::move(shape), blob_bytes(), values.size() * sizeof(float)};
    if (e.element_count() != static_cast<std::int64_t>(values.size()))
        throw ShapeError("tensor '" + e.name + "': shape does not match value count");
    blob_.insert(blob_.end(), values.begin(), values.end());
    entries_.push_back(std::move(e));
}

const TensorEntry* Container::find(std::string_view name) const {
    for (const auto& e : entries_)
        if (e.name == name) return &e;
    return nullptr;
}

bool Container::contains(std::string_view name) const { return find(name) != nullptr; }

TensorView Container::get(std::string_view name) const {
    const TensorEntry* e = find(name);
    if (!e) throw FormatError("missing tensor '" + std::string(name) + "'");
    return {e->shape, std::span<const float>(blob_).subspan(e->byte_offset / sizeof(float),
                                                              e->byte_length / sizeof(float))};
}

std::int64_t Container::total_elements() const {
    std::int64_t n = 0;
    for (const auto& e : entries_) n += e.element_count();
    return n;
}

std::string Container::serialize() const {
    json tensors = json::array();
    for (const auto& e : entries_)
        tensors.push_back({{"name", e.name},
                           {"shape", e.shape},
                           {"offset", e.byte_offset},
                           {"length", e.byte_length}});
    const json manifest = {{"format_version", kFormatVersion},
                           {"kind", kind_},
                           {"metadata", metadata_},
                           {"tensors", tensors}};
    const std::string text = manifest.dump();

    std::string out;
    out.reserve(kHeaderBytes + text.size() + blob_bytes());
    out.append(kContainerMagic);
    append_u64_le(out, text.size());
    out.append(text);
    append_floats_le(out, blob_);
    return out;
}

Container Container::deserialize(std::string_view bytes) {
    if (bytes.size() < kHeaderBytes) throw FormatError("container too short for header");
    if (bytes.substr(0, 8) != kContainerMagic) throw FormatError("bad container magic");
    const std::uint64_t manifest_len = read_u64_le(bytes.data() + 8);
    if (manifest_len > bytes.size() - kHeaderBytes)
        throw FormatError("manifest length exceeds file size");

    json manifest;
    try {
        manifest = json::parse(bytes.substr(kHeaderBytes, manifest_len));
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("corrupt manifest: ") + e.what());
    }
    const int version = require_field<int>(manifest, "format_version", "manifest");
    if (version != kFormatVersion)
        throw FormatError("unsupported format version " + std::to_string(version));

    Container c(require_field<std::string>(manifest, "kind", "manifest"));
    if (manifest.contains("metadata")) c.metadata_ = manifest.at("metadata");
    if (!c.metadata_.is_object()) throw FormatError("manifest metadata must be an object");

    const std::string_view blob = bytes.substr(kHeaderBytes + manifest_len);
    if (blob.size() % sizeof(float) != 0) throw FormatError("blob length not a multiple of 4");

    if (!manifest.contains("tensors") || !manifest.at("tensors").is_array())
        throw FormatError("manifest: missing tensor list");
    std::vector<TensorEntry> entries;
    for (const auto& t : manifest.at("tensors")) {
        TensorEntry e;
        e.name = require_field<std::string>(t, "name", "tensor entry");
        const std::string ctx = "tensor '" + e.name + "'";
        e.shape = require_field<std::vector<std::int64_t>>(t, "shape", ctx);
        e.byte_offset = require_field<std::uint64_t>(t, "offset", ctx);
        e.byte_length = require_field<std::uint64_t>(t, "length", ctx);
        if (std::any_of(e.shape.begin(), e.shape.end(), [](std::int64_t d) { return d < 0; }))
            throw FormatError(ctx + ": negative dimension");
        if (e.byte_offset % sizeof(float) != 0) throw FormatError(ctx + ": misaligned offset");
        if (static_cast<std::uint64_t>(e.element_count()) * sizeof(float) != e.byte_length)
            throw FormatError(ctx + ": shape product does not match byte length");
        if (e.byte_offset > blob.size() || e.byte_length > blob.size() - e.byte_offset)
            throw FormatError(ctx + ": extends past end of blob (truncated file?)");
        entries.push_back(std::move(e));
    }

    std::vector<const TensorEntry*> by_offset;
    for (const auto& e : entries) by_offset.push_back(&e);
    std::sort(by_offset.begin(), by_offset.end(),
              [](auto* a, auto* b) { return a->byte_offset < b->byte_offset; });
    for (std::size_t i = 1; i < by_offset.size(); ++i)
        if (by_offset[i - 1]->byte_offset + by_offset[i - 1]->byte_length > by_offset[i]->byte_offset)
            throw FormatError("tensors '" + by_offset[i - 1]->name + "' and '" +
                              by_offset[i]->name + "' overlap");

    const std::vector<float> all = read_floats_le(blob);
    for (auto& e : entries) {
        const std::span<const float> values(all.data() + e.byte_offset / sizeof(float),
                                            e.byte_length / sizeof(float));
        try {
            c.add(e.name, e.shape, values);
        } catch (const ArgumentError&) {
            throw FormatError("duplicate tensor name '" + e.name + "'");
        }
    }
    return c;
}

void Container::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    const std::string bytes = serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

Container Container::read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return deserialize(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 initialisation failed");
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

void Sha256::update(std::string_view bytes) {
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), bytes.data(), bytes.size());
}

std::string Sha256::hex_digest() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), digest, &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xf]);
    }
    return out;
}

std::string sha256_hex(std::string_view bytes) {
    Sha256 h;
    h.update(bytes);
    return h.hex_digest();
}

}  // namespace rbff
