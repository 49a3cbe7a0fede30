#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace rbff {

/// Shared on-disk layout for weights, feature caches, bundles and fixtures:
///
///   bytes [0, 8)    magic "RBFFPACK"
///   bytes [8, 16)   manifest length L, uint64 little-endian
///   bytes [16, 16+L) UTF-8 JSON manifest
///   remaining       blob of little-endian float32 values
///
/// Tensor offsets in the manifest are relative to the start of the blob.
/// See docs/weights-format.md.
inline constexpr std::string_view kContainerMagic = "RBFFPACK";
inline constexpr int kFormatVersion = 1;

struct TensorEntry {
    std::string name;
    std::vector<std::int64_t> shape;
    std::uint64_t byte_offset = 0;
    std::uint64_t byte_length = 0;

    std::int64_t element_count() const;
};

struct TensorView {
    std::span<const std::int64_t> shape;
    std::span<const float> values;
};

class Container {
public:
    Container() = default;
    explicit Container(std::string kind) : kind_(std::move(kind)) {}

    const std::string& kind() const { return kind_; }
    nlohmann::json& metadata() { return metadata_; }
    const nlohmann::json& metadata() const { return metadata_; }

    /// Appends a tensor; names must be unique.
    void add(std::string name, std::vector<std::int64_t> shape, std::span<const float> values);

    bool contains(std::string_view name) const;
    TensorView get(std::string_view name) const;
    const std::vector<TensorEntry>& entries() const { return entries_; }

    std::int64_t total_elements() const;
    std::size_t blob_bytes() const { return blob_.size() * sizeof(float); }

    std::string serialize() const;
    std::size_t serialized_size() const { return serialize().size(); }
    static Container deserialize(std::string_view bytes);

    void write(const std::filesystem::path& path) const;
    static Container read(const std::filesystem::path& path);

private:
    const TensorEntry* find(std::string_view name) const;

    std::string kind_;
    nlohmann::json metadata_ = nlohmann::json::object();
    std::vector<TensorEntry> entries_;
    std::vector<float> blob_;
};

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Streaming SHA-256 for hashing many files without concatenating them.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::string_view bytes);
    std::string hex_digest();

private:
    void* ctx_;
};

}  // namespace rbff
