#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vesselseg::zip {

struct Entry {
    std::string name;
    std::vector<std::uint8_t> data;

    bool operator==(const Entry&) const = default;
};

/// Stored (uncompressed) entries in the given order with a fixed 1980-01-01
/// timestamp, so equal inputs give byte-identical archives.
std::vector<std::uint8_t> write_archive(std::span<const Entry> entries);

/// Reads stored and deflated entries, verifying CRCs. Throws CorruptData.
std::vector<Entry> read_archive(std::span<const std::uint8_t> bytes);

}  // namespace vesselseg::zip
