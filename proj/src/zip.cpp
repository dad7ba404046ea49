#include "vesselseg/zip.hpp"

#include <zlib.h>

#include <limits>

#include "vesselseg/error.hpp"

namespace vesselseg::zip {

namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;  // 1980-01-01
constexpr std::uint16_t kDosTime = 0;
constexpr std::uint16_t kUtf8Flag = 1 << 11;

[[noreturn]] void corrupt(const std::string& msg) { throw Error(ErrorCode::CorruptData, "zip: " + msg); }

void put16(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    put16(out, v & 0xffff);
    put16(out, v >> 16);
}

std::uint32_t crc_of(std::span<const std::uint8_t> data) {
    uLong crc = crc32(0L, Z_NULL, 0);
    std::size_t off = 0;
    while (off < data.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(data.size() - off, std::numeric_limits<uInt>::max()));
        crc = crc32(crc, data.data() + off, chunk);
        off += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

struct Reader {
    std::span<const std::uint8_t> bytes;

    void need(std::size_t off, std::size_t n) const {
        if (off > bytes.size() || n > bytes.size() - off) corrupt("truncated archive");
    }
    std::uint16_t u16(std::size_t off) const {
        need(off, 2);
        return static_cast<std::uint16_t>(bytes[off] | (bytes[off + 1] << 8));
    }
    std::uint32_t u32(std::size_t off) const {
        return static_cast<std::uint32_t>(u16(off)) | (static_cast<std::uint32_t>(u16(off + 2)) << 16);
    }
};

std::vector<std::uint8_t> inflate_raw(std::span<const std::uint8_t> in, std::size_t expected) {
    std::vector<std::uint8_t> out(expected + 1);  // spare byte detects overlong streams
    z_stream zs{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) corrupt("cannot initialise inflate");
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    const std::size_t produced = zs.total_out;
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || produced != expected) corrupt("bad deflate stream");
    out.resize(expected);
    return out;
}

}  // namespace

std::vector<std::uint8_t> write_archive(std::span<const Entry> entries) {
    std::vector<std::uint8_t> out;
    std::vector<std::uint8_t> central;
    for (const Entry& e : entries) {
        if (e.data.size() >= 0xffffffffu || out.size() >= 0xffffffffu || e.name.size() > 0xffff) {
            throw Error(ErrorCode::InvalidArgument, "zip: entry too large");
        }
        const std::uint32_t crc = crc_of(e.data);
        const auto size = static_cast<std::uint32_t>(e.data.size());
        const auto offset = static_cast<std::uint32_t>(out.size());

        put32(out, kLocalSig);
        put16(out, 20);  // version needed
        put16(out, kUtf8Flag);
        put16(out, 0);  // stored
        put16(out, kDosTime);
        put16(out, kDosDate);
        put32(out, crc);
        put32(out, size);
        put32(out, size);
        put16(out, static_cast<std::uint32_t>(e.name.size()));
        put16(out, 0);
        out.insert(out.end(), e.name.begin(), e.name.end());
        out.insert(out.end(), e.data.begin(), e.data.end());

        put32(central, kCentralSig);
        put16(central, 20);  // made by
        put16(central, 20);
        put16(central, kUtf8Flag);
        put16(central, 0);
        put16(central, kDosTime);
        put16(central, kDosDate);
        put32(central, crc);
        put32(central, size);
        put32(central, size);
        put16(central, static_cast<std::uint32_t>(e.name.size()));
        put16(central, 0);  // extra
        put16(central, 0);  // comment
        put16(central, 0);  // disk
        put16(central, 0);  // internal attrs
        put32(central, 0);  // external attrs
        put32(central, offset);
        central.insert(central.end(), e.name.begin(), e.name.end());
    }
    if (entries.size() > 0xffff) throw Error(ErrorCode::InvalidArgument, "zip: too many entries");
    const auto cd_offset = static_cast<std::uint32_t>(out.size());
    out.insert(out.end(), central.begin(), central.end());
    put32(out, kEndSig);
    put16(out, 0);
    put16(out, 0);
    put16(out, static_cast<std::uint32_t>(entries.size()));
    put16(out, static_cast<std::uint32_t>(entries.size()));
    put32(out, static_cast<std::uint32_t>(central.size()));
    put32(out, cd_offset);
    put16(out, 0);
    return out;
}

std::vector<Entry> read_archive(std::span<const std::uint8_t> bytes) {
    const Reader r{bytes};
    if (bytes.size() < 22) corrupt("too short");
    // The end record is followed by a comment of at most 64 KiB.
    std::size_t eocd = std::string::npos;
    const std::size_t lowest = bytes.size() > 22 + 0xffff ? bytes.size() - 22 - 0xffff : 0;
    for (std::size_t off = bytes.size() - 22 + 1; off-- > lowest;) {
        if (r.u32(off) == kEndSig && off + 22 + r.u16(off + 20) == bytes.size()) {
            eocd = off;
            break;
        }
    }
    if (eocd == std::string::npos) corrupt("end of central directory not found");

    const std::uint16_t count = r.u16(eocd + 10);
    std::size_t at = r.u32(eocd + 16);
    std::vector<Entry> entries;
    for (std::uint16_t i = 0; i < count; ++i) {
        if (r.u32(at) != kCentralSig) corrupt("bad central directory entry");
        const std::uint16_t flags = r.u16(at + 8);
        const std::uint16_t method = r.u16(at + 10);
        const std::uint32_t crc = r.u32(at + 16);
        const std::uint32_t csize = r.u32(at + 20);
        const std::uint32_t usize = r.u32(at + 24);
        const std::uint16_t name_len = r.u16(at + 28);
        const std::uint16_t extra_len = r.u16(at + 30);
        const std::uint16_t comment_len = r.u16(at + 32);
        const std::uint32_t local = r.u32(at + 42);
        r.need(at + 46, name_len);
        Entry e;
        e.name.assign(reinterpret_cast<const char*>(bytes.data() + at + 46), name_len);
        at += 46u + name_len + extra_len + comment_len;

        if (flags & 1) corrupt("encrypted entries are not supported");
        if (r.u32(local) != kLocalSig) corrupt("bad local header for " + e.name);
        const std::size_t data_at = local + 30u + r.u16(local + 26) + r.u16(local + 28);
        r.need(data_at, csize);
        const auto raw = bytes.subspan(data_at, csize);
        if (method == 0) {
            if (csize != usize) corrupt("size mismatch for " + e.name);
            e.data.assign(raw.begin(), raw.end());
        } else if (method == 8) {
            if (usize > 1032ull * csize + 64) corrupt("implausible size for " + e.name);
            e.data = inflate_raw(raw, usize);
        } else {
            corrupt("unsupported compression method " + std::to_string(method));
        }
        if (crc_of(e.data) != crc) corrupt("CRC mismatch for " + e.name);
        entries.push_back(std::move(e));
    }
    return entries;
}

}  // namespace vesselseg::zip
