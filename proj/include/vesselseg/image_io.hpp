#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vesselseg/image.hpp"

namespace vesselseg {

enum class ImageFormat { Png, Jpeg, Bmp };

/// Picks the format from the file extension (.png, .jpg/.jpeg, .bmp).
/// Throws UnsupportedFormat for anything else.
ImageFormat format_from_extension(const std::filesystem::path& path);

/// Decodes PNG, JPEG or BMP. Errors are NotFound, UnsupportedFormat (unknown
/// signature) and CorruptData (known signature, undecodable payload).
RasterImage load_image(const std::filesystem::path& path);
RasterImage decode_image(std::span<const std::uint8_t> bytes);

/// Gray file view: the green channel of the decoded file.
GrayImage load_gray(const std::filesystem::path& path);

/// Mask file view: any channel value >= 128 is vessel.
BinaryMask load_mask(const std::filesystem::path& path);
BinaryMask decode_mask(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_image(const RasterImage& img, ImageFormat format = ImageFormat::Png);
/// Single-channel 8-bit, round(v * 255).
std::vector<std::uint8_t> encode_image(const GrayImage& img, ImageFormat format = ImageFormat::Png);
/// Single-channel 8-bit, 0 = background, 255 = vessel.
std::vector<std::uint8_t> encode_image(const BinaryMask& mask, ImageFormat format = ImageFormat::Png);

void save_image(const RasterImage& img, const std::filesystem::path& path, ImageFormat format);
void save_image(const GrayImage& img, const std::filesystem::path& path, ImageFormat format);
void save_image(const BinaryMask& mask, const std::filesystem::path& path, ImageFormat format);

/// Format inferred from the extension.
template <typename Image>
void save_image(const Image& img, const std::filesystem::path& path) {
    save_image(img, path, format_from_extension(path));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace vesselseg
