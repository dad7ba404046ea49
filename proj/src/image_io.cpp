#include "vesselseg/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace vesselseg {

namespace fs = std::filesystem;

namespace {

enum class Signature { Png, Jpeg, Bmp, Unknown };

Signature sniff(std::span<const std::uint8_t> b) {
    static constexpr std::uint8_t png[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (b.size() >= 8 && std::equal(std::begin(png), std::end(png), b.begin())) return Signature::Png;
    if (b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF) return Signature::Jpeg;
    if (b.size() >= 2 && b[0] == 'B' && b[1] == 'M') return Signature::Bmp;
    return Signature::Unknown;
}

cv::Mat decode_mat(std::span<const std::uint8_t> bytes) {
    if (sniff(bytes) == Signature::Unknown) {
        throw Error(ErrorCode::UnsupportedFormat, "not a PNG, JPEG or BMP stream");
    }
    cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat mat;
    try {
        mat = cv::imdecode(buf, cv::IMREAD_COLOR);
    } catch (const cv::Exception& e) {
        throw Error(ErrorCode::CorruptData, e.what());
    }
    if (mat.empty() || mat.type() != CV_8UC3) {
        throw Error(ErrorCode::CorruptData, "image payload could not be decoded");
    }
    return mat;
}

const char* extension_for(ImageFormat f) {
    switch (f) {
        case ImageFormat::Png: return ".png";
        case ImageFormat::Jpeg: return ".jpg";
        case ImageFormat::Bmp: return ".bmp";
    }
    return ".png";
}

std::vector<std::uint8_t> encode_mat(const cv::Mat& mat, ImageFormat format) {
    std::vector<std::uint8_t> out;
    std::vector<int> params;
    if (format == ImageFormat::Png) params = {cv::IMWRITE_PNG_COMPRESSION, 6};
    if (format == ImageFormat::Jpeg) params = {cv::IMWRITE_JPEG_QUALITY, 95};
    if (!cv::imencode(extension_for(format), mat, out, params)) {
        throw Error(ErrorCode::IoError, "image encoding failed");
    }
    return out;
}

}  // namespace

ImageFormat format_from_extension(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") return ImageFormat::Png;
    if (ext == ".jpg" || ext == ".jpeg") return ImageFormat::Jpeg;
    if (ext == ".bmp") return ImageFormat::Bmp;
    throw Error(ErrorCode::UnsupportedFormat, "unknown image extension '" + ext + "'");
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) {
        throw Error(ErrorCode::NotFound, path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

RasterImage decode_image(std::span<const std::uint8_t> bytes) {
    const cv::Mat mat = decode_mat(bytes);
    RasterImage img(mat.cols, mat.rows);
    for (int y = 0; y < mat.rows; ++y) {
        const auto* row = mat.ptr<cv::Vec3b>(y);
        for (int x = 0; x < mat.cols; ++x) {
            img(x, y) = Rgb{row[x][2], row[x][1], row[x][0]};
        }
    }
    return img;
}

RasterImage load_image(const fs::path& path) { return decode_image(read_file(path)); }

GrayImage load_gray(const fs::path& path) { return green_channel(load_image(path)); }

BinaryMask decode_mask(std::span<const std::uint8_t> bytes) {
    const RasterImage img = decode_image(bytes);
    BinaryMask mask(img.width(), img.height());
    for (std::size_t i = 0; i < img.size(); ++i) {
        const Rgb p = img[i];
        mask.set(i, std::max({p.r, p.g, p.b}) >= 128);
    }
    return mask;
}

BinaryMask load_mask(const fs::path& path) { return decode_mask(read_file(path)); }

std::vector<std::uint8_t> encode_image(const RasterImage& img, ImageFormat format) {
    cv::Mat mat(img.height(), img.width(), CV_8UC3);
    for (int y = 0; y < img.height(); ++y) {
        auto* row = mat.ptr<cv::Vec3b>(y);
        for (int x = 0; x < img.width(); ++x) {
            const Rgb p = img(x, y);
            row[x] = cv::Vec3b(p.b, p.g, p.r);
        }
    }
    return encode_mat(mat, format);
}

std::vector<std::uint8_t> encode_image(const GrayImage& img, ImageFormat format) {
    cv::Mat mat(img.height(), img.width(), CV_8UC1);
    for (int y = 0; y < img.height(); ++y) {
        auto* row = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < img.width(); ++x) row[x] = to_byte(img(x, y));
    }
    return encode_mat(mat, format);
}

std::vector<std::uint8_t> encode_image(const BinaryMask& mask, ImageFormat format) {
    cv::Mat mat(mask.height(), mask.width(), CV_8UC1);
    for (int y = 0; y < mask.height(); ++y) {
        auto* row = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < mask.width(); ++x) row[x] = mask(x, y) ? 255 : 0;
    }
    return encode_mat(mat, format);
}

void save_image(const RasterImage& img, const fs::path& path, ImageFormat format) {
    write_file(path, encode_image(img, format));
}

void save_image(const GrayImage& img, const fs::path& path, ImageFormat format) {
    write_file(path, encode_image(img, format));
}

void save_image(const BinaryMask& mask, const fs::path& path, ImageFormat format) {
    write_file(path, encode_image(mask, format));
}

}  // namespace vesselseg
