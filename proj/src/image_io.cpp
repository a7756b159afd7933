#include "diffam/image_io.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include <png.h>

namespace diffam {

std::uint8_t to_byte(double v)
{
    const double p = std::round((v + 1.0) * 127.5);  // std::round is half-away-from-zero
    if (!(p > 0.0))
        return 0;
    if (p >= 255.0)
        return 255;
    return static_cast<std::uint8_t>(p);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ImageIoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw ImageIoError("cannot write " + path.string());
}

namespace {

struct DecodedPng {
    int height;
    int width;
    std::vector<std::uint8_t> data;
};

DecodedPng decode(std::span<const std::uint8_t> bytes, std::uint32_t format, bool require_gray)
{
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw ImageIoError(std::string("png decode: ") + image.message);
    if (require_gray && (image.format & PNG_FORMAT_FLAG_COLOR)) {
        png_image_free(&image);
        throw ImageIoError("png decode: expected a single-channel image");
    }
    image.format = format;
    DecodedPng out{static_cast<int>(image.height), static_cast<int>(image.width), {}};
    out.data.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr))
        throw ImageIoError(std::string("png decode: ") + image.message);
    return out;
}

std::vector<std::uint8_t> encode(const std::uint8_t* data, int height, int width, std::uint32_t format)
{
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, data, 0, nullptr))
        throw ImageIoError(std::string("png encode: ") + image.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, data, 0, nullptr))
        throw ImageIoError(std::string("png encode: ") + image.message);
    out.resize(size);
    return out;
}

}  // namespace

ImageBuffer decode_png(std::span<const std::uint8_t> bytes)
{
    const DecodedPng png = decode(bytes, PNG_FORMAT_RGB, false);
    ImageBuffer img(png.height, png.width);
    for (Eigen::Index i = 0; i < img.pixel_count(); ++i)
        for (int c = 0; c < 3; ++c)
            img.pixels()(i, c) = from_byte(png.data[static_cast<std::size_t>(i * 3 + c)]);
    return img;
}

std::vector<std::uint8_t> encode_png(const ImageBuffer& img)
{
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(img.pixel_count() * 3));
    for (Eigen::Index i = 0; i < img.pixel_count(); ++i)
        for (int c = 0; c < 3; ++c)
            raw[static_cast<std::size_t>(i * 3 + c)] = to_byte(img.pixels()(i, c));
    return encode(raw.data(), img.height(), img.width(), PNG_FORMAT_RGB);
}

ImageBuffer load_image(const std::filesystem::path& path)
{
    const auto bytes = read_file(path);
    try {
        return decode_png(bytes);
    } catch (const ImageIoError& e) {
        throw ImageIoError(path.string() + ": " + e.what());
    }
}

void save_image(const ImageBuffer& img, const std::filesystem::path& path)
{
    write_file(path, encode_png(img));
}

GrayImage load_gray_png(const std::filesystem::path& path)
{
    const auto bytes = read_file(path);
    try {
        DecodedPng png = decode(bytes, PNG_FORMAT_GRAY, true);
        return {png.height, png.width, std::move(png.data)};
    } catch (const ImageIoError& e) {
        throw ImageIoError(path.string() + ": " + e.what());
    }
}

void save_gray_png(const GrayImage& img, const std::filesystem::path& path)
{
    write_file(path, encode(img.data.data(), img.height, img.width, PNG_FORMAT_GRAY));
}

}  // namespace diffam
