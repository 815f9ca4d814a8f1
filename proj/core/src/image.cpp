// SPDX-License-Identifier: Apache-2.0

#include "vat/image.hpp"

#include <algorithm>
#include <array>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <jpeglib.h>
#include <png.h>

#include "vat/error.hpp"

namespace vat {

namespace {

std::size_t checked_size(int width, int height, int channels) {
  if (width < 1 || height < 1) {
    throw std::invalid_argument("RasterImage: dimensions must be >= 1");
  }
  if (channels != 1 && channels != 3) {
    throw std::invalid_argument("RasterImage: channels must be 1 or 3");
  }
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
         static_cast<std::size_t>(channels);
}

constexpr std::array<std::uint8_t, 8> kPngSignature{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

bool is_png(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= kPngSignature.size() &&
         std::equal(kPngSignature.begin(), kPngSignature.end(), bytes.begin());
}

bool is_jpeg(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF;
}

Sample over_white(Sample value, Sample alpha) {
  const unsigned blended = static_cast<unsigned>(alpha) * value + (255u - alpha) * 255u;
  return static_cast<Sample>((blended + 127u) / 255u);
}

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw DecodeError(std::string("png: ") + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  const bool alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  image.format = color ? (alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB)
                       : (alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY);
  const int src_channels = PNG_IMAGE_SAMPLE_CHANNELS(image.format);
  const int width = static_cast<int>(image.width);
  const int height = static_cast<int>(image.height);
  std::vector<Sample> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    std::string message = image.message;
    png_image_free(&image);
    throw DecodeError("png: " + message);
  }
  if (!alpha) {
    return RasterImage(width, height, src_channels, std::move(buffer));
  }
  const int out_channels = src_channels - 1;
  std::vector<Sample> out(static_cast<std::size_t>(width) * height * out_channels);
  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  for (std::size_t i = 0; i < pixels; ++i) {
    const Sample a = buffer[i * src_channels + out_channels];
    for (int c = 0; c < out_channels; ++c) {
      out[i * out_channels + c] = over_white(buffer[i * src_channels + c], a);
    }
  }
  return RasterImage(width, height, out_channels, std::move(out));
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

RasterImage decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  std::vector<Sample> buffer;
  int width = 0;
  int height = 0;
  int channels = 0;

  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.message[0] = '\0';
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw DecodeError(std::string("jpeg: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  channels = cinfo.output_components;
  buffer.resize(static_cast<std::size_t>(width) * height * channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = buffer.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return RasterImage(width, height, channels, std::move(buffer));
}

}  // namespace

RasterImage::RasterImage(int width, int height, int channels, std::vector<Sample> pixels)
    : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
  if (pixels_.size() != checked_size(width, height, channels)) {
    throw std::invalid_argument("RasterImage: pixel buffer length != width*height*channels");
  }
}

RasterImage::RasterImage(int width, int height, int channels, Sample fill)
    : width_(width),
      height_(height),
      channels_(channels),
      pixels_(checked_size(width, height, channels), fill) {}

long long BoundingBox::overlap_area(const BoundingBox& other) const noexcept {
  const long long w = std::min(x1, other.x1) - std::max(x0, other.x0);
  const long long h = std::min(y1, other.y1) - std::max(y0, other.y0);
  return (w > 0 && h > 0) ? w * h : 0;
}

RasterImage decode_image(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_jpeg(bytes)) return decode_jpeg(bytes);
  throw DecodeError("unsupported image format (expected PNG or JPEG)");
}

RasterImage decode_image(std::string_view bytes) {
  return decode_image(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

std::string encode_png(const RasterImage& img) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels().data(), 0, nullptr)) {
    throw EncodeError(std::string("png: ") + image.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels().data(), 0, nullptr)) {
    throw EncodeError(std::string("png: ") + image.message);
  }
  out.resize(size);
  return out;
}

RasterImage to_grayscale(const RasterImage& img) {
  if (img.channels() == 1) return img;
  const auto src = img.pixels();
  std::vector<Sample> out(static_cast<std::size_t>(img.width()) * img.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const unsigned r = src[3 * i];
    const unsigned g = src[3 * i + 1];
    const unsigned b = src[3 * i + 2];
    // 0.299/0.587/0.114 in thousandths; +500 rounds half up.
    out[i] = static_cast<Sample>((299u * r + 587u * g + 114u * b + 500u) / 1000u);
  }
  return RasterImage(img.width(), img.height(), 1, std::move(out));
}

RasterImage blank_like(const RasterImage& img, Sample value) {
  return RasterImage(img.width(), img.height(), img.channels(), value);
}

RasterImage expand_channels(const RasterImage& img, int channels) {
  if (img.channels() == channels) return img;
  if (img.channels() != 1 || channels != 3) {
    throw std::invalid_argument("expand_channels: only gray -> RGB is supported");
  }
  const auto src = img.pixels();
  std::vector<Sample> out(src.size() * 3);
  for (std::size_t i = 0; i < src.size(); ++i) {
    out[3 * i] = out[3 * i + 1] = out[3 * i + 2] = src[i];
  }
  return RasterImage(img.width(), img.height(), 3, std::move(out));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

RasterImage load_image(const std::filesystem::path& path) {
  return decode_image(read_file(path));
}

void save_png(const RasterImage& img, const std::filesystem::path& path) {
  write_file(path, encode_png(img));
}

}  // namespace vat
