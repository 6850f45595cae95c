#pragma once

// File codecs: radiometric TIFF (libtiff), PNG (libpng simplified API) and
// JPEG decode (libjpeg). Everything else in the library works on in-memory
// grids.

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>
#include <tiffio.h>

#include "firelabel/grid.hpp"

namespace firelabel {

// temperature = sample * scale + offset, for integer-sample TIFFs.
struct IntegerScale {
  double scale = 1.0;
  double offset = 0.0;
};

namespace detail {

inline std::string& tiff_last_error() {
  thread_local std::string msg;
  return msg;
}

inline void tiff_error_handler(const char* module, const char* fmt, va_list ap) {
  char buf[512];
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  tiff_last_error() = std::string(module ? module : "tiff") + ": " + buf;
}

inline void tiff_silence() {
  static const bool once = [] {
    TIFFSetErrorHandler(&tiff_error_handler);
    TIFFSetWarningHandler(nullptr);
    return true;
  }();
  (void)once;
}

struct TiffCloser {
  void operator()(TIFF* t) const { if (t) TIFFClose(t); }
};
using TiffHandle = std::unique_ptr<TIFF, TiffCloser>;

template <typename S>
double decode_sample(const unsigned char* p) {
  S s;
  std::memcpy(&s, p, sizeof(S));
  return static_cast<double>(s);
}

inline double decode(const unsigned char* p, std::uint16_t format, std::uint16_t bits) {
  if (format == SAMPLEFORMAT_IEEEFP) return bits == 32 ? decode_sample<float>(p) : decode_sample<double>(p);
  if (format == SAMPLEFORMAT_INT) {
    switch (bits) {
      case 8: return decode_sample<std::int8_t>(p);
      case 16: return decode_sample<std::int16_t>(p);
      default: return decode_sample<std::int32_t>(p);
    }
  }
  switch (bits) {
    case 8: return decode_sample<std::uint8_t>(p);
    case 16: return decode_sample<std::uint16_t>(p);
    default: return decode_sample<std::uint32_t>(p);
  }
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace detail

/// Decode a single-band radiometric TIFF into degrees Celsius. Floating-point
/// samples are taken as-is; integer samples need an explicit scale. Values
/// are not clipped here.
inline TemperatureGrid load_tiff(const std::filesystem::path& path,
                                 std::optional<IntegerScale> integer_scale = std::nullopt) {
  detail::tiff_silence();
  if (!std::filesystem::exists(path)) throw IoError("missing file: " + path.string());
  if (std::filesystem::file_size(path) == 0)
    throw IoError("unsupported/corrupt TIFF: " + path.string() + " is empty");

  detail::tiff_last_error().clear();
  detail::TiffHandle tif(TIFFOpen(path.c_str(), "r"));
  if (!tif) throw IoError("unsupported/corrupt TIFF: " + path.string() + " " + detail::tiff_last_error());

  std::uint32_t width = 0, height = 0;
  std::uint16_t spp = 1, bits = 0, format = SAMPLEFORMAT_UINT, planar = PLANARCONFIG_CONTIG;
  TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &width);
  TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &height);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bits);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLEFORMAT, &format);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_PLANARCONFIG, &planar);

  if (width == 0 || height == 0) throw IoError("unsupported/corrupt TIFF: zero dimensions in " + path.string());
  if (spp != 1) throw ValidationError("multi-band TIFF (" + std::to_string(spp) + " samples/pixel): " + path.string());

  const bool is_float = format == SAMPLEFORMAT_IEEEFP && (bits == 32 || bits == 64);
  const bool is_int = (format == SAMPLEFORMAT_UINT || format == SAMPLEFORMAT_INT) &&
                      (bits == 8 || bits == 16 || bits == 32);
  if (!is_float && !is_int)
    throw ValidationError("unsupported TIFF sample format (format " + std::to_string(format) + ", " +
                          std::to_string(bits) + " bits): " + path.string());
  if (is_int && !integer_scale)
    throw ValidationError("integer-sample TIFF requires an explicit scale/offset: " + path.string());

  const std::size_t bytes_per_sample = bits / 8;
  std::vector<double> values(static_cast<std::size_t>(width) * height);

  if (TIFFIsTiled(tif.get())) {
    std::uint32_t tw = 0, th = 0;
    TIFFGetField(tif.get(), TIFFTAG_TILEWIDTH, &tw);
    TIFFGetField(tif.get(), TIFFTAG_TILELENGTH, &th);
    std::vector<unsigned char> tile(static_cast<std::size_t>(TIFFTileSize(tif.get())));
    for (std::uint32_t ty = 0; ty < height; ty += th) {
      for (std::uint32_t tx = 0; tx < width; tx += tw) {
        if (TIFFReadTile(tif.get(), tile.data(), tx, ty, 0, 0) < 0)
          throw IoError("unsupported/corrupt TIFF: tile read failed in " + path.string());
        for (std::uint32_t y = ty; y < std::min(height, ty + th); ++y)
          for (std::uint32_t x = tx; x < std::min(width, tx + tw); ++x)
            values[static_cast<std::size_t>(y) * width + x] =
                detail::decode(tile.data() + ((y - ty) * tw + (x - tx)) * bytes_per_sample, format, bits);
      }
    }
  } else {
    std::vector<unsigned char> row(static_cast<std::size_t>(TIFFScanlineSize(tif.get())));
    for (std::uint32_t y = 0; y < height; ++y) {
      if (TIFFReadScanline(tif.get(), row.data(), y, 0) < 0)
        throw IoError("unsupported/corrupt TIFF: scanline read failed in " + path.string());
      for (std::uint32_t x = 0; x < width; ++x)
        values[static_cast<std::size_t>(y) * width + x] =
            detail::decode(row.data() + x * bytes_per_sample, format, bits);
    }
  }

  if (is_int) {
    for (auto& v : values) v = v * integer_scale->scale + integer_scale->offset;
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw ValidationError("non-finite temperature at pixel " + std::to_string(i) + " (x=" +
                            std::to_string(i % width) + ", y=" + std::to_string(i / width) + ") in " +
                            path.string());
  }
  return TemperatureGrid(width, height, std::move(values));
}

enum class TiffSampleType { float32, float64 };

// float64 is the default so that load_tiff(write_tiff(g)) == g bit for bit.
inline void write_tiff(const std::filesystem::path& path, const TemperatureGrid& grid,
                       TiffSampleType type = TiffSampleType::float64) {
  detail::tiff_silence();
  detail::TiffHandle tif(TIFFOpen(path.c_str(), "w"));
  if (!tif) throw IoError("cannot write TIFF: " + path.string());
  const std::uint16_t bits = type == TiffSampleType::float64 ? 64 : 32;
  TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(grid.width()));
  TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(grid.height()));
  TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, std::uint16_t{1});
  TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, bits);
  TIFFSetField(tif.get(), TIFFTAG_SAMPLEFORMAT, std::uint16_t{SAMPLEFORMAT_IEEEFP});
  TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC, std::uint16_t{PHOTOMETRIC_MINISBLACK});
  TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, std::uint16_t{PLANARCONFIG_CONTIG});
  TIFFSetField(tif.get(), TIFFTAG_COMPRESSION, std::uint16_t{COMPRESSION_NONE});
  TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP, static_cast<std::uint32_t>(grid.height()));

  std::vector<unsigned char> row(grid.width() * bits / 8);
  for (std::size_t y = 0; y < grid.height(); ++y) {
    for (std::size_t x = 0; x < grid.width(); ++x) {
      if (type == TiffSampleType::float64) {
        const double v = grid(x, y);
        std::memcpy(row.data() + x * 8, &v, 8);
      } else {
        const float v = static_cast<float>(grid(x, y));
        std::memcpy(row.data() + x * 4, &v, 4);
      }
    }
    if (TIFFWriteScanline(tif.get(), row.data(), static_cast<std::uint32_t>(y), 0) < 0)
      throw IoError("TIFF scanline write failed: " + path.string());
  }
}

// ---- PNG ----

inline Image8 decode_png(const std::vector<unsigned char>& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw IoError(std::string("invalid PNG: ") + image.message);
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Image8 out{image.width, image.height, gray ? 1u : 3u, {}};
  out.data.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw IoError("invalid PNG: " + msg);
  }
  return out;
}

inline std::vector<unsigned char> encode_png(const Image8& img) {
  if (img.channels != 1 && img.channels != 3) throw ValidationError("PNG encode needs 1 or 3 channels");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.data.data(), 0, nullptr))
    throw IoError(std::string("PNG encode failed: ") + image.message);
  std::vector<unsigned char> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.data.data(), 0, nullptr))
    throw IoError(std::string("PNG encode failed: ") + image.message);
  out.resize(size);
  return out;
}

// ---- JPEG (decode only) ----

namespace detail {
struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}
}  // namespace detail

inline Image8 decode_jpeg(const std::vector<unsigned char>& bytes) {
  jpeg_decompress_struct cinfo;
  detail::JpegError err;
  Image8 out;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = &detail::jpeg_error_exit;
  err.message[0] = '\0';
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError(std::string("invalid JPEG: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out.width = cinfo.output_width;
  out.height = cinfo.output_height;
  out.channels = static_cast<std::size_t>(cinfo.output_components);
  out.data.resize(out.width * out.height * out.channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.data.data() + static_cast<std::size_t>(cinfo.output_scanline) * out.width * out.channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

inline Image8 decode_image(const std::vector<unsigned char>& bytes) {
  if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G')
    return decode_png(bytes);
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8) return decode_jpeg(bytes);
  throw IoError("unrecognized image format (expected PNG or JPEG)");
}

inline Image8 load_image(const std::filesystem::path& path) {
  try {
    return decode_image(detail::read_file_bytes(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

inline void save_png(const std::filesystem::path& path, const Image8& img) {
  detail::write_file_bytes(path, encode_png(img));
}

// Masks and edge maps are stored as single-channel PNG with values {0, 255}.
template <typename Tag>
Image8 mask_to_image(const Grid<std::uint8_t, Tag>& mask) {
  Image8 img = make_image(mask.width(), mask.height(), 1);
  for (std::size_t i = 0; i < mask.size(); ++i) img.data[i] = mask[i] ? 255 : 0;
  return img;
}

// Any nonzero gray level is foreground; colour images are rejected.
inline BinaryMask image_to_mask(const Image8& img) {
  if (img.channels != 1) throw ValidationError("mask image must be single-channel");
  BinaryMask mask(img.width, img.height);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = img.data[i] ? 1 : 0;
  return mask;
}

inline void save_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  save_png(path, mask_to_image(mask));
}

inline BinaryMask load_mask(const std::filesystem::path& path) { return image_to_mask(load_image(path)); }

inline Image8 gray_to_image(const GrayImage& gray) {
  Image8 img = make_image(gray.width(), gray.height(), 1);
  std::copy(gray.begin(), gray.end(), img.data.begin());
  return img;
}

}  // namespace firelabel
