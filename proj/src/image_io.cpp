#include "iidlab/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <sstream>

namespace iid::io {
namespace fs = std::filesystem;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_for_read(const fs::path& path) {
  if (!fs::exists(path)) {
    throw Error(ErrorCode::MissingFile, "no such file: " + path.string());
  }
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  return f;
}

FilePtr open_for_write(const fs::path& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  return f;
}

struct DecodedPng {
  int height = 0;
  int width = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> bytes;  // rows, big-endian for 16-bit samples
};

DecodedPng decode_png(const fs::path& path) {
  FilePtr file = open_for_read(path);
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error(ErrorCode::DecodeFailure, "not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::DecodeFailure, "libpng initialisation failed");
  }
  DecodedPng out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::DecodeFailure, "corrupt PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
    out.bit_depth = 8;
  }
  png_read_update_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  const size_t row_bytes = png_get_rowbytes(png, info);
  out.bytes.resize(row_bytes * out.height);
  rows.resize(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + row_bytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void encode_png(const fs::path& path, int height, int width, int color_type, int bit_depth,
                const std::vector<std::uint8_t>& bytes) {
  FilePtr file = open_for_write(path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoFailure, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoFailure, "PNG encode failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const size_t row_bytes = bytes.size() / height;
  for (int y = 0; y < height; ++y) {
    png_write_row(png, bytes.data() + row_bytes * y);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

std::uint8_t quantize_byte(float v) {
  if (!(v > 0.0f)) return 0;  // also maps NaN to 0
  if (v >= 1.0f) return 255;
  return static_cast<std::uint8_t>(std::floor(v * 255.0f + 0.5f));
}

ImageRGB load_png(const fs::path& path) {
  DecodedPng png = decode_png(path);
  if (png.bit_depth != 8) {
    throw Error(ErrorCode::UnsupportedBitDepth,
                path.string() + ": expected 8-bit PNG, got " + std::to_string(png.bit_depth));
  }
  ImageRGB img(png.height, png.width);
  const bool gray = png.channels <= 2;
  for (int y = 0; y < png.height; ++y) {
    for (int x = 0; x < png.width; ++x) {
      const std::uint8_t* px = png.bytes.data() + (static_cast<size_t>(y) * png.width + x) * png.channels;
      for (int c = 0; c < 3; ++c) {
        img.at(y, x, c) = static_cast<float>(gray ? px[0] : px[c]) / 255.0f;
      }
    }
  }
  return img;
}

void save_png(const ImageRGB& img, const fs::path& path) {
  std::vector<std::uint8_t> bytes(img.data().size());
  std::transform(img.data().begin(), img.data().end(), bytes.begin(), quantize_byte);
  encode_png(path, img.height(), img.width(), PNG_COLOR_TYPE_RGB, 8, bytes);
}

void save_png(const GrayImage& img, const fs::path& path) {
  std::vector<std::uint8_t> bytes(img.data().size());
  std::transform(img.data().begin(), img.data().end(), bytes.begin(), quantize_byte);
  encode_png(path, img.height(), img.width(), PNG_COLOR_TYPE_GRAY, 8, bytes);
}

// ---------------------------------------------------------------------------
// PFM

namespace {

template <int C>
void write_pfm(const Raster<C>& img, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << (C == 3 ? "PF" : "Pf") << '\n' << img.width() << ' ' << img.height() << "\n-1.0\n";
  const size_t row = static_cast<size_t>(img.width()) * C;
  std::vector<std::uint32_t> buf(row);
  for (int y = img.height() - 1; y >= 0; --y) {
    const float* src = img.data().data() + static_cast<size_t>(y) * row;
    for (size_t i = 0; i < row; ++i) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(src[i]);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      buf[i] = bits;
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(row * 4));
  }
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

std::string read_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) return tok;
    } else {
      tok.push_back(ch);
    }
  }
  return tok;
}

}  // namespace

PfmImage load_pfm(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::MissingFile, "no such file: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  const std::string magic = read_token(in);
  int channels = 0;
  if (magic == "PF") channels = 3;
  else if (magic == "Pf") channels = 1;
  else throw Error(ErrorCode::HeaderMismatch, path.string() + ": bad PFM magic '" + magic + "'");

  int width = 0, height = 0;
  double scale = 0.0;
  try {
    width = std::stoi(read_token(in));
    height = std::stoi(read_token(in));
    scale = std::stod(read_token(in));  // consumes exactly one trailing whitespace byte
  } catch (const std::exception&) {
    throw Error(ErrorCode::HeaderMismatch, path.string() + ": malformed PFM header");
  }
  if (width < 1 || height < 1 || scale == 0.0 || !std::isfinite(scale)) {
    throw Error(ErrorCode::HeaderMismatch, path.string() + ": invalid PFM dimensions or scale");
  }
  const bool little = scale < 0.0;
  const bool swap = little != (std::endian::native == std::endian::little);
  const size_t row = static_cast<size_t>(width) * channels;
  std::vector<float> data(row * height);
  std::vector<std::uint32_t> buf(row);
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(row * 4));
    if (static_cast<size_t>(in.gcount()) != row * 4) {
      throw Error(ErrorCode::TruncatedPayload, path.string() + ": PFM payload truncated");
    }
    for (size_t i = 0; i < row; ++i) {
      std::uint32_t bits = swap ? __builtin_bswap32(buf[i]) : buf[i];
      data[static_cast<size_t>(y) * row + i] = std::bit_cast<float>(bits);
    }
  }
  auto fill = [&](auto img) {
    std::copy(data.begin(), data.end(), img.data().begin());
    return PfmImage(std::move(img));
  };
  if (channels == 3) return fill(ImageRGB(height, width));
  return fill(GrayImage(height, width));
}

ImageRGB load_pfm_rgb(const fs::path& path) {
  PfmImage img = load_pfm(path);
  if (auto* rgb = std::get_if<ImageRGB>(&img)) return std::move(*rgb);
  throw Error(ErrorCode::HeaderMismatch, path.string() + ": expected colour PFM (PF)");
}

GrayImage load_pfm_gray(const fs::path& path) {
  PfmImage img = load_pfm(path);
  if (auto* gray = std::get_if<GrayImage>(&img)) return std::move(*gray);
  throw Error(ErrorCode::HeaderMismatch, path.string() + ": expected grayscale PFM (Pf)");
}

void save_pfm(const ImageRGB& img, const fs::path& path) { write_pfm(img, path); }
void save_pfm(const GrayImage& img, const fs::path& path) { write_pfm(img, path); }

// ---------------------------------------------------------------------------
// Segments

void save_label_png(int height, int width, std::span<const std::int32_t> labels,
                    const fs::path& path) {
  std::vector<std::uint8_t> bytes(labels.size() * 2);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] > 0xFFFF) {
      throw Error(ErrorCode::LabelOverflow, "label does not fit in 16 bits");
    }
    bytes[2 * i] = static_cast<std::uint8_t>(labels[i] >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(labels[i] & 0xFF);
  }
  encode_png(path, height, width, PNG_COLOR_TYPE_GRAY, 16, bytes);
}

RawLabels load_label_png(const fs::path& path) {
  DecodedPng png = decode_png(path);
  if (png.channels != 1 || (png.bit_depth != 16 && png.bit_depth != 8)) {
    throw Error(ErrorCode::UnsupportedBitDepth,
                path.string() + ": label maps must be 8- or 16-bit single-channel PNG");
  }
  RawLabels out{png.height, png.width, {}};
  out.labels.resize(static_cast<size_t>(png.height) * png.width);
  for (size_t i = 0; i < out.labels.size(); ++i) {
    out.labels[i] = png.bit_depth == 16
                        ? (static_cast<std::int64_t>(png.bytes[2 * i]) << 8) | png.bytes[2 * i + 1]
                        : png.bytes[i];
  }
  return out;
}

SegmentMap load_segments(const fs::path& png_path, const fs::path& sidecar_path) {
  RawLabels raw = load_label_png(png_path);
  std::unordered_map<std::int64_t, SemanticClass> classes;
  if (fs::exists(sidecar_path)) {
    std::ifstream in(sidecar_path);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedSidecar, sidecar_path.string() + ": " + e.what());
    }
    if (!doc.is_object()) {
      throw Error(ErrorCode::MalformedSidecar, sidecar_path.string() + ": expected a JSON object");
    }
    for (const auto& [key, value] : doc.items()) {
      std::int64_t label = 0;
      size_t consumed = 0;
      try {
        label = std::stoll(key, &consumed);
      } catch (const std::exception&) {
        consumed = 0;
      }
      if (consumed != key.size() || label < 0 || !value.is_string()) {
        throw Error(ErrorCode::MalformedSidecar,
                    sidecar_path.string() + ": bad entry '" + key + "'");
      }
      classes[label] = parse_semantic_class(value.get<std::string>());
    }
  }
  std::unordered_map<std::int64_t, int> distinct;
  for (std::int64_t l : raw.labels) {
    distinct.emplace(l, 0);
    if (distinct.size() > static_cast<size_t>(kMaxSegments)) {
      throw Error(ErrorCode::LabelOverflow, png_path.string() + ": more than " +
                                                std::to_string(kMaxSegments) + " segments");
    }
  }
  return SegmentMap::from_raw(raw.height, raw.width, raw.labels, classes);
}

SegmentMap load_segments(const fs::path& png_path) {
  fs::path sidecar = png_path;
  sidecar.replace_extension(".json");
  return load_segments(png_path, sidecar);
}

void save_segments(const SegmentMap& seg, const fs::path& png_path, const fs::path& sidecar_path) {
  save_label_png(seg.height(), seg.width(), seg.labels(), png_path);
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (int l = 0; l < seg.segment_count(); ++l) {
    doc[std::to_string(l)] = std::string(to_string(seg.class_of(l)));
  }
  std::ofstream out(sidecar_path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + sidecar_path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace iid::io
