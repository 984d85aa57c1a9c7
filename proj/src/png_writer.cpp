#include "mrf/png_writer.hpp"
#include "mrf/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace mrf {

std::uint8_t gray_level(double v, double min, double max) {
    const double t = std::clamp((v - min) / (max - min), 0.0, 1.0);
    return static_cast<std::uint8_t>(std::floor(255.0 * t + 0.5));
}

namespace {

struct FileCloser {
    void operator()(std::FILE *f) const { std::fclose(f); }
};

std::unique_ptr<std::FILE, FileCloser> open_for_write(const std::filesystem::path &path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "wb"));
    if (!f) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    return f;
}

} // namespace

void write_map_png(const ParametricMaps &maps, int channel, double min, double max,
                   const std::filesystem::path &path) {
    if (!(min < max) || !std::isfinite(min) || !std::isfinite(max)) {
        throw DomainError("write_map_png: range min must be below max");
    }
    if (channel < 0 || channel > 2) {
        throw DomainError("write_map_png: channel must be 0, 1 or 2");
    }
    if (maps.height == 0 || maps.width == 0) {
        throw DomainError("write_map_png: empty map");
    }
    const auto &values = maps.channel(channel);
    std::vector<std::uint8_t> pixels(values.size());
    std::transform(values.begin(), values.end(), pixels.begin(),
                   [&](double v) { return gray_level(v, min, max); });

    auto file = open_for_write(path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed writing " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(maps.width), static_cast<png_uint_32>(maps.height), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t r = 0; r < maps.height; ++r) {
        png_write_row(png, pixels.data() + r * maps.width);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(file.get()) != 0) {
        throw IoError("failed writing " + path.string());
    }

    auto sidecar = open_for_write(path.string() + ".range.csv");
    std::fprintf(sidecar.get(), "channel,min,max\n%d,%.17g,%.17g\n", channel, min, max);
}

} // namespace mrf
