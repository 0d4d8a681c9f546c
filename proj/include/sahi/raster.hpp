#ifndef SAHI_RASTER_HPP
#define SAHI_RASTER_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sahi {

// 8-bit grayscale raster, row-major, immutable by convention after build.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h) {
        if (w < 1 || h < 1)
            throw std::invalid_argument("GrayImage: dimensions must be >= 1");
        pixels.assign(static_cast<std::size_t>(w) * h, fill);
    }

    std::uint8_t at(int x, int y) const {
        return pixels[static_cast<std::size_t>(y) * width + x];
    }
    void set(int x, int y, std::uint8_t v) {
        pixels[static_cast<std::size_t>(y) * width + x] = v;
    }

    bool operator==(GrayImage const& o) const {
        return width == o.width && height == o.height && pixels == o.pixels;
    }
};

inline GrayImage extract_patch(GrayImage const& img, int origin_x, int origin_y,
                               int w, int h) {
    if (origin_x < 0 || origin_y < 0 || w < 1 || h < 1 ||
        origin_x + w > img.width || origin_y + h > img.height)
        throw std::out_of_range("extract_patch: region out of image bounds");
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y) {
        auto const* src = img.pixels.data() +
                          static_cast<std::size_t>(origin_y + y) * img.width + origin_x;
        std::copy(src, src + w, out.pixels.begin() + static_cast<std::size_t>(y) * w);
    }
    return out;
}

// Deterministic nearest-neighbor upscale. Output dims = round(dim * scale).
inline GrayImage upscale(GrayImage const& img, double scale) {
    if (!(scale >= 1.0))
        throw std::invalid_argument("upscale: scale must be >= 1");
    if (scale == 1.0) return img;
    int ow = static_cast<int>(std::llround(img.width * scale));
    int oh = static_cast<int>(std::llround(img.height * scale));
    GrayImage out(ow, oh);
    for (int y = 0; y < oh; ++y) {
        int sy = std::min(static_cast<int>(y / scale), img.height - 1);
        for (int x = 0; x < ow; ++x) {
            int sx = std::min(static_cast<int>(x / scale), img.width - 1);
            out.set(x, y, img.at(sx, sy));
        }
    }
    return out;
}

// Binary PGM (P5, maxval 255).
inline void write_pgm(GrayImage const& img, std::string const& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pgm: cannot open " + path);
    f << "P5\n" << img.width << " " << img.height << "\n255\n";
    f.write(reinterpret_cast<char const*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (!f) throw std::runtime_error("write_pgm: write failed for " + path);
}

namespace detail {
inline int pgm_token(std::istream& in) {
    // Skips whitespace and '#' comments between header tokens.
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF) throw std::runtime_error("malformed file: truncated PGM header");
    int value = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw std::runtime_error("malformed file: bad PGM header token");
    return value;
}
}  // namespace detail

inline GrayImage read_pgm(std::string const& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_pgm: cannot open " + path);
    char m0 = 0, m1 = 0;
    f.get(m0);
    f.get(m1);
    if (m0 != 'P' || m1 != '5')
        throw std::runtime_error("malformed file: not a binary PGM (P5): " + path);
    int w = detail::pgm_token(f);
    int h = detail::pgm_token(f);
    int maxval = detail::pgm_token(f);
    if (maxval > 255)
        throw std::runtime_error("unsupported bit depth: PGM maxval " +
                                 std::to_string(maxval) + " in " + path);
    if (maxval < 1) throw std::runtime_error("malformed file: PGM maxval 0");
    if (w < 1 || h < 1) throw std::runtime_error("malformed file: PGM dims");
    GrayImage img(w, h);
    f.read(reinterpret_cast<char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
    if (f.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        throw std::runtime_error("malformed file: truncated PGM data in " + path);
    return img;
}

inline GrayImage read_image(std::string const& path) { return read_pgm(path); }
inline void write_image(GrayImage const& img, std::string const& path) {
    write_pgm(img, path);
}

}  // namespace sahi

#endif  // SAHI_RASTER_HPP
