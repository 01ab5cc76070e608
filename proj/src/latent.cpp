#include "lwm/latent.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include "lwm/errors.hpp"
#include "lwm/normal.hpp"
#include "lwm/rng.hpp"

namespace lwm {

LatentShape::LatentShape(std::uint32_t c_, std::uint32_t h_, std::uint32_t w_)
    : c(c_), h(h_), w(w_) {
    if (c == 0 || h == 0 || w == 0) {
        throw InvalidArgument("LatentShape: all dimensions must be >= 1");
    }
}

LatentShape LatentShape::parse(std::string_view text) {
    std::uint32_t dims[3];
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
        const char* begin = text.data() + pos;
        const char* end = text.data() + text.size();
        auto [ptr, ec] = std::from_chars(begin, end, dims[i]);
        if (ec != std::errc{} || ptr == begin) {
            throw InvalidArgument("LatentShape: expected CxHxW, got '" + std::string(text) + "'");
        }
        pos = static_cast<std::size_t>(ptr - text.data());
        if (i < 2) {
            if (pos >= text.size() || text[pos] != 'x') {
                throw InvalidArgument("LatentShape: expected CxHxW, got '" + std::string(text) + "'");
            }
            ++pos;
        }
    }
    if (pos != text.size()) {
        throw InvalidArgument("LatentShape: trailing characters in '" + std::string(text) + "'");
    }
    return LatentShape(dims[0], dims[1], dims[2]);
}

std::string LatentShape::to_string() const {
    return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
}

GaussianLatent::GaussianLatent(LatentShape shape_, std::vector<double> values_)
    : shape(shape_), values(std::move(values_)) {
    if (values.size() != shape.r()) {
        throw InvalidArgument("GaussianLatent: value count does not match shape");
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw InvalidArgument("GaussianLatent: values must be finite");
        }
    }
}

GaussianLatent sample_latent(const LatentShape& shape, Seed seed) {
    const std::size_t r = shape.r();
    std::vector<double> values(r);
    for (std::size_t i = 0; i < r; ++i) {
        values[i] = inverse_normal_cdf(rng::uniform_at(seed.value, i));
    }
    return GaussianLatent(shape, std::move(values));
}

namespace {

void put_u32le(std::ostream& out, std::uint32_t v) {
    const char bytes[4] = {
        static_cast<char>(v & 0xff),
        static_cast<char>((v >> 8) & 0xff),
        static_cast<char>((v >> 16) & 0xff),
        static_cast<char>((v >> 24) & 0xff),
    };
    out.write(bytes, 4);
}

std::uint32_t get_u32le(std::istream& in) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    if (!in) throw IoError("LWM1: truncated header");
    return static_cast<std::uint32_t>(bytes[0]) |
           (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) |
           (static_cast<std::uint32_t>(bytes[3]) << 24);
}

} // namespace

void write_lwm1(std::ostream& out, const GaussianLatent& latent) {
    out.write("LWM1", 4);
    put_u32le(out, latent.shape.c);
    put_u32le(out, latent.shape.h);
    put_u32le(out, latent.shape.w);
    for (double v : latent.values) {
        put_u32le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    if (!out) throw IoError("LWM1: write failed");
}

void write_lwm1(const std::filesystem::path& path, const GaussianLatent& latent) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("LWM1: cannot open '" + path.string() + "' for writing");
    write_lwm1(out, latent);
}

GaussianLatent read_lwm1(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string_view(magic, 4) != "LWM1") {
        throw IoError("LWM1: bad magic");
    }
    const std::uint32_t c = get_u32le(in);
    const std::uint32_t h = get_u32le(in);
    const std::uint32_t w = get_u32le(in);
    if (c == 0 || h == 0 || w == 0) throw IoError("LWM1: zero dimension in header");
    LatentShape shape(c, h, w);
    const std::size_t r = shape.r();
    std::vector<double> values(r);
    for (std::size_t i = 0; i < r; ++i) {
        const float f = std::bit_cast<float>(get_u32le(in));
        if (!std::isfinite(f)) throw IoError("LWM1: non-finite value in payload");
        values[i] = static_cast<double>(f);
    }
    return GaussianLatent(shape, std::move(values));
}

GaussianLatent read_lwm1(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("LWM1: cannot open '" + path.string() + "'");
    return read_lwm1(in);
}

} // namespace lwm
