#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace lwm {

// Dimensions of the latent tensor; elements are stored flat in row-major
// (c, h, w) order everywhere in this library.
struct LatentShape {
    std::uint32_t c = 0;
    std::uint32_t h = 0;
    std::uint32_t w = 0;

    LatentShape(std::uint32_t c_, std::uint32_t h_, std::uint32_t w_);

    std::size_t r() const {
        return static_cast<std::size_t>(c) * h * w;
    }

    bool operator==(const LatentShape&) const = default;

    // Accepts "CxHxW", e.g. "4x64x64".
    static LatentShape parse(std::string_view text);
    std::string to_string() const;
};

struct Seed {
    std::uint64_t value = 0;
};

// Flat vector of r finite reals plus its shape.
struct GaussianLatent {
    LatentShape shape;
    std::vector<double> values;

    GaussianLatent(LatentShape shape_, std::vector<double> values_);
};

// r i.i.d. draws from N(0,1), reproducible bit-for-bit: element i is
// inverse_normal_cdf(u_i) where u_i is word i of the splitmix64 counter
// stream keyed by `seed` mapped into (0,1) (see rng.hpp). Pure function of
// (shape, seed); elements are independent of each other's evaluation order.
GaussianLatent sample_latent(const LatentShape& shape, Seed seed);

// "LWM1" container: 4-byte magic, u32le c/h/w, then r IEEE-754 binary32
// little-endian values. Doubles are rounded to nearest float on write.
void write_lwm1(std::ostream& out, const GaussianLatent& latent);
void write_lwm1(const std::filesystem::path& path, const GaussianLatent& latent);
GaussianLatent read_lwm1(std::istream& in);
GaussianLatent read_lwm1(const std::filesystem::path& path);

} // namespace lwm
