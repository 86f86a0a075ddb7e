#include "maae/synthdata.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "maae/image_io.hpp"

namespace maae::data {

namespace fs = std::filesystem;
using nlohmann::json;

const std::array<std::string, kNumAttributes>& attributeNames() {
    static const std::array<std::string, kNumAttributes> names{
        "hairBlond", "glasses", "mouthOpen", "paleSkin"};
    return names;
}

int attributeIndex(const std::string& name) {
    const auto& names = attributeNames();
    for (int i = 0; i < kNumAttributes; ++i)
        if (names[static_cast<std::size_t>(i)] == name) return i;
    throw ConfigError("unknown attribute: " + name);
}

namespace {

real u01(std::mt19937_64& rng) {
    return static_cast<real>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

real uniform(std::mt19937_64& rng, real lo, real hi) {
    return lo + (hi - lo) * u01(rng);
}

struct Canvas {
    int size;
    std::vector<real> rgb;   // 3*size*size, channel-major
    std::vector<real> mask;  // size*size

    explicit Canvas(int s) : size(s), rgb(3u * s * s, 0.0), mask(1u * s * s, 0.0) {}

    void set(int y, int x, real r, real g, real b) {
        const std::size_t p = static_cast<std::size_t>(y) * size + x;
        rgb[p] = r;
        rgb[p + static_cast<std::size_t>(size) * size] = g;
        rgb[p + 2ull * size * size] = b;
    }
    bool inMask(int y, int x) const {
        return mask[static_cast<std::size_t>(y) * size + x] > 0.5;
    }
    // Foreground paint is always clipped to the mask.
    void paint(int y, int x, real r, real g, real b) {
        if (y < 0 || y >= size || x < 0 || x >= size) return;
        if (!inMask(y, x)) return;
        set(y, x, r, g, b);
    }
};

void drawBackground(Canvas& c, std::uint64_t backgroundSeed) {
    std::mt19937_64 rng(backgroundSeed * 0x9E3779B97F4A7C15ull + 0x2545F4914F6CDD1Dull);
    const real r0 = uniform(rng, 0.05, 0.9), g0 = uniform(rng, 0.05, 0.9),
               b0 = uniform(rng, 0.05, 0.9);
    const real r1 = uniform(rng, 0.05, 0.9), g1 = uniform(rng, 0.05, 0.9),
               b1 = uniform(rng, 0.05, 0.9);
    for (int y = 0; y < c.size; ++y) {
        const real t = static_cast<real>(y) / (c.size - 1);
        for (int x = 0; x < c.size; ++x)
            c.set(y, x, r0 + t * (r1 - r0), g0 + t * (g1 - g0), b0 + t * (b1 - b0));
    }
    // A couple of rectangles so the background is not trivially smooth.
    for (int k = 0; k < 2; ++k) {
        const int x0 = static_cast<int>(uniform(rng, 0, c.size * 0.8));
        const int y0 = static_cast<int>(uniform(rng, 0, c.size * 0.8));
        const int w = 2 + static_cast<int>(uniform(rng, 0, c.size * 0.3));
        const int h = 2 + static_cast<int>(uniform(rng, 0, c.size * 0.3));
        const real rr = uniform(rng, 0.05, 0.9), gg = uniform(rng, 0.05, 0.9),
                   bb = uniform(rng, 0.05, 0.9);
        for (int y = y0; y < std::min(c.size, y0 + h); ++y)
            for (int x = x0; x < std::min(c.size, x0 + w); ++x) c.set(y, x, rr, gg, bb);
    }
}

}  // namespace

IdentityParams identityParamsFor(int identityId) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(identityId) * 0xD1B54A32D192ED03ull +
                        0x8CB92BA72F3D8DD7ull);
    IdentityParams p{};
    p.aspect = uniform(rng, 0.55, 0.95);
    // warm by construction (R > G > B) so chroma separates pale from non-pale
    p.skinR = uniform(rng, 0.55, 0.95);
    p.skinG = p.skinR * uniform(rng, 0.60, 0.85);
    p.skinB = p.skinG * uniform(rng, 0.50, 0.80);
    p.eyeSpacing = uniform(rng, 0.30, 0.80);
    p.noseLength = uniform(rng, 0.08, 0.26);
    return p;
}

Sample renderSample(const SceneSpec& spec, int size) {
    if (size != 32 && size != 64) throw ConfigError("renderSample: size must be 32 or 64");

    const IdentityParams id = identityParamsFor(spec.identityId);
    std::mt19937_64 jitterRng(spec.renderSeed * 0xA0761D6478BD642Full + 0xE7037ED1A0B428DBull);
    const int dx = static_cast<int>(jitterRng() % 5) - 2;
    const int dy = static_cast<int>(jitterRng() % 3) - 1;
    const real scale = uniform(jitterRng, 0.94, 1.06);

    Canvas c(size);
    drawBackground(c, spec.backgroundSeed);

    const real cx = size / 2.0 + dx;
    const real cy = size / 2.0 + dy;
    const real ax = 0.30 * size * scale;
    const real ay = ax / id.aspect;

    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const real u = (x + 0.5 - cx) / ax, v = (y + 0.5 - cy) / ay;
            if (u * u + v * v <= 1.0)
                c.mask[static_cast<std::size_t>(y) * size + x] = 1.0;
        }

    const bool hairBlond = spec.attributes[0];
    const bool glasses = spec.attributes[1];
    const bool mouthOpen = spec.attributes[2];
    const bool paleSkin = spec.attributes[3];

    // Skin.
    real sr = id.skinR, sg = id.skinG, sb = id.skinB;
    // desaturate toward luminance, then lighten slightly: the washed-out look
    // is detectable in any skin tone while the tone itself (identity) survives
    if (paleSkin) {
        const real lum = 0.299 * sr + 0.587 * sg + 0.114 * sb;
        sr = 0.9 * (lum + 0.15 * (sr - lum)) + 0.1;
        sg = 0.9 * (lum + 0.15 * (sg - lum)) + 0.1;
        sb = 0.9 * (lum + 0.15 * (sb - lum)) + 0.1;
    }
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) c.paint(y, x, sr, sg, sb);

    // Hair band across the top of the ellipse. The two hair colors sit on
    // opposite ends of a hue axis (warm yellow vs cool blue-black) so the
    // midpoint of any blend between them is neutral, not closer to one class.
    const real hr = hairBlond ? 0.93 : 0.10, hg = hairBlond ? 0.80 : 0.14,
               hb = hairBlond ? 0.30 : 0.40;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            if ((y + 0.5 - cy) < -0.30 * ay) c.paint(y, x, hr, hg, hb);

    // Eyes.
    const real exL = cx - id.eyeSpacing * ax * 0.5;
    const real exR = cx + id.eyeSpacing * ax * 0.5;
    const real ey = cy - 0.18 * ay;
    const real er = std::max(1.0, 0.11 * ax);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const real dl = std::hypot(x + 0.5 - exL, y + 0.5 - ey);
            const real dr = std::hypot(x + 0.5 - exR, y + 0.5 - ey);
            if (dl <= er || dr <= er) c.paint(y, x, 0.08, 0.08, 0.12);
        }

    // Glasses: frame rectangles around each eye plus a bridge.
    if (glasses) {
        const real gw = 0.22 * ax, gh = 0.17 * ax;
        auto frame = [&](real ecx) {
            const int x0 = static_cast<int>(std::floor(ecx - gw)),
                      x1 = static_cast<int>(std::ceil(ecx + gw));
            const int y0 = static_cast<int>(std::floor(ey - gh)),
                      y1 = static_cast<int>(std::ceil(ey + gh));
            for (int x = x0; x <= x1; ++x) {
                c.paint(y0, x, 0.04, 0.04, 0.04);
                c.paint(y1, x, 0.04, 0.04, 0.04);
            }
            for (int y = y0; y <= y1; ++y) {
                c.paint(y, x0, 0.04, 0.04, 0.04);
                c.paint(y, x1, 0.04, 0.04, 0.04);
            }
        };
        frame(exL);
        frame(exR);
        const int by = static_cast<int>(std::lround(ey));
        for (int x = static_cast<int>(exL + gw); x <= static_cast<int>(exR - gw); ++x)
            c.paint(by, x, 0.04, 0.04, 0.04);
    }

    // Nose.
    const int ny0 = static_cast<int>(std::lround(cy - 0.05 * ay));
    const int ny1 = static_cast<int>(std::lround(cy - 0.05 * ay + id.noseLength * size));
    for (int y = ny0; y <= ny1; ++y)
        c.paint(y, static_cast<int>(std::lround(cx)), sr * 0.65, sg * 0.65, sb * 0.65);

    // Mouth.
    const real mcx = cx, mcy = cy + 0.45 * ay;
    const real mw = 0.32 * ax, mh = mouthOpen ? std::max(1.5, 0.16 * ay) : 0.6;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const real u = (x + 0.5 - mcx) / mw, v = (y + 0.5 - mcy) / mh;
            if (u * u + v * v <= 1.0) {
                if (mouthOpen)
                    c.paint(y, x, 0.30, 0.05, 0.07);
                else
                    c.paint(y, x, 0.55, 0.18, 0.18);
            }
        }

    // Quantize to the 8-bit grid so in-memory samples match their PNGs.
    Sample s;
    s.identityId = spec.identityId;
    s.attributes = spec.attributes;
    s.image = Tensor({3, size, size});
    s.mask = Tensor({size, size});
    for (std::size_t i = 0; i < c.rgb.size(); ++i) {
        const int q = std::clamp(static_cast<int>(std::lround(c.rgb[i] * 255.0)), 0, 255);
        s.image[i] = q / 255.0;
    }
    for (std::size_t i = 0; i < c.mask.size(); ++i) s.mask[i] = c.mask[i];
    return s;
}

namespace {

img::Image8 toRgb8(const Tensor& image) {
    const int h = image.dim(1), w = image.dim(2);
    img::Image8 out{w, h, 3, {}};
    out.pixels.resize(3u * w * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < 3; ++ch)
                out.at(y, x, ch) = static_cast<std::uint8_t>(
                    std::lround(image[(static_cast<std::size_t>(ch) * h + y) * w + x] * 255.0));
    return out;
}

img::Image8 toGray8(const Tensor& mask) {
    const int h = mask.dim(0), w = mask.dim(1);
    img::Image8 out{w, h, 1, {}};
    out.pixels.resize(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(y, x, 0) = mask[static_cast<std::size_t>(y) * w + x] > 0.5 ? 255 : 0;
    return out;
}

}  // namespace

void generateDataset(const DatasetConfig& config) {
    if (config.numIdentities < 2) throw ConfigError("generateDataset: numIdentities must be >= 2");
    if (config.samplesPerIdentity < 1)
        throw ConfigError("generateDataset: samplesPerIdentity must be >= 1");
    if (config.size != 32 && config.size != 64)
        throw ConfigError("generateDataset: size must be 32 or 64");

    fs::create_directories(config.outDir);
    fs::create_directories(fs::path(config.outDir) / "images");
    fs::create_directories(fs::path(config.outDir) / "masks");

    std::ofstream manifest(fs::path(config.outDir) / "manifest.jsonl");
    if (!manifest) throw IoError("generateDataset: cannot write manifest in " + config.outDir);

    std::mt19937_64 rng(config.seed);
    for (int id = 0; id < config.numIdentities; ++id) {
        for (int j = 0; j < config.samplesPerIdentity; ++j) {
            SceneSpec spec;
            spec.identityId = id;
            for (int a = 0; a < kNumAttributes; ++a)
                spec.attributes[static_cast<std::size_t>(a)] = (rng() & 1ull) != 0;
            spec.backgroundSeed = rng();
            spec.renderSeed = rng();
            const bool test = u01(rng) < config.testFraction;

            const Sample s = renderSample(spec, config.size);
            const std::string stem = std::to_string(id) + "_" + std::to_string(j) + ".png";
            img::writePng((fs::path(config.outDir) / "images" / stem).string(), toRgb8(s.image));
            img::writePng((fs::path(config.outDir) / "masks" / stem).string(), toGray8(s.mask));

            json rec;
            rec["image"] = "images/" + stem;
            rec["mask"] = "masks/" + stem;
            rec["identity"] = id;
            json attrs;
            for (int a = 0; a < kNumAttributes; ++a)
                attrs[attributeNames()[static_cast<std::size_t>(a)]] =
                    spec.attributes[static_cast<std::size_t>(a)];
            rec["attributes"] = attrs;
            rec["split"] = test ? "test" : "train";
            rec["size"] = config.size;
            manifest << rec.dump() << "\n";
        }
    }
}

Dataset Dataset::load(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.jsonl");
    if (!in) throw IoError("Dataset::load: no manifest.jsonl in " + dir);
    Dataset ds;
    ds.rootDir_ = dir;
    std::string line;
    int index = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json rec = json::parse(line);
        ManifestRecord r;
        r.imagePath = rec.at("image").get<std::string>();
        r.maskPath = rec.at("mask").get<std::string>();
        r.identityId = rec.at("identity").get<int>();
        for (int a = 0; a < kNumAttributes; ++a)
            r.attributes[static_cast<std::size_t>(a)] =
                rec.at("attributes").at(attributeNames()[static_cast<std::size_t>(a)]).get<bool>();
        r.train = rec.at("split").get<std::string>() == "train";
        ds.size_ = rec.at("size").get<int>();
        ds.numIdentities_ = std::max(ds.numIdentities_, r.identityId + 1);
        (r.train ? ds.trainIndices_ : ds.testIndices_).push_back(index);
        ds.records_.push_back(std::move(r));
        ++index;
    }
    if (ds.records_.empty()) throw IoError("Dataset::load: empty manifest in " + dir);
    return ds;
}

Sample Dataset::loadSample(int index) const {
    const ManifestRecord& r = records_.at(static_cast<std::size_t>(index));
    const img::Image8 im = img::readPng((fs::path(rootDir_) / r.imagePath).string());
    const img::Image8 mk = img::readPng((fs::path(rootDir_) / r.maskPath).string());
    Sample s;
    s.identityId = r.identityId;
    s.attributes = r.attributes;
    s.image = Tensor({3, im.height, im.width});
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x)
            for (int ch = 0; ch < 3; ++ch)
                s.image[(static_cast<std::size_t>(ch) * im.height + y) * im.width + x] =
                    im.at(y, x, ch) / 255.0;
    s.mask = Tensor({mk.height, mk.width});
    for (int y = 0; y < mk.height; ++y)
        for (int x = 0; x < mk.width; ++x)
            s.mask[static_cast<std::size_t>(y) * mk.width + x] = mk.at(y, x, 0) > 127 ? 1.0 : 0.0;
    return s;
}

std::pair<int, int> Dataset::samplePair(const std::string& attribute,
                                        std::mt19937_64& rng) const {
    const int a = attributeIndex(attribute);
    std::vector<int> pos, neg;
    for (int i : trainIndices_) {
        const auto& r = records_[static_cast<std::size_t>(i)];
        (r.attributes[static_cast<std::size_t>(a)] ? pos : neg).push_back(i);
    }
    if (pos.empty() || neg.empty())
        throw ConfigError("samplePair: attribute " + attribute +
                          " lacks one polarity in the training split");
    const int x = pos[rng() % pos.size()];
    const int y = neg[rng() % neg.size()];
    return {x, y};
}

}  // namespace maae::data
