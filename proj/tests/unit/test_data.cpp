#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "wzjscc/data.hpp"
#include "wzjscc/errors.hpp"

using namespace wzjscc;
using namespace wzjscc::data;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "wzjscc_test_data" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RgbImage gradient_rgb(int h, int w) {
    RgbImage img{h, w, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w * 3)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                img.pixels[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
                    static_cast<std::uint8_t>((x * 7 + y * 3 + c * 50) % 256);
            }
        }
    }
    return img;
}

std::vector<double> flatten(const std::vector<StereoPair>& pairs, bool side) {
    std::vector<double> out;
    for (const auto& p : pairs) {
        const auto px = side ? p.x_side.pixels() : p.x.pixels();
        out.insert(out.end(), px.begin(), px.end());
    }
    return out;
}

} // namespace

TEST(KittiCrop, CentredWindowOffsets) {
    const CropWindow w = kitti_crop_window(375, 1242);
    EXPECT_EQ(w.row, 2);
    EXPECT_EQ(w.row + w.rows, 372);
    EXPECT_EQ(w.col, 251);
    EXPECT_EQ(w.col + w.cols, 991);
    const CropWindow odd = kitti_crop_window(376, 1241);
    EXPECT_EQ(odd.row, 3);
    EXPECT_EQ(odd.col, 250);
    EXPECT_THROW(kitti_crop_window(300, 1242), InvalidArgument);
}

TEST(AreaResample, IntegerFactorIsBlockMean) {
    const ImageTensor img(1, 8, 12, oracle::uniform(96, 0, 1, 1));
    const ImageTensor out = area_resample(img, 4, 6);
    const std::vector<double> plane(img.pixels().begin(), img.pixels().end());
    const auto ref = oracle::block_mean(plane, 8, 12, 2);
    for (std::size_t i = 0; i < ref.size(); ++i) {
        EXPECT_NEAR(out.pixels()[i], ref[i], 1e-14);
    }
}

TEST(AreaResample, FractionalFactorPreservesMeanAndConstants) {
    const ImageTensor img(3, 370, 740, oracle::uniform(3 * 370 * 740, 0, 1, 2));
    const ImageTensor out = area_resample(img, 128, 256);
    ASSERT_EQ(out.height(), 128);
    ASSERT_EQ(out.width(), 256);
    EXPECT_NEAR(oracle::mean({out.pixels().begin(), out.pixels().end()}),
                oracle::mean({img.pixels().begin(), img.pixels().end()}), 1e-12);
    const ImageTensor flat(3, 37, 50, std::vector<double>(3 * 37 * 50, 0.25));
    const ImageTensor small = area_resample(flat, 16, 32);
    for (double v : small.pixels()) {
        EXPECT_NEAR(v, 0.25, 1e-14);
    }
}

TEST(Preprocess, KittiAndCityscapeShapes) {
    const ImageTensor k = preprocess_kitti(gradient_rgb(375, 1242));
    EXPECT_EQ(k.channels(), 3);
    EXPECT_EQ(k.height(), 128);
    EXPECT_EQ(k.width(), 256);
    EXPECT_TRUE(k.in_unit_range());
    const ImageTensor c = preprocess_cityscape(gradient_rgb(256, 512));
    EXPECT_EQ(c.height(), 128);
    EXPECT_EQ(c.width(), 256);
    RgbImage gray{256, 512, 1, std::vector<std::uint8_t>(256 * 512)};
    EXPECT_THROW(preprocess_cityscape(gray), InvalidArgument);
    EXPECT_THROW(preprocess_kitti(gray), InvalidArgument);
}

TEST(Preprocess, KittiCropSelectsTheCentre) {
    // Mark everything outside the expected window; none of it may leak in.
    RgbImage img{375, 1242, 3, std::vector<std::uint8_t>(375 * 1242 * 3, 255)};
    for (int y = 2; y < 372; ++y) {
        for (int x = 251; x < 991; ++x) {
            for (int c = 0; c < 3; ++c) {
                img.pixels[(static_cast<std::size_t>(y) * 1242 + x) * 3 + c] = 0;
            }
        }
    }
    const ImageTensor out = preprocess_kitti(img);
    for (double v : out.pixels()) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(ImageIo, PngAndPpmRoundTrip) {
    const fs::path dir = fresh_dir("io");
    const RgbImage img = gradient_rgb(20, 30);
    write_png(dir / "a.png", img);
    const RgbImage back = read_image(dir / "a.png");
    EXPECT_EQ(back.height, 20);
    EXPECT_EQ(back.width, 30);
    EXPECT_EQ(back.channels, 3);
    EXPECT_EQ(back.pixels, img.pixels);

    {
        std::ofstream ppm(dir / "b.ppm", std::ios::binary);
        ppm << "P6\n# comment\n30 20\n255\n";
        ppm.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    }
    EXPECT_EQ(read_image(dir / "b.ppm").pixels, img.pixels);
    EXPECT_THROW(read_image(dir / "missing.png"), MissingResource);
}

TEST(ImageIo, EightBitConversionRoundTrip) {
    const RgbImage img = gradient_rgb(4, 5);
    EXPECT_EQ(to_rgb8(from_rgb8(img)).pixels, img.pixels);
}

TEST(Synthetic, DeterministicAndInRange) {
    SyntheticConfig cfg;
    cfg.seed = 5;
    const auto a = generate_synthetic(cfg);
    const auto b = generate_synthetic(cfg);
    ASSERT_EQ(a.size(), cfg.counts.train + cfg.counts.val + cfg.counts.test);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].x, b[i].x);
        EXPECT_EQ(a[i].x_side, b[i].x_side);
        EXPECT_TRUE(a[i].x.in_unit_range());
        EXPECT_TRUE(a[i].x_side.in_unit_range());
        EXPECT_NO_THROW(a[i].x.validate_for_codec());
    }
    cfg.seed = 6;
    EXPECT_NE(generate_synthetic(cfg)[0].x, a[0].x);
}

TEST(Synthetic, SplitsAreDisjointSlicesOfOneStream) {
    SyntheticConfig cfg;
    const auto all = generate_synthetic(cfg);
    const auto val = generate_synthetic(cfg, Split::val);
    ASSERT_EQ(val.size(), cfg.counts.val);
    EXPECT_EQ(val[0].pair_id, all[cfg.counts.train].pair_id);
    EXPECT_EQ(val[0].x, all[cfg.counts.train].x);
}

TEST(Synthetic, SourceIsTheSameInEveryMode) {
    SyntheticConfig cfg;
    const auto noise = synthesize_pair(cfg, 3);
    cfg.mode = CorrelationMode::independent;
    const auto indep = synthesize_pair(cfg, 3);
    cfg.mode = CorrelationMode::shift;
    const auto shift = synthesize_pair(cfg, 3);
    EXPECT_EQ(noise.x, indep.x);
    EXPECT_EQ(noise.x, shift.x);
}

TEST(Synthetic, CorrelationFallsWithNoise) {
    SyntheticConfig cfg;
    cfg.counts = {16, 0, 0};
    double previous = 1.0;
    for (double sd : {0.0, 0.05, 0.1, 0.2, 0.4}) {
        cfg.noise_std = sd;
        const auto pairs = generate_synthetic(cfg, Split::train);
        const double r = pearson(flatten(pairs, false), flatten(pairs, true));
        EXPECT_LE(r, previous + 1e-12) << sd;
        previous = r;
    }
    EXPECT_LT(previous, 0.9);
}

TEST(Synthetic, IndependentModeIsUncorrelated) {
    SyntheticConfig cfg;
    cfg.mode = CorrelationMode::independent;
    cfg.height = 64;
    cfg.width = 64;
    cfg.counts = {10, 0, 0};
    const auto pairs = generate_synthetic(cfg, Split::train);
    const auto a = flatten(pairs, false);
    ASSERT_GE(a.size(), 100'000u);
    EXPECT_LT(std::abs(pearson(a, flatten(pairs, true))), 0.05);
}

TEST(Synthetic, ShiftModeTranslatesWithEdgeReplication) {
    SyntheticConfig cfg;
    cfg.mode = CorrelationMode::shift;
    cfg.shift_px = 3;
    const auto p = synthesize_pair(cfg, 0);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < cfg.height; ++y) {
            for (int x = 0; x < cfg.width; ++x) {
                EXPECT_EQ(p.x_side.at(c, y, x), p.x.at(c, y, std::max(0, x - 3)));
            }
        }
    }
}

TEST(Manifest, RoundTripAndValidation) {
    const fs::path dir = fresh_dir("manifest");
    const std::vector<ManifestEntry> entries{{"a", "l/a.png", "r/a.png", Split::train},
                                             {"b", "l/b.png", "r/b.png", Split::test}};
    write_manifest(dir / "m.tsv", entries);
    const auto back = read_manifest(dir / "m.tsv");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].pair_id, "b");
    EXPECT_EQ(back[1].right, fs::path("r/b.png"));
    EXPECT_EQ(back[1].split, Split::test);

    std::ofstream(dir / "bad.tsv") << "a\tonly-two\n";
    EXPECT_THROW(read_manifest(dir / "bad.tsv"), ConfigError);
    EXPECT_THROW(read_manifest(dir / "none.tsv"), MissingResource);
}

TEST(LoadSplit, ExportedSyntheticLoadsAsARealDataset) {
    const fs::path dir = fresh_dir("export");
    SyntheticConfig cfg;
    cfg.counts = {3, 1, 2};
    export_synthetic(cfg, dir);
    DatasetSpec spec = DatasetSpec::cityscape(dir);
    spec.sizes = cfg.counts;
    spec.height = cfg.height;
    spec.width = cfg.width;
    const auto test = load_split(spec, Split::test);
    const auto ref = generate_synthetic(cfg, Split::test);
    ASSERT_EQ(test.size(), 2u);
    for (std::size_t i = 0; i < test.size(); ++i) {
        EXPECT_EQ(test[i].pair_id, ref[i].pair_id);
        // 8-bit quantization is the only loss.
        for (std::size_t j = 0; j < ref[i].x.size(); ++j) {
            EXPECT_NEAR(test[i].x.pixels()[j], ref[i].x.pixels()[j], 0.5 / 255.0 + 1e-12);
        }
    }
}

TEST(LoadSplit, MissingFilesAreListedByPairId) {
    const fs::path dir = fresh_dir("missing");
    SyntheticConfig cfg;
    cfg.counts = {3, 1, 1};
    export_synthetic(cfg, dir);
    fs::remove(dir / "left" / "synthetic-000001.png");
    fs::remove(dir / "right" / "synthetic-000002.png");
    DatasetSpec spec = DatasetSpec::kittistereo(dir);
    spec.sizes = cfg.counts;
    try {
        load_split(spec, Split::train);
        FAIL() << "expected MissingResource";
    } catch (const MissingResource& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("synthetic-000001"), std::string::npos) << msg;
        EXPECT_NE(msg.find("synthetic-000002"), std::string::npos) << msg;
        EXPECT_EQ(msg.find("synthetic-000000"), std::string::npos) << msg;
    }
}

TEST(LoadSplit, CountsAndRootsAreChecked) {
    const fs::path dir = fresh_dir("counts");
    SyntheticConfig cfg;
    cfg.counts = {2, 1, 1};
    export_synthetic(cfg, dir);
    DatasetSpec spec = DatasetSpec::cityscape(dir);
    spec.height = cfg.height;
    spec.width = cfg.width;
    EXPECT_THROW(load_split(spec, Split::train), MissingResource);
    EXPECT_THROW(load_split(DatasetSpec::cityscape(dir / "nowhere"), Split::train), MissingResource);

    std::ofstream(dir / "manifest.tsv", std::ios::app) << "synthetic-000000\tleft/x.png\tright/x.png\ttest\n";
    spec.sizes = cfg.counts;
    EXPECT_THROW(load_split(spec, Split::train), ConfigError);
}

TEST(DatasetSpec, PaperSplitSizesAndJson) {
    EXPECT_EQ(DatasetSpec::cityscape("x").sizes, (SplitSizes{2975, 500, 1525}));
    EXPECT_EQ(DatasetSpec::kittistereo("x").sizes, (SplitSizes{1576, 790, 790}));
    SyntheticConfig cfg;
    cfg.mode = CorrelationMode::shift;
    cfg.counts = {5, 6, 7};
    const DatasetSpec spec = DatasetSpec::synthetic_from(cfg);
    const DatasetSpec back = nlohmann::json(spec).get<DatasetSpec>();
    EXPECT_EQ(back.synthetic, cfg);
    EXPECT_EQ(back.sizes, cfg.counts);
    EXPECT_EQ(back.height, cfg.height);
    const auto kitti = nlohmann::json::parse(R"({"name":"kittistereo","root":"/data/kitti"})").get<DatasetSpec>();
    EXPECT_EQ(kitti.sizes, kKittiStereoSplits);
    EXPECT_EQ(kitti.height, 128);
    EXPECT_THROW(parse_dataset_name("imagenet"), ConfigError);
}
