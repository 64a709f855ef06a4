#include <filesystem>
#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "wzjscc/checkpoint.hpp"
#include "wzjscc/errors.hpp"

using namespace wzjscc;
using namespace wzjscc::codec;
namespace fs = std::filesystem;

namespace {

ModelConfig toy(VariantKind v) {
    ModelConfig c;
    c.variant = v;
    c.rho = 1.0 / 8.0;
    c.base_width = 8;
    c.image = {3, 16, 32};
    c.seed = 4;
    return c;
}

fs::path temp_path(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "wzjscc_test_checkpoint";
    fs::create_directories(dir);
    return dir / name;
}

std::vector<double> reconstruct(const VariantModel& m) {
    nn::NoGradGuard guard;
    const auto x = nn::Tensor::constant(nn::Shape{1, 3, 16, 32}, oracle::uniform(3 * 16 * 32, 0, 1, 5));
    const auto s = nn::Tensor::constant(nn::Shape{1, 3, 16, 32}, oracle::uniform(3 * 16 * 32, 0, 1, 6));
    const auto out = simulate_link(m, x, s, std::vector<double>{0.5}, std::vector<std::uint64_t>{3});
    return {out.reconstruction.data().begin(), out.reconstruction.data().end()};
}

} // namespace

TEST(Checkpoint, RoundTripReproducesOutputsBitForBit) {
    for (VariantKind v : {VariantKind::point2point, VariantKind::wz, VariantKind::wz_sm, VariantKind::cond}) {
        const VariantModel m = build_model(toy(v));
        const fs::path path = temp_path(std::string(to_string(v)) + ".ckpt");
        save_checkpoint(path, m);
        const VariantModel back = load_checkpoint(path);
        EXPECT_EQ(back.config(), m.config());
        EXPECT_EQ(back.count_parameters(), m.count_parameters());
        EXPECT_EQ(reconstruct(back), reconstruct(m)) << to_string(v);
    }
}

TEST(Checkpoint, WzSmAliasSurvivesLoading) {
    const fs::path path = temp_path("sm.ckpt");
    save_checkpoint(path, build_model(toy(VariantKind::wz_sm)));
    const VariantModel back = load_checkpoint(path);
    EXPECT_EQ(back.receiver_encoder(), &back.transmit_encoder());
}

TEST(Checkpoint, InspectListsEveryArray) {
    const VariantModel m = build_model(toy(VariantKind::cond));
    const fs::path path = temp_path("cond.ckpt");
    save_checkpoint(path, m);
    const auto info = inspect_checkpoint(path);
    EXPECT_EQ(info.version, kCheckpointVersion);
    EXPECT_EQ(info.config, m.config());
    EXPECT_EQ(info.parameters.size(), m.parameters().size());
    EXPECT_EQ(info.total_parameters, m.count_parameters());
}

TEST(Checkpoint, Errors) {
    EXPECT_THROW(load_checkpoint(temp_path("does-not-exist.ckpt")), MissingResource);

    const fs::path junk = temp_path("junk.ckpt");
    std::ofstream(junk) << "not a checkpoint at all";
    EXPECT_THROW(load_checkpoint(junk), ConfigError);

    const fs::path good = temp_path("good.ckpt");
    save_checkpoint(good, build_model(toy(VariantKind::wz)));
    const auto size = fs::file_size(good);
    const fs::path truncated = temp_path("truncated.ckpt");
    fs::copy_file(good, truncated, fs::copy_options::overwrite_existing);
    fs::resize_file(truncated, size - 100);
    EXPECT_THROW(load_checkpoint(truncated), ConfigError);

    ModelConfig other = toy(VariantKind::wz);
    other.base_width = 16;
    EXPECT_THROW(load_checkpoint(good, other), ConfigError);
    EXPECT_NO_THROW(load_checkpoint(good, toy(VariantKind::wz)));
}
