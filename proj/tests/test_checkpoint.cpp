#include "facet/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <vector>

#include <gtest/gtest.h>

namespace fs = std::filesystem;
using facet::Variant;

namespace {

class CheckpointFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / "facet_ckpt_test";
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::vector<char> slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CheckpointFiles, SaveLoadSaveIsBitIdentical) {
  for (auto variant : {Variant::full, Variant::only_re, Variant::only_lp}) {
    auto model = facet::init_model<float>(variant, 12, 3, 4, 2, 0.4f, 99);
    std::string first = path("m1.fctw");
    facet::save_checkpoint(model, first);
    auto loaded = facet::load_model(first);
    EXPECT_EQ(loaded.variant, variant);
    EXPECT_EQ(loaded.dim, model.dim);
    EXPECT_EQ(loaded.heads, model.heads);
    EXPECT_EQ(loaded.head_dim, model.head_dim);
    EXPECT_EQ(loaded.depth, model.depth);

    auto expect = model.named_parameters();
    auto got = loaded.named_parameters();
    ASSERT_EQ(expect.size(), got.size());
    for (std::size_t i = 0; i < expect.size(); ++i) {
      EXPECT_EQ(expect[i].name, got[i].name);
      EXPECT_EQ(expect[i].tensor->values(), got[i].tensor->values());
    }

    std::string second = path("m2.fctw");
    facet::save_checkpoint(loaded, second);
    EXPECT_EQ(slurp(first), slurp(second));
  }
}

TEST_F(CheckpointFiles, NaiveCheckpointIsHeaderOnly) {
  facet::FaceTModel naive;
  naive.variant = Variant::naive;
  facet::save_checkpoint(naive, path("naive.fctw"));
  // magic + version + variant = 12 bytes
  EXPECT_EQ(fs::file_size(path("naive.fctw")), 12u);
  auto loaded = facet::load_model(path("naive.fctw"));
  EXPECT_EQ(loaded.variant, Variant::naive);
}

TEST_F(CheckpointFiles, WrongMagicIsFormatError) {
  std::ofstream out(path("bad.fctw"), std::ios::binary);
  out.write("NOPE", 4);
  std::uint32_t version = 1, variant = 0;
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&variant), 4);
  out.close();
  EXPECT_THROW(facet::read_checkpoint(path("bad.fctw")), facet::FormatError);
}

TEST_F(CheckpointFiles, TruncatedTensorPayloadIsFormatError) {
  auto model = facet::init_model<float>(Variant::only_lp, 8, 2, 4, 1, 0.0f, 7);
  facet::save_checkpoint(model, path("full.fctw"));
  auto bytes = slurp(path("full.fctw"));
  std::ofstream out(path("cut.fctw"), std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 5));
  out.close();
  EXPECT_THROW(facet::read_checkpoint(path("cut.fctw")), facet::FormatError);
}

TEST_F(CheckpointFiles, MissingTensorIsFormatError) {
  auto model = facet::init_model<float>(Variant::only_lp, 8, 2, 4, 1, 0.0f, 7);
  facet::save_checkpoint(model, path("m.fctw"));
  auto ckpt = facet::read_checkpoint(path("m.fctw"));
  ASSERT_FALSE(ckpt.entries.empty());

  // rewrite without the classifier slope
  std::ofstream out(path("partial.fctw"), std::ios::binary | std::ios::trunc);
  out.write("FCTW", 4);
  std::uint32_t version = 1, variant = static_cast<std::uint32_t>(ckpt.variant);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&variant), 4);
  for (const auto& entry : ckpt.entries) {
    if (entry.name == "cls.prelu_slope") continue;
    std::uint32_t len = static_cast<std::uint32_t>(entry.name.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(entry.name.data(), len);
    std::uint32_t rank = static_cast<std::uint32_t>(entry.dims.size());
    out.write(reinterpret_cast<const char*>(&rank), 4);
    for (auto d : entry.dims) out.write(reinterpret_cast<const char*>(&d), 4);
    out.write(reinterpret_cast<const char*>(entry.values.data()),
              static_cast<std::streamsize>(entry.values.size() * 4));
  }
  out.close();
  EXPECT_THROW(facet::load_model(path("partial.fctw")), facet::FormatError);
}

TEST_F(CheckpointFiles, EntriesPreserveNamedParameterOrder) {
  auto model = facet::init_model<float>(Variant::full, 8, 2, 4, 2, 0.0f, 13);
  facet::save_checkpoint(model, path("ordered.fctw"));
  auto ckpt = facet::read_checkpoint(path("ordered.fctw"));
  auto params = model.named_parameters();
  ASSERT_EQ(ckpt.entries.size(), params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    EXPECT_EQ(ckpt.entries[i].name, params[i].name);
  }
}
