#include <cstring>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "sprx/checkpoint.hpp"
#include "sprx/dataset.hpp"

using namespace sprx;
namespace fs = std::filesystem;

namespace {

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("sprx_ckpt_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Checkpoint sample(std::uint64_t seed = 1) const {
    Checkpoint c;
    c.model.filters = 4;
    c.model.blocks = 2;
    c.model.lif.learnable_beta = true;
    Rng rng(seed);
    c.params = init_params(c.model, rng);
    c.meta = {{"step", 17}, {"note", "x"}};
    c.state["adam.m/head.conv.bias"] = Tensor::from({2}, {real(0.25), real(-1e-30)});
    return c;
  }

  fs::path dir_;
};

std::vector<char> slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST_F(CheckpointTest, RoundTripIsBitExact) {
  const Checkpoint c = sample();
  save_checkpoint(dir_ / "a.bin", c);
  const Checkpoint r = load_checkpoint(dir_ / "a.bin");
  EXPECT_EQ(to_json(r.model), to_json(c.model));
  EXPECT_EQ(r.meta, c.meta);
  ASSERT_EQ(r.params.size(), c.params.size());
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    const auto& [name, t] = c.params.entries()[i];
    const auto& [rname, rt] = r.params.entries()[i];
    EXPECT_EQ(rname, name);
    ASSERT_EQ(rt.shape(), t.shape());
    EXPECT_EQ(std::memcmp(rt.data().data(), t.data().data(), t.numel() * sizeof(real)), 0) << name;
    EXPECT_TRUE(rt.requires_grad());
  }
  ASSERT_EQ(r.state.size(), 1u);
  EXPECT_EQ(r.state.at("adam.m/head.conv.bias")[1], real(-1e-30));

  save_checkpoint(dir_ / "b.bin", r);
  EXPECT_EQ(slurp(dir_ / "a.bin"), slurp(dir_ / "b.bin"));
}

TEST_F(CheckpointTest, ReloadedModelGivesIdenticalOutputs) {
  const Checkpoint c = sample(3);
  save_checkpoint(dir_ / "m.bin", c);
  const Checkpoint r = load_checkpoint(dir_ / "m.bin");
  GridConfig g;
  Rng rng(4);
  const auto s = draw_slot(g, LinkRanges{}, rng);
  const Tensor x = make_input({&s.received});
  const auto a = forward(c.model, c.params, g, x), b = forward(r.model, r.params, g, x);
  for (std::size_t i = 0; i < a.probs.numel(); ++i) ASSERT_EQ(a.probs[i], b.probs[i]);
}

TEST_F(CheckpointTest, TruncatedFileFails) {
  save_checkpoint(dir_ / "t.bin", sample());
  auto bytes = slurp(dir_ / "t.bin");
  for (std::size_t keep : {std::size_t(4), std::size_t(20), bytes.size() / 2, bytes.size() - 1}) {
    std::ofstream(dir_ / "cut.bin", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(keep));
    EXPECT_THROW(load_checkpoint(dir_ / "cut.bin"), CheckpointError) << keep;
  }
}

TEST_F(CheckpointTest, BadMagicAndMissingFile) {
  std::ofstream(dir_ / "junk.bin") << "definitely not a checkpoint";
  EXPECT_THROW(load_checkpoint(dir_ / "junk.bin"), CheckpointError);
  EXPECT_THROW(load_checkpoint(dir_ / "absent.bin"), CheckpointError);
}

TEST_F(CheckpointTest, TrailingBytesFail) {
  save_checkpoint(dir_ / "x.bin", sample());
  std::ofstream(dir_ / "x.bin", std::ios::binary | std::ios::app) << 'z';
  EXPECT_THROW(load_checkpoint(dir_ / "x.bin"), CheckpointError);
}

TEST_F(CheckpointTest, MismatchedConfigNamesKey) {
  const Checkpoint c = sample();
  save_checkpoint(dir_ / "c.bin", c);
  ModelConfig other = c.model;
  other.filters = 8;
  try {
    load_checkpoint(dir_ / "c.bin", other);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("model.filters"), std::string::npos) << e.what();
  }
  EXPECT_NO_THROW(load_checkpoint(dir_ / "c.bin", c.model));
}

TEST_F(CheckpointTest, ParamsNotMatchingConfigFail) {
  Checkpoint c = sample();
  Checkpoint wrong = c;
  wrong.model.filters = 5;
  save_checkpoint(dir_ / "w.bin", wrong);
  EXPECT_THROW(load_checkpoint(dir_ / "w.bin"), CheckpointError);
}

TEST_F(CheckpointTest, SaveLeavesNoTemporaries) {
  save_checkpoint(dir_ / "s.bin", sample());
  save_checkpoint(dir_ / "s.bin", sample(2));
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir_)) ++files;
  EXPECT_EQ(files, 1u);
}
