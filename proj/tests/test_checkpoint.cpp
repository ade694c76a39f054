#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "odl/checkpoint.hpp"
#include "odl/errors.hpp"
#include "odl/rng.hpp"
#include "support.hpp"

using namespace odl;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// A trained state exercising both hash modes and a nonzero step counter.
ModelState trained_state(std::uint64_t seed, HashMode mode) {
  ModelConfig config;
  config.embedding_dim = 3;
  config.learning_rate = 0.1f;
  config.l2_reg = 0.01f;
  config.context_dim = 2;
  config.init_scale = 0.05f;
  config.seed = seed;
  config.user_hash = {17, mode, seed + 1, seed + 2};
  config.item_hash = {23, mode, seed + 3, seed + 4};
  ModelState state = init_model(config);
  const EventStream events = odltest::uniform_stream(2, 20, 2, seed);
  for (const Event& event : events) {
    sgd_step(state, event);
  }
  return state;
}

}  // namespace

TEST_CASE("save/load round trip is bitwise identical") {
  odltest::ScratchDir scratch("ckpt-roundtrip");
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const HashMode mode = seed % 2 == 0 ? HashMode::kSingle : HashMode::kDouble;
    const ModelState state = trained_state(seed, mode);
    const fs::path path = scratch.path() / ("state" + std::to_string(seed) + ".odlc");
    save_checkpoint(state, path);
    const ModelState loaded = load_checkpoint(path);
    CHECK(states_bitwise_equal(state, loaded));
    CHECK(loaded.step_count == state.step_count);
  }
}

TEST_CASE("file size matches the declared layout exactly") {
  odltest::ScratchDir scratch("ckpt-size");
  const ModelState state = trained_state(3, HashMode::kDouble);
  const fs::path path = scratch.path() / "state.odlc";
  save_checkpoint(state, path);
  // header + 4 * (1 + c + sum over sides of tables * buckets * dim)
  const std::uint64_t expected =
      kCheckpointHeaderBytes + 4 * (1 + 2 + (2 * 17 + 2 * 23) * 3);
  CHECK(fs::file_size(path) == expected);
  CHECK(checkpoint_file_bytes(state.config) == expected);
}

TEST_CASE("corruption is detected") {
  odltest::ScratchDir scratch("ckpt-corrupt");
  const ModelState state = trained_state(5, HashMode::kSingle);
  const fs::path path = scratch.path() / "state.odlc";
  save_checkpoint(state, path);
  const std::string original = read_bytes(path);

  SUBCASE("flipped payload byte fails the checksum") {
    std::string corrupted = original;
    corrupted[kCheckpointHeaderBytes + 5] ^= 0x01;
    write_bytes(path, corrupted);
    CHECK_THROWS_WITH_AS(load_checkpoint(path),
                         doctest::Contains("checksum"), DataError);
  }

  SUBCASE("flipped magic byte is not a checkpoint") {
    std::string corrupted = original;
    corrupted[0] ^= 0x40;
    write_bytes(path, corrupted);
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("magic"), DataError);
  }

  SUBCASE("truncated files are rejected, not half-loaded") {
    write_bytes(path, original.substr(0, original.size() - 7));
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("truncated"), DataError);
    write_bytes(path, original.substr(0, 40));  // even the header is cut short
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("truncated"), DataError);
  }

  SUBCASE("trailing garbage is rejected") {
    write_bytes(path, original + "extra");
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("size mismatch"), DataError);
  }

  SUBCASE("unsupported version is reported distinctly") {
    std::string corrupted = original;
    corrupted[4] = 0x0F;  // version 9999 little-endian
    corrupted[5] = 0x27;
    write_bytes(path, corrupted);
    CHECK_THROWS_WITH_AS(load_checkpoint(path),
                         doctest::Contains("unsupported version 9999"), DataError);
  }
}

TEST_CASE("non-finite parameters refuse to serialize") {
  odltest::ScratchDir scratch("ckpt-nan");
  ModelState state = trained_state(6, HashMode::kSingle);
  state.user_tables[0].values[1] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(save_checkpoint(state, scratch.path() / "bad.odlc"), NumericError);
  CHECK(!fs::exists(scratch.path() / "bad.odlc"));
}

TEST_CASE("missing files and unwritable targets raise IoError") {
  odltest::ScratchDir scratch("ckpt-io");
  CHECK_THROWS_AS(load_checkpoint(scratch.path() / "nope.odlc"), IoError);

  const ModelState state = trained_state(7, HashMode::kSingle);
  CHECK_THROWS_AS(save_checkpoint(state, scratch.path() / "missing-dir" / "x.odlc"), IoError);
  CHECK(!fs::exists(scratch.path() / "missing-dir"));
}

TEST_CASE("saves are atomic: failures never leave partial files behind") {
  odltest::ScratchDir scratch("ckpt-atomic");
  const ModelState state = trained_state(8, HashMode::kSingle);

  // Overwriting an existing checkpoint swaps in the new bytes completely.
  const fs::path path = scratch.path() / "state.odlc";
  save_checkpoint(state, path);
  const std::string first = read_bytes(path);
  ModelState advanced = state;
  sgd_step(advanced, odltest::uniform_stream(1, 1, 2, 9)[0]);
  save_checkpoint(advanced, path);
  const std::string second = read_bytes(path);
  CHECK(first != second);
  CHECK(states_bitwise_equal(load_checkpoint(path), advanced));
  CHECK(!fs::exists(fs::path(path.string() + ".tmp")));  // temp cleaned up

  // A rename that cannot succeed (target is a directory) leaves no temp file
  // and does not disturb the target.
  const fs::path dir_target = scratch.path() / "occupied";
  fs::create_directories(dir_target);
  CHECK_THROWS_AS(save_checkpoint(state, dir_target), IoError);
  CHECK(fs::is_directory(dir_target));
  CHECK(!fs::exists(fs::path(dir_target.string() + ".tmp")));
}


TEST_CASE("the on-disk byte layout is pinned") {
  // The annotated example from docs/checkpoint_format.md, byte for byte. If
  // this test breaks, the format changed and old checkpoints are unreadable.
  odltest::ScratchDir scratch("ckpt-golden");
  ModelConfig config;
  config.embedding_dim = 2;
  config.context_dim = 1;
  config.learning_rate = 0.1f;
  config.l2_reg = 0.0f;
  config.init_scale = 0.0f;
  config.seed = 7;
  config.user_hash = {3, HashMode::kSingle, 100, 101};
  config.item_hash = {2, HashMode::kSingle, 200, 201};
  ModelState state = init_model(config);
  state.bias = 0.25f;
  state.context_weights[0] = -1.0f;
  state.user_tables[0].values = {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f};
  state.item_tables[0].values = {0.5f, -0.5f, 0.0f, 1.5f};
  state.step_count = 42;

  const fs::path path = scratch.path() / "golden.odlc";
  save_checkpoint(state, path);
  const std::string bytes = read_bytes(path);
  REQUIRE(bytes.size() == 144);

  static const unsigned char kGolden[144] = {
      0x4f, 0x44, 0x4c, 0x43, 0x01, 0x00, 0x02, 0x00, 0x00, 0x00, 0x01, 0x00,
      0x00, 0x00, 0x00, 0x00, 0x03, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
      0x02, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x64, 0x00, 0x00, 0x00,
      0x00, 0x00, 0x00, 0x00, 0x65, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
      0xc8, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xc9, 0x00, 0x00, 0x00,
      0x00, 0x00, 0x00, 0x00, 0xcd, 0xcc, 0xcc, 0x3d, 0x00, 0x00, 0x00, 0x00,
      0x00, 0x00, 0x00, 0x00, 0x07, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
      0x2a, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x31, 0xd2, 0x6c, 0x9b,
      0x00, 0x00, 0x80, 0x3e, 0x00, 0x00, 0x80, 0xbf, 0x00, 0x00, 0x80, 0x3f,
      0x00, 0x00, 0x00, 0x40, 0x00, 0x00, 0x40, 0x40, 0x00, 0x00, 0x80, 0x40,
      0x00, 0x00, 0xa0, 0x40, 0x00, 0x00, 0xc0, 0x40, 0x00, 0x00, 0x00, 0x3f,
      0x00, 0x00, 0x00, 0xbf, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xc0, 0x3f};
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    CAPTURE(i);
    REQUIRE(static_cast<unsigned char>(bytes[i]) == kGolden[i]);
  }
}

TEST_CASE("resume equivalence holds at every split day") {
  odltest::ScratchDir scratch("ckpt-resume");
  const EventStream events = odltest::uniform_stream(5, 30, 2, 11);
  ModelConfig config = odltest::small_model_config(2, 13);
  config.user_hash.mode = HashMode::kDouble;
  config.user_hash.seed_b = config.user_hash.seed_a + 1;
  for (std::uint32_t split = 1; split <= 5; ++split) {
    CAPTURE(split);
    CHECK(resume_equivalence_check(config, events, split, scratch.path()));
  }
}

TEST_CASE("different hash seeds yield different models") {
  const EventStream events = odltest::uniform_stream(3, 30, 0, 17);
  ModelConfig a = odltest::small_model_config(0, 21);
  ModelConfig b = a;
  b.user_hash.seed_a += 1;

  ModelState state_a = init_model(a);
  ModelState state_b = init_model(b);
  for (const Event& event : events) {
    sgd_step(state_a, event);
    sgd_step(state_b, event);
  }
  CHECK(!states_bitwise_equal(state_a, state_b));
}
