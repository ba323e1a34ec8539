#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <vector>

#include "vle2/model_io.hpp"

using namespace vle2;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() / ("vle2_ckpt_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

std::string slurp(const std::string& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

ARModel tiny_ar(uint64_t seed) {
  ARConfig cfg;
  cfg.text_vocab = 8;
  cfg.group_size = 2;
  cfg.d = 16;
  cfg.blocks = 1;
  cfg.heads = 2;
  cfg.max_text_pos = 8;
  cfg.max_code_pos = 16;
  ARModel m;
  m.init(cfg, seed);
  return m;
}

}  // namespace

TEST_CASE("save -> load -> save produces identical bytes") {
  TempDir td;
  ARModel m = tiny_ar(5);
  save_ar(td.path("a.ckpt"), m, 123, "cafebabe");
  ARModel loaded = load_ar(td.path("a.ckpt"));
  CHECK(loaded.cfg.group_size == 2);
  save_ar(td.path("b.ckpt"), loaded, 123, "cafebabe");
  CHECK(slurp(td.path("a.ckpt")) == slurp(td.path("b.ckpt")));
  // params survive bit-exactly
  CHECK(loaded.wc.value.data == m.wc.value.data);
  CHECK(loaded.stack.blocks[0].wq.w.value.data == m.stack.blocks[0].wq.w.value.data);
}

TEST_CASE("a corrupted payload byte fails the checksum") {
  TempDir td;
  ARModel m = tiny_ar(6);
  save_ar(td.path("c.ckpt"), m, 1, "x");
  std::string bytes = slurp(td.path("c.ckpt"));
  bytes[bytes.size() - 7] ^= 0x40;  // flip one payload bit
  std::ofstream(td.path("c.ckpt"), std::ios::binary) << bytes;
  CHECK_THROWS_WITH_AS(load_checkpoint(td.path("c.ckpt")),
                       "load_checkpoint: payload checksum mismatch", std::runtime_error);
}

TEST_CASE("model kind mismatch is reported") {
  TempDir td;
  ARModel m = tiny_ar(7);
  save_ar(td.path("kind.ckpt"), m, 1, "x");
  CHECK_THROWS_WITH_AS(load_nar(td.path("kind.ckpt")),
                       "checkpoint: model kind mismatch (expected NAR, found AR)",
                       std::runtime_error);
}

TEST_CASE("bad magic, version drift, and truncation are hard errors") {
  TempDir td;
  ARModel m = tiny_ar(8);
  save_ar(td.path("v.ckpt"), m, 1, "x");
  std::string bytes = slurp(td.path("v.ckpt"));

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::ofstream(td.path("m.ckpt"), std::ios::binary) << bad_magic;
  CHECK_THROWS_AS(load_checkpoint(td.path("m.ckpt")), std::runtime_error);

  std::string bad_version = bytes;
  bad_version[4] = 2;  // little-endian version field
  std::ofstream(td.path("v2.ckpt"), std::ios::binary) << bad_version;
  CHECK_THROWS_WITH_AS(load_checkpoint(td.path("v2.ckpt")),
                       "load_checkpoint: format version 2 unsupported (expected 1); no silent "
                       "migration",
                       std::runtime_error);

  std::ofstream(td.path("t.ckpt"), std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  CHECK_THROWS_AS(load_checkpoint(td.path("t.ckpt")), std::runtime_error);

  CHECK_THROWS_AS(load_checkpoint(td.path("missing.ckpt")), std::runtime_error);
}

TEST_CASE("no partial files are left behind on save") {
  TempDir td;
  ARModel m = tiny_ar(9);
  save_ar(td.path("atomic.ckpt"), m, 1, "x");
  CHECK(fs::exists(td.path("atomic.ckpt")));
  CHECK(!fs::exists(td.path("atomic.ckpt") + ".tmp"));
}
