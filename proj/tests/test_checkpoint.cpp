#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "rdl/checkpoint.hpp"
#include "rdl/errors.hpp"
#include "rdl/network.hpp"

using namespace rdl;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("rdl_test_" + name);
}

std::string read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("checkpoint round-trip is bit-exact") {
  Network net = Network::build({1, 10, 10},
                               {
                                   LayerSpec::conv(3, 3, 4),
                                   LayerSpec::relu(),
                                   LayerSpec::max_pool(2, 2, 2).with_tap("p"),
                                   LayerSpec::fully_connected(7),
                                   LayerSpec::dropout(0.25),
                                   LayerSpec::linear_readout(3),
                                   LayerSpec::softmax(),
                               },
                               Rng(31));
  const fs::path p1 = temp_file("ckpt1.rdlk");
  const fs::path p2 = temp_file("ckpt2.rdlk");
  save_checkpoint(p1, net);
  Network loaded = load_checkpoint(p1);

  CHECK(loaded.params_equal(net));
  CHECK(loaded.input_shape() == net.input_shape());
  CHECK(loaded.has_tap("p"));
  CHECK(loaded.layers()[4].spec.dropout_p == 0.25);

  // Saving the loaded network reproduces the bytes exactly.
  save_checkpoint(p2, loaded);
  CHECK(read_bytes(p1) == read_bytes(p2));
  fs::remove(p1);
  fs::remove(p2);
}

TEST_CASE("checkpoint loader rejects foreign or truncated files") {
  const fs::path p = temp_file("bad.rdlk");
  {
    std::ofstream os(p, std::ios::binary);
    os << "NOPE this is not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(p), IdxError);
  {
    std::ofstream os(p, std::ios::binary);
    os << "RDLK";  // header cut off
  }
  CHECK_THROWS_AS(load_checkpoint(p), IdxError);
  fs::remove(p);
  CHECK_THROWS_AS(load_checkpoint(p), IdxError);
}
