#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "feater/errors.hpp"
#include "feater/tensor.hpp"
#include "helpers.hpp"

using namespace feater;

TEST_CASE("tensor construction and invariants") {
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.0);

  CHECK_THROWS_AS(Tensor({2, 0, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);

  Tensor id = Tensor::identity(3);
  CHECK(id.at2(0, 0) == 1.0);
  CHECK(id.at2(0, 1) == 0.0);
  CHECK(Tensor::full({2, 2}, 7.5)[3] == 7.5);
}

TEST_CASE("tensor binary round trip") {
  RngStream rng(11);
  Tensor t = testutil::random_tensor({3, 4, 5}, rng, -100.0, 100.0);
  const auto path = std::filesystem::temp_directory_path() / "feater_test_tensor.ftr";
  t.save(path);
  Tensor back = Tensor::load(path);
  CHECK(back.shape() == t.shape());
  CHECK(testutil::bit_equal(back, t));
  std::filesystem::remove(path);
}

TEST_CASE("tensor load rejects bad files") {
  const auto path = std::filesystem::temp_directory_path() / "feater_test_bad.ftr";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE this is not a tensor";
  }
  CHECK_THROWS_AS(Tensor::load(path), IoError);
  CHECK_THROWS_AS(Tensor::load(path.parent_path() / "feater_no_such_file.ftr"), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("tensor file layout is little-endian with FTR1 magic") {
  Tensor t({1, 2}, {1.0, -2.0});
  const auto path = std::filesystem::temp_directory_path() / "feater_test_layout.ftr";
  t.save(path);
  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  REQUIRE(bytes.size() == 4 + 4 + 2 * 4 + 2 * 8);
  CHECK(bytes[0] == 'F');
  CHECK(bytes[1] == 'T');
  CHECK(bytes[2] == 'R');
  CHECK(bytes[3] == '1');
  CHECK(bytes[4] == 2);  // rank, low byte first
  CHECK(bytes[5] == 0);
  CHECK(bytes[8] == 1);   // extent 0
  CHECK(bytes[12] == 2);  // extent 1
  // 1.0 in IEEE-754 little-endian: 00 00 00 00 00 00 f0 3f
  CHECK(bytes[16 + 6] == 0xf0);
  CHECK(bytes[16 + 7] == 0x3f);
  std::filesystem::remove(path);
}
