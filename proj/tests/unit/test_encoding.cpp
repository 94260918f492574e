#include "tomac/encoding.hpp"

#include "doctest.h"

#include <cmath>
#include <set>
#include <vector>

using namespace tomac::encoding;
using tomac::numerics::VectorXd;

TEST_SUITE("encoding") {

TEST_CASE("encode_time examples") {
  const VectorXd zero = encode_time(0, 8);
  for (int k = 0; k < 8; ++k) {
    CHECK(zero(k) == (k % 2 == 0 ? 0.0 : 1.0));
  }
  const VectorXd one = encode_time(1, 2);
  CHECK(one(0) == doctest::Approx(0.8414709848).epsilon(1e-9));
  CHECK(one(1) == doctest::Approx(0.5403023059).epsilon(1e-9));
  CHECK_THROWS_AS(encode_time(3, 5), std::invalid_argument);
  CHECK(encode_time(7, 0).size() == 0);
}

TEST_CASE("encode_time matches the sinusoid formula and stays bounded") {
  for (long t = 0; t <= 100; ++t) {
    const VectorXd f = encode_time(t, 8);
    for (int j = 0; j < 4; ++j) {
      const double angle = static_cast<double>(t) / std::pow(10000.0, 2.0 * j / 8.0);
      CHECK(f(2 * j) == doctest::Approx(std::sin(angle)).epsilon(1e-12));
      CHECK(f(2 * j + 1) == doctest::Approx(std::cos(angle)).epsilon(1e-12));
    }
    CHECK(f.cwiseAbs().maxCoeff() <= 1.0);
  }
}

TEST_CASE("encode_time is injective over the horizon") {
  for (int dim : {4, 8}) {
    std::vector<VectorXd> codes;
    for (long t = 0; t <= 100; ++t) {
      codes.push_back(encode_time(t, dim));
    }
    for (std::size_t a = 0; a < codes.size(); ++a) {
      for (std::size_t b = a + 1; b < codes.size(); ++b) {
        CHECK((codes[a] - codes[b]).cwiseAbs().maxCoeff() > 1e-6);
      }
    }
  }
}

TEST_CASE("macro-action tokens") {
  const EncodedToken a = encode_macro_action(2, 8, 0, 0, 8);
  const EncodedToken b = encode_macro_action(2, 8, 3, 3, 8);
  CHECK_FALSE(a == b);
  CHECK(a.size() == 8 + 16);

  const EncodedToken p0 = encode_macro_action(1, 8, 5, 0, 8);
  const EncodedToken p2 = encode_macro_action(1, 8, 5, 2, 8);
  CHECK(p0.base == p2.base);
  CHECK(p0.wall_time_code == p2.wall_time_code);
  CHECK(p0.progress_code != p2.progress_code);

  const EncodedToken bare = encode_macro_action(3, 8, 9, 4, 0);
  CHECK(bare.flatten() == VectorXd::Unit(8, 3));
  CHECK_THROWS_AS(encode_macro_action(1, 8, 2, 3, 8), std::invalid_argument);
}

TEST_CASE("macro-action tokens are injective over the exhaustive range") {
  std::set<std::vector<double>> seen;
  int count = 0;
  for (int a = 0; a < 4; ++a) {
    for (long t = 0; t <= 20; ++t) {
      for (long tm = 0; tm <= t; ++tm) {
        const VectorXd v = encode_macro_action(a, 4, t, tm, 8).flatten();
        seen.insert(std::vector<double>(v.data(), v.data() + v.size()));
        ++count;
      }
    }
  }
  CHECK(seen.size() == static_cast<std::size_t>(count));
}

TEST_CASE("macro-observation tokens") {
  VectorXd obs = VectorXd::Unit(5, 2);
  CHECK_FALSE(encode_macro_observation(obs, 4, 8) == encode_macro_observation(obs, 5, 8));
  const VectorXd z = encode_macro_observation(VectorXd::Zero(5), 0, 8).flatten();
  CHECK(z.head(5) == VectorXd::Zero(5));
  CHECK(z.tail(8) == encode_time(0, 8));
  for (int n : {1, 5, 9}) {
    CHECK(encode_macro_observation(VectorXd::Ones(n), 3, 8).size() == n + 8);
    CHECK(encode_macro_observation(VectorXd::Ones(n), 3, 8).progress_code.size() == 0);
  }
}

}  // TEST_SUITE
