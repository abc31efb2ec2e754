// Regenerates tests/fixtures/sparse_synthetic.csv:
//   make_sparse_fixture <out.csv> [seed]
// 256 samples of length 16, each a combination of 2 out of 8 unit-norm atoms.
#include <iostream>
#include <string>

#include "trim/csv.hpp"
#include "trim/dictionary.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_sparse_fixture <out.csv> [seed]\n";
    return 2;
  }
  const std::uint64_t seed = argc > 2 ? std::stoull(argv[2]) : 2024;
  trim::SeededRng rng(seed);
  const auto fx = trim::make_sparse_fixture(256, 16, 8, 2, rng);
  trim::write_csv_matrix(argv[1], fx.X);
  return 0;
}
