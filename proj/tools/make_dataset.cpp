// Writes a synthetic labeled exposure dataset to stdout.
//   make_dataset N SEED [beta0 beta1 beta2 beta3]

#include <cstdlib>
#include <iostream>

#include "epitrace/irls.hpp"

int main(int argc, char** argv) {
  using namespace epitrace::health;
  if (argc != 3 && argc != 7) {
    std::cerr << "usage: make_dataset N SEED [beta0 beta1 beta2 beta3]\n";
    return 1;
  }
  ModelParams truth;
  if (argc == 7) {
    truth.beta0 = std::strtod(argv[3], nullptr);
    truth.beta1 = std::strtod(argv[4], nullptr);
    truth.beta2 = std::strtod(argv[5], nullptr);
    truth.beta3 = std::strtod(argv[6], nullptr);
  }
  const auto data = make_synthetic_dataset(truth, std::strtoull(argv[1], nullptr, 10), std::strtoull(argv[2], nullptr, 10));
  write_dataset(std::cout, data);
  return 0;
}
