// Writes a small synthetic train/valid/test dataset for the CLI tests.

#include <cstdlib>
#include <iostream>

#include "support/synth.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_synthetic_dataset <dir>\n";
    return 2;
  }
  herc::synth::Shape shape;
  shape.entities = 30;
  shape.train = 400;
  shape.valid = 40;
  shape.test = 40;
  herc::synth::write(herc::synth::generate(shape, 7), argv[1]);
  return 0;
}
