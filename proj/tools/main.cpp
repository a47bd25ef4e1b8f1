#include "km/cli.hpp"

int main(int argc, char** argv) { return km::cli::run(argc, argv); }
