#include "clip/cli.hpp"

int main(int argc, char** argv) { return clip::cli::run(argc, argv); }
