#include "irlad/cli.hpp"

int main(int argc, char** argv) { return irlad::cli::run(argc, argv); }
