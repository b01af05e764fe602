#include "okh/cli.hpp"

int main(int argc, char** argv) { return okh::run(argc, argv); }
