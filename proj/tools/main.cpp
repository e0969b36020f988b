#include "nlplap/cli.hpp"

int main(int argc, char** argv) { return nlplap::cli::run(argc, argv); }
