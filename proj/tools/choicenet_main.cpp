#include "choicenet/cli.hpp"

int main(int argc, char** argv) { return choicenet::cli::run(argc, argv); }
