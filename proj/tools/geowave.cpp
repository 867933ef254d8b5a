#include "geowave/cli.hpp"

int main(int argc, char** argv) { return geowave::cli::run_command(argc, argv); }
