#include "mobiprint/cli_app.hpp"

int main(int argc, char** argv) { return mobiprint::cli::run_cli(argc, argv); }
