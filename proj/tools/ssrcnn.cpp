#include "ssrcnn/cli.hpp"

int main(int argc, char** argv) { return ssrcnn::cli::cli_dispatch(argc, argv); }
