#include "cli.hpp"

int main(int argc, char** argv) { return gmoe::cli::parse_and_dispatch(argc, argv); }
