#include "mina/cli.hpp"

int main(int argc, char** argv) { return mina::cli_main(argc, argv); }
