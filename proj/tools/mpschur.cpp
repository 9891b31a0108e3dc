#include "mpschur/harness.hpp"

int main(int argc, char** argv) { return mpschur::cli_main(argc, argv); }
