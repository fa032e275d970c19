#include "cli.hpp"
int main(int argc, char** argv) { return gbdomain::cli::run(argc, argv); }
