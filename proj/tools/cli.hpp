#pragma once
namespace gbdomain::cli { int run(int argc, char** argv); }
