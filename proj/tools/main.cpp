#include "coursekit/cli.hpp"

int main(int argc, char** argv) { return coursekit::cli::run(argc, argv); }
