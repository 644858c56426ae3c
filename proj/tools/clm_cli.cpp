#include "cli_app.hpp"

int main(int argc, char** argv) { return clm::cli::run(argc, argv); }
