#include "audiosr/cli/run.hpp"

int main(int argc, char** argv) { return audiosr::cli::run(argc, argv); }
