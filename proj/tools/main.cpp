#include "statemem/cli.hpp"

int main(int argc, char** argv) { return statemem::run(argc, argv); }
