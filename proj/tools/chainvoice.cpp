#include <iostream>

#include "chainvoice/gateway/cli.hpp"

int main(int argc, char** argv) { return chainvoice::gateway::run_cli(argc, argv, std::cout, std::cerr); }
