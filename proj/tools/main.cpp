#include "vesselseg/service.hpp"

int main(int argc, char** argv) { return vesselseg::run_cli(argc, argv); }
