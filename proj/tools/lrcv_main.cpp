#include <iostream>

#include "driver/driver.hpp"

int main(int argc, char** argv) { return lrcv::cli::run(argc, argv, std::cout, std::cerr); }
