#include <iostream>

#include "app.hpp"

int main(int argc, char** argv) { return tsdl::app::run(argc, argv, std::cout, std::cerr); }
