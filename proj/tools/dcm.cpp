#include <iostream>
#include <string>
#include <vector>

#include "dcm/pipeline.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dcm::run_pipeline(args, std::cout, std::cerr);
}
