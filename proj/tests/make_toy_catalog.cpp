// Writes a small catalog directory for the CLI tests.
#include <cstdlib>
#include <iostream>

#include "support.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_toy_catalog DIR\n";
        return 1;
    }
    test::write_toy_catalog_dir(argv[1], 42, {"Bolt", "Nut", "Washer"}, 3, 3);
    return 0;
}
