#include "lwm/cli.hpp"

int main(int argc, char** argv) {
    return lwm::cli_main(argc, argv);
}
