// Command-line front end. Commands land here as the pipeline modules come
// together; for now this is the argument scaffold only.
#include <cstdio>

int main(int argc, char** argv) {
    (void)argc;
    (void)argv;
    std::fprintf(stderr, "fedfuse: no commands wired up yet\n");
    return 1;
}
