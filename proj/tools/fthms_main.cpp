#include <cstdio>

int main() {
    std::puts("fthms: command-line driver not wired up yet");
    return 2;
}
