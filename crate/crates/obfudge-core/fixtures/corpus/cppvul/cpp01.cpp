#include <cstdio>

// queue depth bookkeeping
int depth_after(int arrivals, int departures) {
    int depth = arrivals - departures;
    if (depth < 0) {
        depth = 0;
    }
    return depth;
}

int drain_cycles(int depth) {
    int cycles = 0;
    for (int i = 0; i < 10; i++) {
        cycles = cycles + 1;
    }
    return cycles + depth;
}

int main() {
    std::printf("%d\n", depth_after(9, 4));
    std::printf("%d\n", depth_after(2, 6));
    std::printf("%d\n", drain_cycles(3));
    return 0;
}
