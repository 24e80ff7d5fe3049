#include <cstdio>

// integer hash mixing demo
long mix(long seed) {
    long spread = seed * 31 + 7;
    return spread;
}

long fold_twice(long value) {
    long once = mix(value);
    long twice = mix(once);
    return twice;
}

int main() {
    std::printf("%ld\n", mix(5));
    std::printf("%ld\n", fold_twice(5));
    return 0;
}
