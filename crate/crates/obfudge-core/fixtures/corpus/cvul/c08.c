#include <stdio.h>

/* checked addition ladder */
long ladder(long start) {
    long total = start;
    {
        long boost = 11;
        total = total + boost;
    }
    if (total % 2 == 0) {
        total = total + 1;
    }
    return total;
}

long twice(long v) {
    return v * 2;
}

long chain(long x) {
    long mid = twice(x) + 1;
    long out = twice(mid);
    return out;
}

int main(void) {
    printf("%ld\n", ladder(4));
    printf("%ld\n", ladder(7));
    printf("%ld\n", chain(5));
    return 0;
}
