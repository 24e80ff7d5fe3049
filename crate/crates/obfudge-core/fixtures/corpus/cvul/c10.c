#include <stdio.h>

/* parity and remainder report */
int parity(int n) {
    int bit = n % 2;
    return bit;
}

int remainder_of(int n, int d) {
    int r = n;
    while (r >= d) {
        r = r - d;
    }
    return r;
}

int main(void) {
    int probe = 29;
    printf("%d\n", parity(probe));
    printf("%d\n", remainder_of(probe, 6));
    printf("%d\n", parity(12));
    return 0;
}
