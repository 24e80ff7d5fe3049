#include <stdio.h>

/* fixed lookup vector with scalar reads */
int main(void) {
    int weights[] = { 4, 8, 15, 16 };
    int first = 1;
    int second = 2;
    int third = 3;
    int mixed = weights[0] + weights[3] + first + second + third;
    printf("%d\n", mixed);
    printf("%d\n", weights[1] * weights[2]);
    return 0;
}
