#include <stdio.h>

/* rolling counter with early stop */
int count_until(int limit, int stride) {
    int steps = 0;
    int value = 0;
    while (value < limit) {
        value = value + stride;
        steps = steps + 1;
        if (steps == 50) {
            break;
        }
    }
    return steps;
}

int main(void) {
    printf("%d\n", count_until(10, 3));
    printf("%d\n", count_until(7, 1));
    printf("%d\n", count_until(1000, 1));
    return 0;
}
