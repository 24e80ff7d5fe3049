#include <stdio.h>

/* arithmetic ledger with local constants */
long scaled_total(long base) {
    long factor = 3;
    long bump = 7;
    long result = base * factor + bump;
    return result;
}

long clamp(long value) {
    long ceiling = 100;
    if (value > ceiling) {
        return ceiling;
    }
    return value;
}

int main(void) {
    printf("%ld\n", scaled_total(14));
    printf("%ld\n", clamp(245));
    printf("%ld\n", clamp(31));
    return 0;
}
