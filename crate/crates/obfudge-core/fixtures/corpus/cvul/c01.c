#include <stdio.h>

/* fixed-size staging buffer walkthrough */
int fill_level(int request, int capacity) {
    int level = request;
    if (level > capacity) {
        level = capacity;
    }
    return level;
}

int sum_range(int n) {
    int total = 0;
    for (int i = 0; i < n; i++) {
        total = total + i;
    }
    return total;
}

int main(void) {
    printf("%d\n", fill_level(12, 8));
    printf("%d\n", fill_level(3, 8));
    printf("%d\n", sum_range(10));
    return 0;
}
