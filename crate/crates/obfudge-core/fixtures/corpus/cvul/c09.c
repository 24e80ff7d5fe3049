#include <stdio.h>

/* bounded textual tag selection */
const char *tag_for(int severity) {
    if (severity == 0) {
        return "none";
    }
    if (severity < 4) {
        return "low";
    }
    if (severity < 8) {
        return "high";
    }
    return "critical";
}

int weight_of(int severity) {
    int base = 10;
    int scaled = severity * base;
    return scaled;
}

int main(void) {
    printf("%s\n", tag_for(0));
    printf("%s\n", tag_for(3));
    printf("%s\n", tag_for(9));
    printf("%d\n", weight_of(6));
    return 0;
}
