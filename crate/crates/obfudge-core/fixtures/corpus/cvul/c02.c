#include <stdio.h>

/* message length accounting */
int measure(const char *text) {
    int count = 0;
    while (text[count] != 0) {
        count = count + 1;
    }
    return count;
}

int pad_to_block(int length) {
    int block = 16;
    int rest = length % block;
    if (rest == 0) {
        return length;
    }
    return length + block - rest;
}

int main(void) {
    const char *greeting = "hello world";
    printf("%d\n", measure(greeting));
    printf("%d\n", pad_to_block(measure(greeting)));
    printf("%d\n", pad_to_block(32));
    return 0;
}
