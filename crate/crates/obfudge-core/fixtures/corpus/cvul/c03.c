#include <stdio.h>

/* permission bits demo */
struct access_flags {
    int can_read;
    int can_write;
};

int allow_code(int role) {
    if (role == 1) {
        return 7;
    } else if (role == 2) {
        return 5;
    } else if (role == 3) {
        return 4;
    } else {
        return 0;
    }
}

int main(void) {
    struct access_flags flags;
    flags.can_read = 1;
    flags.can_write = 0;
    printf("%d\n", flags.can_read + flags.can_write);
    printf("%d\n", allow_code(1));
    printf("%d\n", allow_code(2));
    printf("%d\n", allow_code(9));
    return 0;
}
