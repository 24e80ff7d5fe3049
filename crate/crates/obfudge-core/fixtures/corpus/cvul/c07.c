#include <stdio.h>

#define RETRY_LIMIT 4

/* retry budget walkthrough */
int budget_after(int attempts) {
    int budget = RETRY_LIMIT;
    int spent = attempts;
    if (spent > budget) {
        spent = budget;
    }
    return budget - spent;
}

int main(void) {
    int trial = 0;
    for (trial = 0; trial < 6; trial++) {
        printf("%d\n", budget_after(trial));
    }
    return 0;
}
