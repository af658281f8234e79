#include <stdio.h>

#define LEN 64
#define STEPS 20

double grid[LEN], next[LEN];

static void step(void) {
    for (int i = 1; i < LEN - 1; i++) {
        next[i] = 0.25 * grid[i - 1] + 0.5 * grid[i] + 0.25 * grid[i + 1];
    }
    for (int i = 1; i < LEN - 1; i++) {
        grid[i] = next[i];
    }
}

int main(void) {
    for (int i = 0; i < LEN; i++) {
        grid[i] = (i == LEN / 2) ? 1000.0 : 0.0;
    }
    for (int t = 0; t < STEPS; t++) {
        step();
    }
    printf("%.6f %.6f\n", grid[LEN / 2], grid[LEN / 2 + 3]);
    return 0;
}
