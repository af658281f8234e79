#include <stdio.h>

int counter = 0;

static void run(int mode) {
    switch (mode) {
    case 0:
        for (int i = 0; i < 3; i++) counter += i;
        break;
    default:
        break;
    }
    if (mode > 0)
        while (counter < 10) counter++;
again:
    for (int j = 0; j < 2; j++) {
        counter += j;
    }
    if (counter < 20)
        goto again;
}

int main(void) {
    run(0);
    run(1);
    printf("%d\n", counter);
    return 0;
}
