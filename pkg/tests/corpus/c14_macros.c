#include <stdio.h>

#define SQUARE(x) ((x) * (x))
#define REPEAT(n) for (int _r = 0; _r < (n); _r++)
#define MULTI_LINE(a, b) \
    ((a) > (b) ? (a)     \
               : (b))

static const int limit = 12;
unsigned char bytes[32];

static int bigger(int a, int b) { return MULTI_LINE(a, b); }

int main(void) {
    int acc = 0;
    REPEAT(3) { acc += 1; }
    for (int i = 0; i < limit; i++) {
        acc += SQUARE(i) % 5;
        bytes[i] = (unsigned char)acc;
    }
    printf("%d %d %d\n", acc, bigger(acc, 7), bytes[5]);
    return 0;
}
