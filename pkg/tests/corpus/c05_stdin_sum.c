#include <stdio.h>

static long long clamp_add(long long acc, long long v, long long cap) {
    long long r = acc + v;
    return r > cap ? cap : r;
}

int main(void) {
    long long acc = 0, v;
    int count = 0;
    while (scanf("%lld", &v) == 1) {
        acc = clamp_add(acc, v, 1000000LL);
        count++;
    }
    printf("%d %lld\n", count, acc);
    return 0;
}
