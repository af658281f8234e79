#include <stdio.h>
#include <string.h>

const char *greeting = "for (int i = 0; i < n; i++) { /* not code */ }";
char buffer[128];

static void reverse_into(const char *src, char *dst) {
    size_t n = strlen(src);
    for (size_t i = 0; i < n; i++) {
        dst[i] = src[n - 1 - i];
    }
    dst[n] = '\0';
}

int main(void) {
    reverse_into(greeting, buffer);
    printf("%s\n", buffer); // prints "} ... ;"
    printf("%c%c\n", '{', '}');
    return 0;
}
