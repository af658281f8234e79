#include <cstdio>
#include <cstring>

const char *doc = R"doc(int fake() { for (;;) {} } "quoted")doc";
static char scratch[64];

static int count_char(char c, char target) { return c == target ? 1 : 0; }

int main() {
    int braces = 0;
    std::size_t n = std::strlen(doc);
    for (std::size_t i = 0; i < n; i++) {
        braces += count_char(doc[i], '{');
        scratch[i % 64] = doc[i];
    }
    std::printf("%d %zu %c\n", braces, n, scratch[3]);
    return 0;
}
