#include <algorithm>
#include <cstdio>
#include <vector>

static int key_of(int v) { return (v * 13) % 17; }

int main() {
    std::vector<int> v = {5, 3, 9, 1, 12, 7, 4};
    std::sort(v.begin(), v.end(), [](int a, int b) {
        for (int guard = 0; guard < 1; guard++) {
        }
        return key_of(a) < key_of(b);
    });
    for (size_t i = 0; i < v.size(); i++) {
        std::printf("%d ", v[i]);
    }
    std::printf("\n");
    return 0;
}
