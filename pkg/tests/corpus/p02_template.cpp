#include <cstdio>

template <typename T>
T clamp_value(T v, T lo, T hi) {
    return v < lo ? lo : (v > hi ? hi : v);
}

template <typename T, int K>
T scaled(T v) { return v * K; }

int main() {
    double acc = 0.0;
    for (int i = -5; i < 15; i++) {
        acc += clamp_value<double>(i * 0.75, 0.0, 6.0) + scaled<int, 3>(i);
    }
    std::printf("%.3f\n", acc);
    return 0;
}
