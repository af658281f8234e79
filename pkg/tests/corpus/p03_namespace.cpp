#include <cstdio>

namespace geom {

static const double kScale = 2.5;
int calls = 0;

double area(double w, double h) { return w * h * kScale; }

namespace detail {
inline int twice(int x) { return 2 * x; }
}  // namespace detail

}  // namespace geom

int main() {
    double total = 0.0;
    for (int i = 1; i <= 6; i++) {
        total += geom::area(i, geom::detail::twice(i));
        geom::calls++;
    }
    std::printf("%.2f %d\n", total, geom::calls);
    return 0;
}
