#include "hetdeconv/grid.hpp"

#include <algorithm>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hetdeconv {

std::vector<double> GridAxis::points() const {
    if (count == 0) throw std::invalid_argument("grid axis needs at least one point");
    if (!(max >= min)) throw std::invalid_argument("grid axis max must be >= min");
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = min;
        return out;
    }
    const double step = (max - min) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) out[i] = min + step * static_cast<double>(i);
    out.back() = max;
    return out;
}

std::size_t Surface::flagged_count() const {
    return static_cast<std::size_t>(std::count(flagged.begin(), flagged.end(), static_cast<unsigned char>(1)));
}

void set_workers(int workers) {
#ifdef _OPENMP
    static const int default_workers = omp_get_max_threads();
    omp_set_num_threads(workers >= 1 ? workers : default_workers);
#else
    (void)workers;
#endif
}

int worker_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace hetdeconv
