#include "anomshap/parallel.hpp"

namespace anomshap {

#ifdef _OPENMP
namespace {
const int kDefaultThreads = omp_get_max_threads();
}

void set_max_threads(int threads) {
  omp_set_num_threads(threads < 1 ? kDefaultThreads : threads);
}

int max_threads() { return omp_get_max_threads(); }
#else
void set_max_threads(int) {}
int max_threads() { return 1; }
#endif

}  // namespace anomshap
