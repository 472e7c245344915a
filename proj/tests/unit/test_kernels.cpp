#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#ifdef HEP2_HAVE_OPENMP
#include <omp.h>
#endif

#include "hep2/kernels.hpp"
#include "oracles.hpp"

using namespace hep2;
using kernels::ConvShape;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

struct ConvCase {
  ConvShape s;
  std::vector<double> x, w, b, gy;
};

ConvCase make_case(std::mt19937_64& rng, ConvShape s) {
  return {s, oracle::random_vector(rng, s.input_count()), oracle::random_vector(rng, s.weight_count()),
          oracle::random_vector(rng, s.out_maps), oracle::random_vector(rng, s.output_count())};
}

struct ConvOut {
  std::vector<double> y, gw, gb, gx;
};

template <class Fwd, class Filt, class Inp>
ConvOut run(const ConvCase& c, Fwd fwd, Filt filt, Inp inp) {
  ConvOut o{std::vector<double>(c.s.output_count()), std::vector<double>(c.s.weight_count()),
            std::vector<double>(c.s.out_maps), std::vector<double>(c.s.input_count())};
  fwd(c.s, c.x, c.w, c.b, o.y);
  filt(c.s, c.x, c.gy, o.gw, o.gb);
  inp(c.s, c.w, c.gy, o.gx);
  return o;
}

ConvOut run_serial(const ConvCase& c) {
  return run(c, kernels::serial::conv_forward, kernels::serial::conv_backward_filters,
             kernels::serial::conv_backward_input);
}

ConvOut run_parallel(const ConvCase& c) {
  return run(c, kernels::parallel::conv_forward, kernels::parallel::conv_backward_filters,
             kernels::parallel::conv_backward_input);
}

}  // namespace

TEST_CASE("parallel convolution kernels agree with the serial reference") {
  std::mt19937_64 rng(31);
  // Small shapes plus the three reference layers, which cross the
  // parallel-work threshold.
  std::vector<ConvShape> shapes = {{1, 6, 78, 78, 7}, {6, 16, 36, 36, 4}, {16, 32, 11, 11, 3}};
  for (int t = 0; t < 25; ++t) {
    const std::size_t k = 1 + rng() % 5;
    shapes.push_back({1 + rng() % 4, 1 + rng() % 4, k + rng() % 9, k + rng() % 9, k});
  }
  for (const auto& s : shapes) {
    const auto c = make_case(rng, s);
    const auto a = run_serial(c), b = run_parallel(c);
    CHECK(a.y == b.y);  // same summation order per output
    CHECK(max_abs_diff(a.gw, b.gw) < 1e-11);
    CHECK(max_abs_diff(a.gb, b.gb) < 1e-11);
    CHECK(max_abs_diff(a.gx, b.gx) < 1e-11);
  }
}

TEST_CASE("parallel dense kernels agree with the serial reference") {
  std::mt19937_64 rng(32);
  for (auto [in, out] : {std::pair<std::size_t, std::size_t>{288, 150}, {150, 6}, {3, 2}, {17, 40}}) {
    const auto x = oracle::random_vector(rng, in), w = oracle::random_vector(rng, in * out),
               b = oracle::random_vector(rng, out), gy = oracle::random_vector(rng, out);
    std::vector<double> y1(out), y2(out), gw1(in * out), gw2(in * out), gb1(out), gb2(out), gx1(in), gx2(in);
    kernels::serial::dense_forward(in, out, x, w, b, y1);
    kernels::parallel::dense_forward(in, out, x, w, b, y2);
    kernels::serial::dense_backward(in, out, x, w, gy, gw1, gb1, gx1);
    kernels::parallel::dense_backward(in, out, x, w, gy, gw2, gb2, gx2);
    CHECK(max_abs_diff(y1, y2) < 1e-12);
    CHECK(gw1 == gw2);
    CHECK(gb1 == gb2);
    CHECK(max_abs_diff(gx1, gx2) < 1e-12);
    // An empty grad_x span skips the input gradient.
    kernels::parallel::dense_backward(in, out, x, w, gy, gw2, gb2, {});
    CHECK(gw1 == gw2);
  }
}

TEST_CASE("serial dense kernel matches a direct formula") {
  const std::vector<double> x{1, 2}, w{1, 0, -1, 3}, b{0.5, -0.5};
  std::vector<double> y(2);
  kernels::serial::dense_forward(2, 2, x, w, b, y);
  CHECK(y[0] == 1.5);
  CHECK(y[1] == 4.5);
}

TEST_CASE("parallel kernels do not depend on the thread count") {
#ifdef HEP2_HAVE_OPENMP
  std::mt19937_64 rng(33);
  const auto c = make_case(rng, {6, 16, 36, 36, 4});
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto one = run_parallel(c);
  omp_set_num_threads(4);
  const auto four = run_parallel(c);
  omp_set_num_threads(saved);
  CHECK(one.y == four.y);
  CHECK(one.gw == four.gw);
  CHECK(one.gb == four.gb);
  CHECK(one.gx == four.gx);
#else
  CHECK(kernels::max_threads() == 1);
#endif
}
