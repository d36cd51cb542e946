#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <functional>

#include "kplab/zariski.hpp"

using kplab::Mat;
using kplab::Vec;
using kplab::Verdict;

namespace {

// Entrywise transcription of the two generator families in angle variables,
// valid above the top channel edge where all three weights are positive.
// Kept as an independent oracle against the rotor-conjugation construction.
Mat d1Angles(double a, double b, double g, int l) {
  const double sa = std::sin(l * a), sb = std::sin(l * b), sg = std::sin(l * g);
  const double ca = std::cos(l * a), cb = std::cos(l * b), cg = std::cos(l * g);
  Mat m = Mat::Zero(6, 6);
  m(0, 1) = sa * cb / a;
  m(0, 2) = sa * cg / a;
  m(0, 4) = sa * sb / (a * b);
  m(0, 5) = sa * sg / (a * g);
  m(1, 0) = sb * ca / b;
  m(1, 3) = sa * sb / (a * b);
  m(2, 0) = sg * ca / g;
  m(2, 3) = sa * sg / (a * g);
  m(3, 1) = -ca * cb;
  m(3, 2) = -ca * cg;
  m(3, 4) = -sb * ca / b;
  m(3, 5) = -sg * ca / g;
  m(4, 0) = -ca * cb;
  m(4, 3) = -sa * cb / a;
  m(5, 0) = -ca * cg;
  m(5, 3) = -sa * cg / a;
  return m;
}

Mat d2Angles(double a, double b, double g, int l) {
  const double sa = std::sin(l * a), sb = std::sin(l * b), sg = std::sin(l * g);
  const double ca = std::cos(l * a), cb = std::cos(l * b), cg = std::cos(l * g);
  Mat m = Mat::Zero(6, 6);
  m(0, 0) = 2 * sa * ca / a;
  m(0, 3) = -2 * sa * sa / (a * a);
  m(1, 1) = sb * cb / b;
  m(1, 2) = sb * cg / b;
  m(1, 4) = -sb * sb / (b * b);
  m(1, 5) = -sb * sg / (b * g);
  m(2, 1) = sg * cb / g;
  m(2, 2) = sg * cg / g;
  m(2, 4) = -sb * sg / (b * g);
  m(2, 5) = -sg * sg / (g * g);
  m(3, 0) = 2 * ca * ca;
  m(3, 3) = -2 * ca * sa / a;
  m(4, 1) = cb * cb;
  m(4, 2) = cb * cg;
  m(4, 4) = -sb * cb / b;
  m(4, 5) = -sg * cb / g;
  m(5, 1) = cb * cg;
  m(5, 2) = cg * cg;
  m(5, 4) = -sb * cg / b;
  m(5, 5) = -sg * cg / g;
  return m;
}

std::vector<Mat> fullGenerators(double e) {
  std::vector<Mat> gens;
  for (int l = 0; l < 8; ++l) gens.push_back(kplab::buildD1(e, l));
  for (int l = 0; l <= 10; ++l) gens.push_back(kplab::buildD2(e, l));
  const auto [b0, b1] = kplab::buildBrackets(e);
  gens.push_back(b0);
  gens.push_back(b1);
  return gens;
}

// Bisection roots of the three closed-form determinant factors, used as an
// independent location oracle for the scan.
double bisect(double lo, double hi, const std::function<double(double)>& f) {
  double flo = f(lo);
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (flo * fm <= 0.0)
      hi = mid;
    else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("algebra membership defect") {
  Mat ok = Mat::Zero(6, 6);
  ok(0, 1) = 2.0;   // a block
  ok(4, 3) = -2.0;  // -tA mirror
  ok(0, 4) = 1.5;   // symmetric b1
  ok(1, 3) = 1.5;
  CHECK(kplab::algebraDefect(ok) == 0.0);
  CHECK(kplab::inSymplecticAlgebra(ok));

  Mat bad = ok;
  bad(1, 3) = -1.5;  // breaks b1 symmetry in two mirrored slots
  CHECK(kplab::algebraDefect(bad) == Catch::Approx(3.0 * kplab::kSqrt2));
  CHECK_FALSE(kplab::inSymplecticAlgebra(bad));

  CHECK_THROWS_AS(kplab::algebraDefect(Mat::Zero(4, 4)), kplab::PreconditionError);
}

TEST_CASE("certificate weights") {
  const auto w = kplab::detail::certWeights(1.6);
  CHECK(w[0] == Catch::Approx(0.6).epsilon(1e-14));
  CHECK(w[1] == Catch::Approx(1.6 - kplab::kSqrt2).epsilon(1e-12));
  CHECK(w[2] == Catch::Approx(1.6 + kplab::kSqrt2).epsilon(1e-14));
  CHECK_THROWS_AS(kplab::detail::certWeights(kplab::kSqrt2), kplab::PreconditionError);
  CHECK_THROWS_AS(kplab::detail::certWeights(1.0), kplab::PreconditionError);
}

TEST_CASE("rotor powers invert and compose") {
  const auto w = kplab::detail::certWeights(1.6);
  CHECK((kplab::detail::rotorPower(w, 0) - Mat::Identity(6, 6)).norm() == 0.0);
  for (int l : {1, 3, 7}) {
    const Mat r = kplab::detail::rotorPower(w, l);
    const Mat rInv = kplab::detail::rotorPower(w, -l);
    CHECK((r * rInv - Mat::Identity(6, 6)).norm() < 1e-13);
    CHECK(kplab::symplecticDefect(r) <= 1e-12 * (1.0 + r.squaredNorm()));
  }
  // Power relation against the one-cell rotor.
  const Mat r1 = kplab::detail::rotorPower(w, 1);
  Mat acc = Mat::Identity(6, 6);
  for (int k = 0; k < 5; ++k) acc = r1 * acc;
  CHECK((acc - kplab::detail::rotorPower(w, 5)).norm() < 1e-12);
}

TEST_CASE("l = 0 generators are the embedded jump images") {
  for (double e : {1.6, 3.0, 0.5, -2.0}) {
    Mat w1 = Mat::Zero(6, 6), w2 = Mat::Zero(6, 6);
    w1.bottomLeftCorner(3, 3) = kplab::detail::jumpImage1();
    w2.bottomLeftCorner(3, 3) = kplab::detail::jumpImage2();
    CHECK((kplab::buildD1(e, 0) - w1).norm() == 0.0);
    CHECK((kplab::buildD2(e, 0) - w2).norm() == 0.0);
  }
}

TEST_CASE("generator families live in the symplectic algebra") {
  for (double e : {1.6, 3.0}) {
    for (int l = 0; l < 8; ++l) {
      const Mat d = kplab::buildD1(e, l);
      REQUIRE(kplab::algebraDefect(d) <= 1e-10 * (1.0 + d.norm()));
    }
    for (int l = 0; l <= 10; ++l) {
      const Mat d = kplab::buildD2(e, l);
      REQUIRE(kplab::algebraDefect(d) <= 1e-10 * (1.0 + d.norm()));
      REQUIRE(std::abs(d.trace()) <= 1e-12 * (1.0 + d.norm()));
    }
  }
}

TEST_CASE("families telescope by one-cell conjugation") {
  const double e = 1.6;
  const auto w = kplab::detail::certWeights(e);
  const Mat r = kplab::detail::rotorPower(w, 1);
  const Mat rInv = kplab::detail::rotorPower(w, -1);
  for (int l = 1; l <= 7; ++l) {
    const Mat lhs = kplab::buildD1(e, l);
    const Mat rhs = r * kplab::buildD1(e, l - 1) * rInv;
    REQUIRE((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
  }
}

TEST_CASE("generators match the angle-variable transcription") {
  for (double e : {1.6, 3.0}) {
    const auto rp = kplab::classifyRegime(e);
    for (int l = 0; l < 8; ++l) {
      const Mat want = d1Angles(rp.alpha, rp.beta, rp.gamma, -l);
      const Mat got = kplab::buildD1(e, l);
      REQUIRE((got - want).norm() <= 1e-12 * (1.0 + want.norm()));
    }
    for (int l = 0; l <= 10; ++l) {
      const Mat want = d2Angles(rp.alpha, rp.beta, rp.gamma, l);
      const Mat got = kplab::buildD2(e, l);
      REQUIRE((got - want).norm() <= 1e-12 * (1.0 + want.norm()));
    }
  }
}

TEST_CASE("first family fills its 8-parameter pattern") {
  const double e = 2.3;
  for (int l : {1, 2, 5}) {
    const Mat d = kplab::buildD1(e, l);
    const double s = 1e-13 * (1.0 + d.norm());
    // Mirrored slots share one coordinate.
    CHECK(std::abs(d(0, 4) - d(1, 3)) <= s);
    CHECK(std::abs(d(0, 5) - d(2, 3)) <= s);
    CHECK(std::abs(d(4, 0) - d(3, 1)) <= s);
    CHECK(std::abs(d(5, 0) - d(3, 2)) <= s);
    CHECK(std::abs(d(4, 3) + d(0, 1)) <= s);
    CHECK(std::abs(d(5, 3) + d(0, 2)) <= s);
    CHECK(std::abs(d(3, 4) + d(1, 0)) <= s);
    CHECK(std::abs(d(3, 5) + d(2, 0)) <= s);
    // Slots outside the pattern stay empty.
    for (int i : {0, 3}) CHECK(std::abs(d(i, i)) <= s);
    CHECK(std::abs(d(0, 3)) <= s);
    CHECK(std::abs(d(3, 0)) <= s);
    CHECK(std::abs(d(1, 1)) <= s);
    CHECK(std::abs(d(2, 2)) <= s);
    CHECK(std::abs(d(4, 5)) <= s);
    CHECK(std::abs(d(5, 4)) <= s);
    CHECK(std::abs(d(1, 2)) <= s);
    CHECK(std::abs(d(2, 1)) <= s);
  }
}

TEST_CASE("bracket elements are constant and integral") {
  const auto [b0, b1] = kplab::buildBrackets(1.6);
  Mat w0 = Mat::Zero(6, 6), w1 = Mat::Zero(6, 6);
  w0(4, 1) = 2.0;
  w0(4, 2) = 1.0;
  w0(5, 1) = 1.0;
  w1(5, 1) = 1.0;
  w1(5, 2) = 2.0;
  w1(4, 2) = 1.0;
  CHECK((b0 - w0).norm() == 0.0);
  CHECK((b1 - w1).norm() == 0.0);
  CHECK(kplab::algebraDefect(b0) == 0.0);
  CHECK(kplab::algebraDefect(b1) == 0.0);

  const auto [c0, c1] = kplab::buildBrackets(2.5);
  CHECK((b0 - c0).norm() == 0.0);
  CHECK((b1 - c1).norm() == 0.0);
}

TEST_CASE("the two families occupy disjoint slots") {
  const double e = 1.6;
  std::vector<Mat> f1, f2;
  for (int l = 0; l < 8; ++l) f1.push_back(kplab::buildD1(e, l));
  for (int l = 0; l <= 10; ++l) f2.push_back(kplab::buildD2(e, l));
  const auto [b0, b1] = kplab::buildBrackets(e);
  f2.push_back(b0);
  f2.push_back(b1);
  for (const Mat& a : f1)
    for (const Mat& b : f2)
      REQUIRE(std::abs((a.array() * b.array()).sum()) <=
              1e-10 * (1.0 + a.norm() * b.norm()));
}

TEST_CASE("coordinate functionals pick the documented slots") {
  const auto& slots = kplab::familySlots2();
  const std::array<std::pair<int, int>, 13> want = {{{0, 0},
                                                     {1, 1},
                                                     {1, 2},
                                                     {2, 1},
                                                     {2, 2},
                                                     {0, 3},
                                                     {1, 4},
                                                     {1, 5},
                                                     {2, 5},
                                                     {3, 0},
                                                     {4, 1},
                                                     {4, 2},
                                                     {5, 2}}};
  CHECK(slots == want);

  const auto [b0, b1] = kplab::buildBrackets(1.6);
  Eigen::Matrix<double, 13, 1> v0 = kplab::coordsFamily2(b0);
  Eigen::Matrix<double, 13, 1> v1 = kplab::coordsFamily2(b1);
  Eigen::Matrix<double, 13, 1> w0 = Eigen::Matrix<double, 13, 1>::Zero();
  Eigen::Matrix<double, 13, 1> w1 = Eigen::Matrix<double, 13, 1>::Zero();
  w0[10] = 2.0;
  w0[11] = 1.0;
  w1[11] = 1.0;
  w1[12] = 2.0;
  CHECK((v0 - w0).norm() == 0.0);
  CHECK((v1 - w1).norm() == 0.0);
}

TEST_CASE("rank-8 determinant agrees with its closed form") {
  for (int k = 0; k <= 50; ++k) {
    const double e = 1.45 + (5.0 - 1.45) * k / 50.0;
    const double a = kplab::det88(e);
    const double b = kplab::det88Closed(e);
    REQUIRE(std::abs(a - b) <= 1e-7 * std::max(std::abs(a), std::abs(b)) + 1e-10);
  }
  // Hyperbolic and mixed regimes too.
  for (double e : {0.5, -0.5, -2.0, 1.2}) {
    const double a = kplab::det88(e);
    const double b = kplab::det88Closed(e);
    REQUIRE(std::abs(a - b) <= 1e-7 * std::max(std::abs(a), std::abs(b)) + 1e-10);
  }
}

TEST_CASE("rank-8 determinant vanishes when a channel angle hits pi") {
  const double pi = kplab::kPi;
  CHECK(std::abs(kplab::det88(1.0 + pi * pi)) < 1e-10);
}

TEST_CASE("rank-13 determinant reference value") {
  const double d = kplab::det1313(1.6);
  CHECK(d < 0.0);
  CHECK(std::abs(d) > 0.95 * 3507.0);
  CHECK(std::abs(d) < 1.05 * 3507.0);
  CHECK(d == Catch::Approx(-3507.662041857461).epsilon(1e-9));

  // Locally smooth in energy.
  for (double s : {-1e-6, 1e-6})
    CHECK(std::abs(kplab::det1313(1.6 + s) - d) < 1e-2 * std::abs(d));
}

TEST_CASE("duplicated coordinate column kills the determinant") {
  Eigen::Matrix<double, 13, 13> m;
  for (int l = 0; l <= 10; ++l) m.col(l) = kplab::coordsFamily2(kplab::buildD2(1.6, l));
  const auto [b0, b1] = kplab::buildBrackets(1.6);
  m.col(11) = kplab::coordsFamily2(b0);
  m.col(12) = m.col(11);
  CHECK(std::abs(m.determinant()) < 1e-10);
}

TEST_CASE("span dimensions of the generator subsets") {
  std::vector<Mat> f1;
  for (int l = 0; l < 8; ++l) f1.push_back(kplab::buildD1(1.6, l));
  CHECK(kplab::spanDimension(f1) == 8);

  std::vector<Mat> f2;
  for (int l = 0; l <= 10; ++l) f2.push_back(kplab::buildD2(1.6, l));
  const auto [b0, b1] = kplab::buildBrackets(1.6);
  f2.push_back(b0);
  f2.push_back(b1);
  CHECK(kplab::spanDimension(f2) == 13);

  CHECK(kplab::spanDimension(fullGenerators(1.6)) == 21);
  CHECK(kplab::spanDimension({}) == 0);
}

TEST_CASE("bracket closure saturates the symplectic algebra") {
  CHECK(kplab::lieClosureDim({}) == 0);

  kplab::ClosureReport rep;
  CHECK(kplab::lieClosureDim(fullGenerators(1.6), 1e-8, &rep) == 21);
  CHECK(rep.dim == 21);
  CHECK_FALSE(rep.ambiguous);
  CHECK(rep.smallestAccepted > 0.1);
  CHECK(rep.largestRejected < 1e-9);

  // The first family alone already generates everything through brackets.
  std::vector<Mat> f1;
  for (int l = 0; l < 8; ++l) f1.push_back(kplab::buildD1(1.6, l));
  CHECK(kplab::lieClosureDim(f1) == 21);
  for (int l = 0; l < 8; ++l) f1[l] = kplab::buildD1(3.0, l);
  CHECK(kplab::lieClosureDim(f1) == 21);

  // Never exceeds the ambient dimension.
  for (double e : {1.7, 2.0, 2.9, 4.3}) {
    const int dim = kplab::lieClosureDim(fullGenerators(e));
    CHECK(dim == 21);
  }
}

TEST_CASE("density certificate at the reference energy") {
  const auto cert = kplab::certifyZariskiDense(1.6);
  CHECK(cert.energy == 1.6);
  CHECK(cert.verdict == Verdict::Pass);
  CHECK(cert.closureDim == 21);
  CHECK(cert.det88Value == Catch::Approx(-3.292186).epsilon(1e-4));
  CHECK(cert.det1313Value == Catch::Approx(-3507.662041857461).epsilon(1e-9));
  for (const auto& sha : cert.witnessSha) {
    CHECK(sha.size() == 64);
    CHECK(sha.find_first_not_of("0123456789abcdef") == std::string::npos);
  }
  // Witness digests are a pure function of the energy.
  const auto again = kplab::certifyZariskiDense(1.6);
  CHECK(cert.witnessSha == again.witnessSha);

  CHECK_THROWS_AS(kplab::certifyZariskiDense(kplab::kSqrt2), kplab::PreconditionError);

  // A determinant zero leaves the verdict undecided without running closure.
  const auto undecided = kplab::certifyZariskiDense(1.0 + kplab::kPi * kplab::kPi);
  CHECK(undecided.verdict == Verdict::Undecided);
  CHECK(undecided.closureDim == 0);
}

TEST_CASE("critical-set scan finds exactly the closed-form factor roots") {
  const auto set = kplab::scanCriticalSet(1.5, 5.0, 0.002, kplab::DetKind::Det88);
  REQUIRE(set.zeros.size() == 3);

  // Independent locations from the closed-form factors: two odd roots where
  // a pair of channel angles sums to pi, one even root of the cross factor.
  const auto angles = [](double e) { return kplab::classifyRegime(e); };
  const double rOdd1 =
      bisect(2.0, 3.0, [&](double e) { return angles(e).alpha + angles(e).gamma - kplab::kPi; });
  const double rOdd2 =
      bisect(3.2, 4.2, [&](double e) { return angles(e).alpha + angles(e).beta - kplab::kPi; });
  const double rEven = bisect(2.9, 3.2, [&](double e) {
    const auto w = kplab::detail::certWeights(e);
    const double x = kplab::cosSqrt(w[0]), y = kplab::cosSqrt(w[1]), z = kplab::cosSqrt(w[2]);
    return -4.0 * x * x * (1.0 - x * x) + y * y + z * z + 2.0 * y * z * (1.0 - 2.0 * x * x);
  });
  CHECK(set.zeros[0] == Catch::Approx(rOdd1).margin(1e-8));
  CHECK(set.zeros[1] == Catch::Approx(rEven).margin(1e-8));
  CHECK(set.zeros[2] == Catch::Approx(rOdd2).margin(1e-8));

  CHECK(set.zeros[0] == Catch::Approx(2.407930102855).margin(1e-6));
  CHECK(set.zeros[1] == Catch::Approx(3.070997715304).margin(1e-6));
  CHECK(set.zeros[2] == Catch::Approx(3.678853873157).margin(1e-6));

  for (double z : set.zeros) CHECK(std::abs(kplab::det88(z)) < 1e-8);

  // Empty and degenerate intervals.
  CHECK(kplab::scanCriticalSet(2.0, 2.0, 0.01, kplab::DetKind::Det88).zeros.empty());
  CHECK(kplab::scanCriticalSet(3.0, 2.0, 0.01, kplab::DetKind::Det88).zeros.empty());
  CHECK_THROWS_AS(kplab::scanCriticalSet(1.5, 2.0, 0.0, kplab::DetKind::Det88),
                  kplab::PreconditionError);

  // The rank-13 determinant stays huge near the reference energy.
  CHECK(kplab::scanCriticalSet(1.55, 1.65, 0.005, kplab::DetKind::Det1313).zeros.empty());
}
