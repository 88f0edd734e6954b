#include "support.hpp"

#include <gtest/gtest.h>

using namespace twm;
using namespace twm::test;

namespace {

const char* kBuiltins[] = {"abelian(1)", "abelian(4)", "su2", "so3", "su2xsu2"};

/// C_bc^a read off the Pauli matrices: [L_b, L_c] = C_bc^a L_a with tr(L_a L_b) = -delta_ab / 2.
StructureConstants pauli_constants() {
  using namespace std::complex_literals;
  CMatrix s[3] = {CMatrix(2, 2), CMatrix(2, 2), CMatrix(2, 2)};
  s[0] << 0, 1, 1, 0;
  s[1] << 0, -1i, 1i, 0;
  s[2] << 1, 0, 0, -1;
  CMatrix L[3];
  for (int a = 0; a < 3; ++a) L[a] = -0.5i * s[a];
  StructureConstants C(3);
  for (int b = 0; b < 3; ++b)
    for (int c = 0; c < 3; ++c)
      for (int a = 0; a < 3; ++a) C(b, c, a) = (-2.0 * ((L[b] * L[c] - L[c] * L[b]) * L[a]).trace()).real();
  return C;
}

}  // namespace

TEST(LieAlgebra, Su2ConstantsMatchPauliCommutators) {
  const auto alg = builtin_algebra("su2");
  const auto ref = pauli_constants();
  for (int b = 0; b < 3; ++b)
    for (int c = 0; c < 3; ++c)
      for (int a = 0; a < 3; ++a) {
        EXPECT_NEAR(alg.C(b, c, a), ref(b, c, a), 1e-15);
        EXPECT_NEAR(alg.C(b, c, a), levi_civita(b, c, a), 1e-15);
      }
}

TEST(LieAlgebra, BuiltinsSatisfyJacobiAndAntisymmetry) {
  for (const char* name : kBuiltins) {
    const auto alg = builtin_algebra(name);
    EXPECT_LE(jacobi_residual(alg), kAlgebraTol) << name;
    EXPECT_EQ(antisymmetry_residual(alg), 0.0) << name;
    const auto rep = rep_residual(alg);
    ASSERT_TRUE(rep.has_value()) << name;
    EXPECT_LE(*rep, kRepTol) << name;
  }
}

TEST(LieAlgebra, Su2xSu2IsTwoCommutingCopies) {
  const auto alg = builtin_algebra("su2xsu2");
  for (int b = 0; b < 6; ++b)
    for (int c = 0; c < 6; ++c)
      for (int a = 0; a < 6; ++a) {
        const bool first = a < 3 && b < 3 && c < 3, second = a >= 3 && b >= 3 && c >= 3;
        const double expect = first ? levi_civita(b, c, a) : second ? levi_civita(b - 3, c - 3, a - 3) : 0.0;
        EXPECT_EQ(alg.C(b, c, a), expect);
      }
}

TEST(LieAlgebra, CommutatorIsCrossProductOnSu2) {
  const auto alg = builtin_algebra("su2");
  std::mt19937_64 rng(7);
  for (int k = 0; k < 20; ++k) {
    const Vector u = random_vector(3, rng), v = random_vector(3, rng);
    const Eigen::Vector3d cross = Eigen::Vector3d(u).cross(Eigen::Vector3d(v));
    EXPECT_LE((commutator(alg, u, v) - Vector(cross)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(LieAlgebra, CartanKillingValues) {
  // eps_aec eps_bce = -2 delta_ab, so -C_ae^c C_bc^e = 2 delta_ab
  EXPECT_LE((cartan_killing(builtin_algebra("su2")) - 2.0 * Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((cartan_killing(builtin_algebra("su2xsu2")) - 2.0 * Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(cartan_killing(builtin_algebra("abelian(3)")).cwiseAbs().maxCoeff(), 0.0);
}

TEST(LieAlgebra, RepresentationRoundTrip) {
  std::mt19937_64 rng(3);
  for (const char* name : {"su2", "so3", "su2xsu2"}) {
    const auto alg = builtin_algebra(name);
    const Vector u = random_vector(alg.dim, rng);
    EXPECT_LE((from_rep(alg, to_rep(alg, u)) - u).cwiseAbs().maxCoeff(), 1e-14) << name;
  }
}

TEST(LieAlgebra, UnknownAlgebraIsConfigError) {
  EXPECT_THROW(builtin_algebra("sl3"), ConfigError);
  EXPECT_THROW(builtin_algebra("abelian(0)"), ConfigError);
}

TEST(Torsion, MatchesExplicitContraction) {
  std::mt19937_64 rng(11);
  for (const char* name : {"su2", "su2xsu2", "abelian(3)"}) {
    const auto alg = builtin_algebra(name);
    const Matrix g = random_spd(alg.dim, rng), p = random_antisymmetric(alg.dim, rng);
    const auto Q = torsion_tensor(g, p, alg);
    for (int a = 0; a < alg.dim; ++a)
      for (int b = 0; b < alg.dim; ++b)
        for (int c = 0; c < alg.dim; ++c)
          EXPECT_NEAR(Q(a, b, c), torsion_entry(g, p, alg.C, a, b, c), 1e-13) << name;
  }
}

TEST(Torsion, AbelianTorsionVanishes) {
  std::mt19937_64 rng(5);
  const auto alg = builtin_algebra("abelian(4)");
  EXPECT_EQ(torsion_tensor(random_spd(4, rng), random_antisymmetric(4, rng), alg).max_abs(), 0.0);
}

TEST(Torsion, NaturalPotentialIsTorsionFree) {
  std::mt19937_64 rng(2024);
  for (const char* name : kBuiltins) {
    const auto alg = builtin_algebra(name);
    for (int k = 0; k < 100; ++k) {
      const Matrix g = random_spd(alg.dim, rng);
      const Matrix p = natural_p(alg, g, random_vector(alg.dim, rng));
      EXPECT_LE(symmetry_defect(p, 1.0), 1e-14);
      ASSERT_LE(torsion_tensor(g, p, alg).max_abs(), kAlgebraTol) << name << " sample " << k;
    }
  }
}

TEST(Torsion, Su2TorsionVanishesForEveryPotential) {
  std::mt19937_64 rng(99);
  const auto alg = builtin_algebra("su2");
  const Matrix g = cartan_killing(alg);
  for (int k = 0; k < 100; ++k)
    ASSERT_LE(torsion_tensor(g, random_antisymmetric(3, rng, 3.0), alg).max_abs(), kAlgebraTol) << k;
}

TEST(Torsion, CommutingPairIsInvariantWithNonzeroTorsion) {
  const auto alg = builtin_algebra("su2xsu2");
  const Matrix g = cartan_killing(alg);
  Vector pv = Vector::Zero(6), qv = Vector::Zero(6);
  pv(2) = 1.0;
  qv(5) = 1.0;
  const Matrix p = commuting_pair_p(alg, g, pv, qv);
  for (const Vector& R : {Vector(pv), Vector(qv), Vector(0.8 * pv + 0.5 * qv)}) {
    EXPECT_LE(check_g_invariance(g, alg, R), 1e-14);
    EXPECT_LE(check_p_invariance(p, alg, R), 1e-14);
  }
  EXPECT_GT(torsion_nonzero_witness(g, p, alg, pv, qv).value, 0.0);
  EXPECT_GT(torsion_tensor(g, p, alg).max_abs(), 0.0);
}

TEST(Torsion, CommutingPairRejectsBadInput) {
  const auto alg = builtin_algebra("su2xsu2");
  const Matrix g = cartan_killing(alg);
  Vector a = Vector::Zero(6), b = Vector::Zero(6);
  a(0) = 1.0;
  b(1) = 1.0;
  EXPECT_THROW(commuting_pair_p(alg, g, a, b), ConstructionError);
  EXPECT_THROW(commuting_pair_p(alg, g, a, 2.0 * a), ConstructionError);
}

TEST(Geometry, RejectsInvalidMetricAndPotential) {
  const auto alg = builtin_algebra("su2");
  Matrix g = Matrix::Identity(3, 3);
  g(0, 0) = -1.0;
  EXPECT_THROW(make_geometry(alg, g, Matrix::Zero(3, 3)), GeometryError);
  Matrix g2 = Matrix::Identity(3, 3);
  g2(0, 1) = 0.3;
  EXPECT_THROW(make_geometry(alg, g2, Matrix::Zero(3, 3)), GeometryError);
  Matrix p = Matrix::Zero(3, 3);
  p(0, 1) = 1.0;
  EXPECT_THROW(make_geometry(alg, Matrix::Identity(3, 3), p), GeometryError);
  EXPECT_THROW(make_geometry(alg, Matrix::Identity(2, 2), Matrix::Zero(2, 2)), GeometryError);
}

TEST(Geometry, NonInvariantPotentialIsDetected) {
  const auto alg = builtin_algebra("su2");
  Vector R = Vector::Zero(3);
  R(2) = 1.0;
  Matrix p = Matrix::Zero(3, 3);
  p(0, 2) = 1.0;
  p(2, 0) = -1.0;
  EXPECT_GT(check_p_invariance(p, alg, R), 0.1);
  EXPECT_LE(check_g_invariance(cartan_killing(alg), alg, R), 1e-15);
}

TEST(Geometry, ReportFlagsFailures) {
  const auto alg = builtin_algebra("su2xsu2");
  const Matrix g = cartan_killing(alg);
  Vector pv = Vector::Zero(6), qv = Vector::Zero(6);
  pv(2) = 1.0;
  qv(5) = 1.0;
  const auto geom = make_geometry(alg, g, commuting_pair_p(alg, g, pv, qv));
  for (const auto& l : algebra_report(alg, geom, 0.8 * pv, std::make_pair(pv, qv))) EXPECT_TRUE(l.ok()) << l.name;
  Vector R = Vector::Zero(6);
  R(0) = 1.0;
  bool flagged = false;
  for (const auto& l : algebra_report(alg, geom, R, std::nullopt))
    if (l.name == "p_invariance") flagged = !l.ok();
  EXPECT_TRUE(flagged);
}
