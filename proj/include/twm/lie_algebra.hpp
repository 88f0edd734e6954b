#pragma once

// Lie-algebraic target data: structure constants, metrics, torsion potentials
// and the derived torsion tensor for left-invariant geometries on a Lie group.
//
// Index layout (fixed for the whole library):
//   StructureConstants C(b, c, a) = C_bc^a       with [e_b, e_c] = C_bc^a e_a
//   MixedTensor        Q(a, b, c) = Q^a_bc
//   Matrix             g(a, b)    = g_ab, p(a, b) = p_ab
// Antisymmetrization over three indices carries weight 1/3 (sum of the three
// cyclic terms divided by 3).

#include "twm/errors.hpp"
#include "twm/tensor.hpp"

#include <Eigen/Eigenvalues>

#include <limits>
#include <optional>
#include <regex>
#include <string>
#include <vector>

namespace twm {

inline constexpr double kAlgebraTol = 1e-13;
inline constexpr double kRepTol = 1e-12;

struct LieAlgebraSpec {
  std::string name;
  int dim = 0;
  StructureConstants C;
  /// Matrix generators L_a with [L_b, L_c] = C_bc^a L_a; empty when not available.
  std::vector<CMatrix> rep;

  bool has_rep() const { return !rep.empty(); }
};

/// Lie algebra element generating the equivariance subgroup; zero means invariant frames.
struct TranslationData {
  Vector R;

  static TranslationData zero(int n) { return {Vector::Zero(n)}; }
  bool is_zero() const { return R.size() == 0 || R.cwiseAbs().maxCoeff() == 0.0; }
};

namespace detail {

inline StructureConstants epsilon_constants(int n, int offset) {
  StructureConstants c(n);
  const int perm[6][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {1, 0, 2}, {0, 2, 1}, {2, 1, 0}};
  for (int k = 0; k < 6; ++k) {
    double sign = k < 3 ? 1.0 : -1.0;
    c(offset + perm[k][0], offset + perm[k][1], offset + perm[k][2]) = sign;
  }
  return c;
}

inline std::vector<CMatrix> su2_generators() {
  using namespace std::complex_literals;
  CMatrix s1(2, 2), s2(2, 2), s3(2, 2);
  s1 << 0, 1, 1, 0;
  s2 << 0, -1i, 1i, 0;
  s3 << 1, 0, 0, -1;
  const std::complex<double> f = -0.5i;
  return {f * s1, f * s2, f * s3};
}

inline void add_epsilon(StructureConstants& c, int offset) {
  auto block = epsilon_constants(c.dim(), offset);
  for (int b = 0; b < c.dim(); ++b)
    for (int cc = 0; cc < c.dim(); ++cc)
      for (int a = 0; a < c.dim(); ++a) c(b, cc, a) += block(b, cc, a);
}

}  // namespace detail

/// Built-in targets: "abelian(n)", "su2", "so3" (su2 constants, real 3x3 rep), "su2xsu2".
inline LieAlgebraSpec builtin_algebra(const std::string& name) {
  using namespace std::complex_literals;
  static const std::regex abelian_re(R"(abelian\((\d+)\))");
  std::smatch m;
  LieAlgebraSpec alg;
  alg.name = name;
  if (std::regex_match(name, m, abelian_re)) {
    int n = std::stoi(m[1]);
    if (n < 1) throw ConfigError("abelian algebra needs positive dimension: " + name);
    alg.dim = n;
    alg.C = StructureConstants(n);
    for (int a = 0; a < n; ++a) {
      CMatrix l = CMatrix::Zero(n, n);
      l(a, a) = 1i;
      alg.rep.push_back(l);
    }
  } else if (name == "su2") {
    alg.dim = 3;
    alg.C = detail::epsilon_constants(3, 0);
    alg.rep = detail::su2_generators();
  } else if (name == "so3") {
    alg.dim = 3;
    alg.C = detail::epsilon_constants(3, 0);
    // (J_a)_bc = -eps_abc
    auto eps = detail::epsilon_constants(3, 0);
    for (int a = 0; a < 3; ++a) {
      CMatrix l = CMatrix::Zero(3, 3);
      for (int b = 0; b < 3; ++b)
        for (int c = 0; c < 3; ++c) l(b, c) = -eps(a, b, c);
      alg.rep.push_back(l);
    }
  } else if (name == "su2xsu2") {
    alg.dim = 6;
    alg.C = StructureConstants(6);
    detail::add_epsilon(alg.C, 0);
    detail::add_epsilon(alg.C, 3);
    auto gens = detail::su2_generators();
    for (int f = 0; f < 2; ++f)
      for (const auto& g : gens) {
        CMatrix l = CMatrix::Zero(4, 4);
        l.block(2 * f, 2 * f, 2, 2) = g;
        alg.rep.push_back(l);
      }
  } else {
    throw ConfigError("unknown algebra name '" + name +
                      "' (expected abelian(n), su2, so3 or su2xsu2)");
  }
  return alg;
}

/// max |C_bc^a + C_cb^a|
inline double antisymmetry_residual(const LieAlgebraSpec& alg) {
  double r = 0.0;
  for (int b = 0; b < alg.dim; ++b)
    for (int c = 0; c < alg.dim; ++c)
      for (int a = 0; a < alg.dim; ++a) r = std::max(r, std::abs(alg.C(b, c, a) + alg.C(c, b, a)));
  return r;
}

/// Componentwise max of the cyclic sum C_ea^d C_bc^e + C_eb^d C_ca^e + C_ec^d C_ab^e.
inline double jacobi_residual(const LieAlgebraSpec& alg) {
  const int n = alg.dim;
  const auto& C = alg.C;
  double r = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          double s = 0.0;
          for (int e = 0; e < n; ++e)
            s += C(e, a, d) * C(b, c, e) + C(e, b, d) * C(c, a, e) + C(e, c, d) * C(a, b, e);
          r = std::max(r, std::abs(s));
        }
  return r;
}

/// max entry of [L_b, L_c] - C_bc^a L_a over all b, c; nullopt without a rep.
inline std::optional<double> rep_residual(const LieAlgebraSpec& alg) {
  if (!alg.has_rep()) return std::nullopt;
  double r = 0.0;
  for (int b = 0; b < alg.dim; ++b)
    for (int c = 0; c < alg.dim; ++c) {
      CMatrix diff = alg.rep[b] * alg.rep[c] - alg.rep[c] * alg.rep[b];
      for (int a = 0; a < alg.dim; ++a) diff -= alg.C(b, c, a) * alg.rep[a];
      r = std::max(r, diff.cwiseAbs().maxCoeff());
    }
  return r;
}

/// [u, v]^a = C_bc^a u^b v^c
inline Vector commutator(const LieAlgebraSpec& alg, const Vector& u, const Vector& v) {
  Vector w = Vector::Zero(alg.dim);
  for (int b = 0; b < alg.dim; ++b)
    for (int c = 0; c < alg.dim; ++c) {
      const double uv = u(b) * v(c);
      if (uv == 0.0) continue;
      for (int a = 0; a < alg.dim; ++a) w(a) += alg.C(b, c, a) * uv;
    }
  return w;
}

/// Matrix of ad_u: (ad_u)^a_c = C_bc^a u^b, so ad_u v = [u, v].
inline Matrix ad_matrix(const LieAlgebraSpec& alg, const Vector& u) {
  Matrix m = Matrix::Zero(alg.dim, alg.dim);
  for (int b = 0; b < alg.dim; ++b)
    for (int c = 0; c < alg.dim; ++c)
      for (int a = 0; a < alg.dim; ++a) m(a, c) += alg.C(b, c, a) * u(b);
  return m;
}

/// Generator combination u^a L_a in the matrix rep.
inline CMatrix to_rep(const LieAlgebraSpec& alg, const Vector& u) {
  if (!alg.has_rep()) throw CapabilityError("algebra '" + alg.name + "' has no matrix representation");
  CMatrix m = CMatrix::Zero(alg.rep[0].rows(), alg.rep[0].cols());
  for (int a = 0; a < alg.dim; ++a) m += u(a) * alg.rep[a];
  return m;
}

/// Cartan-Killing form g_ab = -C_ae^c C_bc^e. Zero for abelian algebras.
inline Matrix cartan_killing(const LieAlgebraSpec& alg) {
  const int n = alg.dim;
  Matrix g = Matrix::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double s = 0.0;
      for (int c = 0; c < n; ++c)
        for (int e = 0; e < n; ++e) s += alg.C(a, e, c) * alg.C(b, c, e);
      g(a, b) = -s;
    }
  return g;
}

inline Matrix checked_inverse(const Matrix& g) {
  Eigen::FullPivLU<Matrix> lu(g);
  if (!lu.isInvertible()) throw GeometryError("metric is singular");
  return lu.inverse();
}

/// Q^a_bc = -(3/2) g^ad p_e[d C_bc]^e, evaluated as -(1/2) g^ad (p_ed C_bc^e + p_eb C_cd^e + p_ec C_db^e).
/// Antisymmetry in (b, c) is imposed exactly.
inline MixedTensor torsion_tensor(const Matrix& g, const Matrix& p, const LieAlgebraSpec& alg) {
  const int n = alg.dim;
  const Matrix g_inv = checked_inverse(g);
  const auto& C = alg.C;
  // W_dbc = p_ed C_bc^e + p_eb C_cd^e + p_ec C_db^e
  Tensor3 w(n);
  for (int d = 0; d < n; ++d)
    for (int b = 0; b < n; ++b)
      for (int c = b + 1; c < n; ++c) {
        double s = 0.0;
        for (int e = 0; e < n; ++e) s += p(e, d) * C(b, c, e) + p(e, b) * C(c, d, e) + p(e, c) * C(d, b, e);
        w.at(d, b, c) = s;
      }
  MixedTensor q(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = b + 1; c < n; ++c) {
        double s = 0.0;
        for (int d = 0; d < n; ++d) s += g_inv(a, d) * w.at(d, b, c);
        q(a, b, c) = -0.5 * s;
        q(a, c, b) = 0.5 * s;
      }
  return q;
}

/// C^a_bc := g^ad C_db^e g_ec
inline MixedTensor raised_structure(const Matrix& g, const LieAlgebraSpec& alg) {
  const int n = alg.dim;
  const Matrix g_inv = checked_inverse(g);
  // t_dbc = C_db^e g_ec
  Tensor3 t(n);
  for (int d = 0; d < n; ++d)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        double s = 0.0;
        for (int e = 0; e < n; ++e) s += alg.C(d, b, e) * g(e, c);
        t.at(d, b, c) = s;
      }
  MixedTensor out(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        double s = 0.0;
        for (int d = 0; d < n; ++d) s += g_inv(a, d) * t.at(d, b, c);
        out(a, b, c) = s;
      }
  return out;
}

/// p_ab := C_ab^d g_de R^e. Its torsion vanishes by the Jacobi identity.
inline Matrix natural_p(const LieAlgebraSpec& alg, const Matrix& g, const Vector& R) {
  const int n = alg.dim;
  const Vector gR = g * R;
  Matrix p = Matrix::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double s = 0.0;
      for (int d = 0; d < n; ++d) s += alg.C(a, b, d) * gR(d);
      p(a, b) = s;
    }
  return p;
}

/// p_ab := p_a q_b - q_a p_b for a commuting, linearly independent pair (indices lowered with g).
inline Matrix commuting_pair_p(const LieAlgebraSpec& alg, const Matrix& g, const Vector& pvec,
                               const Vector& qvec) {
  const double scale = std::max(1.0, pvec.norm() * qvec.norm());
  if (commutator(alg, pvec, qvec).cwiseAbs().maxCoeff() > kRepTol * scale)
    throw ConstructionError("commuting_pair_p: vectors do not commute");
  const double pp = pvec.dot(g * pvec), qq = qvec.dot(g * qvec), pq = pvec.dot(g * qvec);
  if (pp * qq - pq * pq <= kRepTol * std::max(pp * qq, 1e-300))
    throw ConstructionError("commuting_pair_p: vectors are linearly dependent");
  const Vector pl = g * pvec, ql = g * qvec;
  return pl * ql.transpose() - ql * pl.transpose();
}

/// max |g_ae C_bc^e R^c + g_be C_ac^e R^c|; zero iff g is ad_R-invariant.
inline double check_g_invariance(const Matrix& g, const LieAlgebraSpec& alg, const Vector& R) {
  // m_ab = g_ae C_bc^e R^c = (g * ad_R^T-ish): (ad_R)^e_b = C_cb^e R^c = -C_bc^e R^c
  const Matrix m = -g * ad_matrix(alg, R);
  return (m + m.transpose()).cwiseAbs().maxCoeff();
}

/// max |p_ae C_bc^e R^c - p_be C_ac^e R^c|; zero iff p is ad_R-invariant.
inline double check_p_invariance(const Matrix& p, const LieAlgebraSpec& alg, const Vector& R) {
  const Matrix m = -p * ad_matrix(alg, R);
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

struct TorsionWitness {
  Vector s;
  double value = 0.0;
};

/// s^a = p^a (q^e q_e) - q^a (p^e q_e); value = max_bc |s^a g_ad Q^d_bc|.
inline TorsionWitness torsion_nonzero_witness(const Matrix& g, const Matrix& p, const LieAlgebraSpec& alg,
                                              const Vector& pvec, const Vector& qvec) {
  TorsionWitness w;
  w.s = pvec * qvec.dot(g * qvec) - qvec * pvec.dot(g * qvec);
  const MixedTensor q = torsion_tensor(g, p, alg);
  const Vector sl = g * w.s;
  for (int b = 0; b < alg.dim; ++b)
    for (int c = 0; c < alg.dim; ++c) {
      double v = 0.0;
      for (int d = 0; d < alg.dim; ++d) v += sl(d) * q(d, b, c);
      w.value = std::max(w.value, std::abs(v));
    }
  return w;
}

/// Metric, torsion potential and everything derived from them. Immutable once built.
struct TargetGeometry {
  Matrix g;
  Matrix g_inv;
  Matrix p;
  MixedTensor Q;
  MixedTensor C_raised;
};

/// Validates (g, p) and derives g^-1, Q and C^a_bc.
inline TargetGeometry make_geometry(const LieAlgebraSpec& alg, const Matrix& g, const Matrix& p) {
  const int n = alg.dim;
  if (g.rows() != n || g.cols() != n || p.rows() != n || p.cols() != n)
    throw GeometryError("metric and torsion potential must be " + std::to_string(n) + "x" + std::to_string(n));
  const double gs = std::max(1.0, g.cwiseAbs().maxCoeff());
  if (symmetry_defect(g, -1.0) > kAlgebraTol * gs) throw GeometryError("metric is not symmetric");
  const double ps = std::max(1.0, p.cwiseAbs().maxCoeff());
  if (symmetry_defect(p, 1.0) > kAlgebraTol * ps) throw GeometryError("torsion potential is not antisymmetric");
  TargetGeometry geom;
  geom.g = 0.5 * (g + g.transpose());
  geom.p = 0.5 * (p - p.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(geom.g, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 0.0) throw GeometryError("metric is not positive definite");
  geom.g_inv = checked_inverse(geom.g);
  geom.Q = torsion_tensor(geom.g, geom.p, alg);
  geom.C_raised = raised_structure(geom.g, alg);
  return geom;
}

/// One line of an algebra/geometry check report.
struct ResidualLine {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  /// true: value must be <= limit; false: value must be > limit.
  bool upper_bound = true;

  bool ok() const { return upper_bound ? value <= limit : value > limit; }
};

/// Every invariant of the algebra and geometry as a residual line.
/// `expect_torsion` adds a witness line that must be positive (commuting-pair construction).
inline std::vector<ResidualLine> algebra_report(const LieAlgebraSpec& alg, const TargetGeometry& geom,
                                                const Vector& R,
                                                const std::optional<std::pair<Vector, Vector>>& pair) {
  std::vector<ResidualLine> out;
  out.push_back({"antisymmetry", antisymmetry_residual(alg), 0.0, true});
  out.push_back({"jacobi", jacobi_residual(alg), kAlgebraTol, true});
  if (auto r = rep_residual(alg)) out.push_back({"rep_commutators", *r, kRepTol, true});
  Eigen::SelfAdjointEigenSolver<Matrix> eig(geom.g, Eigen::EigenvaluesOnly);
  out.push_back({"metric_min_eigenvalue", eig.eigenvalues().minCoeff(), 0.0, false});
  out.push_back({"p_antisymmetry", symmetry_defect(geom.p, 1.0), 0.0, true});
  double qa = 0.0;
  for (int a = 0; a < alg.dim; ++a)
    for (int b = 0; b < alg.dim; ++b)
      for (int c = 0; c < alg.dim; ++c) qa = std::max(qa, std::abs(geom.Q(a, b, c) + geom.Q(a, c, b)));
  out.push_back({"Q_antisymmetry", qa, 0.0, true});
  out.push_back({"Q_consistency", (geom.Q - torsion_tensor(geom.g, geom.p, alg)).max_abs(), kAlgebraTol, true});
  out.push_back({"Q_max_abs", geom.Q.max_abs(), std::numeric_limits<double>::infinity(), true});
  if (R.size() == alg.dim && R.cwiseAbs().maxCoeff() > 0.0) {
    const double s = std::max(1.0, geom.g.cwiseAbs().maxCoeff() * R.norm());
    out.push_back({"g_invariance", check_g_invariance(geom.g, alg, R), kAlgebraTol * s, true});
    const double sp = std::max(1.0, geom.p.cwiseAbs().maxCoeff() * R.norm());
    out.push_back({"p_invariance", check_p_invariance(geom.p, alg, R), kAlgebraTol * sp, true});
  }
  if (pair) {
    auto w = torsion_nonzero_witness(geom.g, geom.p, alg, pair->first, pair->second);
    // dimension three cannot carry torsion, so the witness must vanish there
    if (alg.dim > 3)
      out.push_back({"torsion_witness", w.value, 0.0, false});
    else
      out.push_back({"torsion_witness", w.value, kAlgebraTol * std::max(1.0, w.s.norm()), true});
  }
  return out;
}

}  // namespace twm
