#include "evohom/errors.hpp"
#include "evohom/unit_cell.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

using namespace evohom;

namespace {

const TransformParams kParams{};

double a11(const PeriodicMesh& m, const RadialProfile& prof, double r, CellMode mode) {
  const CellProblem p(m, prof, r, mode);
  return p.effective_tensor({p.solve(0), p.solve(1)})[0][0];
}

} // namespace

TEST(CellProblem, TransformedAtReferenceRadiusEqualsDirect) {
  const RadialProfile prof(kParams);
  const auto mesh = build_reference_mesh(kParams.r0, 64, 0.05);
  for (int j = 0; j < 2; ++j) {
    const auto d = solve_cell_problem(mesh, prof, kParams.r0, CellMode::direct, j);
    const auto t = solve_cell_problem(mesh, prof, kParams.r0, CellMode::transformed, j);
    for (std::size_t v = 0; v < d.w.size(); ++v)
      EXPECT_NEAR(d.w[v], t.w[v], 1e-12);
  }
}

TEST(CellProblem, CorrectorsRelatedByCoordinateSwap) {
  const RadialProfile prof(kParams);
  const auto mesh = build_reference_mesh(kParams.r0, 80, 0.05);
  std::map<std::pair<double, double>, std::size_t> index;
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
    index[{mesh.vertices[v][0], mesh.vertices[v][1]}] = v;
  for (double r : {0.25, 0.31}) {
    const CellProblem p(mesh, prof, r, CellMode::transformed);
    const auto w1 = p.solve(0), w2 = p.solve(1);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
      const auto it = index.find({mesh.vertices[v][1], mesh.vertices[v][0]});
      ASSERT_NE(it, index.end());
      EXPECT_NEAR(w1.w[v], w2.w[it->second], 1e-8);
    }
  }
}

TEST(CellProblem, ZeroMeanAndPeriodic) {
  const RadialProfile prof(kParams);
  const auto mesh = build_reference_mesh(kParams.r0, 64, 0.05);
  const auto s = solve_cell_problem(mesh, prof, 0.2, CellMode::transformed, 0);
  std::vector<double> by_dof(static_cast<std::size_t>(mesh.n_dofs));
  for (std::size_t v = 0; v < s.w.size(); ++v)
    by_dof[static_cast<std::size_t>(mesh.dof[v])] = s.w[v];
  EXPECT_LT(std::fabs(mean(by_dof)), 1e-12);
  for (const auto& [a, b] : mesh.periodic_pairs)
    EXPECT_EQ(s.w[a], s.w[b]);
  EXPECT_TRUE(s.report.converged);
}

TEST(CellProblem, ResidualOrthogonalToPeriodicTestVectors) {
  const RadialProfile prof(kParams);
  const auto mesh = build_reference_mesh(kParams.r0, 80, 0.05);
  const CellProblem p(mesh, prof, 0.33, CellMode::transformed);
  const auto w = p.solve(1);
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> phi(static_cast<std::size_t>(mesh.n_dofs));
    for (double& x : phi)
      x = u(gen);
    EXPECT_LE(std::fabs(p.residual_against(w, phi)), 1e-9);
  }
}

TEST(CellProblem, RejectsMismatchedMesh) {
  const RadialProfile prof(kParams);
  const auto mesh = build_reference_mesh(kParams.r0, 64, 0.05);
  EXPECT_THROW(CellProblem(mesh, prof, 0.2, CellMode::direct), DomainError);
  EXPECT_THROW(CellProblem(mesh, prof, 0.4, CellMode::transformed), DomainError);
  const auto other = build_reference_mesh(0.2, 64, 0.05);
  EXPECT_THROW(CellProblem(other, prof, 0.2, CellMode::transformed), DomainError);
}

TEST(EffectiveTensor, IsotropicAndBelowVoigtBound) {
  const RadialProfile prof(kParams);
  const auto mesh = build_reference_mesh(kParams.r0, 80, 0.05);
  for (double r : linear_grid(kParams.r_min, kParams.r_max, 7)) {
    const CellProblem p(mesh, prof, r, CellMode::transformed);
    const auto a = p.effective_tensor({p.solve(0), p.solve(1)});
    EXPECT_EQ(a[0][1], a[1][0]);
    EXPECT_LE(std::fabs(a[0][1]), 1e-6);
    EXPECT_NEAR(a[0][0], a[1][1], 1e-9);
    EXPECT_LE(a[0][0], porosity(r));
    EXPECT_GT(a[0][0], 0.0);
  }
}

TEST(EffectiveTensor, FineMeshOracleAndModeAgreement) {
  const RadialProfile prof(kParams);
  const auto fine = build_reference_mesh(0.25, MeshSettings::for_spacing(0.01));
  const double oracle = a11(fine, prof, 0.25, CellMode::direct);
  const auto coarse = build_reference_mesh(0.25, MeshSettings::for_spacing(0.05));
  EXPECT_NEAR(a11(coarse, prof, 0.25, CellMode::direct) / oracle, 1.0, 0.01);

  const auto settings = MeshSettings::for_spacing(0.03);
  const auto reference = build_reference_mesh(kParams.r0, settings);
  for (double r : {0.15, 0.25, 0.35}) {
    const double t = a11(reference, prof, r, CellMode::transformed);
    const double d = a11(build_reference_mesh(r, settings), prof, r, CellMode::direct);
    EXPECT_NEAR(t / d, 1.0, 0.005) << r;
  }
}

TEST(EffectiveTensor, MeshRefinementOrder) {
  const RadialProfile prof(kParams);
  std::vector<double> a;
  for (double h : {0.1, 0.05, 0.025}) {
    const auto m = build_reference_mesh(kParams.r0, MeshSettings::for_spacing(h));
    a.push_back(a11(m, prof, 0.3, CellMode::transformed));
  }
  const double order = std::log2(std::fabs(a[0] - a[1]) / std::fabs(a[1] - a[2]));
  EXPECT_GE(order, 1.5);
}

TEST(Porosity, ClosedForms) {
  EXPECT_NEAR(porosity(0.25), 1.0 - std::numbers::pi / 16.0, 1e-15);
  EXPECT_NEAR(porosity(0.25), 0.80365, 1e-5);
  EXPECT_NEAR(obstacle_surface(0.25), std::numbers::pi / 2.0, 1e-15);
}

TEST(TensorTable, LookupInterpolatesAndClamps) {
  const EffectiveTensorTable t({{0.1, {{{1.0, 0.0}, {0.0, 2.0}}}, porosity(0.1), obstacle_surface(0.1)},
                                {0.2, {{{0.5, 0.1}, {0.1, 1.0}}}, porosity(0.2), obstacle_surface(0.2)},
                                {0.3, {{{0.2, 0.0}, {0.0, 0.4}}}, porosity(0.3), obstacle_surface(0.3)}});
  const auto at = t.lookup(0.2);
  EXPECT_EQ(at.a_hom[0][0], 0.5);
  EXPECT_EQ(at.a_hom[0][1], 0.1);
  const auto mid = t.lookup(0.15);
  EXPECT_NEAR(mid.a_hom[0][0], 0.75, 1e-15);
  EXPECT_NEAR(mid.a_hom[1][1], 1.5, 1e-15);
  EXPECT_NEAR(mid.a_hom[0][1], 0.05, 1e-15);
  EXPECT_FALSE(mid.clamped);
  EXPECT_NEAR(t.lookup(0.25).dtheta_dr, -std::numbers::pi / 2.0, 1e-15);
  const auto out = t.lookup(0.35);
  EXPECT_TRUE(out.clamped);
  EXPECT_EQ(out.a_hom[0][0], 0.2);
  EXPECT_EQ(t.clamp_count(), 1u);
  EXPECT_THROW(EffectiveTensorTable({{0.1, {}, 0.0, 0.0}}), ConfigError);
}

TEST(TensorTable, TabulateDefaultGrid) {
  const auto table = tabulate(kParams, linear_grid(kParams.r_min, kParams.r_max, 11), MeshSettings::for_spacing(0.05));
  ASSERT_EQ(table.entries().size(), 11u);
  const auto checks = check_table(table);
  for (const auto& c : checks.checks)
    EXPECT_TRUE(c.passed) << c.name << " " << c.measured;
  for (std::size_t i = 1; i < table.entries().size(); ++i)
    EXPECT_LT(table.entries()[i].a_hom[0][0], table.entries()[i - 1].a_hom[0][0]);
}

TEST(TensorTable, CsvRoundTripIsExact) {
  const auto table = tabulate(kParams, linear_grid(kParams.r_min, kParams.r_max, 5), MeshSettings::for_spacing(0.1));
  std::stringstream ss;
  table.write_csv(ss);
  const std::string first = ss.str();
  const auto back = EffectiveTensorTable::read_csv(ss);
  ASSERT_EQ(back.entries().size(), table.entries().size());
  for (std::size_t i = 0; i < back.entries().size(); ++i) {
    EXPECT_EQ(back.entries()[i].r, table.entries()[i].r);
    EXPECT_EQ(back.entries()[i].a_hom, table.entries()[i].a_hom);
    EXPECT_EQ(back.entries()[i].theta, table.entries()[i].theta);
  }
  std::stringstream again;
  back.write_csv(again);
  EXPECT_EQ(again.str(), first);
}

TEST(TensorTable, RejectsBadInput) {
  EXPECT_THROW(tabulate(kParams, {0.2, 0.25, 0.3}, MeshSettings::for_spacing(0.1)), ConfigError);
  EXPECT_THROW(tabulate(kParams, {0.1, 0.2, 0.25, 0.3, 0.35}, MeshSettings::for_spacing(0.1)), ConfigError);
  std::stringstream bad("r,A11\n0.1,1\n");
  EXPECT_THROW(EffectiveTensorTable::read_csv(bad), ConfigError);
  std::stringstream garbage("r,A11,A12,A22,theta\n0.1,x,0,1,0.9\n0.2,1,0,1,0.8\n");
  EXPECT_THROW(EffectiveTensorTable::read_csv(garbage), ConfigError);
}

TEST(TensorTable, CheckFlagsViolations) {
  auto entries = EffectiveTensorTable::isotropic(0.5, {0.15, 0.2, 0.25}).entries();
  entries[1].a_hom[0][0] = 0.6;
  entries[2].a_hom[0][1] = 1e-3;
  entries[2].a_hom[1][0] = 1e-3;
  const auto checks = check_table(EffectiveTensorTable(entries));
  EXPECT_FALSE(checks.find("tensor_decreasing")->passed);
  EXPECT_FALSE(checks.find("tensor_offdiagonal")->passed);
  EXPECT_EQ(checks.find("tensor_offdiagonal")->witness, "r=0.25");
}
