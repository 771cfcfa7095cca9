// No step of a fit may materialize an n x n matrix.

#include <gtest/gtest.h>

#include "alloc_probe.hpp"
#include "pspline/cli.hpp"
#include "pspline/sim.hpp"

using namespace pspline;

TEST(Memory, FullFitStaysLinearInN) {
  ScenarioConfig sc;
  sc.n = 1000;
  const SimDataset sim = generate_dataset(sc, 0);
  Dataset data;
  data.column_names = {"y", "x1", "x2"};
  for (std::size_t i = 0; i < sim.x1.size(); ++i)
    data.rows.push_back({sim.y[static_cast<Eigen::Index>(i)], sim.x1[i], sim.x2[i]});
  FitConfig cfg;
  cfg.y = "y";
  cfg.x1 = "x1";
  cfg.x2 = "x2";

  FitOutcome out;
  ReplicationOutcome rep;
  const std::size_t largest = alloc_probe::largest_allocation([&] {
    out = fit_dataset(data, cfg);
    rep = replicate(sc, 0);
  });

  ASSERT_EQ(out.exit_code, kExitOk);
  ASSERT_TRUE(rep.accepted);
  const std::size_t n = sc.n;
  EXPECT_LT(largest, n * n * sizeof(double) / 16) << "largest request " << largest << " bytes";
  EXPECT_GE(largest, n * sizeof(double));  // the probe saw the n-vectors
}

TEST(Memory, ProbeSeesDenseEigenMatrices) {
  const std::size_t largest = alloc_probe::largest_allocation([] {
    Eigen::MatrixXd big(1000, 1000);
    big.setZero();
    asm volatile("" : : "g"(big.data()) : "memory");  // keep the buffer alive
  });
  EXPECT_GE(largest, 1000u * 1000u * sizeof(double));
}
