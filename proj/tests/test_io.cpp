#include "interp_lab/io.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <filesystem>
#include <fstream>

using namespace ilab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "interp_lab_io_test";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream f(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(f, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Io, BatchRoundTrip) {
  auto b = sample_target(Target{BimodalGmmTarget::ones(7, 0.3)}, 33, 4);
  b.t = 0.625;
  b.states(0, 0) = std::nextafter(1.0, 2.0);
  const auto p = scratch("batch.bin");
  io::write_batch(p, b);
  const auto r = io::read_batch(p);
  EXPECT_EQ(r.size(), 33);
  EXPECT_EQ(r.dim(), 7);
  EXPECT_EQ(r.t, 0.625);
  EXPECT_EQ(r.seed, b.seed);
  EXPECT_TRUE(r.states == b.states);
  EXPECT_EQ(fs::file_size(p), 8u + 32u + 33u * 7u * 8u);
}

TEST(Io, BatchRejectsBadInput) {
  const auto p = scratch("bad.bin");
  {
    std::ofstream f(p, std::ios::binary);
    f << "NOTABATCH and more";
  }
  EXPECT_THROW(io::read_batch(p), Error);
  EXPECT_THROW(io::read_trajectory(p), Error);

  const auto b = sample_noise(Target{GaussianTarget::diagonal({1.0, 1.0})}, 10, 1);
  const auto full = scratch("full.bin");
  io::write_batch(full, b);
  fs::resize_file(full, fs::file_size(full) - 8);
  EXPECT_THROW(io::read_batch(full), Error);
  EXPECT_THROW(io::read_batch(scratch("missing.bin")), Error);
}

TEST(Io, TrajectoryRoundTrip) {
  const auto z = sample_noise(Target{GaussianTarget::diagonal({1.0, 2.0})}, 6, 2);
  IntegratorConfig cfg;
  cfg.steps = 3;
  cfg.store_trajectory = true;
  Trajectory tr;
  integrate_ode(gaussian_drift(Schedule::linear(), GaussianTarget::diagonal({1.0, 2.0})), z, cfg, &tr);
  const auto p = scratch("traj.bin");
  io::write_trajectory(p, tr);
  const auto r = io::read_trajectory(p);
  ASSERT_EQ(r.frames.size(), tr.frames.size());
  EXPECT_EQ(r.step, tr.step);
  EXPECT_EQ(r.t, tr.t);
  for (std::size_t k = 0; k < tr.frames.size(); ++k) EXPECT_TRUE(r.frames[k] == tr.frames[k]);
}

TEST(Io, BatchCsv) {
  const auto b = sample_noise(Target{GaussianTarget::diagonal({1.0, 1.0, 1.0})}, 4, 2);
  const auto p = scratch("batch.csv");
  io::write_batch_csv(p, b);
  const auto l = lines(p);
  ASSERT_EQ(l.size(), 5u);
  EXPECT_EQ(l[0], "x0,x1,x2");
  EXPECT_EQ(std::stod(l[1].substr(0, l[1].find(','))), b.states(0, 0));
  const auto wide = sample_noise(Target{GaussianTarget::diagonal({1, 1, 1, 1, 1})}, 2, 2);
  EXPECT_THROW(io::write_batch_csv(p, wide), ShapeError);
}

TEST(Io, ScheduleCsvRoundTrip) {
  std::vector<double> t, beta;
  for (int i = 0; i <= 50; ++i) {
    t.push_back(i / 50.0);
    beta.push_back(std::sin(0.5 * std::numbers::pi * t.back()));
  }
  const TabulatedSchedule s(t, beta);
  const auto p = scratch("schedule.csv");
  io::write_schedule_csv(p, s);
  const auto r = io::read_schedule_csv(p);
  EXPECT_TRUE(std::ranges::equal(r.t_grid(), s.t_grid()));
  EXPECT_TRUE(std::ranges::equal(r.beta_grid(), s.beta_grid()));
  for (double u : {0.013, 0.5, 0.77}) EXPECT_EQ(r.eval(u).beta, s.eval(u).beta);

  {
    std::ofstream f(p);
    f << "time,beta\n0,0\n1,1\n";
  }
  EXPECT_THROW(io::read_schedule_csv(p), ParameterError);
  {
    std::ofstream f(p);
    f << "t,beta\n0,0\nhalf,0.5\n1,1\n";
  }
  EXPECT_THROW(io::read_schedule_csv(p), ParameterError);
  {
    std::ofstream f(p);
    f << "t,beta\n0,0\n0.5,0.7\n0.6,0.6\n1,1\n";
  }
  EXPECT_THROW(io::read_schedule_csv(p), ParameterError);
}

TEST(Io, SpectrumAndLipReport) {
  SpectrumReport s;
  s.k = {0, 1, 2};
  s.energy = {0.0, 1.0 / 3.0, 2.5};
  const auto p = scratch("spectrum.csv");
  io::write_spectrum_csv(p, s);
  const auto l = lines(p);
  ASSERT_EQ(l.size(), 4u);
  EXPECT_EQ(l[0], "k,energy");
  EXPECT_EQ(std::stod(l[2].substr(2)), 1.0 / 3.0);

  LipReport r;
  r.a2 = 6.5;
  r.t_grid_size = 128;
  const auto q = scratch("lip.csv");
  io::write_lip_report(q, r);
  const auto m = lines(q);
  ASSERT_EQ(m.size(), 6u);
  EXPECT_EQ(m[0], "key,value");
  EXPECT_EQ(m[1], "a2_estimate,6.5");
  EXPECT_EQ(m[3], "t_grid_size,128");
}
