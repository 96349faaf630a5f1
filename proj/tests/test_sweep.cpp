#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "etmsim/sweep.hpp"

using namespace etmsim;
namespace fs = std::filesystem;

namespace {

SweepPlan small_plan(unsigned jobs = 1) {
    SweepPlan plan;
    plan.t_values = AxisSpec{AxisSpacing::log, 1e-4, 0.3, 3}.values();
    plan.sigma_values = AxisSpec{AxisSpacing::log, 0.5, 2.0, 2}.values();
    plan.base.grid.n_points = 24;
    plan.base.grid.q_points = 256;
    plan.convergence.max_points = 60;
    plan.jobs = jobs;
    return plan;
}

fs::path temp_file(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("etmsim_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove(p);
    return p;
}

std::vector<std::string> lines_of(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

} // namespace

TEST(Axis, LogAndLinearEndpoints) {
    const auto log = AxisSpec{AxisSpacing::log, 1e-5, 1e-2, 4}.values();
    ASSERT_EQ(log.size(), 4u);
    EXPECT_DOUBLE_EQ(log[0], 1e-5);
    EXPECT_EQ(log[3], 1e-2);
    EXPECT_NEAR(log[1], 1e-4, 1e-18);
    const auto lin = AxisSpec{AxisSpacing::linear, 0.0, 1.0, 5}.values();
    EXPECT_DOUBLE_EQ(lin[2], 0.5);
    EXPECT_FALSE(AxisSpec({AxisSpacing::log, 0.0, 1.0, 3}).validate("t").empty());
    EXPECT_FALSE(AxisSpec({AxisSpacing::linear, 2.0, 1.0, 3}).validate("t").empty());
}

TEST(Heatmap, RowOrderAndValues) {
    const auto plan = small_plan();
    const auto result = run_heatmap(plan);
    ASSERT_EQ(result.rows.size(), 6u);
    EXPECT_EQ(result.computed, 6u);
    EXPECT_FALSE(result.partial());
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(result.rows[i].T_I, plan.t_values[i / 2]);
        EXPECT_EQ(result.rows[i].sigma_e, plan.sigma_values[i % 2]);
        EXPECT_NEAR(result.rows[i].kappa, std::exp2(result.rows[i].h2), 1e-10 * result.rows[i].kappa);
        EXPECT_GE(result.rows[i].kappa, 1.0 - 1e-12);
    }
    const std::string csv = heatmap_csv(result);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "T_I,sigma_e,H2,kappa,converged");
}

TEST(Heatmap, ByteIdenticalAcrossJobCounts) {
    EXPECT_EQ(heatmap_csv(run_heatmap(small_plan(1))), heatmap_csv(run_heatmap(small_plan(4))));
}

TEST(Heatmap, ResumesFromTornCheckpoint) {
    const auto path = temp_file("resume");
    const auto plan = small_plan();
    const std::string full = heatmap_csv(run_heatmap(plan, path));
    auto lines = lines_of(path);
    ASSERT_EQ(lines.size(), 6u);
    {
        std::ofstream out(path, std::ios::trunc);
        out << lines[0] << '\n' << lines[1] << '\n' << lines[2] << '\n';
        out << lines[3].substr(0, lines[3].size() / 2); // interrupted mid-write
    }
    const auto resumed = run_heatmap(plan, path);
    EXPECT_EQ(resumed.resumed, 3u);
    EXPECT_EQ(resumed.computed, 3u);
    EXPECT_EQ(heatmap_csv(resumed), full);

    const auto again = run_heatmap(plan, path);
    EXPECT_EQ(again.resumed, 6u);
    EXPECT_EQ(again.computed, 0u);
    fs::remove(path);
}

TEST(PathCut, SinglePointMatchesHeatmapRow) {
    auto plan = small_plan();
    const auto heat = run_heatmap(plan);
    plan.path = {{plan.t_values[2], plan.sigma_values[1]}};
    const auto cut = run_path_cut(plan);
    ASSERT_EQ(cut.rows.size(), 1u);
    EXPECT_EQ(cut.rows[0].kappa, heat.rows[5].kappa);
}

TEST(PathCut, ConstantAndDuplicatedPoints) {
    auto plan = small_plan();
    plan.path = {{1e-2, 1.0}, {1e-2, 1.0}, {1e-2, 1.0}, {0.1, 2.0}, {1e-2, 1.0}};
    const auto cut = run_path_cut(plan);
    ASSERT_EQ(cut.rows.size(), 5u);
    for (std::size_t i : {1u, 2u, 4u}) EXPECT_EQ(cut.rows[i].kappa, cut.rows[0].kappa);
    const std::string csv = cut_csv(cut);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "arc_index,T_I,sigma_e,kappa");
    EXPECT_NE(csv.find("\n4,"), std::string::npos);
}

TEST(PathCut, EmptyPathIsAnError) {
    auto plan = small_plan();
    plan.path.clear();
    EXPECT_THROW(run_path_cut(plan), DomainError);
}

TEST(Sweep, InvalidPointsAreRejectedUpFront) {
    auto plan = small_plan();
    plan.sigma_values.push_back(-1.0);
    try {
        run_heatmap(plan);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("sigma_e"), std::string::npos);
    }
}

TEST(Sweep, PointFailuresAreRecordedPerRow) {
    auto plan = small_plan();
    plan.base.grid.q_half_window = 0.5; // cuts through the chi lobes
    const auto result = run_heatmap(plan);
    ASSERT_EQ(result.rows.size(), 6u);
    EXPECT_TRUE(result.partial());
    for (const auto& r : result.rows) {
        EXPECT_FALSE(r.error.empty());
        EXPECT_TRUE(std::isnan(r.kappa));
    }
    EXPECT_NE(heatmap_csv(result).find("nan"), std::string::npos);
}
