#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "contilora/tasks.hpp"

using namespace contilora;

TEST_CASE("regression suite determinism and self-consistency") {
    const TaskSuite s1 = make_regression_suite(5, 3, 256, 64);
    const TaskSuite s2 = make_regression_suite(5, 3, 256, 64);
    REQUIRE(s1.tasks.size() == 3);
    for (std::size_t t = 0; t < 3; ++t) {
        const TaskSpec& a = s1.tasks[t];
        const TaskSpec& b = s2.tasks[t];
        REQUIRE(a.train_x.size() == b.train_x.size());
        for (std::size_t i = 0; i < a.train_x.size(); ++i) {
            CHECK(a.train_x.data()[i] == b.train_x.data()[i]);
        }
        for (std::size_t i = 0; i < a.train_y.size(); ++i) {
            CHECK(a.train_y.data()[i] == b.train_y.data()[i]);
        }
        // Teacher reproduces its own targets exactly.
        REQUIRE(a.teacher_spec.has_value());
        const Matrix pred = forward(*a.teacher_spec, *a.teacher_params, a.eval_x,
                                    AdapterMode::base_only);
        CHECK(mse_loss(pred, a.eval_y) == doctest::Approx(0.0).epsilon(1e-18));
        // Inputs live in [-1, 1]^d.
        for (std::size_t i = 0; i < a.train_x.size(); ++i) {
            CHECK(a.train_x.data()[i] >= -1.0);
            CHECK(a.train_x.data()[i] <= 1.0);
        }
    }
    CHECK_THROWS_AS(make_regression_suite(5, 1), UsageError);
}

TEST_CASE("teachers share a backbone but differ per task") {
    const TaskSuite s = make_regression_suite(9, 3, 128, 32);
    const Params& p0 = *s.tasks[0].teacher_params;
    const Params& p1 = *s.tasks[1].teacher_params;
    // First layer (backbone) identical, last layer (head) different.
    bool backbone_same = true;
    for (std::size_t i = 0; i < p0[0].base_weight.size(); ++i) {
        backbone_same &= p0[0].base_weight.data()[i] == p1[0].base_weight.data()[i];
    }
    CHECK(backbone_same);
    bool head_same = true;
    for (std::size_t i = 0; i < p0.back().base_weight.size(); ++i) {
        head_same &= p0.back().base_weight.data()[i] == p1.back().base_weight.data()[i];
    }
    CHECK_FALSE(head_same);
}

TEST_CASE("toy diffusion suite standardization") {
    const TaskSuite s = make_toy_diffusion_suite(11, 4, 2048, 256);
    REQUIRE(s.tasks.size() == 4);
    CHECK(s.schedule.steps == 50);
    s.schedule.validate();
    for (const TaskSpec& t : s.tasks) {
        CHECK(t.kind == SuiteKind::diffusion);
        const Matrix& x = t.train_x;
        REQUIRE(x.cols() == 2);
        double mx = 0.0, my = 0.0, rms = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            mx += x.at(i, 0);
            my += x.at(i, 1);
        }
        mx /= static_cast<double>(x.rows());
        my /= static_cast<double>(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) {
            const double dx = x.at(i, 0) - mx;
            const double dy = x.at(i, 1) - my;
            rms += dx * dx + dy * dy;
        }
        rms = std::sqrt(rms / static_cast<double>(x.rows()));
        CHECK(std::abs(mx) < 1e-2);
        CHECK(std::abs(my) < 1e-2);
        CHECK(rms == doctest::Approx(1.0).epsilon(0.05));
    }
    CHECK_THROWS_AS(make_toy_diffusion_suite(1, 9), UsageError);
    CHECK_THROWS_AS(make_toy_diffusion_suite(1, 1), UsageError);
}

TEST_CASE("ring task radius statistics") {
    // First menu entry is the ring; its standardized radius mean stays near 1.
    const TaskSuite s = make_toy_diffusion_suite(3, 2, 10000, 64);
    const Matrix& x = s.tasks[0].train_x;
    double mean_r = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        mean_r += std::hypot(x.at(i, 0), x.at(i, 1));
    }
    mean_r /= static_cast<double>(x.rows());
    CHECK(mean_r == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("suite generation is deterministic bit for bit") {
    const TaskSuite a = make_toy_diffusion_suite(21, 3, 512, 128);
    const TaskSuite b = make_toy_diffusion_suite(21, 3, 512, 128);
    for (std::size_t t = 0; t < 3; ++t) {
        for (std::size_t i = 0; i < a.tasks[t].train_x.size(); ++i) {
            CHECK(a.tasks[t].train_x.data()[i] == b.tasks[t].train_x.data()[i]);
        }
    }
}

TEST_CASE("sample_batch contract") {
    const TaskSuite s = make_regression_suite(7, 2, 64, 16);
    SeededRng r1(3), r2(3);
    const Matrix b1 = sample_batch(s.tasks[0], 8, r1);
    const Matrix b2 = sample_batch(s.tasks[0], 8, r2);
    CHECK(b1.rows() == 8);
    for (std::size_t i = 0; i < b1.size(); ++i) CHECK(b1.data()[i] == b2.data()[i]);
    CHECK_THROWS_AS(sample_batch(s.tasks[0], 0, r1), UsageError);
}

TEST_CASE("eval_performance is deterministic and orders perturbations") {
    const TaskSuite s = make_regression_suite(13, 2, 128, 64);
    // Evaluate the teacher of task 0 as the continual network itself.
    const TaskSpec& t0 = s.tasks[0];
    TaskSuite probe = s;
    probe.student_spec = *t0.teacher_spec;
    const double perfect =
        eval_performance(*t0.teacher_spec, *t0.teacher_params, probe, 0, AdapterMode::base_only);
    CHECK(perfect == doctest::Approx(0.0).epsilon(1e-18));

    SeededRng rng(99);
    for (int k = 0; k < 10; ++k) {
        Params worse = *t0.teacher_params;
        for (auto& lp : worse) {
            for (std::size_t i = 0; i < lp.base_weight.size(); ++i) {
                lp.base_weight.data()[i] += 0.5 * rng.normal();
            }
        }
        const double perturbed =
            eval_performance(*t0.teacher_spec, worse, probe, 0, AdapterMode::base_only);
        CHECK(perturbed < perfect);
    }

    // Diffusion scoring repeats bit-identically.
    const TaskSuite d = make_toy_diffusion_suite(5, 2, 256, 64);
    SeededRng init = SeededRng::derive(1, 50);
    const Params params = init_params(d.student_spec, init);
    const double e1 = eval_performance(d.student_spec, params, d, 0, AdapterMode::base_only);
    const double e2 = eval_performance(d.student_spec, params, d, 0, AdapterMode::base_only);
    CHECK(e1 == e2);
}

TEST_CASE("tasks are mutually distinguishable") {
    const TaskSuite s = make_regression_suite(17, 3, 256, 128);
    for (std::size_t i = 0; i < 3; ++i) {
        TaskSuite probe = s;
        probe.student_spec = *s.tasks[i].teacher_spec;
        for (std::size_t j = 0; j < 3; ++j) {
            const double score = eval_performance(*s.tasks[i].teacher_spec,
                                                  *s.tasks[i].teacher_params, probe, j,
                                                  AdapterMode::base_only);
            if (i == j) {
                CHECK(score == doctest::Approx(0.0).epsilon(1e-18));
            } else {
                CHECK(score < -1e-3);  // far above the (zero) eval noise floor
            }
        }
    }
}

TEST_CASE("suite export/import round trip") {
    namespace fs = std::filesystem;
    const std::string dir = (fs::temp_directory_path() / "contilora_suite_rt").string();
    fs::remove_all(dir);
    const TaskSuite s = make_toy_diffusion_suite(29, 3, 128, 64);
    export_suite(s, dir);
    const TaskSuite r = import_suite(dir);
    CHECK(r.kind == s.kind);
    CHECK(r.seed == s.seed);
    REQUIRE(r.tasks.size() == s.tasks.size());
    CHECK(r.schedule.steps == s.schedule.steps);
    for (std::size_t t = 0; t < s.tasks.size(); ++t) {
        CHECK(r.tasks[t].name == s.tasks[t].name);
        CHECK(r.tasks[t].eval_noise_seed == s.tasks[t].eval_noise_seed);
        REQUIRE(r.tasks[t].train_x.size() == s.tasks[t].train_x.size());
        for (std::size_t i = 0; i < s.tasks[t].train_x.size(); ++i) {
            CHECK(r.tasks[t].train_x.data()[i] == s.tasks[t].train_x.data()[i]);
        }
        for (std::size_t i = 0; i < s.tasks[t].eval_x.size(); ++i) {
            CHECK(r.tasks[t].eval_x.data()[i] == s.tasks[t].eval_x.data()[i]);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("noise schedule invariants") {
    const NoiseSchedule sch = linear_schedule();
    CHECK(sch.steps == 50);
    CHECK(sch.betas.front() == doctest::Approx(1e-4));
    CHECK(sch.betas.back() == doctest::Approx(0.05));
    double prev = 1.0;
    for (double ab : sch.alpha_bars) {
        CHECK(ab > 0.0);
        CHECK(ab < prev);
        prev = ab;
    }
    CHECK_THROWS_AS(linear_schedule(0), UsageError);
}
