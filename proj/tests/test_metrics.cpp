#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "contilora/history.hpp"
#include "contilora/metrics.hpp"

using namespace contilora;

namespace {

TaskCheckpoint checkpoint_with(std::vector<LoraAdapter> adapters, int task_id) {
    TaskCheckpoint cp;
    cp.task_id = task_id;
    cp.adapters = std::move(adapters);
    return cp;
}

LoraAdapter noisy_adapter(std::size_t d_out, std::size_t d_in, std::size_t r, int task_id,
                          SeededRng& rng) {
    LoraAdapter ad = init_adapter(d_out, d_in, r, task_id, rng);
    for (std::size_t i = 0; i < ad.b.size(); ++i) ad.b.data()[i] = rng.normal();
    return ad;
}

}  // namespace

TEST_CASE("compute_metrics hand cases") {
    SUBCASE("constant matrix") {
        Matrix perf(3, 3);
        for (std::size_t i = 0; i < perf.size(); ++i) perf.data()[i] = -0.4;
        const MetricsReport m = compute_metrics(perf);
        CHECK(m.last == doctest::Approx(-0.4).epsilon(1e-15));
        CHECK(m.avg == doctest::Approx(-0.4).epsilon(1e-15));
        CHECK(m.bwt == doctest::Approx(0.0).epsilon(1e-15));
        REQUIRE(m.imm.size() == 3);
        for (double v : m.imm) CHECK(v == -0.4);
        for (double v : m.per_task_last) CHECK(v == -0.4);
    }

    SUBCASE("two-task forgetting") {
        // After task 0: scores (1, _). After task 1: (0.5, 1).
        Matrix perf(2, 2);
        perf.at(0, 0) = 1.0;
        perf.at(0, 1) = -9.0;  // unseen entry, outside the averaged region
        perf.at(1, 0) = 0.5;
        perf.at(1, 1) = 1.0;
        const MetricsReport m = compute_metrics(perf);
        CHECK(m.last == doctest::Approx(0.75).epsilon(1e-15));
        // avg = (1 + (0.5 + 1)/2) / 2
        CHECK(m.avg == doctest::Approx(0.875).epsilon(1e-15));
        CHECK(m.bwt == doctest::Approx(-0.5).epsilon(1e-15));
        CHECK(m.imm[0] == 1.0);
        CHECK(m.imm[1] == 1.0);
    }

    SUBCASE("no forgetting with rising diagonal") {
        Matrix perf(3, 3);
        perf.at(0, 0) = 0.1;
        perf.at(1, 0) = 0.1; perf.at(1, 1) = 0.2;
        perf.at(2, 0) = 0.1; perf.at(2, 1) = 0.2; perf.at(2, 2) = 0.3;
        const MetricsReport m = compute_metrics(perf);
        CHECK(m.bwt == doctest::Approx(0.0).epsilon(1e-15));
        CHECK(m.last == doctest::Approx(0.2).epsilon(1e-15));
        CHECK(m.avg == doctest::Approx((0.1 + 0.15 + 0.2) / 3.0).epsilon(1e-14));
    }

    CHECK_THROWS_AS(compute_metrics(Matrix(2, 3)), DimensionError);
}

TEST_CASE("similarity matrix is symmetric with unit diagonal") {
    SeededRng rng(5);
    std::vector<TaskCheckpoint> cps;
    for (int t = 0; t < 3; ++t) {
        std::vector<LoraAdapter> per_layer;
        per_layer.push_back(noisy_adapter(6, 4, 2, t, rng));
        per_layer.push_back(noisy_adapter(3, 6, 2, t, rng));
        cps.push_back(checkpoint_with(std::move(per_layer), t));
    }
    for (AdapterSide side : {AdapterSide::a, AdapterSide::b}) {
        const Matrix sim = lora_similarity_analysis(cps, side);
        REQUIRE(sim.rows() == 3);
        REQUIRE(sim.cols() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(sim.at(i, i) == doctest::Approx(1.0).epsilon(1e-12));
            for (std::size_t j = 0; j < 3; ++j) {
                CHECK(sim.at(i, j) == doctest::Approx(sim.at(j, i)).epsilon(1e-12));
                CHECK(std::abs(sim.at(i, j)) <= 1.0 + 1e-12);
            }
        }
    }
}

TEST_CASE("orthogonal b matrices score zero similarity") {
    std::vector<TaskCheckpoint> cps;
    for (int t = 0; t < 2; ++t) {
        LoraAdapter ad;
        ad.b = Matrix(2, 1);
        ad.b.at(static_cast<std::size_t>(t), 0) = 1.0;  // e_t as the only column
        ad.a = Matrix(1, 2);
        ad.a.at(0, 0) = 1.0;
        ad.rank = 1;
        ad.task_id = t;
        cps.push_back(checkpoint_with({ad}, t));
    }
    const Matrix sim_b = lora_similarity_analysis(cps, AdapterSide::b);
    CHECK(sim_b.at(0, 1) == doctest::Approx(0.0).epsilon(1e-14));
    const Matrix sim_a = lora_similarity_analysis(cps, AdapterSide::a);
    CHECK(sim_a.at(0, 1) == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(lora_similarity_analysis({}, AdapterSide::a), UsageError);
}

TEST_CASE("energy and reconstruction curves have valid shape and range") {
    SeededRng rng(9);
    std::vector<TaskCheckpoint> cps;
    for (int t = 0; t < 4; ++t) {
        std::vector<LoraAdapter> per_layer;
        per_layer.push_back(noisy_adapter(6, 6, 2, t, rng));
        per_layer.push_back(noisy_adapter(4, 6, 2, t, rng));
        cps.push_back(checkpoint_with(std::move(per_layer), t));
    }
    const std::vector<double> energy = energy_curve(cps, 2);
    const std::vector<double> recon = reconstruction_curve(cps, 2);
    REQUIRE(energy.size() == 4);
    REQUIRE(recon.size() == 4);
    for (double v : energy) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0 + 1e-12);
    }
    for (double v : recon) {
        CHECK(v >= -1.0 - 1e-12);
        CHECK(v <= 1.0 + 1e-12);
    }
    // One task of rank 2 compressed at rank 2 is lossless.
    CHECK(energy.front() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(recon.front() == doctest::Approx(1.0).epsilon(1e-9));
    // More merged tasks at fixed rank cannot retain more energy than one.
    CHECK(energy.back() <= energy.front() + 1e-12);
}

TEST_CASE("curves cap the rank at the layer dimensions") {
    SeededRng rng(13);
    std::vector<TaskCheckpoint> cps;
    for (int t = 0; t < 2; ++t) {
        std::vector<LoraAdapter> per_layer;
        per_layer.push_back(noisy_adapter(2, 5, 1, t, rng));  // min dim 2 < requested rank
        cps.push_back(checkpoint_with(std::move(per_layer), t));
    }
    const std::vector<double> recon = reconstruction_curve(cps, 6);
    REQUIRE(recon.size() == 2);
    // Requested rank exceeds every dimension, so reconstruction is exact.
    for (double v : recon) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
}
