#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "contilora/aod.hpp"
#include "contilora/history.hpp"

using namespace contilora;

namespace {

Params stacked_params(const NetworkSpec& spec, uint64_t seed, std::size_t rank = 2) {
    SeededRng rng = SeededRng::derive(seed, 99);
    Params params = init_params(spec, rng);
    for (auto& lp : params) {
        const std::size_t d_out = lp.base_weight.rows();
        const std::size_t d_in = lp.base_weight.cols();
        for (int t = 0; t < 2; ++t) {
            LoraAdapter ad = init_adapter(d_out, d_in, rank, t, rng);
            for (std::size_t i = 0; i < ad.b.size(); ++i) ad.b.data()[i] = 0.3 * rng.normal();
            ad.trainable = false;
            lp.adapters.frozen.push_back(std::move(ad));
        }
        lp.adapters.compressed = compress_svd(lp.adapters.frozen, rank);
        LoraAdapter cur = init_adapter(d_out, d_in, rank, 2, rng);
        for (std::size_t i = 0; i < cur.b.size(); ++i) cur.b.data()[i] = 0.3 * rng.normal();
        lp.adapters.current = std::move(cur);
    }
    return params;
}

Matrix random_batch(std::size_t n, std::size_t d, SeededRng& rng) {
    Matrix m(n, d);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

}  // namespace

TEST_CASE("interference vector equals the history-b gradient") {
    const NetworkSpec spec{{3, 5, 2}, Activation::tanh_fn};
    Params params = stacked_params(spec, 31);
    SeededRng rng = SeededRng::derive(31, 3);
    const Matrix x = random_batch(6, 3, rng);
    const Matrix y = random_batch(6, 2, rng);

    const InterferenceVector iv =
        interference_vector(spec, params, x, y, IvScope::lora_b_only, 17);
    CHECK(iv.batch_id == 17);
    REQUIRE(iv.per_layer.size() == params.size());

    auto [loss, grads] = backward_mse(spec, params, x, y, AdapterMode::history_only,
                                      HistorySource::compressed);
    (void)loss;
    for (std::size_t l = 0; l < params.size(); ++l) {
        const Matrix& expect = grads.at({l, ParamRole::history_b});
        REQUIRE(iv.per_layer[l].same_shape(expect));
        // The dedicated pass associates the products differently, so agreement
        // holds to rounding rather than bit for bit.
        for (std::size_t i = 0; i < expect.size(); ++i) {
            CHECK(iv.per_layer[l].data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-12));
        }
    }

    // Full scope carries effective-weight shapes instead.
    const InterferenceVector full = interference_vector(spec, params, x, y, IvScope::full);
    for (std::size_t l = 0; l < params.size(); ++l) {
        CHECK(full.per_layer[l].rows() == params[l].base_weight.rows());
        CHECK(full.per_layer[l].cols() == params[l].base_weight.cols());
    }
}

TEST_CASE("interference vector ignores the current adapter") {
    const NetworkSpec spec{{3, 4, 2}, Activation::tanh_fn};
    Params params = stacked_params(spec, 32);
    SeededRng rng = SeededRng::derive(32, 3);
    const Matrix x = random_batch(5, 3, rng);
    const Matrix y = random_batch(5, 2, rng);

    const InterferenceVector before =
        interference_vector(spec, params, x, y, IvScope::lora_b_only);
    for (auto& lp : params) {
        for (std::size_t i = 0; i < lp.adapters.current->b.size(); ++i) {
            lp.adapters.current->b.data()[i] += 3.0;
        }
    }
    const InterferenceVector after =
        interference_vector(spec, params, x, y, IvScope::lora_b_only);
    for (std::size_t l = 0; l < before.per_layer.size(); ++l) {
        for (std::size_t i = 0; i < before.per_layer[l].size(); ++i) {
            CHECK(before.per_layer[l].data()[i] == after.per_layer[l].data()[i]);
        }
    }
}

TEST_CASE("interference vector requires compressed history") {
    const NetworkSpec spec{{2, 2}, Activation::tanh_fn};
    SeededRng rng = SeededRng::derive(1, 1);
    Params params = init_params(spec, rng);
    const Matrix x = Matrix::from_rows({{1.0, 0.0}});
    const Matrix y = Matrix::from_rows({{0.0, 0.0}});
    CHECK_THROWS_AS(interference_vector(spec, params, x, y, IvScope::lora_b_only), UsageError);
}

TEST_CASE("orthogonality loss closed form and gradient") {
    InterferenceVector iv;
    iv.per_layer.push_back(Matrix::from_rows({{1.0, 0.0}, {0.0, 2.0}}));
    iv.per_layer.push_back(Matrix::from_rows({{-1.0, 1.0}}));
    std::vector<Matrix> b;
    b.push_back(Matrix::from_rows({{2.0, 5.0}, {7.0, -3.0}}));  // inner = 2 - 6 = -4
    b.push_back(Matrix::from_rows({{4.0, 1.0}}));               // inner = -4 + 1 = -3

    CHECK(orth_loss(iv, b) == doctest::Approx(7.0).epsilon(1e-15));
    CHECK(orth_loss(iv, b, true) == doctest::Approx(25.0).epsilon(1e-15));

    // |<iv,b>| gradient: sign(inner) * iv.
    const auto g = orth_loss_grad(iv, b);
    CHECK(g[0].at(0, 0) == -1.0);
    CHECK(g[0].at(1, 1) == -2.0);
    CHECK(g[1].at(0, 0) == 1.0);
    CHECK(g[1].at(0, 1) == -1.0);

    // Squared variant: 2 * inner * iv.
    const auto gs = orth_loss_grad(iv, b, true);
    CHECK(gs[0].at(0, 0) == doctest::Approx(-8.0));
    CHECK(gs[1].at(0, 1) == doctest::Approx(-6.0));

    // Finite differences on every entry (iv held constant).
    for (bool squared : {false, true}) {
        const auto grad = orth_loss_grad(iv, b, squared);
        for (std::size_t l = 0; l < b.size(); ++l) {
            for (std::size_t i = 0; i < b[l].size(); ++i) {
                const double h = 1e-6;
                const double saved = b[l].data()[i];
                b[l].data()[i] = saved + h;
                const double up = orth_loss(iv, b, squared);
                b[l].data()[i] = saved - h;
                const double down = orth_loss(iv, b, squared);
                b[l].data()[i] = saved;
                const double fd = (up - down) / (2.0 * h);
                CHECK(grad[l].data()[i] == doctest::Approx(fd).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("orthogonal pair gives zero loss and zero subgradient") {
    InterferenceVector iv;
    iv.per_layer.push_back(Matrix::from_rows({{1.0, 0.0}}));
    std::vector<Matrix> b;
    b.push_back(Matrix::from_rows({{0.0, 3.0}}));
    CHECK(orth_loss(iv, b) == 0.0);
    const auto g = orth_loss_grad(iv, b);
    CHECK(g[0].at(0, 0) == 0.0);
    CHECK(g[0].at(0, 1) == 0.0);
}

TEST_CASE("shape mismatch is rejected") {
    InterferenceVector iv;
    iv.per_layer.push_back(Matrix(2, 2));
    std::vector<Matrix> b;
    b.push_back(Matrix(2, 3));
    CHECK_THROWS_AS(orth_loss(iv, b), DimensionError);
    CHECK_THROWS_AS(orth_loss_grad(iv, b), DimensionError);
}

TEST_CASE("parameter-orthogonality loss and gradient") {
    std::vector<Matrix> hist, cur;
    hist.push_back(Matrix::from_rows({{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}}));
    cur.push_back(Matrix::from_rows({{1.0, 1.0, 0.0}, {0.0, 0.0, 2.0}}));
    // overlap = [[1, 0], [1, 0]], squared Frobenius norm = 2.
    CHECK(param_orth_loss(hist, cur) == doctest::Approx(2.0).epsilon(1e-15));

    // Orthogonal rows: loss 0.
    std::vector<Matrix> cur2;
    cur2.push_back(Matrix::from_rows({{0.0, 0.0, 1.0}, {0.0, 0.0, -1.0}}));
    CHECK(param_orth_loss(hist, cur2) == 0.0);

    const auto g = param_orth_grad(hist, cur);
    for (std::size_t i = 0; i < cur[0].size(); ++i) {
        const double h = 1e-6;
        const double saved = cur[0].data()[i];
        cur[0].data()[i] = saved + h;
        const double up = param_orth_loss(hist, cur);
        cur[0].data()[i] = saved - h;
        const double down = param_orth_loss(hist, cur);
        cur[0].data()[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        CHECK(g[0].data()[i] == doctest::Approx(fd).epsilon(1e-6));
    }
}
