#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "contilora/kernels.hpp"
#include "contilora/rng.hpp"

using namespace contilora;

namespace {

std::vector<double> random_vec(SeededRng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

}  // namespace

TEST_CASE("scalar table is always available and active table resolves") {
    const auto tables = available_kernels();
    REQUIRE(!tables.empty());
    CHECK(std::string(tables.front()->name) == "scalar");
    CHECK(kernels().dot != nullptr);
}

TEST_CASE("simd variants match scalar reference") {
    SeededRng rng(7);
    const auto& ref = scalar_kernels();
    for (const auto* table : available_kernels()) {
        CAPTURE(table->name);
        // Lengths straddling every remainder path of the widest lanes.
        for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 64u, 129u, 1000u}) {
            auto x = random_vec(rng, n);
            auto y = random_vec(rng, n);

            const double d_ref = ref.dot(x.data(), y.data(), n);
            const double d_tab = table->dot(x.data(), y.data(), n);
            CHECK(std::abs(d_ref - d_tab) <= 1e-12 * (1.0 + std::abs(d_ref)));

            auto y1 = y, y2 = y;
            ref.axpy(0.37, x.data(), y1.data(), n);
            table->axpy(0.37, x.data(), y2.data(), n);
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(std::abs(y1[i] - y2[i]) <= 1e-14 * (1.0 + std::abs(y1[i])));
            }

            auto s1 = x, s2 = x;
            ref.scale(-1.25, s1.data(), n);
            table->scale(-1.25, s2.data(), n);
            CHECK(s1 == s2);  // single multiply per lane, exact

            auto a1 = y, a2 = y;
            ref.add(x.data(), a1.data(), n);
            table->add(x.data(), a2.data(), n);
            CHECK(a1 == a2);  // single add per lane, exact
        }
    }
}
