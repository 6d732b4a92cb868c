#include <doctest.h>

#include <random>

#include "cgleval/grid.hpp"

#include "helpers.hpp"

using namespace cgleval;

TEST_CASE("grid construction enforces the shape invariants") {
    CHECK_THROWS_AS(BinaryMask(0, 4, std::uint8_t{0}), InvalidParameter);
    CHECK_THROWS_AS(BinaryMask(4, -1, std::uint8_t{0}), InvalidParameter);
    CHECK_THROWS_AS(BinaryMask(2, 2, std::vector<std::uint8_t>{0, 1, 0}), InvalidParameter);
    CHECK_THROWS_AS(BinaryMask(2, 2, std::vector<std::uint8_t>{0, 1, 2, 0}), InvalidParameter);
    CHECK_THROWS_AS(LabelMap(2, 2, 2, std::vector<std::uint8_t>{0, 1, 2, 0}), ClassIdOutOfRange);
    CHECK_THROWS_AS(LabelMap(2, 2, 0, std::vector<std::uint8_t>{0, 0, 0, 0}), InvalidParameter);

    const LabelMap map(3, 2, 4, std::vector<std::uint8_t>{0, 1, 2, 3, 0, 1});
    CHECK(map.width() == 3);
    CHECK(map.height() == 2);
    CHECK(map.num_classes() == 4);
    CHECK(map.at(0, 1) == 3); // row-major, origin top-left
    CHECK(map.at(2, 0) == 2);
}

TEST_CASE("binarize selects exactly the positive class") {
    const LabelMap all_ones(4, 4, 2, std::uint8_t{1});
    CHECK(count_ones(binarize(all_ones, 1)) == 16);
    CHECK(count_ones(binarize(all_ones, 0)) == 0);

    std::vector<std::uint8_t> checker(16);
    for (int i = 0; i < 16; ++i) checker[i] = static_cast<std::uint8_t>((i / 4 + i % 4) % 2);
    const LabelMap board(4, 4, 2, checker);
    const BinaryMask mask = binarize(board, 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) CHECK(mask.at(x, y) == ((x + y) % 2 ? 1 : 0));

    CHECK_THROWS_AS(binarize(all_ones, 2), ClassIdOutOfRange);
    CHECK_THROWS_AS(binarize(all_ones, -1), ClassIdOutOfRange);
}

TEST_CASE("complement_diff is set difference") {
    const BinaryMask ones(3, 3, std::uint8_t{1});
    const BinaryMask zeros(3, 3, std::uint8_t{0});
    CHECK(count_ones(complement_diff(ones, ones)) == 0);
    CHECK(count_ones(complement_diff(zeros, zeros)) == 0);
    CHECK(complement_diff(ones, zeros) == ones);

    // a = {pixels 0,1}, b = {pixels 1,2} on a 2x2 grid -> {pixel 0}
    const BinaryMask a(2, 2, std::vector<std::uint8_t>{1, 1, 0, 0});
    const BinaryMask b(2, 2, std::vector<std::uint8_t>{0, 1, 1, 0});
    const BinaryMask diff = complement_diff(a, b);
    CHECK(diff == BinaryMask(2, 2, std::vector<std::uint8_t>{1, 0, 0, 0}));

    CHECK_THROWS_AS(complement_diff(ones, BinaryMask(2, 3, std::uint8_t{0})), DimensionMismatch);
}

TEST_CASE("or_fuse basics") {
    const BinaryMask zeros(2, 2, std::uint8_t{0});
    const BinaryMask x(2, 2, std::vector<std::uint8_t>{1, 0, 0, 1});
    CHECK(or_fuse(zeros, zeros) == zeros);
    CHECK(or_fuse(x, zeros) == x);

    const BinaryMask p(2, 2, std::vector<std::uint8_t>{1, 0, 0, 0});
    const BinaryMask q(2, 2, std::vector<std::uint8_t>{0, 0, 0, 1});
    CHECK(count_ones(or_fuse(p, q)) == 2);
    CHECK_THROWS_AS(or_fuse(p, BinaryMask(3, 2, std::uint8_t{0})), DimensionMismatch);
}

TEST_CASE("count_ones matches a per-pixel loop") {
    CHECK(count_ones(BinaryMask(5, 5, std::uint8_t{0})) == 0);
    CHECK(count_ones(BinaryMask(8, 8, std::uint8_t{1})) == 64);

    std::mt19937_64 rng(17);
    const BinaryMask mask = helpers::random_mask(rng, 16, 16);
    std::size_t expected = 0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            if (mask.at(x, y) == 1) ++expected;
    CHECK(count_ones(mask) == expected);
}

TEST_CASE("complement pairs are disjoint and OR to the XOR") {
    std::mt19937_64 rng(4711);
    for (int trial = 0; trial < 100; ++trial) {
        const int w = 1 + static_cast<int>(rng() % 24);
        const int h = 1 + static_cast<int>(rng() % 24);
        const BinaryMask a = helpers::random_mask(rng, w, h);
        const BinaryMask b = helpers::random_mask(rng, w, h);
        const BinaryMask ab = complement_diff(a, b);
        const BinaryMask ba = complement_diff(b, a);

        // no pixel is both a false positive and a false negative
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) REQUIRE(ab.at(x, y) + ba.at(x, y) <= 1);

        const BinaryMask fused = or_fuse(ab, ba);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) REQUIRE(fused.at(x, y) == (a.at(x, y) ^ b.at(x, y)));

        const std::size_t na = count_ones(a), nb = count_ones(b);
        const std::size_t nor = count_ones(or_fuse(a, b));
        REQUIRE(nor <= na + nb);
        bool disjoint = true;
        for (int y = 0; y < h && disjoint; ++y)
            for (int x = 0; x < w && disjoint; ++x)
                if (a.at(x, y) == 1 && b.at(x, y) == 1) disjoint = false;
        REQUIRE((nor == na + nb) == disjoint);
    }
}
