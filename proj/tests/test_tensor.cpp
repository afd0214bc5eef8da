#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <vector>

#include "hoca/tensor.hpp"
#include "test_common.hpp"

using namespace hoca;
using testutil::random_matrix;
using testutil::random_vector;
using testutil::rel_err;

namespace {

// Independent brute-force oracle for the correlation tensor: evaluates the
// defining inner-product formula entry by entry with plain index loops.
DenseTensor correlation_oracle(const std::vector<FeatureMatrix>& mods) {
    std::vector<std::size_t> shape;
    for (const auto& m : mods) shape.push_back(m.t());
    DenseTensor out(shape);
    std::vector<std::size_t> idx(mods.size(), 0);
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        double entry = 0.0;
        for (std::size_t q = 0; q < mods[0].d(); ++q) {
            double p = 1.0;
            for (std::size_t i = 0; i < mods.size(); ++i) p *= mods[i](q, idx[i]);
            entry += p;
        }
        out[flat] = entry;
        for (std::size_t a = idx.size(); a > 0;) {
            --a;
            if (++idx[a] < shape[a]) break;
            idx[a] = 0;
        }
    }
    return out;
}

FeatureMatrix scale_rows_by(const FeatureMatrix& m, const std::vector<double>& w) {
    FeatureMatrix out(m.d(), m.t());
    for (std::size_t i = 0; i < m.d(); ++i)
        for (std::size_t r = 0; r < m.t(); ++r) out(i, r) = m(i, r) * w[r];
    return out;
}

} // namespace

TEST_CASE("DenseTensor enforces shape/data consistency") {
    CHECK_THROWS_AS(DenseTensor({2, 3}, {1.0, 2.0}), DimensionError);
    CHECK_THROWS_AS(DenseTensor({2, 0}), DimensionError);
    DenseTensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.strides() == std::vector<std::size_t>{3, 1});
    DenseTensor s = DenseTensor::scalar(4.5);
    CHECK(s.order() == 0);
    CHECK(s.size() == 1);
    CHECK(s[0] == 4.5);
}

TEST_CASE("tensor_multiply matches hand-evaluated 2x2 case") {
    // d=1: I1 columns (1),(2); I2 columns (3),(4)
    FeatureMatrix i1(1, 2, {1, 2});
    FeatureMatrix i2(1, 2, {3, 4});
    std::vector<FeatureMatrix> mods{i1, i2};
    DenseTensor c = tensor_multiply(mods);
    REQUIRE(c.shape() == std::vector<std::size_t>{2, 2});
    CHECK(c[0] == 3.0);
    CHECK(c[1] == 4.0);
    CHECK(c[2] == 6.0);
    CHECK(c[3] == 8.0);
}

TEST_CASE("tensor_multiply with one all-zero modality is the zero tensor") {
    Rng rng(11);
    std::vector<FeatureMatrix> mods{FeatureMatrix(3, 2), random_matrix(3, 4, rng)};
    DenseTensor c = tensor_multiply(mods);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == 0.0);
}

TEST_CASE("tensor_multiply order-3 identity-column case against brute-force loop") {
    // 2x2 identity columns: column r is the r-th standard basis vector.
    FeatureMatrix eye(2, 2, {1, 0, 0, 1});
    std::vector<FeatureMatrix> mods{eye, eye, eye};
    DenseTensor c = tensor_multiply(mods);
    DenseTensor expect = correlation_oracle(mods);
    REQUIRE(c.shape() == expect.shape());
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == expect[i]);
    // diagonal entries are 1, everything else 0
    std::array<std::size_t, 3> d0{0, 0, 0}, d1{1, 1, 1}, off{0, 1, 0};
    CHECK(c.at(d0) == 1.0);
    CHECK(c.at(d1) == 1.0);
    CHECK(c.at(off) == 0.0);
}

TEST_CASE("tensor_multiply agrees with the entrywise oracle on random inputs") {
    Rng rng(7);
    for (std::size_t n = 1; n <= 4; ++n) {
        std::vector<FeatureMatrix> mods;
        for (std::size_t i = 0; i < n; ++i)
            mods.push_back(random_matrix(3, 1 + rng.below(4), rng));
        DenseTensor a = tensor_multiply(mods);
        DenseTensor b = correlation_oracle(mods);
        REQUIRE(a.shape() == b.shape());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(rel_err(a[i], b[i]) < 1e-12);
    }
}

TEST_CASE("tensor_multiply degenerates to column sums for a single modality") {
    FeatureMatrix m(2, 3, {1, 2, 3, 10, 20, 30});
    std::vector<FeatureMatrix> mods{m};
    DenseTensor c = tensor_multiply(mods);
    REQUIRE(c.shape() == std::vector<std::size_t>{3});
    CHECK(c[0] == 11.0);
    CHECK(c[1] == 22.0);
    CHECK(c[2] == 33.0);
}

TEST_CASE("tensor_multiply error paths") {
    std::vector<FeatureMatrix> empty;
    CHECK_THROWS_AS(tensor_multiply(empty), ArgumentError);
    std::vector<FeatureMatrix> bad{FeatureMatrix(2, 2), FeatureMatrix(3, 2)};
    CHECK_THROWS_AS(tensor_multiply(bad), DimensionError);
}

TEST_CASE("tensor_multiply respects the element cap") {
    Rng rng(3);
    std::vector<FeatureMatrix> mods{random_matrix(2, 8, rng), random_matrix(2, 8, rng),
                                    random_matrix(2, 8, rng)};
    CHECK_THROWS_AS(tensor_multiply(mods, 511), CapacityError);
    CHECK_NOTHROW(tensor_multiply(mods, 512));
}

TEST_CASE("tensor_multiply is multilinear in each modality") {
    Rng rng(19);
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<FeatureMatrix> mods{random_matrix(3, 2, rng), random_matrix(3, 3, rng),
                                        random_matrix(3, 2, rng)};
        const double c = rng.uniform(-3.0, 3.0);
        std::size_t which = rng.below(3);
        std::vector<FeatureMatrix> scaled = mods;
        for (double& v : scaled[which].values()) v *= c;
        DenseTensor base = tensor_multiply(mods);
        DenseTensor got = tensor_multiply(scaled);
        for (std::size_t i = 0; i < base.size(); ++i)
            CHECK(rel_err(got[i], c * base[i]) < 1e-12);
    }
}

TEST_CASE("slice_fix_axis extracts the expected row") {
    DenseTensor t({2, 2}, {3, 4, 6, 8});
    DenseTensor row = slice_fix_axis(t, 0, 1);
    REQUIRE(row.shape() == std::vector<std::size_t>{2});
    CHECK(row[0] == 6.0);
    CHECK(row[1] == 8.0);
    DenseTensor col = slice_fix_axis(t, 1, 0);
    CHECK(col[0] == 3.0);
    CHECK(col[1] == 6.0);
}

TEST_CASE("slicing a constant tensor stays constant, order-1 gives a scalar") {
    DenseTensor ones({2, 3, 2}, std::vector<double>(12, 1.0));
    for (std::size_t axis = 0; axis < 3; ++axis) {
        DenseTensor s = slice_fix_axis(ones, axis, 0);
        CHECK(s.order() == 2);
        for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] == 1.0);
    }
    DenseTensor v({3}, {5, 6, 7});
    DenseTensor sc = slice_fix_axis(v, 0, 2);
    CHECK(sc.order() == 0);
    CHECK(sc[0] == 7.0);
}

TEST_CASE("slices across distinct axes commute") {
    Rng rng(23);
    DenseTensor t({3, 4, 2});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-2, 2);
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = a + 1; b < 3; ++b) {
            std::size_t pa = rng.below(t.extent(a));
            std::size_t pb = rng.below(t.extent(b));
            // slicing axis a first shifts axis b down by one
            DenseTensor ab = slice_fix_axis(slice_fix_axis(t, a, pa), b - 1, pb);
            DenseTensor ba = slice_fix_axis(slice_fix_axis(t, b, pb), a, pa);
            REQUIRE(ab.shape() == ba.shape());
            for (std::size_t i = 0; i < ab.size(); ++i) CHECK(ab[i] == ba[i]);
        }
    }
}

TEST_CASE("slice_fix_axis rejects out-of-range axis or position") {
    DenseTensor t({2, 2});
    CHECK_THROWS_AS(slice_fix_axis(t, 2, 0), IndexError);
    CHECK_THROWS_AS(slice_fix_axis(t, 0, 2), IndexError);
}

TEST_CASE("weighted_sum basics") {
    DenseTensor t({2}, {1, 1});
    DenseTensor w({2}, {1, 2});
    CHECK(weighted_sum(t, w) == 3.0);

    Rng rng(5);
    DenseTensor a({2, 3});
    DenseTensor b({2, 3});
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.uniform(-1, 1);
        b[i] = rng.uniform(-1, 1);
    }
    CHECK(weighted_sum(a, b) == weighted_sum(b, a));
    DenseTensor ones({2, 3}, std::vector<double>(6, 1.0));
    CHECK(rel_err(weighted_sum(a, ones), a.sum()) < 1e-15);
    CHECK_THROWS_AS(weighted_sum(a, DenseTensor({3, 2})), DimensionError);
}

TEST_CASE("outer_rank1 basics") {
    std::vector<std::vector<double>> f{{1, 2}, {3, 4}};
    DenseTensor t = outer_rank1(f);
    REQUIRE(t.shape() == std::vector<std::size_t>{2, 2});
    CHECK(t[0] == 3.0);
    CHECK(t[1] == 4.0);
    CHECK(t[2] == 6.0);
    CHECK(t[3] == 8.0);

    std::vector<std::vector<double>> z{{1, 2}, {0, 0}, {5}};
    DenseTensor zt = outer_rank1(z);
    for (std::size_t i = 0; i < zt.size(); ++i) CHECK(zt[i] == 0.0);

    std::vector<std::vector<double>> single{{7, 8, 9}};
    DenseTensor st = outer_rank1(single);
    REQUIRE(st.shape() == std::vector<std::size_t>{3});
    CHECK(st[0] == 7.0);
    CHECK(st[2] == 9.0);

    std::vector<std::vector<double>> none;
    CHECK_THROWS_AS(outer_rank1(none), ArgumentError);
}

TEST_CASE("softmax_stable: symmetry, shift invariance, extreme scores") {
    std::vector<double> flat{0, 0, 0};
    auto w = softmax_stable(flat);
    for (double v : w) CHECK(rel_err(v, 1.0 / 3.0) < 1e-15);

    for (double c : {-50.0, 0.0, 123.0}) {
        std::vector<double> s{c, c + std::log(2.0)};
        auto u = softmax_stable(s);
        CHECK(std::fabs(u[0] - 1.0 / 3.0) < 1e-12);
        CHECK(std::fabs(u[1] - 2.0 / 3.0) < 1e-12);
    }

    // extreme spread: must not overflow; compare against a long-double oracle
    std::vector<double> hot{1000.0, 0.0};
    auto hw = softmax_stable(hot);
    CHECK(std::isfinite(hw[0]));
    CHECK(std::isfinite(hw[1]));
    long double e0 = expl(0.0L), e1 = expl(-1000.0L);
    long double z = e0 + e1;
    CHECK(std::fabs(hw[0] - static_cast<double>(e0 / z)) < 1e-15);
    CHECK(std::fabs(hw[1] - static_cast<double>(e1 / z)) < 1e-15);

    std::vector<double> bad{0.0, std::nan("")};
    CHECK_THROWS_AS(softmax_stable(bad), NumericError);
}

TEST_CASE("softmax_stable output is a simplex vector, invariant under shifts") {
    Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        auto s = random_vector(1 + rng.below(6), rng, -30, 30);
        auto w = softmax_stable(s);
        double total = 0.0;
        for (double v : w) {
            CHECK(v >= 0.0);
            total += v;
        }
        CHECK(std::fabs(total - 1.0) < 1e-12);

        double shift = rng.uniform(-100, 100);
        std::vector<double> s2 = s;
        for (double& v : s2) v += shift;
        auto w2 = softmax_stable(s2);
        for (std::size_t i = 0; i < w.size(); ++i) CHECK(std::fabs(w[i] - w2[i]) < 1e-12);
    }
}

// Identity: the correlation tensor Hadamard a rank-1 weight tensor equals the
// correlation tensor of the row-rescaled matrices.
TEST_CASE("correlation/rank-1 interchange identity over the full grid") {
    const std::size_t t_choices[] = {1, 2, 3, 5};
    const std::size_t d_choices[] = {1, 2, 5};
    Rng rng(101);
    for (std::size_t n = 1; n <= 4; ++n) {
        std::vector<std::size_t> pick(n, 0);
        bool done = false;
        while (!done) {
            for (std::size_t d : d_choices) {
                for (int seed = 0; seed < 3; ++seed) {
                    std::vector<FeatureMatrix> mods;
                    std::vector<std::vector<double>> ws;
                    for (std::size_t i = 0; i < n; ++i) {
                        mods.push_back(random_matrix(d, t_choices[pick[i]], rng));
                        ws.push_back(random_vector(t_choices[pick[i]], rng));
                    }
                    DenseTensor corr = tensor_multiply(mods);
                    DenseTensor rank1 = outer_rank1(ws);
                    std::vector<FeatureMatrix> scaled;
                    for (std::size_t i = 0; i < n; ++i)
                        scaled.push_back(scale_rows_by(mods[i], ws[i]));
                    DenseTensor rhs = tensor_multiply(scaled);
                    for (std::size_t e = 0; e < corr.size(); ++e)
                        CHECK(rel_err(corr[e] * rank1[e], rhs[e]) < 1e-10);
                }
            }
            // advance the t-extent odometer
            std::size_t a = n;
            done = true;
            while (a > 0) {
                --a;
                if (++pick[a] < 4) {
                    done = false;
                    break;
                }
                pick[a] = 0;
            }
        }
    }
}

// Identity: the full sum of the correlation tensor equals the d-dimension sum
// of the Hadamard product of per-matrix row sums.
TEST_CASE("correlation total-sum factorization identity") {
    // hand case: both sides equal 21
    FeatureMatrix i1(1, 2, {1, 2});
    FeatureMatrix i2(1, 2, {3, 4});
    std::vector<FeatureMatrix> hand{i1, i2};
    CHECK(tensor_multiply(hand).sum() == 21.0);
    CHECK((1.0 + 2.0) * (3.0 + 4.0) == 21.0);

    const std::size_t t_choices[] = {1, 2, 3, 5};
    const std::size_t d_choices[] = {1, 2, 5};
    Rng rng(211);
    for (std::size_t n = 1; n <= 4; ++n) {
        for (std::size_t d : d_choices) {
            for (int seed = 0; seed < 6; ++seed) {
                std::vector<FeatureMatrix> mods;
                for (std::size_t i = 0; i < n; ++i)
                    mods.push_back(random_matrix(d, t_choices[rng.below(4)], rng));
                double lhs = tensor_multiply(mods).sum();
                std::vector<double> had(d, 1.0);
                for (const auto& m : mods) {
                    auto rs = m.row_sums();
                    for (std::size_t q = 0; q < d; ++q) had[q] *= rs[q];
                }
                double rhs = 0.0;
                for (double v : had) rhs += v;
                CHECK(rel_err(lhs, rhs) < 1e-10);
            }
        }
    }
}
