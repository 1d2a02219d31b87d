#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "semsplat/cloud.hpp"
#include "semsplat/pseudolabel.hpp"
#include "semsplat/random.hpp"
#include "semsplat/tensor.hpp"

namespace fixture {

using semsplat::LabelMap;

inline LabelMap labels(std::initializer_list<std::initializer_list<int>> rows) {
    const int h = static_cast<int>(rows.size());
    const int w = static_cast<int>(rows.begin()->size());
    LabelMap m(h, w, 1);
    int y = 0;
    for (const auto& row : rows) {
        int x = 0;
        for (int v : row) m.at(y, x++) = static_cast<std::uint8_t>(v);
        ++y;
    }
    return m;
}

constexpr int U = 255;

// 8x8, margin 0.25 -> pixels with min(x, y, 7 - x, 7 - y) < 2 are near the border.
// Instance 1 stays in the core, instance 2 reaches column 6, instance 3 sits
// exactly at distance 2.
inline LabelMap boundary8_instances() {
    return labels({{0, 0, 0, 0, 0, 0, 0, 0},
                   {0, 0, 0, 0, 0, 0, 0, 0},
                   {0, 0, 0, 0, 0, 2, 2, 0},
                   {0, 0, 0, 1, 1, 2, 2, 0},
                   {0, 0, 0, 1, 1, 0, 0, 0},
                   {0, 0, 3, 3, 0, 0, 0, 0},
                   {0, 0, 0, 0, 0, 0, 0, 0},
                   {0, 0, 0, 0, 0, 0, 0, 0}});
}

inline LabelMap boundary8_expected_mask() {
    return labels({{0, 0, 0, 0, 0, 0, 0, 0},
                   {0, 0, 0, 0, 0, 0, 0, 0},
                   {0, 0, 0, 0, 0, 1, 1, 0},
                   {0, 0, 0, 0, 0, 1, 1, 0},
                   {0, 0, 0, 0, 0, 0, 0, 0},
                   {0, 0, 0, 0, 0, 0, 0, 0},
                   {0, 0, 0, 0, 0, 0, 0, 0},
                   {0, 0, 0, 0, 0, 0, 0, 0}});
}

// Three 6x6 views, reference view 0, margin 0.2 (border distance < 1.2).
// Reference votes: instance 1 -> 4 (three 4s, one 1), instance 2 -> 2 (2 vs 5
// tie), instance 3 has only ignored labels, instance 4 is not in the reference.
// Flags on the reference: 2 and 3; 3 has no class so it never enters B.
struct ThreeViewFixture {
    std::vector<LabelMap> instances;
    LabelMap reference_gt;
    double margin = 0.2;
    std::vector<std::uint8_t> instance_class;
    std::vector<std::uint8_t> instance_flagged;
    std::vector<LabelMap> labels;
    std::vector<LabelMap> boundary;
};

inline ThreeViewFixture three_view_fixture() {
    ThreeViewFixture f;
    f.instances = {labels({{0, 0, 0, 0, 0, 0},
                           {0, 0, 0, 0, 0, 0},
                           {0, 0, 1, 1, 0, 0},
                           {0, 0, 1, 1, 0, 0},
                           {2, 2, 0, 0, 0, 0},
                           {2, 2, 0, 0, 3, 3}}),
                   labels({{1, 1, 0, 0, 0, 0},
                           {1, 1, 0, 0, 0, 0},
                           {0, 0, 0, 0, 0, 0},
                           {0, 0, 0, 2, 0, 0},
                           {0, 0, 0, 0, 0, 0},
                           {0, 0, 0, 0, 0, 0}}),
                   labels({{0, 0, 0, 0, 0, 1},
                           {0, 0, 0, 0, 0, 0},
                           {0, 0, 3, 4, 0, 0},
                           {0, 0, 0, 0, 0, 0},
                           {0, 0, 0, 0, 0, 0},
                           {0, 0, 0, 0, 0, 0}})};
    f.reference_gt = labels({{0, 0, 0, 0, 0, 0},
                             {0, 0, 0, 0, 0, 0},
                             {0, 0, 4, 4, 0, 0},
                             {0, 0, 4, 1, 0, 0},
                             {2, 2, 0, 0, 0, 0},
                             {5, 5, 0, 0, U, U}});
    f.instance_class = {U, 4, 2, U, U};
    f.instance_flagged = {0, 0, 1, 1, 0};
    f.labels = {labels({{U, U, U, U, U, U},
                        {U, U, U, U, U, U},
                        {U, U, 4, 4, U, U},
                        {U, U, 4, 4, U, U},
                        {2, 2, U, U, U, U},
                        {2, 2, U, U, U, U}}),
                labels({{4, 4, U, U, U, U},
                        {4, 4, U, U, U, U},
                        {U, U, U, U, U, U},
                        {U, U, U, 2, U, U},
                        {U, U, U, U, U, U},
                        {U, U, U, U, U, U}}),
                labels({{U, U, U, U, U, 4},
                        {U, U, U, U, U, U},
                        {U, U, U, U, U, U},
                        {U, U, U, U, U, U},
                        {U, U, U, U, U, U},
                        {U, U, U, U, U, U}})};
    f.boundary = {labels({{0, 0, 0, 0, 0, 0},
                          {0, 0, 0, 0, 0, 0},
                          {0, 0, 0, 0, 0, 0},
                          {0, 0, 0, 0, 0, 0},
                          {1, 1, 0, 0, 0, 0},
                          {1, 1, 0, 0, 0, 0}}),
                  labels({{0, 0, 0, 0, 0, 0},
                          {0, 0, 0, 0, 0, 0},
                          {0, 0, 0, 0, 0, 0},
                          {0, 0, 0, 1, 0, 0},
                          {0, 0, 0, 0, 0, 0},
                          {0, 0, 0, 0, 0, 0}}),
                  LabelMap(6, 6, 1)};
    return f;
}

// Majority vote cases: per case, the class of each instance pixel and the
// expected winner.
struct VoteCase {
    std::vector<int> pixel_classes;
    int expected;
};

inline std::vector<VoteCase> vote_cases() {
    return {{{3, 3, 3, 3}, 3},
            {{1, 1, 1, 1, 1, 1, 2, 2, 2, 2}, 1},
            {{2, 2, 2, 2, 2, 4, 4, 4, 4, 4}, 2},
            {{4, 4, 4, 4, 4, 2, 2, 2, 2, 2}, 2},
            {{7, 0, 7, 0}, 0},
            {{U, U, 6}, 6},
            {{U, U}, U},
            {{9, 8, 7, 9, 8, 7}, 7},
            {{1, 2, 2, 3, 3, 3}, 3}};
}

// Seed whose single uniform draw from [0, n) lands on `target`.
inline std::uint64_t seed_selecting(std::size_t n, std::size_t target) {
    for (std::uint64_t s = 0;; ++s) {
        semsplat::Rng rng(s);
        if (rng.sample_without_replacement(n, 1)[0] == target) return s;
    }
}

// Two-channel features log(p) so that the channel softmax is exactly p.
inline void set_distribution(std::span<double> f, double p0) {
    f[0] = std::log(p0);
    f[1] = std::log(1.0 - p0);
}

struct AggFixture {
    semsplat::FeatureMap map;
    semsplat::GaussianCloud cloud;
    std::uint64_t seed = 0;
    double expected = 0.0;
};

// 3x3 map, m = 1, k = 2. The nearest pixels of the centre are, by (d^2, dy, dx),
// the one above (index 1) and the one to the left (index 3). Likewise for the
// top-left corner. The other pixels are decoys.
//   KL((.5,.5) || (.25,.75)) = .5 ln 2 + .5 ln(2/3)
//   KL((.5,.5) || (.8,.2))   = .5 ln(5/8) + .5 ln(5/2)
//   KL((.1,.9) || (.25,.75)) = .1 ln(.4) + .9 ln(1.2)
//   KL((.1,.9) || (.8,.2))   = .1 ln(1/8) + .9 ln(4.5)
inline AggFixture agg2d_hand_fixture(bool corner) {
    AggFixture f;
    f.map = semsplat::FeatureMap(3, 3, 2);
    const double p[9] = {0.1, 0.25, 0.6, 0.8, 0.5, 0.6, 0.6, 0.6, 0.6};
    for (std::size_t i = 0; i < 9; ++i) set_distribution(f.map.pixel(i), p[i]);
    if (corner) {
        f.seed = seed_selecting(9, 0);
        f.expected = 0.5 * ((0.1 * std::log(0.4) + 0.9 * std::log(1.2)) + (0.1 * std::log(0.125) + 0.9 * std::log(4.5)));
    } else {
        f.seed = seed_selecting(9, 4);
        f.expected = 0.5 * ((0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0)) +
                            (0.5 * std::log(5.0 / 8.0) + 0.5 * std::log(2.5)));
    }
    return f;
}

// Six points on the x axis at 0, 1, 3, 3.5, 7, 10; m = 1 anchored at x = 3, k = 2.
// The expectation comes from exhaustive distances and a direct KL sum.
inline AggFixture agg3d_hand_fixture() {
    AggFixture f;
    f.cloud.sh_degree = 0;
    f.cloud.feature_dim = 2;
    f.cloud.resize(6);
    const double xs[6] = {0.0, 1.0, 3.0, 3.5, 7.0, 10.0};
    const double ps[6] = {0.3, 0.7, 0.45, 0.15, 0.9, 0.05};
    for (std::size_t i = 0; i < 6; ++i) {
        f.cloud.positions[3 * i] = xs[i];
        set_distribution(std::span<double>(f.cloud.features.data() + 2 * i, 2), ps[i]);
    }
    const std::size_t anchor = 2;
    f.seed = seed_selecting(6, anchor);
    std::vector<std::pair<double, std::size_t>> by_distance;
    for (std::size_t i = 0; i < 6; ++i) {
        if (i != anchor) by_distance.emplace_back(std::abs(xs[i] - xs[anchor]), i);
    }
    std::sort(by_distance.begin(), by_distance.end());
    auto kl = [](double p, double q) { return p * std::log(p / q) + (1 - p) * std::log((1 - p) / (1 - q)); };
    for (int j = 0; j < 2; ++j) f.expected += kl(ps[anchor], ps[by_distance[static_cast<std::size_t>(j)].second]);
    f.expected /= 2.0;
    return f;
}

} // namespace fixture
