#pragma once

// Randomised gradient suites used by the unit tests and the acceptance runner.

#include <cmath>

#include "oracles.hpp"
#include "semsplat/decoder.hpp"
#include "semsplat/losses.hpp"

namespace oracle {

inline GradientCheck render_gradient_suite(int instances, std::uint64_t seed) {
    Rng rng(seed);
    GradientCheck total;
    for (int t = 0; t < instances; ++t) {
        const int n = 1 + static_cast<int>(rng.index(20));
        auto s = random_smooth_scene(rng, n, 8, 8, t % 4, 1 + static_cast<int>(rng.index(16)));
        const auto c = check_render_gradients(s, rng);
        total.checked += c.checked;
        total.failed += c.failed;
        total.worst_rel = std::max(total.worst_rel, c.worst_rel);
        total.worst_abs = std::max(total.worst_abs, c.worst_abs);
        if (total.first_failure.empty()) total.first_failure = c.first_failure;
    }
    return total;
}

inline GradientCheck decoder_gradient_suite(int instances, std::uint64_t seed) {
    Rng rng(seed);
    GradientCheck check;
    int done = 0;
    while (done < instances) {
        const int hidden = done % 4 == 0 ? 0 : 32;
        const int classes = 2 + static_cast<int>(rng.index(4));
        auto d = SemanticDecoder::create(16, hidden, classes, rng.next());
        for (Eigen::Index i = 0; i < d.b1.size(); ++i) d.b1[i] = rng.uniform(-0.3, 0.3);
        FeatureMap f(2, 2, 16);
        for (auto& v : f.data) v = rng.normal();
        if (hidden > 0) {
            bool near_kink = false;
            for (std::size_t p = 0; p < f.pixels(); ++p) {
                for (int h = 0; h < hidden; ++h) {
                    double pre = d.b1[h];
                    for (int i = 0; i < 16; ++i) pre += d.w1(h, i) * f.data[p * 16 + i];
                    near_kink |= std::abs(pre) < 1e-3;
                }
            }
            if (near_kink) continue;
        }
        Tensor3<double> g(2, 2, classes);
        for (auto& v : g.data) v = rng.uniform(-1, 1);
        const auto back = decode_backward(f, d, g);
        auto loss = [&] {
            const auto out = decode(f, d);
            double L = 0;
            for (std::size_t i = 0; i < g.data.size(); ++i) L += g.data[i] * out.data[i];
            return L;
        };
        for (std::size_t i = 0; i < f.data.size(); ++i) {
            check.record("decoder d_features", back.d_features.data[i], central_difference(f.data, i, loss));
        }
        auto params = d.flatten();
        const auto analytic = back.grads.flatten();
        auto loss_p = [&] {
            d.unflatten(params);
            return loss();
        };
        for (std::size_t i = 0; i < params.size(); ++i) {
            check.record("decoder params", analytic[i], central_difference(params, i, loss_p));
        }
        ++done;
    }
    return check;
}

inline void check_tensor_loss(GradientCheck& check, const char* name, Tensor3<double>& x,
                              const Tensor3<double>& analytic, const std::function<double()>& f) {
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        check.record(name, analytic.data[i], central_difference(x.data, i, f));
    }
}

inline GradientCheck l1_gradient_suite(int instances, std::uint64_t seed) {
    Rng rng(seed);
    GradientCheck check;
    for (int t = 0; t < instances; ++t) {
        Image a(5, 6, 3), b(5, 6, 3);
        for (std::size_t i = 0; i < a.data.size(); ++i) {
            b.data[i] = rng.uniform();
            // Keep differences away from the kink at zero.
            const double d = rng.uniform(0.01, 0.5) * (rng.uniform() < 0.5 ? -1 : 1);
            a.data[i] = b.data[i] + d;
        }
        const auto r = l1_loss(a, b);
        check_tensor_loss(check, "l1", a, r.adjoint, [&] { return l1_loss(a, b).value; });
    }
    return check;
}

inline GradientCheck dssim_gradient_suite(int instances, std::uint64_t seed) {
    Rng rng(seed);
    GradientCheck check;
    for (int t = 0; t < instances; ++t) {
        const int h = 11 + static_cast<int>(rng.index(3)), w = 11 + static_cast<int>(rng.index(3));
        Image a(h, w, 3), b(h, w, 3);
        for (auto& v : b.data) v = rng.uniform();
        for (std::size_t i = 0; i < a.data.size(); ++i) {
            a.data[i] = t % 2 ? rng.uniform() : std::clamp(b.data[i] + 0.1 * rng.normal(), 0.0, 1.0);
        }
        const auto r = dssim_loss(a, b);
        check_tensor_loss(check, "dssim", a, r.adjoint, [&] { return dssim_loss(a, b).value; });
    }
    return check;
}

inline GradientCheck ce_gradient_suite(int instances, std::uint64_t seed) {
    Rng rng(seed);
    GradientCheck check;
    for (int t = 0; t < instances; ++t) {
        const int C = 2 + static_cast<int>(rng.index(4));
        Tensor3<double> logits(4, 5, C);
        for (auto& v : logits.data) v = 2.0 * rng.normal();
        LabelMap labels(4, 5, 1), mask(4, 5, 1);
        for (auto& l : labels.data) l = rng.uniform() < 0.15 ? kIgnoreLabel : static_cast<std::uint8_t>(rng.index(C));
        for (auto& m : mask.data) m = rng.uniform() < 0.6 ? 1 : 0;
        const LabelMap* mp = t % 2 ? &mask : nullptr;
        const auto r = ce_loss(logits, labels, mp);
        check_tensor_loss(check, "ce", logits, r.adjoint, [&] { return ce_loss(logits, labels, mp).value; });
    }
    return check;
}

inline GradientCheck agg2d_gradient_suite(int instances, std::uint64_t seed) {
    Rng rng(seed);
    GradientCheck check;
    for (int t = 0; t < instances; ++t) {
        const int F = 2 + static_cast<int>(rng.index(15));
        FeatureMap f(6, 7, F);
        for (auto& v : f.data) v = rng.normal();
        const int k = 1 + static_cast<int>(rng.index(5));
        const int m = 1 + static_cast<int>(rng.index(42 / (k + 1)));
        const std::uint64_t s = rng.next();
        const auto r = agg2d_loss(f, m, k, s);
        check_tensor_loss(check, "agg2d", f, r.adjoint, [&] { return agg2d_loss(f, m, k, s).value; });
    }
    return check;
}

inline GradientCheck agg3d_gradient_suite(int instances, std::uint64_t seed) {
    Rng rng(seed);
    GradientCheck check;
    for (int t = 0; t < instances; ++t) {
        GaussianCloud c;
        c.sh_degree = 0;
        c.feature_dim = 2 + static_cast<int>(rng.index(15));
        c.resize(8 + rng.index(20));
        for (auto& v : c.positions) v = rng.normal();
        for (auto& v : c.features) v = rng.normal();
        const auto index = SpatialIndex::build(c.positions);
        const int k = 1 + static_cast<int>(rng.index(5));
        const int m = 1 + static_cast<int>(rng.index(c.size()));
        const std::uint64_t s = rng.next();
        const auto r = agg3d_loss(c, index, m, k, s);
        for (std::size_t i = 0; i < c.features.size(); ++i) {
            check.record("agg3d", r.d_features[i],
                         central_difference(c.features, i, [&] { return agg3d_loss(c, index, m, k, s).value; }));
        }
    }
    return check;
}

/// Direct evaluation of mean SSIM with explicit 2D window sums at every valid
/// position.
inline double reference_ssim(const Image& a, const Image& b) {
    double g[11], gs = 0;
    for (int i = 0; i < 11; ++i) {
        g[i] = std::exp(-(i - 5) * (i - 5) / (2 * 1.5 * 1.5));
        gs += g[i];
    }
    for (double& v : g) v /= gs;
    const double C1 = 1e-4, C2 = 9e-4;
    double total = 0;
    int count = 0;
    for (int c = 0; c < a.channels; ++c) {
        for (int y = 0; y + 11 <= a.height; ++y) {
            for (int x = 0; x + 11 <= a.width; ++x) {
                double mx = 0, my = 0;
                for (int i = 0; i < 11; ++i)
                    for (int j = 0; j < 11; ++j) {
                        mx += g[i] * g[j] * a.at(y + i, x + j, c);
                        my += g[i] * g[j] * b.at(y + i, x + j, c);
                    }
                double vx = 0, vy = 0, cxy = 0;
                for (int i = 0; i < 11; ++i)
                    for (int j = 0; j < 11; ++j) {
                        const double dx = a.at(y + i, x + j, c) - mx, dy = b.at(y + i, x + j, c) - my;
                        vx += g[i] * g[j] * dx * dx;
                        vy += g[i] * g[j] * dy * dy;
                        cxy += g[i] * g[j] * dx * dy;
                    }
                total += (2 * mx * my + C1) * (2 * cxy + C2) / ((mx * mx + my * my + C1) * (vx + vy + C2));
                ++count;
            }
        }
    }
    return total / count;
}

} // namespace oracle
