#pragma once

// Gradient-check problems for the style ops and the index ops behind augmentation.

#include <memory>
#include <vector>

#include "albumgan/style.hpp"
#include "gradcheck.hpp"
#include "reference.hpp"

namespace gradcheck {

inline std::vector<OpCase> style_op_cases() {
    std::vector<OpCase> cases;

    cases.push_back({"adain", [](albumgan::Rng& rng) {
                         Problem p;
                         const std::size_t n = pick(rng, 1, 2), c = pick(rng, 1, 3), h = pick(rng, 2, 3),
                                           w = pick(rng, 2, 3);
                         // Styles either per sample [N, C] or shared [C].
                         const bool shared = rng.bernoulli(0.5);
                         const Shape style = shared ? Shape{c} : Shape{n, c};
                         p.shapes = {{n, c, h, w}, style, style};
                         p.values = {random_values(rng, n * c * h * w, -2, 2),
                                     random_values(rng, albumgan::numel(style), -2, 2),
                                     random_values(rng, albumgan::numel(style), -2, 2)};
                         p.engine = [](const std::vector<Tensor>& in) { return albumgan::adain(in[0], in[1], in[2]); };
                         p.reference = [n, c, h, w, shared](const std::vector<Vec>& in) {
                             Vec ys = in[1], yb = in[2];
                             if (shared) {
                                 ys.clear();
                                 yb.clear();
                                 for (std::size_t b = 0; b < n; ++b) {
                                     ys.insert(ys.end(), in[1].begin(), in[1].end());
                                     yb.insert(yb.end(), in[2].begin(), in[2].end());
                                 }
                             }
                             return ref::adain(in[0], n, c, h * w, ys, yb, albumgan::kAdainEpsilon);
                         };
                         return p;
                     }});

    cases.push_back({"pixel_norm", [](albumgan::Rng& rng) {
                         Problem p;
                         const std::size_t n = pick(rng, 1, 2), c = pick(rng, 2, 4);
                         const bool flat = rng.bernoulli(0.3);
                         const std::size_t hw = flat ? 1 : pick(rng, 1, 3) * pick(rng, 1, 3);
                         p.shapes = {flat ? Shape{n, c} : Shape{n, c, hw, 1}};
                         p.values = {random_values(rng, n * c * hw, -2, 2)};
                         p.engine = [](const std::vector<Tensor>& in) { return albumgan::pixel_norm(in[0]); };
                         p.reference = [n, c, hw](const std::vector<Vec>& in) {
                             return ref::pixel_norm(in[0], n, c, hw, albumgan::kPixelNormEpsilon);
                         };
                         return p;
                     }});

    cases.push_back({"gather", [](albumgan::Rng& rng) {
                         Problem p;
                         const std::size_t in_n = pick(rng, 2, 12), out_n = pick(rng, 1, 16);
                         auto index = std::make_shared<std::vector<std::int64_t>>(out_n);
                         // Repeats and holes (-1) both occur.
                         for (auto& i : *index) i = rng.integer(-1, static_cast<std::int64_t>(in_n) - 1);
                         p.shapes = {{in_n}};
                         p.values = {random_values(rng, in_n, -2, 2)};
                         p.engine = [index, out_n](const std::vector<Tensor>& in) {
                             return albumgan::gather(in[0], index, {out_n});
                         };
                         p.reference = [index](const std::vector<Vec>& in) {
                             Vec out;
                             for (auto i : *index) out.push_back(i < 0 ? 0.0 : in[0][static_cast<std::size_t>(i)]);
                             return out;
                         };
                         return p;
                     }});

    cases.push_back({"scatter_add", [](albumgan::Rng& rng) {
                         Problem p;
                         const std::size_t in_n = pick(rng, 1, 16), out_n = pick(rng, 2, 8);
                         auto index = std::make_shared<std::vector<std::int64_t>>(in_n);
                         for (auto& i : *index) i = rng.integer(-1, static_cast<std::int64_t>(out_n) - 1);
                         p.shapes = {{in_n}};
                         p.values = {random_values(rng, in_n, -2, 2)};
                         p.engine = [index, out_n](const std::vector<Tensor>& in) {
                             return albumgan::scatter_add(in[0], index, {out_n});
                         };
                         p.reference = [index, out_n](const std::vector<Vec>& in) {
                             Vec out(out_n, 0.0);
                             for (std::size_t k = 0; k < index->size(); ++k)
                                 if ((*index)[k] >= 0) out[static_cast<std::size_t>((*index)[k])] += in[0][k];
                             return out;
                         };
                         return p;
                     }});
    return cases;
}

}  // namespace gradcheck
