#ifndef SAHI_ORACLE_HPP
#define SAHI_ORACLE_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sahi/detector.hpp"
#include "sahi/rng.hpp"

namespace sahi {

// Deterministic mock detector derived from ground truth. Misses objects whose
// apparent (scaled) area is below min_apparent_area, and emits truncated
// hallucinations for objects whose visible fraction falls inside
// [hallucination_lo, hallucination_hi).
struct OracleConfig {
    double min_apparent_area = 0.0;   // px^2 in the scaled patch frame
    double visibility_threshold = 1.0;  // fraction of truth area required
    double hallucination_lo = 0.0;
    double hallucination_hi = 0.0;  // lo == hi disables hallucination
    std::uint64_t rng_seed = 0;
    double fp_rate = 0.0;  // expected seeded spurious detections per patch

    void validate() const {
        if (min_apparent_area < 0.0)
            throw std::invalid_argument("OracleConfig: min_apparent_area < 0");
        if (!(visibility_threshold > 0.0 && visibility_threshold <= 1.0))
            throw std::invalid_argument("OracleConfig: visibility_threshold not in (0,1]");
        if (!(hallucination_lo >= 0.0 && hallucination_lo <= hallucination_hi &&
              hallucination_hi <= visibility_threshold))
            throw std::invalid_argument(
                "OracleConfig: need 0 <= lo <= hi <= visibility_threshold");
        if (fp_rate < 0.0)
            throw std::invalid_argument("OracleConfig: fp_rate < 0");
    }
};

class OracleDetector final : public DetectorBackend {
public:
    explicit OracleDetector(OracleConfig cfg) : cfg_(cfg) { cfg_.validate(); }

    OracleConfig const& config() const { return cfg_; }

    std::vector<Detection> detect(GrayImage const& patch,
                                  FrameTransform const& transform,
                                  DetectContext const& ctx) override {
        std::vector<Detection> out;
        BBox view(transform.origin_x, transform.origin_y,
                  transform.origin_x + patch.width / transform.scale,
                  transform.origin_y + patch.height / transform.scale);
        if (ctx.truths) {
            for (auto const& t : *ctx.truths) {
                auto clip = intersect(t.bbox, view);
                if (!clip) continue;
                double f = area(*clip) / area(t.bbox);
                if (f <= 0.0) continue;
                BBox local = to_local(transform, *clip);
                double apparent = area(local);
                double score = 0.5 + 0.5 * f;
                if (f >= cfg_.visibility_threshold && apparent >= cfg_.min_apparent_area) {
                    out.push_back({local, t.class_id, score, {}});
                } else if (f >= cfg_.hallucination_lo && f < cfg_.hallucination_hi) {
                    out.push_back({local, t.class_id, score, {}});
                }
            }
        }
        emit_spurious(patch, transform, ctx, out);
        return out;
    }

private:
    void emit_spurious(GrayImage const& patch, FrameTransform const& transform,
                       DetectContext const& ctx, std::vector<Detection>& out) {
        if (cfg_.fp_rate <= 0.0) return;
        SplitMix64 rng(mix_seed(cfg_.rng_seed, ctx.image_id, transform,
                                patch.width, patch.height));
        int count = static_cast<int>(std::floor(cfg_.fp_rate));
        if (rng.uniform() < cfg_.fp_rate - count) ++count;
        for (int i = 0; i < count; ++i) {
            double w = 4.0 + rng.uniform() * 12.0;
            double h = 4.0 + rng.uniform() * 12.0;
            if (w >= patch.width) w = patch.width * 0.5;
            if (h >= patch.height) h = patch.height * 0.5;
            double x0 = rng.uniform() * (patch.width - w);
            double y0 = rng.uniform() * (patch.height - h);
            int cls = static_cast<int>(rng.next() % std::max(1, ctx.num_classes));
            double score = 0.5 + 0.5 * rng.uniform();
            out.push_back({BBox(x0, y0, x0 + w, y0 + h), cls, score, {}});
        }
    }

    static std::uint64_t mix_seed(std::uint64_t seed, std::string const& image_id,
                                  FrameTransform const& t, int w, int h) {
        std::uint64_t x = seed;
        for (char c : image_id) x = (x ^ static_cast<std::uint8_t>(c)) * 0x100000001b3ULL;
        auto mix = [&x](std::uint64_t v) { x = (x ^ v) * 0x100000001b3ULL; };
        mix(static_cast<std::uint64_t>(std::llround(t.origin_x * 1024)));
        mix(static_cast<std::uint64_t>(std::llround(t.origin_y * 1024)));
        mix(static_cast<std::uint64_t>(std::llround(t.scale * 1024)));
        mix(static_cast<std::uint64_t>(w));
        mix(static_cast<std::uint64_t>(h));
        return x;
    }

    OracleConfig cfg_;
};

}  // namespace sahi

#endif  // SAHI_ORACLE_HPP
