#include <chrono>

#include "bdgd/errors.hpp"
#include "bdgd/infer/infer.hpp"

namespace bdgd::infer {

Evaluation evaluate(const model::Cascade& cascade, const std::vector<phantoms::DatasetRecord>& records, int T,
                    std::span<const std::uint64_t> seeds) {
  if (records.empty()) throw DataError("evaluate: no records");
  if (seeds.empty()) throw ConfigError("evaluate: no seeds");
  Evaluation out;
  for (std::uint64_t seed : seeds) {
    double final_total = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      const auto start = std::chrono::steady_clock::now();
      // Per-record streams so records can be evaluated in any order.
      const SampleStack stack = mc_reconstruct(r.sinogram, r.x0, cascade, T, Rng::derive(seed, {8, i}).next_u64(), true);
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

      out.rows.push_back({i, 0, seed, psnr(r.x0, r.ground_truth), 0.0});
      for (std::size_t k = 0; k < stack.per_block.size(); ++k) {
        const double p = psnr(posterior_mean(stack.per_block[k]), r.ground_truth);
        const bool last = k + 1 == stack.per_block.size();
        out.rows.push_back({i, static_cast<int>(k + 1), seed, p, last ? seconds : 0.0});
        if (last) final_total += p;
      }
      if (stack.per_block.empty()) final_total += out.rows.back().psnr;
    }
    out.per_seed_mean.push_back(final_total / static_cast<double>(records.size()));
  }
  out.summary = mean_std(out.per_seed_mean);
  return out;
}

}  // namespace bdgd::infer
