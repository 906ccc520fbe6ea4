#include "kbound/gateway/client.hpp"

#include <cmath>

#include "kbound/errors.hpp"
#include "kbound/util/parallel.hpp"

namespace kbound::gateway {

std::vector<SampledResponse> sample_responses(ModelClient& client, const Query& query, int n,
                                              double temperature, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("sample_responses: n must be >= 1");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw InvalidArgument("sample_responses: temperature must be a finite value >= 0");
  }
  std::vector<SampledResponse> out(static_cast<std::size_t>(n));
  util::parallel_for(out.size(), static_cast<std::size_t>(client.endpoint().max_parallel),
                     [&](std::size_t i) {
                       out[i] = client.draw(query, temperature, seed, static_cast<int>(i));
                       out[i].sample_index = static_cast<int>(i);
                     });
  return out;
}

SampledResponse greedy_answer(ModelClient& client, const Query& query) {
  return client.greedy(query);
}

ScoredSequence score_sequence(ModelClient& client, const Query& query, std::string_view target) {
  if (target.empty()) throw InvalidArgument("score_sequence: target text is empty");
  return client.score(query, target);
}

}  // namespace kbound::gateway
