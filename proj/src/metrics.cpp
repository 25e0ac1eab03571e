#include "chunknet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace chunknet {

std::vector<SimTime> MetricsReport::fcts(Stream::Kind kind) const {
    std::vector<SimTime> out;
    for (const auto& f : flows)
        if (f.kind == kind) out.push_back(f.fct_ns());
    return out;
}

std::vector<SimTime> MetricsReport::fcts_all() const {
    std::vector<SimTime> out;
    out.reserve(flows.size());
    for (const auto& f : flows) out.push_back(f.fct_ns());
    return out;
}

std::vector<std::pair<SimTime, double>> fct_ccdf(std::vector<SimTime> fcts) {
    if (fcts.empty())
        throw std::invalid_argument("ccdf of an empty FCT list");
    std::sort(fcts.begin(), fcts.end());
    const double n = static_cast<double>(fcts.size());
    std::vector<std::pair<SimTime, double>> out;
    for (size_t i = 0; i < fcts.size(); ++i) {
        if (i > 0 && fcts[i] == fcts[i - 1]) continue;
        // Everything at index >= i is >= fcts[i].
        out.emplace_back(fcts[i], double(fcts.size() - i) / n);
    }
    return out;
}

SimTime fct_quantile(std::vector<SimTime> fcts, double q) {
    if (fcts.empty())
        throw std::invalid_argument("quantile of an empty FCT list");
    if (q <= 0.0 || q > 1.0)
        throw std::invalid_argument("quantile q must be in (0, 1]");
    std::sort(fcts.begin(), fcts.end());
    size_t rank = static_cast<size_t>(
        std::ceil(q * static_cast<double>(fcts.size())));
    if (rank == 0) rank = 1;
    return fcts[rank - 1];
}

}  // namespace chunknet
