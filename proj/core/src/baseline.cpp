#include "nda/baseline.hpp"

#include "nda/errors.hpp"
#include "nda/rng.hpp"

#include <cmath>

namespace nda {

BaselineResult raw_pixel_baseline(const Dataset& queries, const Dataset& trainset,
                                  PixelMetric metric) {
    queries.validate();
    trainset.validate();
    if (queries.empty() || trainset.empty()) {
        throw config_error("baseline needs non-empty query and training sets");
    }
    if (queries.channels() != trainset.channels() || queries.side() != trainset.side()) {
        throw config_error("baseline requires matching image shapes");
    }

    const std::size_t len = queries[0].value_count();
    auto norm = [len](const ImageTensor& img) {
        double acc = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            acc += static_cast<double>(img.data[i]) * img.data[i];
        }
        return std::sqrt(acc);
    };

    std::vector<double> train_norms(trainset.size());
    for (std::size_t n = 0; n < trainset.size(); ++n) train_norms[n] = norm(trainset[n]);

    BaselineResult result;
    result.matrix.query_ids = queries.ids;
    result.matrix.train_ids = trainset.ids;
    result.matrix.scores.assign(queries.size() * trainset.size(), 0.0);
    result.matrix.fingerprint = fnv1a64(
        std::string(metric == PixelMetric::dot ? "baseline:dot" : "baseline:cosine"));
    for (const auto& id : trainset.ids) {
        result.matrix.fingerprint =
            splitmix64(result.matrix.fingerprint ^ fnv1a64(id));
    }
    for (const auto& id : queries.ids) {
        result.matrix.fingerprint =
            splitmix64(result.matrix.fingerprint ^ fnv1a64(id));
    }

    for (std::size_t q = 0; q < queries.size(); ++q) {
        const ImageTensor& x = queries[q];
        const double qnorm = norm(x);
        for (std::size_t n = 0; n < trainset.size(); ++n) {
            const ImageTensor& z = trainset[n];
            double dot = 0.0;
            for (std::size_t i = 0; i < len; ++i) {
                dot += static_cast<double>(x.data[i]) * z.data[i];
            }
            double score = dot;
            if (metric == PixelMetric::cosine) {
                const double denom = qnorm * train_norms[n];
                if (denom == 0.0) {
                    result.degenerate_pairs.emplace_back(q, n);
                    score = 0.0;
                } else {
                    score = dot / denom;
                }
            }
            result.matrix.scores[q * trainset.size() + n] = score;
        }
    }
    return result;
}

} // namespace nda
