#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fedfuse::metrics {

// C x C integer counts, rows = actual class, columns = predicted class.
// Class ids are 1-based; 0 is the background label and never enters here.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes);

    std::size_t classes() const { return classes_; }
    std::uint64_t count(std::size_t truth, std::size_t pred) const;
    std::uint64_t total() const;
    std::uint64_t trace() const;

    // Counts one batch of (prediction, truth) pairs. Validates every id
    // before touching the counts, so a rejected call changes nothing.
    void accumulate(const std::vector<std::size_t>& preds,
                    const std::vector<std::size_t>& truths);

    // Merging partial matrices is plain addition, so it commutes and
    // associates; parallel evaluators combine their counts this way.
    void merge(const ConfusionMatrix& other);

private:
    std::size_t classes_;
    std::vector<std::uint64_t> counts_;
};

// The evaluation indicators. Per-class accuracy is undefined for a class
// with no actual samples; such classes are excluded from the average.
struct Scores {
    double oa = 0.0;
    std::vector<std::optional<double>> ca;
    double aa = 0.0;
    double kappa = 0.0;
};

Scores scores(const ConfusionMatrix& m);

// Human-readable table: one row per class, then overall / average accuracy
// and kappa.
std::string report_text(const ConfusionMatrix& m);

// The same numbers as a JSON record set.
std::string report_json(const ConfusionMatrix& m);

}  // namespace fedfuse::metrics
