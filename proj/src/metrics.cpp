#include "fedfuse/metrics.hpp"

#include <json.hpp>

#include <cstdio>
#include <stdexcept>

namespace fedfuse::metrics {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes) {
    if (classes == 0) {
        throw std::invalid_argument("metrics: need at least one class");
    }
    counts_.assign(classes * classes, 0);
}

std::uint64_t ConfusionMatrix::count(std::size_t truth, std::size_t pred) const {
    if (truth < 1 || truth > classes_ || pred < 1 || pred > classes_) {
        throw std::invalid_argument("metrics: class id out of range 1.." +
                                    std::to_string(classes_));
    }
    return counts_[(truth - 1) * classes_ + (pred - 1)];
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t acc = 0;
    for (std::uint64_t c : counts_) {
        acc += c;
    }
    return acc;
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t acc = 0;
    for (std::size_t i = 0; i < classes_; ++i) {
        acc += counts_[i * classes_ + i];
    }
    return acc;
}

void ConfusionMatrix::accumulate(const std::vector<std::size_t>& preds,
                                 const std::vector<std::size_t>& truths) {
    if (preds.size() != truths.size()) {
        throw std::invalid_argument("metrics: " + std::to_string(preds.size()) +
                                    " predictions vs " + std::to_string(truths.size()) +
                                    " truths");
    }
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] < 1 || preds[i] > classes_ || truths[i] < 1 || truths[i] > classes_) {
            throw std::invalid_argument("metrics: class id out of range 1.." +
                                        std::to_string(classes_) + " at position " +
                                        std::to_string(i));
        }
    }
    for (std::size_t i = 0; i < preds.size(); ++i) {
        ++counts_[(truths[i] - 1) * classes_ + (preds[i] - 1)];
    }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.classes_ != classes_) {
        throw std::invalid_argument("metrics: cannot merge a " + std::to_string(other.classes_) +
                                    "-class matrix into a " + std::to_string(classes_) +
                                    "-class one");
    }
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        counts_[i] += other.counts_[i];
    }
}

Scores scores(const ConfusionMatrix& m) {
    std::size_t c = m.classes();
    double total = static_cast<double>(m.total());
    if (m.total() == 0) {
        throw std::invalid_argument("metrics: cannot score an empty matrix");
    }

    Scores s;
    s.oa = static_cast<double>(m.trace()) / total;
    s.ca.resize(c);
    double ca_sum = 0.0;
    std::size_t ca_defined = 0;
    double pe_num = 0.0;
    for (std::size_t i = 1; i <= c; ++i) {
        std::uint64_t row = 0, col = 0;
        for (std::size_t j = 1; j <= c; ++j) {
            row += m.count(i, j);
            col += m.count(j, i);
        }
        if (row > 0) {
            double ca = static_cast<double>(m.count(i, i)) / static_cast<double>(row);
            s.ca[i - 1] = ca;
            ca_sum += ca;
            ++ca_defined;
        }
        pe_num += static_cast<double>(row) * static_cast<double>(col);
    }
    s.aa = ca_sum / static_cast<double>(ca_defined);
    double pe = pe_num / (total * total);
    // pe = 1 only when every sample sits in one diagonal cell, so overall
    // accuracy is 1 as well and agreement is perfect.
    s.kappa = pe == 1.0 ? 1.0 : (s.oa - pe) / (1.0 - pe);
    return s;
}

std::string report_text(const ConfusionMatrix& m) {
    Scores s = scores(m);
    std::string out = "class      samples   accuracy\n";
    char line[96];
    for (std::size_t i = 1; i <= m.classes(); ++i) {
        std::uint64_t row = 0;
        for (std::size_t j = 1; j <= m.classes(); ++j) {
            row += m.count(i, j);
        }
        if (s.ca[i - 1].has_value()) {
            std::snprintf(line, sizeof(line), "%5zu %12llu %10.4f\n", i,
                          static_cast<unsigned long long>(row), *s.ca[i - 1]);
        } else {
            std::snprintf(line, sizeof(line), "%5zu %12llu %10s\n", i,
                          static_cast<unsigned long long>(row), "-");
        }
        out += line;
    }
    std::snprintf(line, sizeof(line), "overall accuracy %9.4f\n", s.oa);
    out += line;
    std::snprintf(line, sizeof(line), "average accuracy %9.4f\n", s.aa);
    out += line;
    std::snprintf(line, sizeof(line), "kappa            %9.4f\n", s.kappa);
    out += line;
    return out;
}

std::string report_json(const ConfusionMatrix& m) {
    Scores s = scores(m);
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 1; i <= m.classes(); ++i) {
        std::uint64_t row = 0;
        for (std::size_t j = 1; j <= m.classes(); ++j) {
            row += m.count(i, j);
        }
        nlohmann::json rec;
        rec["class"] = i;
        rec["samples"] = row;
        if (s.ca[i - 1].has_value()) {
            rec["accuracy"] = *s.ca[i - 1];
        } else {
            rec["accuracy"] = nullptr;
        }
        rows.push_back(rec);
    }
    nlohmann::json doc;
    doc["classes"] = rows;
    doc["oa"] = s.oa;
    doc["aa"] = s.aa;
    doc["kappa"] = s.kappa;
    return doc.dump(2) + "\n";
}

}  // namespace fedfuse::metrics
