#include "kite/types.hpp"

#include "kite/error.hpp"

#include <algorithm>

namespace kite {

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::pretrained: return "pretrained";
        case Provenance::random: return "random";
        case Provenance::raw: return "raw";
        case Provenance::synthetic: return "synthetic";
    }
    return "unknown";
}

FeatureMatrix::FeatureMatrix(Matrix data, Provenance provenance)
    : data_(std::move(data)), provenance_(provenance) {
    if (data_.rows() < 1 || data_.cols() < 1) {
        raise(ErrorCode::ShapeMismatch, "feature matrix must have n >= 1 and d >= 1");
    }
    if (!data_.allFinite()) {
        raise(ErrorCode::NonFiniteInput, "feature matrix contains NaN or Inf");
    }
}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<std::size_t> &rows) const {
    Matrix out(static_cast<Eigen::Index>(rows.size()), d());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= static_cast<std::size_t>(n())) {
            raise(ErrorCode::ShapeMismatch, "row index out of range");
        }
        out.row(static_cast<Eigen::Index>(i)) = data_.row(static_cast<Eigen::Index>(rows[i]));
    }
    return FeatureMatrix(std::move(out), provenance_);
}

LabelVector::LabelVector(std::vector<int> labels, std::optional<int> num_classes)
    : labels_(std::move(labels)) {
    int max_label = -1;
    for (int y : labels_) {
        if (y < 0) raise(ErrorCode::SchemaError, "labels must be non-negative");
        max_label = std::max(max_label, y);
    }
    num_classes_ = num_classes.value_or(max_label + 1);
    if (max_label >= num_classes_) {
        raise(ErrorCode::SchemaError, "label " + std::to_string(max_label) + " outside [0, " +
                                          std::to_string(num_classes_) + ")");
    }
}

std::vector<std::size_t> LabelVector::class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes_), 0);
    for (int y : labels_) ++counts[static_cast<std::size_t>(y)];
    return counts;
}

bool LabelVector::all_classes_present() const {
    const auto counts = class_counts();
    return std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
}

LabelVector LabelVector::select(const std::vector<std::size_t> &rows) const {
    std::vector<int> out;
    out.reserve(rows.size());
    for (auto r : rows) {
        if (r >= labels_.size()) raise(ErrorCode::ShapeMismatch, "label index out of range");
        out.push_back(labels_[r]);
    }
    return LabelVector(std::move(out), num_classes_);
}

}  // namespace kite
