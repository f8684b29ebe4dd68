#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kite {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Provenance { pretrained, random, raw, synthetic };

std::string_view to_string(Provenance p);

/// n samples (rows) by d feature dimensions (columns). Entries are finite.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    /// Throws NonFiniteInput on NaN/Inf and ShapeMismatch on an empty matrix.
    explicit FeatureMatrix(Matrix data, Provenance provenance = Provenance::pretrained);

    [[nodiscard]] const Matrix &data() const noexcept { return data_; }
    [[nodiscard]] Eigen::Index n() const noexcept { return data_.rows(); }
    [[nodiscard]] Eigen::Index d() const noexcept { return data_.cols(); }
    [[nodiscard]] Provenance provenance() const noexcept { return provenance_; }

    /// Rows at the given indices, in the given order.
    [[nodiscard]] FeatureMatrix select_rows(const std::vector<std::size_t> &rows) const;

private:
    Matrix data_;
    Provenance provenance_ = Provenance::pretrained;
};

/// Integer class ids in [0, num_classes).
class LabelVector {
public:
    LabelVector() = default;
    /// num_classes defaults to max(label) + 1.
    explicit LabelVector(std::vector<int> labels, std::optional<int> num_classes = std::nullopt);

    [[nodiscard]] const std::vector<int> &labels() const noexcept { return labels_; }
    [[nodiscard]] int num_classes() const noexcept { return num_classes_; }
    [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
    [[nodiscard]] int operator[](std::size_t i) const { return labels_[i]; }

    [[nodiscard]] std::vector<std::size_t> class_counts() const;
    /// True when every class id in [0, num_classes) occurs at least once.
    [[nodiscard]] bool all_classes_present() const;

    [[nodiscard]] LabelVector select(const std::vector<std::size_t> &rows) const;

private:
    std::vector<int> labels_;
    int num_classes_ = 0;
};

}  // namespace kite
