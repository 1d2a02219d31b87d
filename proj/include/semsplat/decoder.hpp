#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "semsplat/tensor.hpp"

namespace semsplat {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-pixel MLP: input -> hidden (ReLU) -> classes. With hidden == 0 the
/// decoder is a single affine layer input -> classes and w2/b2 are empty.
struct SemanticDecoder {
    int input_dim = 16;
    int hidden_dim = 32;
    int num_classes = 2;
    RowMatrix w1; // (hidden or classes) x input
    Eigen::VectorXd b1;
    RowMatrix w2; // classes x hidden
    Eigen::VectorXd b2;

    bool has_hidden() const { return hidden_dim > 0; }
    std::size_t parameter_count() const;
    void validate() const;

    /// Uniform +-1/sqrt(fan_in) weights, zero biases.
    static SemanticDecoder create(int input_dim, int hidden_dim, int num_classes,
                                  std::uint64_t seed);

    /// Flat parameter view in (w1, b1, w2, b2) order, used by the optimizer and
    /// checkpoints.
    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);
};

struct DecoderGradients {
    RowMatrix w1;
    Eigen::VectorXd b1;
    RowMatrix w2;
    Eigen::VectorXd b2;

    std::vector<double> flatten() const;
};

/// Rows are pixels. Returns logits, one row per input row.
RowMatrix decode_rows(const RowMatrix& features, const SemanticDecoder& decoder);

struct DecoderBackward {
    RowMatrix d_features;
    DecoderGradients grads;
};

DecoderBackward decode_rows_backward(const RowMatrix& features, const SemanticDecoder& decoder,
                                     const RowMatrix& d_logits);

/// Image-level wrappers. Throws ShapeMismatch on channel disagreement.
Tensor3<double> decode(const FeatureMap& features, const SemanticDecoder& decoder);

struct DecodeBackwardResult {
    FeatureMap d_features;
    DecoderGradients grads;
};

DecodeBackwardResult decode_backward(const FeatureMap& features, const SemanticDecoder& decoder,
                                     const Tensor3<double>& d_logits);

/// Argmax class per pixel (lowest index wins ties).
LabelMap argmax_labels(const Tensor3<double>& logits);

} // namespace semsplat
