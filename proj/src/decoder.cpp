#include "semsplat/decoder.hpp"

#include <cmath>
#include <string>

#include "semsplat/errors.hpp"
#include "semsplat/random.hpp"

namespace semsplat {

std::size_t SemanticDecoder::parameter_count() const {
    return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
}

void SemanticDecoder::validate() const {
    const int first_out = has_hidden() ? hidden_dim : num_classes;
    if (input_dim <= 0 || num_classes <= 0 || hidden_dim < 0) {
        fail(ErrorKind::ConfigError, "decoder dimensions must be positive");
    }
    if (w1.rows() != first_out || w1.cols() != input_dim || b1.size() != first_out) {
        fail(ErrorKind::ShapeMismatch, "decoder first layer shape disagrees with its dimensions");
    }
    if (has_hidden() && (w2.rows() != num_classes || w2.cols() != hidden_dim || b2.size() != num_classes)) {
        fail(ErrorKind::ShapeMismatch, "decoder second layer shape disagrees with its dimensions");
    }
    if (!has_hidden() && (w2.size() != 0 || b2.size() != 0)) {
        fail(ErrorKind::ShapeMismatch, "single-layer decoder carries second-layer weights");
    }
    if (!w1.allFinite() || !b1.allFinite() || !w2.allFinite() || !b2.allFinite()) {
        fail(ErrorKind::ConfigError, "decoder weights are not finite");
    }
}

SemanticDecoder SemanticDecoder::create(int input_dim, int hidden_dim, int num_classes,
                                        std::uint64_t seed) {
    SemanticDecoder d;
    d.input_dim = input_dim;
    d.hidden_dim = hidden_dim;
    d.num_classes = num_classes;
    Rng rng(seed);
    auto fill = [&](RowMatrix& w, int rows, int cols) {
        w.resize(rows, cols);
        const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) w(r, c) = rng.uniform(-bound, bound);
        }
    };
    if (hidden_dim > 0) {
        fill(d.w1, hidden_dim, input_dim);
        d.b1 = Eigen::VectorXd::Zero(hidden_dim);
        fill(d.w2, num_classes, hidden_dim);
        d.b2 = Eigen::VectorXd::Zero(num_classes);
    } else {
        fill(d.w1, num_classes, input_dim);
        d.b1 = Eigen::VectorXd::Zero(num_classes);
    }
    d.validate();
    return d;
}

namespace {

template <typename Fn>
void for_each_block(Fn&& fn, const RowMatrix& w1, const Eigen::VectorXd& b1, const RowMatrix& w2,
                    const Eigen::VectorXd& b2) {
    fn(w1.data(), static_cast<std::size_t>(w1.size()));
    fn(b1.data(), static_cast<std::size_t>(b1.size()));
    fn(w2.data(), static_cast<std::size_t>(w2.size()));
    fn(b2.data(), static_cast<std::size_t>(b2.size()));
}

} // namespace

std::vector<double> SemanticDecoder::flatten() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for_each_block([&](const double* p, std::size_t n) { flat.insert(flat.end(), p, p + n); },
                   w1, b1, w2, b2);
    return flat;
}

void SemanticDecoder::unflatten(const std::vector<double>& flat) {
    if (flat.size() != parameter_count()) {
        fail(ErrorKind::ShapeMismatch, "decoder parameter vector has the wrong length");
    }
    std::size_t offset = 0;
    auto take = [&](double* p, std::size_t n) {
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                  flat.begin() + static_cast<std::ptrdiff_t>(offset + n), p);
        offset += n;
    };
    take(w1.data(), static_cast<std::size_t>(w1.size()));
    take(b1.data(), static_cast<std::size_t>(b1.size()));
    take(w2.data(), static_cast<std::size_t>(w2.size()));
    take(b2.data(), static_cast<std::size_t>(b2.size()));
}

std::vector<double> DecoderGradients::flatten() const {
    std::vector<double> flat;
    for_each_block([&](const double* p, std::size_t n) { flat.insert(flat.end(), p, p + n); },
                   w1, b1, w2, b2);
    return flat;
}

RowMatrix decode_rows(const RowMatrix& features, const SemanticDecoder& decoder) {
    if (features.cols() != decoder.input_dim) {
        fail(ErrorKind::ShapeMismatch, "feature channels " + std::to_string(features.cols()) +
                                           " != decoder input " + std::to_string(decoder.input_dim));
    }
    RowMatrix first = features * decoder.w1.transpose();
    first.rowwise() += decoder.b1.transpose();
    if (!decoder.has_hidden()) return first;
    first = first.cwiseMax(0.0);
    RowMatrix logits = first * decoder.w2.transpose();
    logits.rowwise() += decoder.b2.transpose();
    return logits;
}

DecoderBackward decode_rows_backward(const RowMatrix& features, const SemanticDecoder& decoder,
                                     const RowMatrix& d_logits) {
    if (features.cols() != decoder.input_dim || d_logits.rows() != features.rows() ||
        d_logits.cols() != decoder.num_classes) {
        fail(ErrorKind::ShapeMismatch, "decoder backward inputs disagree in shape");
    }
    DecoderBackward out;
    if (!decoder.has_hidden()) {
        out.grads.w1 = d_logits.transpose() * features;
        out.grads.b1 = d_logits.colwise().sum().transpose();
        out.d_features = d_logits * decoder.w1;
        return out;
    }
    RowMatrix pre = features * decoder.w1.transpose();
    pre.rowwise() += decoder.b1.transpose();
    const RowMatrix hidden = pre.cwiseMax(0.0);
    out.grads.w2 = d_logits.transpose() * hidden;
    out.grads.b2 = d_logits.colwise().sum().transpose();
    RowMatrix d_hidden = d_logits * decoder.w2;
    // ReLU gate: a unit at or below zero passes no gradient.
    d_hidden = d_hidden.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    out.grads.w1 = d_hidden.transpose() * features;
    out.grads.b1 = d_hidden.colwise().sum().transpose();
    out.d_features = d_hidden * decoder.w1;
    return out;
}

namespace {

RowMatrix as_rows(const Tensor3<double>& t) {
    return Eigen::Map<const RowMatrix>(t.data.data(), static_cast<Eigen::Index>(t.pixels()),
                                       t.channels);
}

Tensor3<double> as_tensor(const RowMatrix& m, int height, int width) {
    Tensor3<double> t(height, width, static_cast<int>(m.cols()));
    Eigen::Map<RowMatrix>(t.data.data(), m.rows(), m.cols()) = m;
    return t;
}

} // namespace

Tensor3<double> decode(const FeatureMap& features, const SemanticDecoder& decoder) {
    if (features.channels != decoder.input_dim) {
        fail(ErrorKind::ShapeMismatch, "feature map has " + std::to_string(features.channels) +
                                           " channels, decoder expects " +
                                           std::to_string(decoder.input_dim));
    }
    return as_tensor(decode_rows(as_rows(features), decoder), features.height, features.width);
}

DecodeBackwardResult decode_backward(const FeatureMap& features, const SemanticDecoder& decoder,
                                     const Tensor3<double>& d_logits) {
    if (features.channels != decoder.input_dim || d_logits.height != features.height ||
        d_logits.width != features.width || d_logits.channels != decoder.num_classes) {
        fail(ErrorKind::ShapeMismatch, "decode_backward adjoint shape disagrees with the features");
    }
    auto back = decode_rows_backward(as_rows(features), decoder, as_rows(d_logits));
    return {as_tensor(back.d_features, features.height, features.width), std::move(back.grads)};
}

LabelMap argmax_labels(const Tensor3<double>& logits) {
    LabelMap labels(logits.height, logits.width, 1);
    for (std::size_t p = 0; p < logits.pixels(); ++p) {
        const auto row = logits.pixel(p);
        int best = 0;
        for (int c = 1; c < logits.channels; ++c) {
            if (row[c] > row[best]) best = c;
        }
        labels.data[p] = static_cast<std::uint8_t>(best);
    }
    return labels;
}

} // namespace semsplat
