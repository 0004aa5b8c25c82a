#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace tal {

// Time-major T x C matrix of 64-bit reals. Row t holds the feature vector of
// clip t; every latent sequence in the pipeline is one of these.
class SeqTensor {
public:
    SeqTensor() = default;

    SeqTensor(int len, int channels, double fill = 0.0)
        : len_(len), channels_(channels),
          data_(check_dims(len, channels), fill) {}

    int len() const { return len_; }
    int channels() const { return channels_; }

    double& at(int t, int c) { return data_[idx(t, c)]; }
    double at(int t, int c) const { return data_[idx(t, c)]; }

    double* row(int t) { return data_.data() + idx(t, 0); }
    const double* row(int t) const { return data_.data() + idx(t, 0); }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const SeqTensor& other) const {
        return len_ == other.len_ && channels_ == other.channels_;
    }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    void fill(double v) { data_.assign(data_.size(), v); }

    bool operator==(const SeqTensor& other) const {
        return len_ == other.len_ && channels_ == other.channels_ &&
               data_ == other.data_;
    }

private:
    static std::size_t check_dims(int len, int channels) {
        if (len < 1 || channels < 1) {
            throw std::invalid_argument("SeqTensor: T and C must be >= 1");
        }
        return static_cast<std::size_t>(len) * static_cast<std::size_t>(channels);
    }

    std::size_t idx(int t, int c) const {
        assert(t >= 0 && t < len_ && c >= 0 && c < channels_);
        return static_cast<std::size_t>(t) * channels_ + c;
    }

    int len_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

} // namespace tal
