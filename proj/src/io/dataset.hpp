#pragma once

#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace bnnkit {

// Labeled image collection with pixels scaled to [0,1].
struct Dataset {
    Tensor images; // [N,H,W,C]
    std::vector<int32_t> labels;
    std::string split;

    int64_t size() const { return images.shape.empty() ? 0 : images.shape[0]; }

    void validate() const {
        if (images.rank() != 4)
            fail(ErrorKind::Data, "dataset images must be [N,H,W,C], got " + images.shape_str());
        if (static_cast<int64_t>(labels.size()) != size())
            fail(ErrorKind::Data, "dataset has " + std::to_string(size()) + " images and " +
                                      std::to_string(labels.size()) + " labels");
    }

    Dataset slice(int64_t begin, int64_t end, std::string tag) const {
        Dataset d;
        int64_t n = end - begin;
        int64_t per = images.size() / std::max<int64_t>(size(), 1);
        d.images = Tensor({n, images.shape[1], images.shape[2], images.shape[3]});
        std::copy(images.ptr() + begin * per, images.ptr() + end * per, d.images.ptr());
        d.labels.assign(labels.begin() + begin, labels.begin() + end);
        d.split = std::move(tag);
        return d;
    }
};

template <class T>
TensorT<T> cast_tensor(const Tensor& t) {
    if constexpr (std::is_same_v<T, float>) return t;
    else {
        TensorT<T> out(t.shape);
        for (int64_t i = 0; i < t.size(); ++i) out.data[static_cast<size_t>(i)] = static_cast<T>(t.data[static_cast<size_t>(i)]);
        return out;
    }
}

} // namespace bnnkit
