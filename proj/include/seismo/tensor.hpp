#pragma once

#include <algorithm>
#include <cstddef>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace seismo {

// 64-byte aligned storage: vectorized reductions peel by address, so a fixed
// alignment keeps float results identical from run to run.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept {
        return true;
    }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

// Dense NCHW array. Dense layers view it as N x (C*H*W).
template <typename T>
struct Tensor {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;
    AlignedVector<T> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
        : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

    std::size_t size() const { return data.size(); }
    std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
    bool empty() const { return data.empty(); }

    T& operator()(int i, int ch, int y, int x) {
        return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
    }
    const T& operator()(int i, int ch, int y, int x) const {
        return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
    }

    std::span<T> sample(int i) { return {data.data() + i * sample_size(), sample_size()}; }
    std::span<const T> sample(int i) const { return {data.data() + i * sample_size(), sample_size()}; }

    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

    std::string shape_string() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(n, c, h, w);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                                    b.shape_string());
}

// Stack single-sample tensors along the batch axis.
template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> items) {
    if (items.empty()) return {};
    const auto& f = items.front();
    int total = 0;
    for (const auto& it : items) {
        if (it.c != f.c || it.h != f.h || it.w != f.w) throw std::invalid_argument("stack: shape mismatch");
        total += it.n;
    }
    Tensor<T> out(total, f.c, f.h, f.w);
    auto dst = out.data.begin();
    for (const auto& it : items) dst = std::copy(it.data.begin(), it.data.end(), dst);
    return out;
}

// Copy samples [begin, end) into a new tensor.
template <typename T>
Tensor<T> slice(const Tensor<T>& t, int begin, int end) {
    Tensor<T> out(end - begin, t.c, t.h, t.w);
    std::copy(t.data.begin() + begin * t.sample_size(), t.data.begin() + end * t.sample_size(), out.data.begin());
    return out;
}

}  // namespace seismo
