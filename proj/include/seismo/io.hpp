#pragma once

// Raw float32 arrays, structured-text sidecars and the portable weight file.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

#include "seismo/nn.hpp"

namespace seismo::io {

namespace fs = std::filesystem;

// Little-endian IEEE-754 float32, row-major.
void write_f32(const fs::path& path, std::span<const float> values);
std::vector<float> read_f32(const fs::path& path);

// Flat "key = value" text with optional [section] headers.
using Meta = boost::property_tree::ptree;
void write_meta(const fs::path& path, const Meta& meta);
Meta read_meta(const fs::path& path);

std::string join(std::span<const double> values, char sep = ',');
std::string join(std::span<const int> values, char sep = ',');
std::vector<double> split_doubles(const std::string& text, char sep = ',');
std::vector<int> split_ints(const std::string& text, char sep = ',');

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

std::string sha256_file(const fs::path& path);
std::string sha256_text(const std::string& text);

class WeightFileError : public std::runtime_error {
public:
    enum class Kind { Truncated, MissingLayer, ShapeMismatch, Malformed };
    WeightFileError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct NamedArray {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;
};

// Text index (name, dtype, shape, byte offset) followed by a raw float32
// little-endian payload, in one file.
class WeightArchive {
public:
    void add(NamedArray a);
    const NamedArray* find(const std::string& name) const;
    const std::vector<NamedArray>& arrays() const { return arrays_; }

    void save(const fs::path& path) const;
    static WeightArchive load(const fs::path& path);

    bool operator==(const WeightArchive& o) const;

private:
    std::vector<NamedArray> arrays_;
};

template <typename T>
void export_parameters(const nn::Sequential<T>& net, const std::string& prefix, WeightArchive& out) {
    auto names = net.parameter_names();
    auto params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = *params[i];
        NamedArray a;
        a.name = prefix + names[i];
        a.shape = {p.n, p.c, p.h, p.w};
        a.values.assign(p.data.begin(), p.data.end());
        out.add(std::move(a));
    }
}

template <typename T>
void install_parameters(nn::Sequential<T>& net, const std::string& prefix, const WeightArchive& in) {
    auto names = net.parameter_names();
    auto params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        const std::string name = prefix + names[i];
        const NamedArray* a = in.find(name);
        if (a == nullptr) throw WeightFileError(WeightFileError::Kind::MissingLayer, "missing layer " + name);
        const std::vector<int> want{p.n, p.c, p.h, p.w};
        if (a->shape != want)
            throw WeightFileError(WeightFileError::Kind::ShapeMismatch,
                                  "shape mismatch for layer " + name + ": file has (" + join(a->shape) +
                                      "), network expects (" + join(want) + ")");
        for (std::size_t k = 0; k < p.data.size(); ++k) p.data[k] = static_cast<T>(a->values[k]);
    }
}

}  // namespace seismo::io
