#include "seismo/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <openssl/evp.h>

namespace seismo::io {

static_assert(std::endian::native == std::endian::little, "raw float32 files assume a little-endian host");

void write_f32(const fs::path& path, std::span<const float> values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<float> read_f32(const fs::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes % sizeof(float) != 0) throw std::runtime_error("truncated float32 file " + path.string());
    std::vector<float> v(bytes / sizeof(float));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
    return v;
}

void write_meta(const fs::path& path, const Meta& meta) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    boost::property_tree::write_ini(out, meta);
}

Meta read_meta(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Meta m;
    try {
        boost::property_tree::read_ini(in, m);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw std::runtime_error("malformed structured text " + path.string() + ": " + e.message());
    }
    return m;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string join(std::span<const double> values, char sep) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) s += sep;
        s += format_double(values[i]);
    }
    return s;
}

std::string join(std::span<const int> values, char sep) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) s += sep;
        s += std::to_string(values[i]);
    }
    return s;
}

std::vector<double> split_doubles(const std::string& text, char sep) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, sep)) {
        if (tok.find_first_not_of(" \t") == std::string::npos) continue;
        out.push_back(std::stod(tok));
    }
    return out;
}

std::vector<int> split_ints(const std::string& text, char sep) {
    std::vector<int> out;
    for (double d : split_doubles(text, sep)) out.push_back(static_cast<int>(d));
    return out;
}

namespace {

std::string digest_hex(const unsigned char* md, unsigned int len) {
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) { EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr); }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const void* p, std::size_t n) { EVP_DigestUpdate(ctx_, p, n); }
    std::string hex() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx_, md, &len);
        return digest_hex(md, len);
    }

private:
    EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Sha256 h;
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return h.hex();
}

std::string sha256_text(const std::string& text) {
    Sha256 h;
    h.update(text.data(), text.size());
    return h.hex();
}

void WeightArchive::add(NamedArray a) {
    std::size_t expect = 1;
    for (int d : a.shape) expect *= static_cast<std::size_t>(d);
    if (expect != a.values.size())
        throw WeightFileError(WeightFileError::Kind::Malformed, "array " + a.name + " size does not match its shape");
    for (auto& e : arrays_)
        if (e.name == a.name) {
            e = std::move(a);
            return;
        }
    arrays_.push_back(std::move(a));
}

const NamedArray* WeightArchive::find(const std::string& name) const {
    for (const auto& a : arrays_)
        if (a.name == name) return &a;
    return nullptr;
}

bool WeightArchive::operator==(const WeightArchive& o) const {
    if (arrays_.size() != o.arrays_.size()) return false;
    for (std::size_t i = 0; i < arrays_.size(); ++i) {
        const auto& a = arrays_[i];
        const auto& b = o.arrays_[i];
        if (a.name != b.name || a.shape != b.shape || a.values.size() != b.values.size()) return false;
        if (std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(float)) != 0) return false;
    }
    return true;
}

// Layout:
//   seismo-weights 1
//   arrays <count>
//   <name> f32 <d0>x<d1>x... <byte offset into payload>
//   ...
//   payload <bytes>
//   <raw float32 little-endian payload>
void WeightArchive::save(const fs::path& path) const {
    std::ostringstream header;
    header << "seismo-weights 1\n" << "arrays " << arrays_.size() << "\n";
    std::size_t offset = 0;
    for (const auto& a : arrays_) {
        header << a.name << " f32 ";
        for (std::size_t i = 0; i < a.shape.size(); ++i) header << (i ? "x" : "") << a.shape[i];
        header << " " << offset << "\n";
        offset += a.values.size() * sizeof(float);
    }
    header << "payload " << offset << "\n";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    const std::string h = header.str();
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (const auto& a : arrays_)
        out.write(reinterpret_cast<const char*>(a.values.data()),
                  static_cast<std::streamsize>(a.values.size() * sizeof(float)));
}

WeightArchive WeightArchive::load(const fs::path& path) {
    using Kind = WeightFileError::Kind;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw WeightFileError(Kind::Truncated, "truncated weight file (empty): " + path.string());
    if (line != "seismo-weights 1") throw WeightFileError(Kind::Malformed, "not a weight file: " + path.string());

    auto next_line = [&](const char* what) {
        if (!std::getline(in, line))
            throw WeightFileError(Kind::Truncated, std::string("truncated weight file, missing ") + what);
        return std::istringstream(line);
    };

    std::string tag;
    std::size_t count = 0;
    {
        auto ls = next_line("array count");
        if (!(ls >> tag >> count) || tag != "arrays") throw WeightFileError(Kind::Malformed, "bad array count line");
    }
    struct Entry {
        std::string name;
        std::vector<int> shape;
        std::size_t offset;
    };
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < count; ++i) {
        auto ls = next_line("index entry");
        Entry e;
        std::string dtype, dims;
        if (!(ls >> e.name >> dtype >> dims >> e.offset)) throw WeightFileError(Kind::Malformed, "bad index line: " + line);
        if (dtype != "f32") throw WeightFileError(Kind::Malformed, "unsupported dtype " + dtype);
        e.shape = split_ints(dims, 'x');
        entries.push_back(std::move(e));
    }
    std::size_t payload = 0;
    {
        auto ls = next_line("payload size");
        if (!(ls >> tag >> payload) || tag != "payload") throw WeightFileError(Kind::Malformed, "bad payload line");
    }
    std::vector<char> bytes(payload);
    in.read(bytes.data(), static_cast<std::streamsize>(payload));
    if (static_cast<std::size_t>(in.gcount()) != payload)
        throw WeightFileError(Kind::Truncated, "truncated weight payload in " + path.string());

    WeightArchive archive;
    for (const auto& e : entries) {
        std::size_t n = 1;
        for (int d : e.shape) n *= static_cast<std::size_t>(d);
        if (e.offset + n * sizeof(float) > payload)
            throw WeightFileError(Kind::Truncated, "array " + e.name + " extends past payload");
        NamedArray a{e.name, e.shape, std::vector<float>(n)};
        std::memcpy(a.values.data(), bytes.data() + e.offset, n * sizeof(float));
        archive.add(std::move(a));
    }
    return archive;
}

}  // namespace seismo::io
