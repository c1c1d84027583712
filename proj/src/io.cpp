#include "smyrf/io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "smyrf/error.hpp"

namespace smyrf::io {

namespace {

// magic(4) + version(2) + four u32 counts = 22 bytes, then float32 payload.
constexpr std::size_t kHeaderBytes = 22;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) {
        out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
    }
}

std::uint16_t get_u16(std::span<const std::uint8_t> bytes, std::size_t at) {
    return static_cast<std::uint16_t>(bytes[at] | (bytes[at + 1] << 8));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t at) {
    return static_cast<std::uint32_t>(bytes[at]) |
           (static_cast<std::uint32_t>(bytes[at + 1]) << 8) |
           (static_cast<std::uint32_t>(bytes[at + 2]) << 16) |
           (static_cast<std::uint32_t>(bytes[at + 3]) << 24);
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
    const float f = static_cast<float>(v);
    if (!std::isfinite(f)) {
        throw DomainError("container write: value " + std::to_string(v) +
                          " is not representable as a finite float32");
    }
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
    put_u32(out, bits);
}

double get_f32(std::span<const std::uint8_t> bytes, std::size_t at) {
    const std::uint32_t bits = get_u32(bytes, at);
    return static_cast<double>(std::bit_cast<float>(bits));
}

void put_matrix(std::vector<std::uint8_t>& out, const Matrix& m) {
    for (double v : m.data()) put_f32(out, v);
}

Matrix get_matrix(std::span<const std::uint8_t> bytes, std::size_t& at, std::size_t rows,
                  std::size_t cols, const char* what) {
    Matrix m(rows, cols);
    for (auto& v : m.data()) {
        v = get_f32(bytes, at);
        at += 4;
        if (!std::isfinite(v)) {
            throw FormatError(std::string("container: non-finite value in ") + what);
        }
    }
    return m;
}

}  // namespace

std::vector<std::uint8_t> encode_container(const AttentionInstance& inst) {
    inst.validate();
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderBytes +
                4 * (inst.queries.size() + inst.keys.size() + inst.values.size()));
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16(out, kInstanceVersion);
    put_u32(out, static_cast<std::uint32_t>(inst.n_q()));
    put_u32(out, static_cast<std::uint32_t>(inst.n_k()));
    put_u32(out, static_cast<std::uint32_t>(inst.d()));
    put_u32(out, static_cast<std::uint32_t>(inst.d_v()));
    put_matrix(out, inst.queries);
    put_matrix(out, inst.keys);
    put_matrix(out, inst.values);
    return out;
}

AttentionInstance decode_container(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderBytes) {
        throw FormatError("container: " + std::to_string(bytes.size()) +
                          " bytes is shorter than the 22-byte header");
    }
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("container: bad magic (expected SMRF)");
    }
    const std::uint16_t version = get_u16(bytes, 4);
    if (version != kInstanceVersion) {
        throw FormatError("container: version " + std::to_string(version) + ", expected " +
                          std::to_string(kInstanceVersion));
    }
    const std::uint32_t n_q = get_u32(bytes, 6);
    const std::uint32_t n_k = get_u32(bytes, 10);
    const std::uint32_t d = get_u32(bytes, 14);
    const std::uint32_t d_v = get_u32(bytes, 18);

    const std::uint64_t floats = static_cast<std::uint64_t>(n_q) * d +
                                 static_cast<std::uint64_t>(n_k) * d +
                                 static_cast<std::uint64_t>(n_k) * d_v;
    const std::uint64_t expected = kHeaderBytes + 4 * floats;
    if (bytes.size() != expected) {
        throw FormatError("container: expected " + std::to_string(expected) + " bytes, got " +
                          std::to_string(bytes.size()));
    }

    std::size_t at = kHeaderBytes;
    AttentionInstance inst;
    inst.queries = get_matrix(bytes, at, n_q, d, "Q");
    inst.keys = get_matrix(bytes, at, n_k, d, "K");
    inst.values = get_matrix(bytes, at, n_k, d_v, "V");
    inst.validate();
    return inst;
}

std::vector<std::uint8_t> encode_output_container(const Matrix& output) {
    output.require_finite("output container");
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderBytes + 4 * output.size());
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16(out, kOutputVersion);
    put_u32(out, static_cast<std::uint32_t>(output.rows()));
    put_u32(out, 0);
    put_u32(out, static_cast<std::uint32_t>(output.cols()));
    put_u32(out, static_cast<std::uint32_t>(output.cols()));
    put_matrix(out, output);
    return out;
}

Matrix decode_output_container(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderBytes) {
        throw FormatError("output container: " + std::to_string(bytes.size()) +
                          " bytes is shorter than the 22-byte header");
    }
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("output container: bad magic (expected SMRF)");
    }
    const std::uint16_t version = get_u16(bytes, 4);
    if (version != kOutputVersion) {
        throw FormatError("output container: version " + std::to_string(version) +
                          ", expected " + std::to_string(kOutputVersion));
    }
    const std::uint32_t rows = get_u32(bytes, 6);
    const std::uint32_t n_k = get_u32(bytes, 10);
    const std::uint32_t d = get_u32(bytes, 14);
    const std::uint32_t cols = get_u32(bytes, 18);
    if (n_k != 0 || d != cols) {
        throw FormatError("output container: malformed header counts");
    }
    const std::uint64_t expected =
        kHeaderBytes + 4 * static_cast<std::uint64_t>(rows) * cols;
    if (bytes.size() != expected) {
        throw FormatError("output container: expected " + std::to_string(expected) +
                          " bytes, got " + std::to_string(bytes.size()));
    }
    std::size_t at = kHeaderBytes;
    return get_matrix(bytes, at, rows, cols, "output");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

AttentionInstance read_container(const std::filesystem::path& path) {
    return decode_container(read_file(path));
}

void write_container(const std::filesystem::path& path, const AttentionInstance& inst) {
    atomic_write(path, encode_container(inst));
}

Matrix read_output_container(const std::filesystem::path& path) {
    return decode_output_container(read_file(path));
}

void write_output_container(const std::filesystem::path& path, const Matrix& output) {
    atomic_write(path, encode_output_container(output));
}

void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw FormatError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void atomic_write_text(const std::filesystem::path& path, const std::string& text) {
    atomic_write(path, std::span<const std::uint8_t>(
                           reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &digest_len, EVP_sha256(), nullptr) != 1) {
        throw FormatError("sha256: digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * digest_len);
    for (unsigned int i = 0; i < digest_len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string sha256_hex_file(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return sha256_hex(bytes);
}

}  // namespace smyrf::io
