#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "smyrf/attention.hpp"

namespace smyrf::io {

// QKV container, version 1:
//   magic "SMRF" | u16 version = 1 | u32 N_q, N_k, d, d_v   (all little-endian)
//   then Q, K, V as row-major little-endian IEEE-754 float32.
// The header is 22 bytes, so the file length is exactly
// 22 + 4 * (N_q*d + N_k*d + N_k*d_v) bytes.
//
// Output container, version 2: same 22-byte header with version = 2,
// N_k = 0 and d = d_v = columns; the single float32 array that follows is
// the N_q x d_v output matrix (no K/V sections).
inline constexpr char kMagic[4] = {'S', 'M', 'R', 'F'};
inline constexpr std::uint16_t kInstanceVersion = 1;
inline constexpr std::uint16_t kOutputVersion = 2;

std::vector<std::uint8_t> encode_container(const AttentionInstance& inst);
AttentionInstance decode_container(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_output_container(const Matrix& output);
Matrix decode_output_container(std::span<const std::uint8_t> bytes);

AttentionInstance read_container(const std::filesystem::path& path);
void write_container(const std::filesystem::path& path, const AttentionInstance& inst);

Matrix read_output_container(const std::filesystem::path& path);
void write_output_container(const std::filesystem::path& path, const Matrix& output);

// Write-temp-then-rename; partially written files never become visible.
void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void atomic_write_text(const std::filesystem::path& path, const std::string& text);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex_file(const std::filesystem::path& path);

}  // namespace smyrf::io
