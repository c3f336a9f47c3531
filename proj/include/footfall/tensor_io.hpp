// Copyright 2026 The Footfall Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Tensor container file: an 8-byte magic, a little-endian uint64 header size,
// a UTF-8 JSON header and a payload of packed little-endian float32 values.
// The header lists every tensor as {"name", "shape", "offset"} (offset in
// bytes from the start of the payload) next to caller-supplied metadata.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <string_view>

#include "json.hpp"

#include "footfall/autodiff.hpp"
#include "footfall/error.hpp"

namespace footfall {

inline constexpr char kTensorFileMagic[8] = {'F', 'F', 'T', 'E', 'N', 'S', '0', '1'};

struct TensorFile {
  nlohmann::json metadata = nlohmann::json::object();
  std::map<std::string, ad::Tensor<float>> tensors;
};

inline std::string encode_tensor_file(const TensorFile& file) {
  nlohmann::json header;
  header["metadata"] = file.metadata;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : file.tensors) {
    header["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.numel() * sizeof(float);
  }
  const std::string text = header.dump();
  std::string out(kTensorFileMagic, sizeof(kTensorFileMagic));
  const std::uint64_t size = text.size();
  out.append(reinterpret_cast<const char*>(&size), sizeof(size));
  out += text;
  for (const auto& [name, t] : file.tensors)
    out.append(reinterpret_cast<const char*>(t.data().data()), t.numel() * sizeof(float));
  return out;
}

inline TensorFile decode_tensor_file(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kTensorFileMagic, 8) != 0)
    throw FormatError("tensor file: bad magic");
  std::uint64_t header_size = 0;
  std::memcpy(&header_size, bytes.data() + 8, sizeof(header_size));
  if (header_size > bytes.size() - 16) throw FormatError("tensor file: header runs past end of file");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_size));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("tensor file: header is not JSON: ") + e.what());
  }
  const std::string_view payload = bytes.substr(16 + header_size);
  TensorFile file;
  file.metadata = header.value("metadata", nlohmann::json::object());
  for (const auto& entry : header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<ad::Shape>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    ad::Tensor<float> t(shape);
    const std::size_t nbytes = t.numel() * sizeof(float);
    if (offset > payload.size() || nbytes > payload.size() - offset)
      throw FormatError("tensor file: tensor '" + name + "' runs past end of payload");
    std::memcpy(t.data().data(), payload.data() + offset, nbytes);
    file.tensors.emplace(name, std::move(t));
  }
  return file;
}

inline void write_tensor_file(const std::filesystem::path& path, const TensorFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const auto bytes = encode_tensor_file(file);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

inline TensorFile read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_tensor_file(bytes);
}

}  // namespace footfall
