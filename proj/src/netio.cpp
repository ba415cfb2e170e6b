/*
 * Copyright 2026 The snnforge Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "snnforge/netio.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

#include <json.hpp>

#include "snnforge/error.hpp"

namespace snnforge::netio {

using nlohmann::json;

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'A', 'S', 'N', 'N'};
constexpr std::size_t kHeaderSize = 4 + 4 + 8;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32_le(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t get_u64_le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint32_t get_u32_be(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

// Tensor names per layer kind, in the (sorted) order their data is stored.
const std::vector<std::string>& tensor_names(LayerKind kind) {
  static const std::vector<std::string> none;
  static const std::vector<std::string> affine = {"bias", "weight"};
  static const std::vector<std::string> bn = {"beta", "gamma", "mean", "sigma"};
  switch (kind) {
    case LayerKind::conv2d:
    case LayerKind::dense:
      return affine;
    case LayerKind::batchnorm:
      return bn;
    default:
      return none;
  }
}

Tensor& tensor_field(LayerSpec& layer, const std::string& name) {
  if (name == "weight") return layer.weight;
  if (name == "bias") return layer.bias;
  if (name == "mean") return layer.mean;
  if (name == "sigma") return layer.sigma;
  if (name == "gamma") return layer.gamma;
  return layer.beta;
}

const Tensor& tensor_field(const LayerSpec& layer, const std::string& name) {
  return tensor_field(const_cast<LayerSpec&>(layer), name);
}

json pair_json(const Pair& p) { return json::array({p[0], p[1]}); }

Pair pair_from(const json& j, const std::string& layer, const char* key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 2)
    throw Error(ErrorCode::ManifestError, "layer '" + layer + "': '" + key + "' must be [h,w]");
  return {j[key][0].get<std::size_t>(), j[key][1].get<std::size_t>()};
}

Shape shape_from(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::ManifestError, "shape must be an array");
  Shape s;
  for (const auto& d : j) {
    if (!d.is_number_unsigned()) throw Error(ErrorCode::ManifestError, "shape entries must be unsigned");
    s.push_back(d.get<std::size_t>());
  }
  return s;
}

json manifest_of(const NetworkSpec& net, std::vector<const Tensor*>& order) {
  json layers = json::array();
  std::uint64_t offset = 0;
  for (const LayerSpec& layer : net.layers) {
    json entry;
    entry["kind"] = std::string(to_string(layer.kind));
    entry["name"] = layer.name;
    switch (layer.kind) {
      case LayerKind::conv2d:
        entry["padding"] = std::string(to_string(layer.padding));
        entry["stride"] = pair_json(layer.stride);
        break;
      case LayerKind::maxpool:
      case LayerKind::avgpool:
        entry["stride"] = pair_json(layer.stride);
        entry["window"] = pair_json(layer.window);
        break;
      default:
        break;
    }
    const auto& names = tensor_names(layer.kind);
    if (!names.empty()) {
      json tensors = json::object();
      for (const std::string& name : names) {
        const Tensor& t = tensor_field(layer, name);
        const std::uint64_t length = 4 * static_cast<std::uint64_t>(t.size());
        tensors[name] = {{"dtype", "f32"}, {"shape", t.shape}, {"offset", offset}, {"length", length}};
        offset += length;
        order.push_back(&t);
      }
      entry["tensors"] = std::move(tensors);
    }
    layers.push_back(std::move(entry));
  }
  json manifest;
  manifest["input_shape"] = net.input_shape;
  manifest["layers"] = std::move(layers);
  manifest["layout"] = "NCHW";
  manifest["normalized"] = net.normalized;
  return manifest;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const NetworkSpec& net) {
  validate(net);
  std::vector<const Tensor*> order;
  const std::string text = manifest_of(net, order).dump();

  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  put_u32(out, kFormatVersion);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const Tensor* t : order) {
    for (double v : t->data) {
      const float f = static_cast<float>(v);
      if (!std::isfinite(f)) throw Error(ErrorCode::NonFinite, "value overflows f32");
      put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
  }
  return out;
}

NetworkSpec parse_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::Truncated, "file shorter than magic");
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw Error(ErrorCode::BadMagic, "expected 'ASNN'");
  if (bytes.size() < kHeaderSize) throw Error(ErrorCode::Truncated, "incomplete header");
  const std::uint32_t version = get_u32_le(bytes.data() + 4);
  if (version != kFormatVersion)
    throw Error(ErrorCode::VersionMismatch, "version " + std::to_string(version) + ", expected " +
                                                std::to_string(kFormatVersion));
  const std::uint64_t manifest_len = get_u64_le(bytes.data() + 8);
  if (manifest_len > bytes.size() - kHeaderSize)
    throw Error(ErrorCode::Truncated, "manifest extends past end of file");
  const auto* text = reinterpret_cast<const char*>(bytes.data() + kHeaderSize);
  const std::span<const std::uint8_t> payload = bytes.subspan(kHeaderSize + manifest_len);

  json manifest;
  try {
    manifest = json::parse(text, text + manifest_len);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestError, e.what());
  }

  NetworkSpec net;
  try {
    if (manifest.value("layout", std::string("NCHW")) != "NCHW")
      throw Error(ErrorCode::ManifestError, "only NCHW layout is supported");
    net.input_shape = shape_from(manifest.at("input_shape"));
    net.normalized = manifest.value("normalized", false);
    std::uint64_t cursor = 0;
    for (const json& entry : manifest.at("layers")) {
      LayerSpec layer;
      layer.name = entry.at("name").get<std::string>();
      const auto kind = parse_layer_kind(entry.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::ManifestError, "layer '" + layer.name + "': unknown kind");
      layer.kind = *kind;
      if (layer.kind == LayerKind::conv2d) {
        const auto padding = parse_padding(entry.at("padding").get<std::string>());
        if (!padding) throw Error(ErrorCode::ManifestError, "layer '" + layer.name + "': bad padding");
        layer.padding = *padding;
        layer.stride = pair_from(entry, layer.name, "stride");
      } else if (layer.kind == LayerKind::maxpool || layer.kind == LayerKind::avgpool) {
        layer.stride = pair_from(entry, layer.name, "stride");
        layer.window = pair_from(entry, layer.name, "window");
      }

      const auto& names = tensor_names(layer.kind);
      const json tensors = entry.value("tensors", json::object());
      if (tensors.size() != names.size())
        throw Error(ErrorCode::ManifestError, "layer '" + layer.name + "': unexpected tensor set");
      for (const std::string& name : names) {
        if (!tensors.contains(name))
          throw Error(ErrorCode::ManifestError, "layer '" + layer.name + "': missing tensor " + name);
        const json& desc = tensors.at(name);
        if (desc.value("dtype", std::string("f32")) != "f32")
          throw Error(ErrorCode::ManifestError, "only f32 tensors are supported");
        const Shape shape = shape_from(desc.at("shape"));
        const auto offset = desc.at("offset").get<std::uint64_t>();
        const auto length = desc.at("length").get<std::uint64_t>();
        if (offset < cursor)
          throw Error(ErrorCode::ManifestError, "tensor offsets must be ascending and non-overlapping");
        if (offset > payload.size() || length > payload.size() - offset)
          throw Error(ErrorCode::Truncated, "tensor '" + layer.name + "." + name + "' exceeds payload");
        if (length != 4 * static_cast<std::uint64_t>(element_count(shape)))
          throw Error(ErrorCode::ShapeMismatch, "tensor '" + layer.name + "." + name + "' of shape " +
                                                    shape_to_string(shape) + " holds " +
                                                    std::to_string(length / 4) + " floats");
        std::vector<double> values(element_count(shape));
        for (std::size_t k = 0; k < values.size(); ++k) {
          const float f = std::bit_cast<float>(get_u32_le(payload.data() + offset + 4 * k));
          if (!std::isfinite(f))
            throw Error(ErrorCode::NonFinite, "tensor '" + layer.name + "." + name + "' has NaN/Inf");
          values[k] = f;
        }
        tensor_field(layer, name) = Tensor(shape, std::move(values));
        cursor = offset + length;
      }
      net.layers.push_back(std::move(layer));
    }
    if (cursor != payload.size())
      throw Error(ErrorCode::ManifestError, "payload has " + std::to_string(payload.size() - cursor) +
                                                " unreferenced trailing bytes");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestError, e.what());
  }
  validate(net);
  return net;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void save_model(const NetworkSpec& net, const std::filesystem::path& path) {
  write_file(path, serialize_model(net));
}

NetworkSpec load_model(const std::filesystem::path& path) { return parse_model(read_file(path)); }

Tensor DatasetHandle::sample(std::size_t index) const {
  if (index >= count) throw Error(ErrorCode::InvalidArgument, "sample index out of range");
  const std::size_t n = element_count(sample_shape);
  const auto first = pixels.begin() + static_cast<std::ptrdiff_t>(index * n);
  return Tensor(sample_shape, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(n)));
}

Tensor DatasetHandle::sample(std::size_t index, const Shape& shape) const {
  return sample(index).reshaped(shape);
}

namespace {

DatasetHandle parse_images(std::span<const std::uint8_t> images) {
  if (images.size() < 4) throw Error(ErrorCode::Truncated, "image file shorter than magic");
  const std::uint32_t magic = get_u32_be(images.data());
  if (magic != 0x00000803 && magic != 0x00000804)
    throw Error(ErrorCode::BadMagic, "image file magic " + std::to_string(magic));
  const std::size_t dims = magic & 0xFF;
  if (images.size() < 4 + 4 * dims) throw Error(ErrorCode::Truncated, "incomplete image header");
  std::vector<std::size_t> d(dims);
  for (std::size_t i = 0; i < dims; ++i) d[i] = get_u32_be(images.data() + 4 + 4 * i);

  DatasetHandle data;
  data.count = d[0];
  data.sample_shape = dims == 3 ? Shape{1, d[1], d[2]} : Shape{d[1], d[2], d[3]};
  const std::size_t total = data.count * element_count(data.sample_shape);
  const std::size_t header = 4 + 4 * dims;
  if (images.size() - header < total)
    throw Error(ErrorCode::Truncated, "image file holds fewer pixels than its header declares");
  data.pixels.resize(total);
  for (std::size_t i = 0; i < total; ++i) data.pixels[i] = images[header + i] / 255.0;
  return data;
}

}  // namespace

DatasetHandle parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
  DatasetHandle data = parse_images(images);
  if (labels.size() < 8) throw Error(ErrorCode::Truncated, "incomplete label header");
  if (get_u32_be(labels.data()) != 0x00000801)
    throw Error(ErrorCode::BadMagic, "label file magic " + std::to_string(get_u32_be(labels.data())));
  const std::size_t n = get_u32_be(labels.data() + 4);
  if (labels.size() - 8 < n) throw Error(ErrorCode::Truncated, "label file holds fewer labels than declared");
  if (n != data.count)
    throw Error(ErrorCode::CountMismatch, std::to_string(n) + " labels for " +
                                              std::to_string(data.count) + " images");
  data.labels.assign(labels.begin() + 8, labels.begin() + 8 + static_cast<std::ptrdiff_t>(n));
  return data;
}

DatasetHandle load_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path) {
  return parse_idx(read_file(images_path), read_file(labels_path));
}

DatasetHandle load_idx_images(const std::filesystem::path& images_path) {
  return parse_images(read_file(images_path));
}

}  // namespace snnforge::netio
