// Copyright 2026 The rvos Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rvos/optim.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rvos::ad {

using nlohmann::json;

TensorRef ParamStore::add(const std::string& name, TensorRef t) {
  if (params_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  t->requires_grad = true;
  params_[name] = t;
  return t;
}

const TensorRef& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, t] : params_) {
    t->ensure_grad();
    t->zero_grad();
  }
}

void ParamStore::clone_namespace(const std::string& src_prefix, const std::string& dst_prefix) {
  std::vector<std::pair<std::string, TensorRef>> copies;
  for (const auto& [name, t] : params_) {
    if (name.rfind(src_prefix, 0) != 0) continue;
    auto clone = detach(t);
    clone->requires_grad = true;
    copies.emplace_back(dst_prefix + name.substr(src_prefix.size()), clone);
  }
  if (copies.empty()) throw std::invalid_argument("no parameters under namespace " + src_prefix);
  for (auto& [name, t] : copies) {
    params_.erase(name);
    params_[name] = t;
  }
}

bool ParamStore::has_namespace(const std::string& prefix) const {
  auto it = params_.lower_bound(prefix);
  return it != params_.end() && it->first.rfind(prefix, 0) == 0;
}

std::vector<std::string> ParamStore::names_under(const std::string& prefix) const {
  std::vector<std::string> out;
  for (auto it = params_.lower_bound(prefix); it != params_.end(); ++it) {
    if (it->first.rfind(prefix, 0) != 0) break;
    out.push_back(it->first);
  }
  return out;
}

void adam_step(ParamStore& params, AdamState& state, const std::string& prefix) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(static_cast<double>(state.beta1), static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(static_cast<double>(state.beta2), static_cast<double>(state.step));
  for (auto& [name, t] : params) {
    if (!prefix.empty() && name.rfind(prefix, 0) != 0) continue;
    if (t->grad.size() != t->data.size())
      throw std::logic_error("adam_step: parameter " + name + " has no gradient");
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() != t->data.size()) m.assign(t->data.size(), 0.0f);
    if (v.size() != t->data.size()) v.assign(t->data.size(), 0.0f);
    for (size_t i = 0; i < t->data.size(); ++i) {
      const double g = t->grad[i];
      const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double m_hat = mi / bc1;
      const double v_hat = vi / bc2;
      t->data[i] = static_cast<float>(t->data[i] -
                                      state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon));
    }
    t->zero_grad();
  }
}

namespace {

void put_u32le(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t get_u32le(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void save_checkpoint(const ParamStore& params, const std::string& path) {
  json manifest;
  manifest["version"] = 1;
  json list = json::array();
  int64_t offset = 0;
  for (const auto& [name, t] : params) {
    json e;
    e["name"] = name;
    e["shape"] = t->shape;
    e["offset"] = offset;
    e["count"] = t->numel();
    list.push_back(e);
    offset += t->numel() * 4;
  }
  manifest["params"] = list;
  const std::string mtext = manifest.dump();

  std::string head = "RVCP";
  put_u32le(head, static_cast<uint32_t>(mtext.size()));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  f.write(head.data(), static_cast<std::streamsize>(head.size()));
  f.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  for (const auto& [name, t] : params) {
    for (float x : t->data) {
      uint32_t bits;
      std::memcpy(&bits, &x, 4);
      std::string w;
      put_u32le(w, bits);
      f.write(w.data(), 4);
    }
  }
  if (!f) throw std::runtime_error("short write on checkpoint: " + path);
}

ParamStore load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 8 || std::memcmp(bytes.data(), "RVCP", 4) != 0)
    throw std::runtime_error("not a checkpoint file (bad magic): " + path);
  const uint32_t mlen = get_u32le(bytes.data() + 4);
  if (bytes.size() < 8 + static_cast<size_t>(mlen))
    throw std::runtime_error("truncated checkpoint manifest: " + path);
  json manifest = json::parse(std::string(bytes.begin() + 8, bytes.begin() + 8 + mlen));
  const size_t blob = 8 + mlen;

  ParamStore store;
  for (const auto& e : manifest.at("params")) {
    const std::string name = e.at("name").get<std::string>();
    const std::vector<int> shape = e.at("shape").get<std::vector<int>>();
    const int64_t offset = e.at("offset").get<int64_t>();
    const int64_t count = e.at("count").get<int64_t>();
    if (count != shape_numel(shape))
      throw std::runtime_error("checkpoint manifest count/shape mismatch for " + name);
    if (blob + static_cast<size_t>(offset) + static_cast<size_t>(count) * 4 > bytes.size())
      throw std::runtime_error("checkpoint blob truncated at parameter " + name);
    std::vector<float> values(static_cast<size_t>(count));
    const uint8_t* p = bytes.data() + blob + offset;
    for (int64_t i = 0; i < count; ++i) {
      const uint32_t bits = get_u32le(p + i * 4);
      std::memcpy(&values[static_cast<size_t>(i)], &bits, 4);
    }
    store.add(name, make_tensor(shape, std::move(values)));
  }
  return store;
}

}  // namespace rvos::ad
