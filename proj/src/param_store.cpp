#include "gpsgraph/param_store.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace gps {

Value ParamStore::create(const std::string& name, std::int64_t rows, std::int64_t cols,
                         std::vector<double> init) {
  if (params_.count(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
  Value v = Value::from_data(rows, cols, std::move(init), /*requires_grad=*/true);
  params_.emplace(name, v);
  order_.push_back(name);
  return v;
}

Value ParamStore::create_zeros(const std::string& name, std::int64_t rows, std::int64_t cols) {
  return create(name, rows, cols, std::vector<double>(static_cast<std::size_t>(rows * cols), 0.0));
}

Value ParamStore::create_glorot(const std::string& name, std::int64_t rows, std::int64_t cols,
                                RngStream rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::vector<double> init(static_cast<std::size_t>(rows * cols));
  for (auto& x : init) x = (2.0 * rng.uniform() - 1.0) * a;
  return create(name, rows, cols, std::move(init));
}

Value ParamStore::create_normal(const std::string& name, std::int64_t rows, std::int64_t cols,
                                RngStream rng, double stddev) {
  std::vector<double> init(static_cast<std::size_t>(rows * cols));
  for (auto& x : init) x = rng.normal() * stddev;
  return create(name, rows, cols, std::move(init));
}

Value ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("ParamStore: unknown parameter " + name);
  return it->second;
}

std::vector<double>& ParamStore::state(const std::string& name, std::int64_t size, double fill) {
  auto it = state_.find(name);
  if (it == state_.end()) {
    it = state_.emplace(name, std::vector<double>(static_cast<std::size_t>(size), fill)).first;
    state_order_.push_back(name);
  }
  return it->second;
}

std::vector<double>& ParamStore::moment1(const std::string& name) {
  auto it = m1_.find(name);
  if (it == m1_.end())
    it = m1_.emplace(name, std::vector<double>(get(name).data().size(), 0.0)).first;
  return it->second;
}

std::vector<double>& ParamStore::moment2(const std::string& name) {
  auto it = m2_.find(name);
  if (it == m2_.end())
    it = m2_.emplace(name, std::vector<double>(get(name).data().size(), 0.0)).first;
  return it->second;
}

std::int64_t ParamStore::param_count() const {
  std::int64_t total = 0;
  for (const auto& name : order_) total += params_.at(name).size();
  return total;
}

void ParamStore::zero_grads() {
  for (const auto& name : order_) {
    Value v = params_.at(name);
    v.zero_grad();
  }
}

namespace {
constexpr char kMagic[8] = {'G', 'P', 'S', 'C', 'K', 'P', 'T', '1'};
}

void ParamStore::save(const std::string& path, const std::string& manifest_json) const {
  nlohmann::json meta;
  meta["version"] = 1;
  meta["manifest"] = manifest_json;
  auto& plist = meta["params"] = nlohmann::json::array();
  for (const auto& name : order_) {
    const Value v = params_.at(name);
    plist.push_back({{"name", name}, {"rows", v.rows()}, {"cols", v.cols()}});
  }
  auto& slist = meta["state"] = nlohmann::json::array();
  for (const auto& name : state_order_)
    slist.push_back({{"name", name}, {"size", state_.at(name).size()}});

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("ParamStore::save: cannot open " + path);
  os.write(kMagic, sizeof(kMagic));
  const std::string meta_str = meta.dump();
  const std::uint64_t len = meta_str.size();
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  for (const auto& name : order_) {
    const auto& d = params_.at(name).data();
    os.write(reinterpret_cast<const char*>(d.data()),
             static_cast<std::streamsize>(d.size() * sizeof(double)));
  }
  for (const auto& name : state_order_) {
    const auto& d = state_.at(name);
    os.write(reinterpret_cast<const char*>(d.data()),
             static_cast<std::streamsize>(d.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("ParamStore::save: write failed for " + path);
}

std::string ParamStore::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("ParamStore::load: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("ParamStore::load: bad checkpoint header");
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string meta_str(len, '\0');
  is.read(meta_str.data(), static_cast<std::streamsize>(len));
  const auto meta = nlohmann::json::parse(meta_str);
  for (const auto& p : meta.at("params")) {
    const std::string name = p.at("name");
    Value v = get(name);
    if (v.rows() != p.at("rows").get<std::int64_t>() ||
        v.cols() != p.at("cols").get<std::int64_t>())
      throw std::runtime_error("ParamStore::load: shape mismatch for " + name);
    is.read(reinterpret_cast<char*>(v.mutable_data().data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  for (const auto& sEntry : meta.at("state")) {
    const std::string name = sEntry.at("name");
    const auto size = sEntry.at("size").get<std::int64_t>();
    auto& buf = state(name, size, 0.0);
    if (static_cast<std::int64_t>(buf.size()) != size)
      throw std::runtime_error("ParamStore::load: state size mismatch for " + name);
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(double)));
  }
  if (!is) throw std::runtime_error("ParamStore::load: truncated checkpoint " + path);
  return meta.at("manifest");
}

}  // namespace gps
