#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "tdrive/config.hpp"
#include "tdrive/error.hpp"
#include "tdrive/io.hpp"
#include "tdrive/neural.hpp"
#include "tdrive/td3_agent.hpp"

namespace tdrive {

inline constexpr const char* kCheckpointFormat = "TD3CKPT";
inline constexpr int kCheckpointVersion = 1;

/// Agent plus the run bookkeeping needed to resume training.
struct Checkpoint {
  RunConfig config;
  td3::Td3Agent agent;
  int episodes_done = 0;
  std::int64_t env_steps = 0;
};

namespace detail {

using nlohmann::json;

// Matrices are stored row-major.
template <class T>
json matrix_to_json(const nn::MatrixOf<T>& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(static_cast<double>(m(r, c)));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

template <class T>
json vector_to_json(const nn::VectorOf<T>& v) {
  json data = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) data.push_back(static_cast<double>(v(i)));
  return data;
}

template <class T>
json layers_to_json(const std::vector<nn::BasicDenseLayer<T>>& layers) {
  json out = json::array();
  for (const auto& l : layers) out.push_back({{"weight", matrix_to_json(l.weight)}, {"bias", vector_to_json(l.bias)}});
  return out;
}

template <class T>
json mlp_to_json(const nn::BasicMlp<T>& net) {
  return {{"layer_sizes", net.layer_sizes()},
          {"hidden_activation", "relu"},
          {"output_activation", std::string(nn::to_string(net.output_activation()))},
          {"layers", layers_to_json(net.layers())}};
}

template <class T>
json adam_to_json(const nn::BasicAdamState<T>& opt) {
  return {{"lr", opt.config.lr},     {"beta1", opt.config.beta1}, {"beta2", opt.config.beta2},
          {"eps", opt.config.eps},   {"step", opt.step},          {"m", layers_to_json(opt.m)},
          {"v", layers_to_json(opt.v)}};
}

inline const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw Error(where + ": missing '" + key + "'");
  return j.at(key);
}

template <class T>
T number_at(const json& j, std::size_t i, const std::string& where) {
  if (!j.at(i).is_number()) throw Error(where + ": non-numeric entry");
  return static_cast<T>(j.at(i).get<double>());
}

template <class T>
nn::MatrixOf<T> matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& where) {
  const auto r = require(j, "rows", where).get<Eigen::Index>();
  const auto c = require(j, "cols", where).get<Eigen::Index>();
  const json& data = require(j, "data", where);
  if (r != rows || c != cols)
    throw Error(where + ": weight is " + std::to_string(r) + "x" + std::to_string(c) + ", expected " +
                std::to_string(rows) + "x" + std::to_string(cols));
  if (!data.is_array() || data.size() != static_cast<std::size_t>(rows * cols))
    throw Error(where + ": weight holds " + std::to_string(data.is_array() ? data.size() : 0) +
                " values, expected " + std::to_string(rows * cols));
  nn::MatrixOf<T> m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index jj = 0; jj < cols; ++jj) m(i, jj) = number_at<T>(data, k++, where);
  return m;
}

template <class T>
nn::VectorOf<T> vector_from_json(const json& j, Eigen::Index size, const std::string& where) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(size))
    throw Error(where + ": bias holds " + std::to_string(j.is_array() ? j.size() : 0) + " values, expected " +
                std::to_string(size));
  nn::VectorOf<T> v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = number_at<T>(j, static_cast<std::size_t>(i), where);
  return v;
}

template <class T>
void layers_from_json(const json& j, std::vector<nn::BasicDenseLayer<T>>& layers, const std::string& where) {
  if (!j.is_array() || j.size() != layers.size())
    throw Error(where + ": expected " + std::to_string(layers.size()) + " layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string at = where + " layer " + std::to_string(l);
    layers[l].weight =
        matrix_from_json<T>(require(j[l], "weight", at), layers[l].weight.rows(), layers[l].weight.cols(), at);
    layers[l].bias = vector_from_json<T>(require(j[l], "bias", at), layers[l].bias.size(), at);
  }
}

template <class T>
void mlp_from_json(const json& j, nn::BasicMlp<T>& net, const std::string& where) {
  const auto sizes = require(j, "layer_sizes", where).get<std::vector<int>>();
  if (sizes != net.layer_sizes()) throw Error(where + ": layer_sizes do not match the configured architecture");
  if (nn::parse_activation(require(j, "output_activation", where).get<std::string>()) != net.output_activation())
    throw Error(where + ": output activation mismatch");
  layers_from_json(require(j, "layers", where), net.layers(), where);
}

template <class T>
void adam_from_json(const json& j, nn::BasicAdamState<T>& opt, const std::string& where) {
  opt.config.lr = require(j, "lr", where).get<double>();
  opt.config.beta1 = require(j, "beta1", where).get<double>();
  opt.config.beta2 = require(j, "beta2", where).get<double>();
  opt.config.eps = require(j, "eps", where).get<double>();
  opt.step = require(j, "step", where).get<std::int64_t>();
  layers_from_json(require(j, "m", where), opt.m, where + ".m");
  layers_from_json(require(j, "v", where), opt.v, where + ".v");
}

}  // namespace detail

inline nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
  using nlohmann::json;
  const auto& a = ck.agent;
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"config", config_to_json(ck.config)},
          {"state_size", a.state_size()},
          {"networks",
           {{"actor", detail::mlp_to_json(a.actor())},
            {"actor_target", detail::mlp_to_json(a.actor_target())},
            {"critic1", detail::mlp_to_json(a.critic1())},
            {"critic2", detail::mlp_to_json(a.critic2())},
            {"critic1_target", detail::mlp_to_json(a.critic1_target())},
            {"critic2_target", detail::mlp_to_json(a.critic2_target())}}},
          {"optimizers",
           {{"actor", detail::adam_to_json(a.actor_opt())},
            {"critic1", detail::adam_to_json(a.critic1_opt())},
            {"critic2", detail::adam_to_json(a.critic2_opt())}}},
          {"update_count", a.update_count()},
          {"actor_update_count", a.actor_update_count()},
          {"rng_state", a.rng().state()},
          {"episodes_done", ck.episodes_done},
          {"env_steps", ck.env_steps}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  const std::string where = "checkpoint";
  const auto& format = detail::require(j, "format", where);
  if (!format.is_string() || format.get<std::string>() != kCheckpointFormat)
    throw Error("checkpoint: format tag is not " + std::string(kCheckpointFormat));
  const int version = detail::require(j, "version", where).get<int>();
  if (version != kCheckpointVersion)
    throw Error("checkpoint: version " + std::to_string(version) + " is not supported (expected " +
                std::to_string(kCheckpointVersion) + ")");
  Checkpoint ck;
  ck.config = config_from_json(detail::require(j, "config", where));
  const int state_size = detail::require(j, "state_size", where).get<int>();
  ck.agent = td3::Td3Agent(state_size, ck.config.td3, 0);
  auto& a = ck.agent;
  const auto& nets = detail::require(j, "networks", where);
  detail::mlp_from_json(detail::require(nets, "actor", where), a.actor(), "networks.actor");
  detail::mlp_from_json(detail::require(nets, "actor_target", where), a.actor_target(), "networks.actor_target");
  detail::mlp_from_json(detail::require(nets, "critic1", where), a.critic1(), "networks.critic1");
  detail::mlp_from_json(detail::require(nets, "critic2", where), a.critic2(), "networks.critic2");
  detail::mlp_from_json(detail::require(nets, "critic1_target", where), a.critic1_target(), "networks.critic1_target");
  detail::mlp_from_json(detail::require(nets, "critic2_target", where), a.critic2_target(), "networks.critic2_target");
  const auto& opts = detail::require(j, "optimizers", where);
  detail::adam_from_json(detail::require(opts, "actor", where), a.actor_opt(), "optimizers.actor");
  detail::adam_from_json(detail::require(opts, "critic1", where), a.critic1_opt(), "optimizers.critic1");
  detail::adam_from_json(detail::require(opts, "critic2", where), a.critic2_opt(), "optimizers.critic2");
  a.set_update_counts(detail::require(j, "update_count", where).get<std::int64_t>(),
                      detail::require(j, "actor_update_count", where).get<std::int64_t>());
  a.rng().set_state(detail::require(j, "rng_state", where).get<std::string>());
  ck.episodes_done = detail::require(j, "episodes_done", where).get<int>();
  ck.env_steps = detail::require(j, "env_steps", where).get<std::int64_t>();
  return ck;
}

inline std::string checkpoint_to_string(const Checkpoint& ck) { return checkpoint_to_json(ck).dump() + "\n"; }

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  write_file_atomic(path, checkpoint_to_string(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("checkpoint '" + path.string() + "': " + e.what());
  }
  try {
    return checkpoint_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint '" + path.string() + "': " + e.what());
  } catch (const Error& e) {
    throw Error("checkpoint '" + path.string() + "': " + e.what());
  }
}

}  // namespace tdrive
