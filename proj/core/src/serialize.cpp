#include "facepain/serialize.hpp"

#include <bit>
#include <cstring>

#include <fmt/format.h>
#include <json.hpp>

#include "facepain/base64.hpp"
#include "facepain/error.hpp"

namespace facepain {

namespace {

using Json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little, "float64 buffers are written in host order");

std::string encode_doubles(const double* data, std::size_t n) {
  std::vector<std::uint8_t> bytes(n * sizeof(double));
  if (n) std::memcpy(bytes.data(), data, bytes.size());
  return base64::encode(bytes);
}

std::vector<double> decode_doubles(const Json& j, std::string_view field) {
  if (!j.is_string()) throw FormatError("expected a Base64 string", std::string(field));
  const auto bytes = base64::decode(j.get<std::string>());
  if (bytes.size() % sizeof(double) != 0)
    throw FormatError(fmt::format("{} bytes is not a whole number of float64 values", bytes.size()), std::string(field));
  std::vector<double> v(bytes.size() / sizeof(double));
  if (!v.empty()) std::memcpy(v.data(), bytes.data(), bytes.size());
  return v;
}

// Matrices are stored column-major, matching Eigen's storage.
Json matrix_json(const Eigen::MatrixXd& m) {
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", encode_doubles(m.data(), static_cast<std::size_t>(m.size()))}};
}

Json vector_json(const Eigen::VectorXd& v) {
  return Json{{"size", v.size()}, {"data", encode_doubles(v.data(), static_cast<std::size_t>(v.size()))}};
}

const Json& at(const Json& j, std::string_view key) {
  if (!j.is_object() || !j.contains(key)) throw FormatError("missing field", std::string(key));
  return j.at(std::string(key));
}

Eigen::MatrixXd matrix_of(const Json& j, std::string_view field) {
  const auto rows = at(j, "rows").get<Eigen::Index>();
  const auto cols = at(j, "cols").get<Eigen::Index>();
  const auto v = decode_doubles(at(j, "data"), field);
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != v.size())
    throw FormatError("matrix shape does not match its buffer", std::string(field));
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

Eigen::VectorXd vector_of(const Json& j, std::string_view field) {
  const auto size = at(j, "size").get<Eigen::Index>();
  const auto v = decode_doubles(at(j, "data"), field);
  if (size < 0 || static_cast<std::size_t>(size) != v.size())
    throw FormatError("vector size does not match its buffer", std::string(field));
  return Eigen::Map<const Eigen::VectorXd>(v.data(), size);
}

Json envelope(std::string_view type) {
  return Json{{"format", "facepain-model"}, {"version", kModelFormatVersion}, {"type", type}};
}

Json open_envelope(std::string_view text, std::string_view type) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (at(j, "format") != "facepain-model") throw FormatError("not a model file", "format");
  if (at(j, "version").get<int>() != kModelFormatVersion)
    throw FormatError(fmt::format("unsupported model version {}", at(j, "version").dump()), "version");
  if (at(j, "type") != type)
    throw FormatError(fmt::format("expected a {} model, found {}", type, at(j, "type").dump()), "type");
  return j;
}

Json kernel_json(const KernelSpec& k) {
  return Json{{"type", k.type == KernelSpec::Type::Linear ? "linear" : "rbf"}, {"gamma", k.gamma}};
}

KernelSpec kernel_of(const Json& j) {
  const auto type = at(j, "type").get<std::string>();
  KernelSpec k;
  if (type == "linear") k.type = KernelSpec::Type::Linear;
  else if (type == "rbf") k.type = KernelSpec::Type::Rbf;
  else throw FormatError("unknown kernel type " + type, "kernel.type");
  k.gamma = at(j, "gamma").get<double>();
  return k;
}

Json stats_json(const SolverStats& s) {
  return Json{{"iterations", s.iterations}, {"converged", s.converged}, {"dual_objective", s.dual_objective}};
}

SolverStats stats_of(const Json& j) {
  return {at(j, "iterations").get<std::size_t>(), at(j, "converged").get<bool>(), at(j, "dual_objective").get<double>()};
}

Json svc_body(const SvcModel& m) {
  Json j = envelope("svc");
  j["config"] = Json{{"kernel", kernel_json(m.kernel)}, {"C", m.C}};
  j["bias"] = m.bias;
  j["support_indices"] = m.support_indices;
  j["stats"] = stats_json(m.stats);
  j["support_vectors"] = matrix_json(m.support_vectors);
  j["dual_coefficients"] = vector_json(m.dual_coefficients);
  return j;
}

SvcModel svc_of(const Json& j) {
  SvcModel m;
  m.kernel = kernel_of(at(at(j, "config"), "kernel"));
  m.C = at(at(j, "config"), "C").get<double>();
  m.bias = at(j, "bias").get<double>();
  m.support_indices = at(j, "support_indices").get<std::vector<std::size_t>>();
  m.stats = stats_of(at(j, "stats"));
  m.support_vectors = matrix_of(at(j, "support_vectors"), "support_vectors");
  m.dual_coefficients = vector_of(at(j, "dual_coefficients"), "dual_coefficients");
  if (m.dual_coefficients.size() != m.support_vectors.rows())
    throw FormatError("one dual coefficient per support vector expected", "dual_coefficients");
  return m;
}

Json svr_body(const SvrModel& m) {
  Json j = envelope("svr");
  j["config"] = Json{{"kernel", kernel_json(m.kernel)}, {"C", m.C}, {"epsilon", m.epsilon}};
  j["bias"] = m.bias;
  j["support_indices"] = m.support_indices;
  j["stats"] = stats_json(m.stats);
  j["support_vectors"] = matrix_json(m.support_vectors);
  j["dual_coefficients"] = vector_json(m.dual_coefficients);
  return j;
}

SvrModel svr_of(const Json& j) {
  SvrModel m;
  const Json& cfg = at(j, "config");
  m.kernel = kernel_of(at(cfg, "kernel"));
  m.C = at(cfg, "C").get<double>();
  m.epsilon = at(cfg, "epsilon").get<double>();
  m.bias = at(j, "bias").get<double>();
  m.support_indices = at(j, "support_indices").get<std::vector<std::size_t>>();
  m.stats = stats_of(at(j, "stats"));
  m.support_vectors = matrix_of(at(j, "support_vectors"), "support_vectors");
  m.dual_coefficients = vector_of(at(j, "dual_coefficients"), "dual_coefficients");
  if (m.dual_coefficients.size() != m.support_vectors.rows())
    throw FormatError("one dual coefficient per support vector expected", "dual_coefficients");
  return m;
}

Json gp_body(const GpModel& m) {
  Json j = envelope("gp");
  j["config"] = Json{{"length_scales", m.hyper.length_scales},
                     {"signal_variance", m.hyper.signal_variance},
                     {"noise_variance", m.hyper.noise_variance}};
  j["target_mean"] = m.target_mean;
  j["jitter"] = m.jitter;
  j["log_marginal_likelihood"] = m.log_marginal_likelihood;
  j["optimizer_steps"] = m.optimizer_steps;
  j["inputs"] = matrix_json(m.inputs);
  j["targets"] = vector_json(m.targets);
  j["weights"] = vector_json(m.weights);
  return j;
}

GpModel gp_of(const Json& j) {
  GpModel m;
  const Json& cfg = at(j, "config");
  m.hyper.length_scales = at(cfg, "length_scales").get<std::vector<double>>();
  m.hyper.signal_variance = at(cfg, "signal_variance").get<double>();
  m.hyper.noise_variance = at(cfg, "noise_variance").get<double>();
  m.target_mean = at(j, "target_mean").get<double>();
  m.jitter = at(j, "jitter").get<double>();
  m.log_marginal_likelihood = at(j, "log_marginal_likelihood").get<double>();
  m.optimizer_steps = at(j, "optimizer_steps").get<int>();
  m.inputs = matrix_of(at(j, "inputs"), "inputs");
  m.targets = vector_of(at(j, "targets"), "targets");
  m.weights = vector_of(at(j, "weights"), "weights");
  m.hyper.validate(static_cast<std::size_t>(m.inputs.cols()));
  if (m.targets.size() != m.inputs.rows() || m.weights.size() != m.inputs.rows())
    throw FormatError("GP buffers disagree on the training-set size", "weights");
  Eigen::MatrixXd a = ard_gram(m.hyper, m.inputs);
  a.diagonal().array() += m.hyper.noise_variance + m.jitter;
  m.cholesky.compute(a);
  if (m.cholesky.info() != Eigen::Success) throw NumericError("stored GP does not factorize");
  return m;
}

Json mlp_body(const MlpModel& m) {
  Json j = envelope("mlp");
  const auto& c = m.config;
  j["config"] = Json{{"input_dim", c.input_dim},
                     {"hidden_widths", c.hidden_widths},
                     {"dropout_rate", c.dropout_rate},
                     {"learning_rate", c.learning_rate},
                     {"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"frames_per_sequence_per_epoch", c.frames_per_sequence_per_epoch},
                     {"seed", c.seed}};
  Json layers = Json::array();
  for (const auto& l : m.layers) layers.push_back(Json{{"weights", matrix_json(l.weights)}, {"bias", vector_json(l.bias)}});
  j["layers"] = layers;
  return j;
}

MlpModel mlp_of(const Json& j) {
  MlpModel m;
  const Json& cfg = at(j, "config");
  m.config.input_dim = at(cfg, "input_dim").get<std::size_t>();
  m.config.hidden_widths = at(cfg, "hidden_widths").get<std::array<std::size_t, 3>>();
  m.config.dropout_rate = at(cfg, "dropout_rate").get<double>();
  m.config.learning_rate = at(cfg, "learning_rate").get<double>();
  m.config.epochs = at(cfg, "epochs").get<int>();
  m.config.batch_size = at(cfg, "batch_size").get<std::size_t>();
  m.config.frames_per_sequence_per_epoch = at(cfg, "frames_per_sequence_per_epoch").get<std::size_t>();
  m.config.seed = at(cfg, "seed").get<std::uint64_t>();
  m.config.validate();
  const Json& layers = at(j, "layers");
  if (!layers.is_array() || layers.size() != m.layers.size()) throw FormatError("expected 4 layers", "layers");
  const std::array<std::size_t, 5> widths{m.config.input_dim, m.config.hidden_widths[0], m.config.hidden_widths[1],
                                          m.config.hidden_widths[2], 1};
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const std::string field = fmt::format("layers[{}]", i);
    m.layers[i].weights = matrix_of(at(layers[i], "weights"), field + ".weights");
    m.layers[i].bias = vector_of(at(layers[i], "bias"), field + ".bias");
    if (static_cast<std::size_t>(m.layers[i].weights.rows()) != widths[i + 1] ||
        static_cast<std::size_t>(m.layers[i].weights.cols()) != widths[i] ||
        m.layers[i].bias.size() != m.layers[i].weights.rows())
      throw FormatError("layer shape does not match the config", field);
  }
  return m;
}

}  // namespace

std::string to_json(const MlpModel& model) { return mlp_body(model).dump(2) + "\n"; }
std::string to_json(const SvcModel& model) { return svc_body(model).dump(2) + "\n"; }
std::string to_json(const SvrModel& model) { return svr_body(model).dump(2) + "\n"; }
std::string to_json(const GpModel& model) { return gp_body(model).dump(2) + "\n"; }

std::string to_json(const Aggregator& agg) {
  Json j = envelope("aggregator");
  j["config"] = Json{{"kind", to_string(agg.kind)}};
  j["scaler"] = Json{{"mean", agg.scaler.mean}, {"scale", agg.scaler.scale}};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, GpModel>) j["model"] = gp_body(m);
        else if constexpr (std::is_same_v<T, SvrModel>) j["model"] = svr_body(m);
        else if constexpr (std::is_same_v<T, SvcModel>) j["model"] = svc_body(m);
        else j["model"] = nullptr;
      },
      agg.model);
  return j.dump(2) + "\n";
}

std::string to_json(const MilModel& model) {
  Json j = envelope("misvm");
  j["converged"] = model.converged;
  j["positive_bags"] = model.positive_bags;
  j["history"] = model.history;
  j["witnesses"] = model.witnesses;
  j["svc"] = svc_body(model.svc);
  return j.dump(2) + "\n";
}

MlpModel mlp_from_json(std::string_view text) { return mlp_of(open_envelope(text, "mlp")); }
SvcModel svc_from_json(std::string_view text) { return svc_of(open_envelope(text, "svc")); }
SvrModel svr_from_json(std::string_view text) { return svr_of(open_envelope(text, "svr")); }
GpModel gp_from_json(std::string_view text) { return gp_of(open_envelope(text, "gp")); }

Aggregator aggregator_from_json(std::string_view text) {
  const Json j = open_envelope(text, "aggregator");
  Aggregator agg;
  const auto kind = at(at(j, "config"), "kind").get<std::string>();
  agg.scaler.mean = at(at(j, "scaler"), "mean").get<std::array<double, kStatCount>>();
  agg.scaler.scale = at(at(j, "scaler"), "scale").get<std::array<double, kStatCount>>();
  const Json& m = at(j, "model");
  if (kind == "Max") {
    agg.kind = AggregatorKind::Max;
  } else if (kind == "GP") {
    agg.kind = AggregatorKind::Gp;
    agg.model = gp_of(m);
  } else if (kind == "SVR") {
    agg.kind = AggregatorKind::Svr;
    agg.model = svr_of(m);
  } else if (kind == "SVC") {
    agg.kind = AggregatorKind::Svc;
    agg.model = svc_of(m);
  } else {
    throw FormatError("unknown aggregator kind " + kind, "config.kind");
  }
  return agg;
}

MilModel mil_from_json(std::string_view text) {
  const Json j = open_envelope(text, "misvm");
  MilModel m;
  m.converged = at(j, "converged").get<bool>();
  m.positive_bags = at(j, "positive_bags").get<std::vector<std::size_t>>();
  m.history = at(j, "history").get<std::vector<std::vector<std::size_t>>>();
  m.witnesses = at(j, "witnesses").get<std::vector<std::size_t>>();
  m.svc = svc_of(at(j, "svc"));
  if (m.witnesses.size() != m.positive_bags.size()) throw FormatError("one witness per positive bag expected", "witnesses");
  return m;
}

}  // namespace facepain
