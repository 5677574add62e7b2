#include "gaitgcn/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace gaitgcn {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& what) {
  throw std::invalid_argument("config: " + what);
}

json stream_to_json(const StreamConfig& s) {
  return json{{"kind", std::string(to_string(s.kind))},
              {"adjacency", s.adjacency.str()},
              {"attention", std::string(to_string(s.attention))}};
}

StreamConfig stream_from_json(const json& j) {
  StreamConfig s;
  if (!j.is_object()) config_error("stream entry must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key == "kind") s.kind = parse_stream_kind(it->get<std::string>());
    else if (key == "adjacency") s.adjacency = AdjacencySpec::parse(it->get<std::string>());
    else if (key == "attention") s.attention = parse_attention_mode(it->get<std::string>());
    else config_error("unknown stream key '" + key + "'");
  }
  return s;
}

json model_to_json(const ModelConfig& m) {
  json streams = json::array();
  for (const auto& s : m.streams) streams.push_back(stream_to_json(s));
  return json{{"in_channels", m.in_channels},
              {"num_joints", m.num_joints},
              {"frames", m.frames},
              {"channels", m.channels},
              {"strides", m.strides},
              {"tau", m.tau},
              {"dilation", m.dilation},
              {"reduction", m.reduction},
              {"temporal_kernel", m.temporal_kernel},
              {"temporal_dilations", m.temporal_dilations},
              {"num_classes", m.num_classes},
              {"batchnorm", m.batchnorm},
              {"lambda", m.lambda},
              {"streams", streams}};
}

template <typename T>
void read_into(const json& j, T& dst, const std::string& key) {
  try {
    dst = j.get<T>();
  } catch (const json::exception& e) {
    config_error("bad value for '" + key + "': " + e.what());
  }
}

ModelConfig model_from_json(const json& j) {
  ModelConfig m;
  if (!j.is_object()) config_error("'model' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = *it;
    if (k == "in_channels") read_into(v, m.in_channels, k);
    else if (k == "num_joints") read_into(v, m.num_joints, k);
    else if (k == "frames") read_into(v, m.frames, k);
    else if (k == "channels") read_into(v, m.channels, k);
    else if (k == "strides") read_into(v, m.strides, k);
    else if (k == "tau") read_into(v, m.tau, k);
    else if (k == "dilation") read_into(v, m.dilation, k);
    else if (k == "reduction") read_into(v, m.reduction, k);
    else if (k == "temporal_kernel") read_into(v, m.temporal_kernel, k);
    else if (k == "temporal_dilations") read_into(v, m.temporal_dilations, k);
    else if (k == "num_classes") read_into(v, m.num_classes, k);
    else if (k == "batchnorm") read_into(v, m.batchnorm, k);
    else if (k == "lambda") read_into(v, m.lambda, k);
    else if (k == "streams") {
      if (!v.is_array()) config_error("'streams' must be an array");
      m.streams.clear();
      for (const auto& s : v) m.streams.push_back(stream_from_json(s));
    } else {
      config_error("unknown model key '" + k + "'");
    }
  }
  m.validate();
  return m;
}

json train_to_json(const TrainConfig& t) {
  return json{{"batch_size", t.batch_size},
              {"epochs", t.epochs},
              {"lr", t.lr},
              {"lr_decay", t.lr_decay},
              {"lr_milestones", t.lr_milestones},
              {"momentum", t.momentum},
              {"weight_decay", t.weight_decay},
              {"seed", t.seed},
              {"precision", std::string(to_string(t.precision))}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  if (!j.is_object()) config_error("'train' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = *it;
    if (k == "batch_size") read_into(v, t.batch_size, k);
    else if (k == "epochs") read_into(v, t.epochs, k);
    else if (k == "lr") read_into(v, t.lr, k);
    else if (k == "lr_decay") read_into(v, t.lr_decay, k);
    else if (k == "lr_milestones") read_into(v, t.lr_milestones, k);
    else if (k == "momentum") read_into(v, t.momentum, k);
    else if (k == "weight_decay") read_into(v, t.weight_decay, k);
    else if (k == "seed") read_into(v, t.seed, k);
    else if (k == "precision") t.precision = parse_precision(v.get<std::string>());
    else config_error("unknown train key '" + k + "'");
  }
  if (t.batch_size == 0) config_error("train.batch_size must be positive");
  if (!(t.lr > 0.0) || !std::isfinite(t.lr)) config_error("train.lr must be positive");
  if (t.momentum < 0.0 || t.momentum >= 1.0) config_error("train.momentum must be in [0, 1)");
  if (t.weight_decay < 0.0) config_error("train.weight_decay must be non-negative");
  return t;
}

json filter_to_json(const SequenceFilter& f) {
  return json{{"condition", std::string(to_string(f.condition))}, {"first", f.first}, {"last", f.last}};
}

SequenceFilter filter_from_json(const json& j) {
  SequenceFilter f;
  if (!j.is_object()) config_error("sequence filter must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "condition") f.condition = parse_condition(it->get<std::string>());
    else if (k == "first") read_into(*it, f.first, k);
    else if (k == "last") read_into(*it, f.last, k);
    else config_error("unknown filter key '" + k + "'");
  }
  if (f.first > f.last) config_error("filter range is empty");
  return f;
}

json protocol_to_json(const EvalProtocol& p) {
  json probes = json::array();
  for (const auto& f : p.probes) probes.push_back(filter_to_json(f));
  return json{{"gallery", filter_to_json(p.gallery)}, {"probes", probes}, {"views", p.views}};
}

EvalProtocol protocol_from_json(const json& j) {
  EvalProtocol p;
  if (!j.is_object()) config_error("'protocol' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "gallery") {
      p.gallery = filter_from_json(*it);
    } else if (k == "probes") {
      if (!it->is_array()) config_error("'probes' must be an array");
      p.probes.clear();
      for (const auto& f : *it) p.probes.push_back(filter_from_json(f));
    } else if (k == "views") {
      read_into(*it, p.views, k);
    } else {
      config_error("unknown protocol key '" + k + "'");
    }
  }
  if (p.views.empty()) config_error("protocol.views is empty");
  return p;
}

json experiment_to_json(const ExperimentConfig& c) {
  return json{{"model", model_to_json(c.model)},
              {"train", train_to_json(c.train)},
              {"protocol", protocol_to_json(c.protocol)}};
}

ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig c;
  if (!j.is_object()) config_error("top level must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "model") c.model = model_from_json(*it);
    else if (k == "train") c.train = train_from_json(*it);
    else if (k == "protocol") c.protocol = protocol_from_json(*it);
    else config_error("unknown section '" + k + "'");
  }
  return c;
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    config_error(std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (in_channels == 0) config_error("model.in_channels must be positive");
  if (num_joints == 0) config_error("model.num_joints must be positive");
  if (frames == 0) config_error("model.frames must be positive");
  if (channels.empty()) config_error("model.channels is empty");
  if (channels.size() != strides.size())
    config_error("model.channels and model.strides differ in length");
  for (std::size_t c : channels) {
    if (c == 0) config_error("model.channels entries must be positive");
    if (reduction == 0 || c % reduction != 0)
      config_error("model.channels entry " + std::to_string(c) +
                   " is not divisible by model.reduction " + std::to_string(reduction));
  }
  for (std::size_t s : strides)
    if (s == 0) config_error("model.strides entries must be positive");
  if (tau == 0 || tau % 2 == 0) config_error("model.tau must be odd");
  if (dilation == 0) config_error("model.dilation must be positive");
  if (temporal_kernel == 0 || temporal_kernel % 2 == 0)
    config_error("model.temporal_kernel must be odd");
  if (num_classes < 2) config_error("model.num_classes must be at least 2");
  if (streams.empty()) config_error("model.streams is empty");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) config_error("model.lambda must be non-negative");
}

std::string_view to_string(Precision p) {
  return p == Precision::single ? "single" : "double";
}

Precision parse_precision(std::string_view s) {
  if (s == "single") return Precision::single;
  if (s == "double") return Precision::double_precision;
  throw std::invalid_argument("unknown precision '" + std::string(s) + "' (expected single|double)");
}

double TrainConfig::learning_rate(std::size_t epoch) const {
  double rate = lr;
  for (std::size_t m : lr_milestones)
    if (epoch >= m) rate *= lr_decay;
  return rate;
}

std::string model_config_to_json(const ModelConfig& config) {
  return model_to_json(config).dump();
}

ModelConfig model_config_from_json(std::string_view text) {
  return model_from_json(parse_json(text));
}

std::string experiment_config_to_json(const ExperimentConfig& config) {
  return experiment_to_json(config).dump(2);
}

ExperimentConfig experiment_config_from_json(std::string_view text) {
  return experiment_from_json(parse_json(text));
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return experiment_config_from_json(ss.str());
}

void apply_override(ExperimentConfig& config, std::string_view assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    config_error("override '" + std::string(assignment) + "' is not key=value");
  std::string key(assignment.substr(0, eq));
  std::string raw(assignment.substr(eq + 1));

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }

  std::string pointer = "/";
  for (char ch : key) pointer += ch == '.' ? '/' : ch;
  json doc = experiment_to_json(config);
  json::json_pointer ptr(pointer);
  if (!doc.contains(ptr)) config_error("unknown override key '" + key + "'");
  doc[ptr] = value;
  config = experiment_from_json(doc);
}

}  // namespace gaitgcn
