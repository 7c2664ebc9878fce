#include "iidlab/config.hpp"

#include <fstream>

namespace iid::cfg {

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json model = net::to_json(c.model);
  model.erase("stages");
  return {{"synth", synth::to_json(c.synth)},
          {"model", model},
          {"train", train::to_json(c.train)},
          {"loss", loss::to_json(c.loss)},
          {"paths", {{"data_dir", c.paths.data_dir.string()}, {"out_dir", c.paths.out_dir.string()}}}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config: expected a JSON object");
  RunConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "synth") c.synth = synth::synth_config_from_json(v);
    else if (key == "model") c.model = net::model_config_from_json(v);
    else if (key == "train") c.train = train::train_config_from_json(v);
    else if (key == "loss") c.loss = loss::loss_weights_from_json(v);
    else if (key == "paths") {
      if (!v.is_object()) throw Error(ErrorCode::InvalidConfig, "paths: expected an object");
      for (const auto& [pk, pv] : v.items()) {
        if (!pv.is_string()) throw Error(ErrorCode::InvalidConfig, "paths." + pk + ": expected a string");
        if (pk == "data_dir") c.paths.data_dir = pv.get<std::string>();
        else if (pk == "out_dir") c.paths.out_dir = pv.get<std::string>();
        else throw Error(ErrorCode::InvalidConfig, "paths: unknown key '" + pk + "'");
      }
    } else {
      throw Error(ErrorCode::InvalidConfig, "config: unknown section '" + key + "'");
    }
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open config " + path.string());
  try {
    return run_config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::InvalidConfig, "--set expects key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw Error(ErrorCode::InvalidConfig, "--set: malformed key '" + key + "'");
    if (!node->is_object()) throw Error(ErrorCode::InvalidConfig, "--set: '" + key + "' crosses a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = nlohmann::json::object();
    start = dot + 1;
  }
}

}  // namespace iid::cfg
