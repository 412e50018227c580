#include "crossview/config.hpp"

#include <fstream>
#include <set>

#include "crossview/errors.hpp"

namespace crossview {

using nlohmann::json;

json train_config_to_json(const TrainConfig& cfg) {
  json j;
  j["learning_rate"] = cfg.learning_rate;
  j["adam_beta1"] = cfg.adam_beta1;
  j["adam_beta2"] = cfg.adam_beta2;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["gen_loss_form"] = gen_loss_form_name(cfg.gen_loss_form);
  j["seed"] = cfg.seed;
  j["profile"] = profile_name(cfg.profile);
  j["checkpoint_every"] = cfg.checkpoint_every;
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("adam_beta1")) cfg.adam_beta1 = j["adam_beta1"].get<double>();
  if (j.contains("adam_beta2")) cfg.adam_beta2 = j["adam_beta2"].get<double>();
  if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
  if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
  if (j.contains("gen_loss_form")) {
    const auto name = j["gen_loss_form"].get<std::string>();
    if (name == "non_saturating") {
      cfg.gen_loss_form = GenLossForm::non_saturating;
    } else if (name == "minimax") {
      cfg.gen_loss_form = GenLossForm::minimax;
    } else {
      throw ValidationError("gen_loss_form must be 'non_saturating' or 'minimax', got '" + name +
                            "'");
    }
  }
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("profile")) {
    const auto name = j["profile"].get<std::string>();
    if (name == "tiny") {
      cfg.profile = Profile::tiny;
    } else if (name == "paper_scale") {
      cfg.profile = Profile::paper_scale;
    } else {
      throw ValidationError("profile must be 'tiny' or 'paper_scale', got '" + name + "'");
    }
  }
  if (j.contains("checkpoint_every")) cfg.checkpoint_every = j["checkpoint_every"].get<int>();
  return cfg;
}

json generator_config_to_json(const GeneratorConfig& cfg) {
  json j;
  j["variant"] = variant_name(cfg.variant);
  j["width_multiplier"] = cfg.width_multiplier;
  j["kernel_size"] = cfg.kernel_size;
  j["crop_size"] = cfg.crop_size;
  j["noise_input"] = cfg.noise_input;
  return j;
}

GeneratorConfig generator_config_from_json(const json& j) {
  GeneratorConfig cfg;
  if (j.contains("variant")) {
    const auto name = j["variant"].get<std::string>();
    const auto v = variant_from_name(name);
    if (!v) throw ValidationError("unknown variant '" + name + "'");
    cfg.variant = *v;
  }
  if (j.contains("width_multiplier")) cfg.width_multiplier = j["width_multiplier"].get<int>();
  if (j.contains("kernel_size")) cfg.kernel_size = j["kernel_size"].get<int>();
  if (j.contains("crop_size")) cfg.crop_size = j["crop_size"].get<int>();
  if (j.contains("noise_input")) cfg.noise_input = j["noise_input"].get<bool>();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ValidationError("config root must be a JSON object");

  static const std::set<std::string> kKnown = {
      "learning_rate", "adam_beta1", "adam_beta2", "epochs",      "batch_size",
      "gen_loss_form", "seed",       "profile",    "checkpoint_every",
      "variant",       "width_multiplier",         "kernel_size", "crop_size",
      "noise_input",   "threads"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!kKnown.count(key)) {
      throw ValidationError("unknown config key '" + key + "'");
    }
  }

  RunConfig cfg;
  try {
    cfg.train = train_config_from_json(j);
    cfg.generator = generator_config_from_json(j);
    if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config value has the wrong type: ") + e.what());
  }
  // width_multiplier defaults to the profile unless given explicitly.
  if (!j.contains("width_multiplier")) {
    cfg.generator.width_multiplier = profile_width_multiplier(cfg.train.profile);
  }
  cfg.train.validate();
  GeneratorArch::from_config(cfg.generator);  // validates the model settings
  return cfg;
}

}  // namespace crossview
