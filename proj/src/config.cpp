#include "oqa/config.hpp"

#include <functional>
#include <map>
#include <sstream>

#include "oqa/fsio.hpp"

namespace oqa {

namespace {

uint64_t parse_u64(const std::string& v) {
  try {
    size_t pos = 0;
    const uint64_t x = std::stoull(v, &pos);
    if (pos != v.size()) throw ConfigError("bad unsigned integer: " + v);
    return x;
  } catch (const std::logic_error&) {
    throw ConfigError("bad unsigned integer: " + v);
  }
}

int parse_int(const std::string& v) {
  try {
    size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos != v.size()) throw ConfigError("bad integer: " + v);
    return x;
  } catch (const std::logic_error&) {
    throw ConfigError("bad integer: " + v);
  }
}

double parse_double(const std::string& v) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw ConfigError("bad number: " + v);
    return x;
  } catch (const std::logic_error&) {
    throw ConfigError("bad number: " + v);
  }
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("bad boolean: " + v);
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_u64(v); }},
      {"out", [](RunConfig& c, const std::string& v) { c.out = v; }},
      {"data_dir", [](RunConfig& c, const std::string& v) { c.data_dir = v; }},
      {"clean_count", [](RunConfig& c, const std::string& v) { c.clean_count = parse_int(v); }},
      {"feature_dim", [](RunConfig& c, const std::string& v) { c.feature_dim = parse_int(v); }},
      {"hidden", [](RunConfig& c, const std::string& v) { c.hidden = parse_int(v); }},
      {"pre_epochs", [](RunConfig& c, const std::string& v) { c.pre_epochs = parse_int(v); }},
      {"pre_batch", [](RunConfig& c, const std::string& v) { c.pre_batch = parse_int(v); }},
      {"pre_lr", [](RunConfig& c, const std::string& v) { c.pre_lr = parse_double(v); }},
      {"pre_augment", [](RunConfig& c, const std::string& v) { c.pre_augment = v; }},
      {"heads", [](RunConfig& c, const std::string& v) { c.heads = parse_int(v); }},
      {"attention", [](RunConfig& c, const std::string& v) { c.attention = v; }},
      {"rqa_epochs", [](RunConfig& c, const std::string& v) { c.rqa_epochs = parse_int(v); }},
      {"rqa_steps", [](RunConfig& c, const std::string& v) { c.rqa_steps = parse_int(v); }},
      {"rqa_batch", [](RunConfig& c, const std::string& v) { c.rqa_batch = parse_int(v); }},
      {"rqa_lr", [](RunConfig& c, const std::string& v) { c.rqa_lr = parse_double(v); }},
      {"rqa_decay", [](RunConfig& c, const std::string& v) { c.rqa_decay = parse_double(v); }},
      {"rqa_decay_every",
       [](RunConfig& c, const std::string& v) { c.rqa_decay_every = parse_int(v); }},
      {"lambda_c", [](RunConfig& c, const std::string& v) { c.lambda_c = parse_double(v); }},
      {"aqa_epochs", [](RunConfig& c, const std::string& v) { c.aqa_epochs = parse_int(v); }},
      {"aqa_steps", [](RunConfig& c, const std::string& v) { c.aqa_steps = parse_int(v); }},
      {"aqa_batch", [](RunConfig& c, const std::string& v) { c.aqa_batch = parse_int(v); }},
      {"aqa_lr", [](RunConfig& c, const std::string& v) { c.aqa_lr = parse_double(v); }},
      {"aqa_wd", [](RunConfig& c, const std::string& v) { c.aqa_wd = parse_double(v); }},
      {"eps", [](RunConfig& c, const std::string& v) { c.eps = parse_double(v); }},
      {"zeta", [](RunConfig& c, const std::string& v) { c.zeta = parse_double(v); }},
      {"lambda_intra",
       [](RunConfig& c, const std::string& v) { c.lambda_intra = parse_double(v); }},
      {"lambda_a1", [](RunConfig& c, const std::string& v) { c.lambda_a1 = parse_double(v); }},
      {"lambda_a2", [](RunConfig& c, const std::string& v) { c.lambda_a2 = parse_double(v); }},
      {"condition", [](RunConfig& c, const std::string& v) { c.condition = v; }},
      {"groups_per_set",
       [](RunConfig& c, const std::string& v) { c.groups_per_set = parse_int(v); }},
      {"group_min", [](RunConfig& c, const std::string& v) { c.group_min = parse_int(v); }},
      {"group_max", [](RunConfig& c, const std::string& v) { c.group_max = parse_int(v); }},
      {"ref_per_class",
       [](RunConfig& c, const std::string& v) { c.ref_per_class = parse_int(v); }},
      {"ablation", [](RunConfig& c, const std::string& v) { c.ablation = parse_bool(v); }},
      {"sequences", [](RunConfig& c, const std::string& v) { c.sequences = parse_int(v); }},
      {"seq_min", [](RunConfig& c, const std::string& v) { c.seq_min = parse_int(v); }},
      {"seq_max", [](RunConfig& c, const std::string& v) { c.seq_max = parse_int(v); }},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  attention_mode_from_name(attention);
  if (condition != "all" && condition != "blur" && condition != "illumination" &&
      condition != "mixed")
    throw ConfigError("condition must be blur, illumination, mixed or all, got " +
                      condition);
  if (clean_count < 10) throw ConfigError("clean_count must be at least 10");
  if (feature_dim < 1 || hidden < 1) throw ConfigError("network sizes must be positive");
  if (heads < 1 || feature_dim % heads != 0)
    throw ConfigError("heads must divide feature_dim");
  if (group_min < 3 || group_max > 10 || group_min > group_max)
    throw ConfigError("group sizes must satisfy 3 <= min <= max <= 10");
  if (seq_min < 3 || seq_min > seq_max || seq_max > 9)
    throw ConfigError("sequence sizes must satisfy 3 <= min <= max <= 9");
  if (pre_epochs < 1 || rqa_epochs < 1 || aqa_epochs < 1)
    throw ConfigError("epoch counts must be positive");
  if (pre_batch < 1 || rqa_batch < 1 || aqa_batch < 1 || rqa_steps < 1 || aqa_steps < 1)
    throw ConfigError("batch and step counts must be positive");
  if (eps <= 0.0 || zeta <= 0.0) throw ConfigError("eps and zeta must be positive");
  if (groups_per_set < 1 || sequences < 1 || ref_per_class < 1)
    throw ConfigError("evaluation sizes must be positive");
  if (rqa_decay <= 0.0 || rqa_decay_every < 1)
    throw ConfigError("learning-rate decay settings must be positive");
  if (pre_augment != "none" && pre_augment != "illumination" &&
      pre_augment != "light" && pre_augment != "all")
    throw ConfigError("pre_augment must be none, illumination, light or all, got " +
                      pre_augment);
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key: " + key);
  it->second(cfg, value);
}

void apply_config_text(RunConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // trim
    const size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const size_t e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    const size_t ke = key.find_last_not_of(" \t");
    key = key.substr(0, ke + 1);
    const size_t vb = value.find_first_not_of(" \t");
    value = vb == std::string::npos ? "" : value.substr(vb);
    apply_override(cfg, key, value);
  }
}

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  apply_config_text(cfg, read_file(path));
  return cfg;
}

}  // namespace oqa
