#include "bdgd/io/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "bdgd/errors.hpp"
#include "bdgd/io/binary.hpp"

namespace bdgd::io {

namespace pt = boost::property_tree;

tomo::Geometry RunConfig::geometry() const { return tomo::make_geometry(view, angles, max_angle, image_size); }

void RunConfig::validate() const {
  geometry().validate();
  if (!(noise_level >= 0.0)) throw ConfigError("data.noise_level must be >= 0");
  if (train_count == 0) throw ConfigError("data.train_count must be >= 1");
  block.validate();
  train.validate(train_count);
  if (samples < 1) throw ConfigError("inference.samples must be >= 1");
  if (seeds.empty()) throw ConfigError("inference.seeds must list at least one seed");
  if (tv_iterations < 1) throw ConfigError("tv.iterations must be >= 1");
  if (tv_lambda < 0.0) throw ConfigError("tv.lambda must be >= 0");
  if (!(grid_min > 0.0) || !(grid_max >= grid_min) || grid_points < 1)
    throw ConfigError("tv grid needs 0 < grid_min <= grid_max and grid_points >= 1");
  if (grid_records == 0) throw ConfigError("tv.grid_records must be >= 1");
  if (output_dir.empty()) throw ConfigError("output.directory must not be empty");
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::logic_error("format_double failed");
  return {buf, end};
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [end, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || end != last) throw ConfigError("config: bad value '" + text + "' for " + key);
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("config: bad boolean '" + text + "' for " + key);
}

std::vector<std::uint64_t> parse_seeds(const std::string& key, const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("config: empty entry in " + key);
    out.push_back(parse_number<std::uint64_t>(key, item.substr(b, e - b + 1)));
  }
  return out;
}

// One table drives both parsing and formatting, so the two cannot drift apart.
struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string&, const std::string&)> read;
  std::function<std::string(const RunConfig&)> write;
};

template <typename T>
Field number(std::string section, std::string key, T RunConfig::*member) {
  return {std::move(section), std::move(key),
          [member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = parse_number<T>(k, v); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
            else return std::to_string(c.*member);
          }};
}

#define BDGD_FIELD(section, key, expr, parse, print)                                              \
  Field {                                                                                           \
    section, key, []([[maybe_unused]] RunConfig& c, [[maybe_unused]] const std::string& k, const std::string& v) { expr = parse; },   \
        [](const RunConfig& c) { return print; }                                                    \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      BDGD_FIELD("geometry", "mode", c.view, tomo::parse_view_mode(v), tomo::to_string(c.view)),
      number("geometry", "angles", &RunConfig::angles),
      number("geometry", "max_angle", &RunConfig::max_angle),
      number("geometry", "image_size", &RunConfig::image_size),
      number("data", "noise_level", &RunConfig::noise_level),
      number("data", "train_count", &RunConfig::train_count),
      number("data", "validation_count", &RunConfig::validation_count),
      number("data", "seed", &RunConfig::data_seed),
      number("data", "validation_seed", &RunConfig::validation_seed),
      BDGD_FIELD("model", "mode", c.block.mode, model::parse_bayes_mode(v), model::to_string(c.block.mode)),
      BDGD_FIELD("model", "branch_channels", c.block.branch_channels, parse_number<int>(k, v),
                 std::to_string(c.block.branch_channels)),
      BDGD_FIELD("model", "merge_channels", c.block.merge_channels, parse_number<int>(k, v),
                 std::to_string(c.block.merge_channels)),
      BDGD_FIELD("model", "feature_channels", c.block.feature_channels, parse_number<int>(k, v),
                 std::to_string(c.block.feature_channels)),
      BDGD_FIELD("model", "kernel_size", c.block.kernel_size, parse_number<int>(k, v),
                 std::to_string(c.block.kernel_size)),
      BDGD_FIELD("model", "dropout_rate", c.block.dropout_rate, parse_number<double>(k, v),
                 format_double(c.block.dropout_rate)),
      BDGD_FIELD("model", "rho_init", c.block.rho_init, parse_number<double>(k, v), format_double(c.block.rho_init)),
      BDGD_FIELD("train", "blocks", c.train.blocks, parse_number<int>(k, v), std::to_string(c.train.blocks)),
      BDGD_FIELD("train", "epochs_per_block", c.train.epochs_per_block, parse_number<int>(k, v),
                 std::to_string(c.train.epochs_per_block)),
      BDGD_FIELD("train", "batch_size", c.train.batch_size, parse_number<int>(k, v),
                 std::to_string(c.train.batch_size)),
      BDGD_FIELD("train", "learning_rate", c.train.adam.lr, parse_number<double>(k, v),
                 format_double(c.train.adam.lr)),
      BDGD_FIELD("train", "beta1", c.train.adam.beta1, parse_number<double>(k, v), format_double(c.train.adam.beta1)),
      BDGD_FIELD("train", "beta2", c.train.adam.beta2, parse_number<double>(k, v), format_double(c.train.adam.beta2)),
      BDGD_FIELD("train", "epsilon", c.train.adam.eps, parse_number<double>(k, v), format_double(c.train.adam.eps)),
      BDGD_FIELD("train", "seed", c.train.seed, parse_number<std::uint64_t>(k, v), std::to_string(c.train.seed)),
      BDGD_FIELD("train", "resample_each_epoch", c.train.resample_each_epoch, parse_bool(k, v),
                 std::string(c.train.resample_each_epoch ? "true" : "false")),
      BDGD_FIELD("train", "sigma2_init", c.train.empirical_sigma2_init, [&] {
        if (v != "empirical" && v != "unit") throw ConfigError("config: " + k + " must be empirical or unit");
        return v == "empirical";
      }(), std::string(c.train.empirical_sigma2_init ? "empirical" : "unit")),
      number("inference", "samples", &RunConfig::samples),
      BDGD_FIELD("inference", "seeds", c.seeds, parse_seeds(k, v), [&c] {
        std::string s;
        for (std::size_t i = 0; i < c.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(c.seeds[i]);
        return s;
      }()),
      number("tv", "iterations", &RunConfig::tv_iterations),
      number("tv", "lambda", &RunConfig::tv_lambda),
      number("tv", "grid_min", &RunConfig::grid_min),
      number("tv", "grid_max", &RunConfig::grid_max),
      number("tv", "grid_points", &RunConfig::grid_points),
      number("tv", "grid_records", &RunConfig::grid_records),
      BDGD_FIELD("output", "directory", c.output_dir, v, c.output_dir),
  };
  return table;
}

#undef BDGD_FIELD

}  // namespace

RunConfig parse_run_config(std::string_view text) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config: line " + std::to_string(e.line()) + ": " + e.message());
  }

  std::map<std::string, std::map<std::string, const Field*>> known;
  for (const auto& f : fields()) known[f.section][f.key] = &f;

  RunConfig c;
  for (const auto& [section, keys] : tree) {
    if (!keys.data().empty()) throw ConfigError("config: key '" + section + "' outside a [section]");
    auto s = known.find(section);
    if (s == known.end()) throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& [key, value] : keys) {
      auto f = s->second.find(key);
      if (f == s->second.end()) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
      f->second->read(c, section + "." + key, value.data());
    }
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(text);
}

std::string format_run_config(const RunConfig& config) {
  std::string out, section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.write(config) + "\n";
  }
  return out;
}

}  // namespace bdgd::io
