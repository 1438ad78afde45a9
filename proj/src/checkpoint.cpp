#include "graphfit/training/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace graphfit::training {

namespace {

constexpr const char* kMagic = "graphfit-checkpoint v1";

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoi(item));
  return out;
}

void write_config(std::ostream& out, const net::ModelConfig& c) {
  out << "config.jet_order=" << c.jet_order << "\n";
  out << "config.patch_size=" << c.patch_size << "\n";
  out << "config.point_conv_widths=" << join_ints(c.point_conv_widths) << "\n";
  out << "config.graph_block_count=" << c.graph_block_count << "\n";
  out << "config.graph_block_widths=" << join_ints(c.graph_block_widths) << "\n";
  out << "config.k1=" << c.k1 << "\n";
  out << "config.k2=" << c.k2 << "\n";
  out << "config.use_multi_scale=" << (c.use_multi_scale ? 1 : 0) << "\n";
  out << "config.use_adaptive_module=" << (c.use_adaptive_module ? 1 : 0) << "\n";
  out << "config.head_widths=" << join_ints(c.head_widths) << "\n";
  out << "config.stn_point_widths=" << join_ints(c.stn_point_widths) << "\n";
  out << "config.stn_fc_widths=" << join_ints(c.stn_fc_widths) << "\n";
  out << "config.fstn_point_widths=" << join_ints(c.fstn_point_widths) << "\n";
  out << "config.fstn_fc_widths=" << join_ints(c.fstn_fc_widths) << "\n";
}

void apply_config_line(net::ModelConfig& c, const std::string& key,
                       const std::string& value) {
  if (key == "config.jet_order") c.jet_order = std::stoi(value);
  else if (key == "config.patch_size") c.patch_size = std::stoi(value);
  else if (key == "config.point_conv_widths") c.point_conv_widths = split_ints(value);
  else if (key == "config.graph_block_count") c.graph_block_count = std::stoi(value);
  else if (key == "config.graph_block_widths") c.graph_block_widths = split_ints(value);
  else if (key == "config.k1") c.k1 = std::stoi(value);
  else if (key == "config.k2") c.k2 = std::stoi(value);
  else if (key == "config.use_multi_scale") c.use_multi_scale = value == "1";
  else if (key == "config.use_adaptive_module") c.use_adaptive_module = value == "1";
  else if (key == "config.head_widths") c.head_widths = split_ints(value);
  else if (key == "config.stn_point_widths") c.stn_point_widths = split_ints(value);
  else if (key == "config.stn_fc_widths") c.stn_fc_widths = split_ints(value);
  else if (key == "config.fstn_point_widths") c.fstn_point_widths = split_ints(value);
  else if (key == "config.fstn_fc_widths") c.fstn_fc_widths = split_ints(value);
  else throw ParseError("checkpoint: unknown config key '" + key + "'");
}

struct ManifestEntry {
  std::string name;
  ad::Shape shape;
  std::int64_t offset = 0;
  std::int64_t bytes = 0;
};

}  // namespace

const ad::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::string& path, const net::Model& model,
                     Adam* optimizer, int epoch, std::uint64_t rng_state) {
  std::vector<std::pair<std::string, const ad::Tensor*>> entries;
  for (const auto& p : model.parameters()) entries.emplace_back(p->name, &p->value);
  for (const auto& [name, tensor] : model.buffers()) entries.emplace_back(name, tensor);
  if (optimizer)
    for (const auto& [name, tensor] : optimizer->state_buffers())
      entries.emplace_back(name, tensor);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for write: " + path);
  out << kMagic << "\n";
  write_config(out, model.config());
  out << "epoch=" << epoch << "\n";
  out << "rng_state=" << rng_state << "\n";
  out << "adam_step=" << (optimizer ? optimizer->step_count() : 0) << "\n";
  out << "tensors=" << entries.size() << "\n";
  std::int64_t offset = 0;
  for (const auto& [name, tensor] : entries) {
    out << name << " " << tensor->rank() << " " << join_ints(tensor->shape()) << " "
        << offset << " " << tensor->size() * 8 << "\n";
    offset += tensor->size() * 8;
  }
  out << "END_HEADER\n";
  for (const auto& [name, tensor] : entries)
    out.write(reinterpret_cast<const char*>(tensor->data()),
              static_cast<std::streamsize>(tensor->size() * 8));
  if (!out) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);

  std::string line;
  if (!std::getline(in, line) || line != kMagic)
    throw VersionError("checkpoint: unsupported format/version in " + path +
                       " (expected '" + kMagic + "')");

  Checkpoint ckpt;
  std::vector<ManifestEntry> manifest;
  std::int64_t expected_tensors = -1;
  while (std::getline(in, line)) {
    if (line == "END_HEADER") break;
    if (expected_tensors >= 0) {
      // Manifest row: name rank dims offset bytes.
      std::istringstream ss(line);
      ManifestEntry entry;
      int rank = 0;
      std::string dims;
      if (!(ss >> entry.name >> rank >> dims >> entry.offset >> entry.bytes)) {
        // Rank-0 tensors have an empty dim list; reparse without it.
        std::istringstream ss2(line);
        if (rank != 0 || !(ss2 >> entry.name >> rank >> entry.offset >> entry.bytes))
          throw ParseError("checkpoint: malformed manifest row '" + line + "'");
        dims.clear();
      }
      entry.shape = split_ints(dims);
      if (static_cast<int>(entry.shape.size()) != rank)
        throw ParseError("checkpoint: rank mismatch in manifest row '" + line + "'");
      manifest.push_back(std::move(entry));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("checkpoint: malformed header line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "epoch") ckpt.epoch = std::stoi(value);
    else if (key == "rng_state") ckpt.rng_state = std::stoull(value);
    else if (key == "adam_step") ckpt.adam_step = std::stoll(value);
    else if (key == "tensors") expected_tensors = std::stoll(value);
    else apply_config_line(ckpt.config, key, value);
  }
  if (line != "END_HEADER")
    throw TruncationError("checkpoint: header terminator missing in " + path);
  if (expected_tensors < 0 ||
      static_cast<std::int64_t>(manifest.size()) != expected_tensors)
    throw ParseError("checkpoint: manifest count mismatch in " + path);

  for (const ManifestEntry& entry : manifest) {
    ad::Tensor tensor(entry.shape);
    if (tensor.size() * 8 != entry.bytes)
      throw ParseError("checkpoint: byte count disagrees with shape for '" +
                       entry.name + "'");
    in.read(reinterpret_cast<char*>(tensor.data()),
            static_cast<std::streamsize>(entry.bytes));
    if (in.gcount() != static_cast<std::streamsize>(entry.bytes))
      throw TruncationError("checkpoint: payload truncated at tensor '" +
                            entry.name + "'");
    ckpt.tensors.emplace_back(entry.name, std::move(tensor));
  }
  return ckpt;
}

net::Model restore_model(const Checkpoint& ckpt) {
  net::Model model = net::Model::init(ckpt.config, /*seed=*/0);
  for (const auto& p : model.parameters()) {
    const ad::Tensor* stored = ckpt.find(p->name);
    if (!stored) throw ParseError("checkpoint: missing tensor '" + p->name + "'");
    if (!stored->same_shape(p->value))
      throw ShapeError("checkpoint: tensor '" + p->name + "' has shape " +
                       shape_string(stored->shape()) + ", model expects " +
                       shape_string(p->value.shape()));
    p->value = *stored;
  }
  for (const auto& [name, tensor] : model.buffers()) {
    const ad::Tensor* stored = ckpt.find(name);
    if (!stored) throw ParseError("checkpoint: missing buffer '" + name + "'");
    if (!stored->same_shape(*tensor))
      throw ShapeError("checkpoint: buffer '" + name + "' shape mismatch");
    *tensor = *stored;
  }
  return model;
}

void restore_optimizer(Adam& adam, const net::Model& model, const Checkpoint& ckpt) {
  (void)model;
  for (const auto& [name, tensor] : adam.state_buffers()) {
    const ad::Tensor* stored = ckpt.find(name);
    if (!stored) throw ParseError("checkpoint: missing optimizer tensor '" + name + "'");
    if (!stored->same_shape(*tensor))
      throw ShapeError("checkpoint: optimizer tensor '" + name + "' shape mismatch");
    *tensor = *stored;
  }
  adam.set_step_count(ckpt.adam_step);
}

}  // namespace graphfit::training
