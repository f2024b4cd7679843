#include "upgnn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "upgnn/errors.hpp"

namespace upgnn {

namespace {

constexpr char kMagic[8] = {'U', 'P', 'G', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_bytes(std::ofstream& out, const void* data, std::size_t size) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

void write_u32(std::ofstream& out, std::uint32_t v) { write_bytes(out, &v, 4); }
void write_u64(std::ofstream& out, std::uint64_t v) { write_bytes(out, &v, 8); }
void write_f64(std::ofstream& out, double v) { write_bytes(out, &v, 8); }

void read_bytes(std::ifstream& in, void* data, std::size_t size,
                const std::string& path) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (static_cast<std::size_t>(in.gcount()) != size) {
    throw IoError("truncated checkpoint: " + path);
  }
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
  std::uint32_t v = 0;
  read_bytes(in, &v, 4, path);
  return v;
}

std::uint64_t read_u64(std::ifstream& in, const std::string& path) {
  std::uint64_t v = 0;
  read_bytes(in, &v, 8, path);
  return v;
}

double read_f64(std::ifstream& in, const std::string& path) {
  double v = 0;
  read_bytes(in, &v, 8, path);
  return v;
}

}  // namespace

void save_checkpoint(const UpliftModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path);

  write_bytes(out, kMagic, sizeof(kMagic));
  write_u32(out, kVersion);

  const ModelConfig& cfg = model.config;
  write_u32(out, static_cast<std::uint32_t>(cfg.gnn));
  write_u64(out, cfg.proj_width);
  write_u64(out, cfg.gnn_hidden);
  write_u64(out, cfg.head_hidden);
  write_f64(out, cfg.dropout);
  write_u64(out, cfg.epochs);
  write_f64(out, cfg.learning_rate);
  write_f64(out, cfg.weight_decay);
  write_u32(out, cfg.dr_variant ? 1 : 0);
  write_f64(out, cfg.treatment_loss_weight);
  write_u64(out, cfg.lgc_layers);
  write_u64(out, cfg.seed);
  write_u64(out, model.user_feature_width);
  write_u64(out, model.product_feature_width);

  const auto named = model.params.named();
  write_u32(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, mat] : named) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    write_bytes(out, name.data(), name.size());
    write_u64(out, mat->rows());
    write_u64(out, mat->cols());
    write_bytes(out, mat->data(), sizeof(float) * mat->size());
  }
  out.flush();
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

UpliftModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);

  char magic[8];
  read_bytes(in, magic, sizeof(magic), path);
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a checkpoint file: " + path);
  }
  const std::uint32_t version = read_u32(in, path);
  if (version != kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version) +
                  ": " + path);
  }

  UpliftModel model;
  ModelConfig& cfg = model.config;
  const std::uint32_t kind = read_u32(in, path);
  if (kind > 2) throw IoError("corrupt checkpoint (gnn kind): " + path);
  cfg.gnn = static_cast<GnnKind>(kind);
  cfg.proj_width = read_u64(in, path);
  cfg.gnn_hidden = read_u64(in, path);
  cfg.head_hidden = read_u64(in, path);
  cfg.dropout = read_f64(in, path);
  cfg.epochs = read_u64(in, path);
  cfg.learning_rate = read_f64(in, path);
  cfg.weight_decay = read_f64(in, path);
  cfg.dr_variant = read_u32(in, path) != 0;
  cfg.treatment_loss_weight = read_f64(in, path);
  cfg.lgc_layers = read_u64(in, path);
  cfg.seed = read_u64(in, path);
  model.user_feature_width = read_u64(in, path);
  model.product_feature_width = read_u64(in, path);

  model.params = make_params<float>(cfg, model.user_feature_width,
                                    model.product_feature_width);
  auto named = model.params.named();
  std::map<std::string, Matrix<float>*> by_name;
  for (auto& [name, mat] : named) by_name[name] = mat;

  const std::uint32_t count = read_u32(in, path);
  if (count != named.size()) {
    throw IoError("corrupt checkpoint (parameter count): " + path);
  }
  std::map<std::string, bool> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_u32(in, path);
    if (name_len > 256) throw IoError("corrupt checkpoint (name): " + path);
    std::string name(name_len, '\0');
    read_bytes(in, name.data(), name_len, path);
    const std::uint64_t rows = read_u64(in, path);
    const std::uint64_t cols = read_u64(in, path);
    const auto it = by_name.find(name);
    if (it == by_name.end() || seen[name]) {
      throw IoError("corrupt checkpoint (unexpected parameter '" + name +
                    "'): " + path);
    }
    if (rows != it->second->rows() || cols != it->second->cols()) {
      throw IoError("corrupt checkpoint (shape of '" + name + "'): " + path);
    }
    read_bytes(in, it->second->data(), sizeof(float) * it->second->size(),
               path);
    seen[name] = true;
  }
  if (in.peek() != std::ifstream::traits_type::eof()) {
    throw IoError("trailing bytes in checkpoint: " + path);
  }
  return model;
}

}  // namespace upgnn
