#include "cpfd/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cpfd {

namespace {

constexpr char kMagic[4] = {'C', 'P', 'F', 'D'};

void write_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char bytes[4];
  bytes[0] = static_cast<unsigned char>(v & 0xffu);
  bytes[1] = static_cast<unsigned char>((v >> 8) & 0xffu);
  bytes[2] = static_cast<unsigned char>((v >> 16) & 0xffu);
  bytes[3] = static_cast<unsigned char>((v >> 24) & 0xffu);
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t read_u32(std::ifstream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return static_cast<std::uint32_t>(bytes[0]) |
         (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

void write_f32(std::ofstream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

float read_f32(std::ifstream& in) {
  const std::uint32_t bits = read_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

void write_string(std::ofstream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
  const std::uint32_t len = read_u32(in);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const TaggerModel& model,
                     const std::vector<std::string>& class_names, int step) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("save_checkpoint: cannot open " + path);
  }
  out.write(kMagic, 4);
  write_u32(out, kCheckpointVersion);
  const ModelConfig& cfg = model.config();
  write_u32(out, static_cast<std::uint32_t>(cfg.layers));
  write_u32(out, static_cast<std::uint32_t>(cfg.heads));
  write_u32(out, static_cast<std::uint32_t>(cfg.d_model));
  write_u32(out, static_cast<std::uint32_t>(cfg.d_ff));
  write_u32(out, static_cast<std::uint32_t>(cfg.vocab_size));
  write_u32(out, static_cast<std::uint32_t>(cfg.max_seq_len));
  write_u32(out, static_cast<std::uint32_t>(model.class_count()));
  write_u32(out, static_cast<std::uint32_t>(step));

  write_u32(out, static_cast<std::uint32_t>(class_names.size()));
  for (const std::string& name : class_names) {
    write_string(out, name);
  }

  const auto params = model.named_parameters();
  write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    write_string(out, name);
    write_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (int d : tensor.shape()) {
      write_u32(out, static_cast<std::uint32_t>(d));
    }
    for (double v : tensor.value()) {
      write_f32(out, static_cast<float>(v));
    }
  }
  if (!out) {
    throw std::runtime_error("save_checkpoint: write failed for " + path);
  }
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("load_checkpoint: cannot open " + path);
  }
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("load_checkpoint: " + path + " is not a CPFD checkpoint");
  }
  const std::uint32_t version = read_u32(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("load_checkpoint: unsupported version " +
                             std::to_string(version) + " in " + path);
  }
  CheckpointData data;
  data.config.layers = static_cast<int>(read_u32(in));
  data.config.heads = static_cast<int>(read_u32(in));
  data.config.d_model = static_cast<int>(read_u32(in));
  data.config.d_ff = static_cast<int>(read_u32(in));
  data.config.vocab_size = static_cast<int>(read_u32(in));
  data.config.max_seq_len = static_cast<int>(read_u32(in));
  data.class_count = static_cast<int>(read_u32(in));
  data.step = static_cast<int>(read_u32(in));

  const std::uint32_t name_count = read_u32(in);
  data.class_names.reserve(name_count);
  for (std::uint32_t i = 0; i < name_count; ++i) {
    data.class_names.push_back(read_string(in));
  }

  const std::uint32_t tensor_count = read_u32(in);
  data.tensors.reserve(tensor_count);
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    std::string name = read_string(in);
    const std::uint32_t rank = read_u32(in);
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      numel *= read_u32(in);
    }
    std::vector<double> values(numel);
    for (std::size_t j = 0; j < numel; ++j) {
      values[j] = static_cast<double>(read_f32(in));
    }
    data.tensors.emplace_back(std::move(name), std::move(values));
  }
  return data;
}

TaggerModel model_from_checkpoint(const CheckpointData& data) {
  Rng scratch(0);  // initial values are immediately overwritten
  TaggerModel model(data.config, data.class_count, scratch);
  for (const auto& [name, values] : data.tensors) {
    model.load_parameter(name, values);
  }
  return model.frozen_snapshot();
}

}  // namespace cpfd
