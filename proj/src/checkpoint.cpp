#include "tomac/numerics/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace tomac::numerics
{

namespace
{

std::string tensor_file_name(const std::string & group, const std::string & path)
{
  return "tensors/" + group + "." + path + ".f64";
}

void write_le_doubles(std::ofstream & out, const Tensor & m)
{
  // Row-major on disk regardless of Eigen's storage order.
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::uint64_t bits = 0;
      const double v = m(r, c);
      std::memcpy(&bits, &v, sizeof(bits));
      unsigned char bytes[8];
      for (int b = 0; b < 8; ++b) {
        bytes[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFFu);
      }
      out.write(reinterpret_cast<const char *>(bytes), 8);
    }
  }
}

Tensor read_le_doubles(const std::filesystem::path & file, Eigen::Index rows, Eigen::Index cols)
{
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    throw CheckpointError("cannot open tensor file " + file.string());
  }
  Tensor m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      unsigned char bytes[8];
      if (!in.read(reinterpret_cast<char *>(bytes), 8)) {
        throw CheckpointError("truncated tensor file " + file.string());
      }
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) {
        bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
      }
      double v = 0;
      std::memcpy(&v, &bits, sizeof(v));
      m(r, c) = v;
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CheckpointError("tensor file larger than its manifest shape: " + file.string());
  }
  return m;
}

}  // namespace

void write_checkpoint(const std::filesystem::path & dir, const Checkpoint & checkpoint)
{
  std::filesystem::create_directories(dir / "tensors");
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) {
    throw CheckpointError("cannot write manifest in " + dir.string());
  }
  manifest << "format_version=" << kCheckpointFormatVersion << "\n";
  for (const auto & [key, value] : checkpoint.metadata) {
    if (key.find('=') != std::string::npos || value.find('\n') != std::string::npos) {
      throw CheckpointError("metadata entry not representable: " + key);
    }
    manifest << "meta." << key << "=" << value << "\n";
  }
  for (const auto & [group, bundle] : checkpoint.groups) {
    manifest << "group." << group << ".version=" << bundle.version << "\n";
    for (const auto & [path, value] : bundle.tensors) {
      const std::string file = tensor_file_name(group, path);
      manifest << "tensor." << group << "." << path << "=" << value.rows() << "x" << value.cols() <<
        " " << file << "\n";
      std::ofstream out(dir / file, std::ios::binary);
      if (!out) {
        throw CheckpointError("cannot write " + (dir / file).string());
      }
      write_le_doubles(out, value);
    }
  }
}

Checkpoint read_checkpoint(const std::filesystem::path & dir)
{
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) {
    throw CheckpointError("no manifest.txt in " + dir.string());
  }
  Checkpoint checkpoint;
  bool saw_version = false;
  std::string line;
  int line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CheckpointError("manifest line " + std::to_string(line_no) + " has no '='");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "format_version") {
      saw_version = true;
      if (value != std::to_string(kCheckpointFormatVersion)) {
        throw CheckpointVersionError(
                "checkpoint format_version " + value + ", expected " +
                std::to_string(kCheckpointFormatVersion));
      }
    } else if (key.rfind("meta.", 0) == 0) {
      checkpoint.metadata[key.substr(5)] = value;
    } else if (key.rfind("group.", 0) == 0) {
      const std::string rest = key.substr(6);
      const auto dot = rest.rfind(".version");
      if (dot == std::string::npos) {
        throw CheckpointError("bad group entry on line " + std::to_string(line_no));
      }
      checkpoint.groups[rest.substr(0, dot)].version = std::stoll(value);
    } else if (key.rfind("tensor.", 0) == 0) {
      const std::string rest = key.substr(7);
      const auto dot = rest.find('.');
      if (dot == std::string::npos) {
        throw CheckpointError("bad tensor entry on line " + std::to_string(line_no));
      }
      const std::string group = rest.substr(0, dot);
      const std::string path = rest.substr(dot + 1);
      std::istringstream spec(value);
      Eigen::Index rows = 0;
      Eigen::Index cols = 0;
      char x = 0;
      std::string file;
      if (!(spec >> rows >> x >> cols >> file) || x != 'x') {
        throw CheckpointError("bad tensor shape on line " + std::to_string(line_no));
      }
      checkpoint.groups[group].tensors[path] = read_le_doubles(dir / file, rows, cols);
    } else {
      throw CheckpointError("unknown manifest key '" + key + "'");
    }
  }
  if (!saw_version) {
    throw CheckpointVersionError("manifest has no format_version");
  }
  return checkpoint;
}

}  // namespace tomac::numerics
