#include <bit>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "evadv/error.hpp"
#include "evadv/train.hpp"

namespace evadv {

namespace fs = std::filesystem;

namespace {

constexpr const char* kCheckpointTag = "evadv-checkpoint 1";

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename U, typename T>
void append_le(std::string& out, T value) {
  const auto bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

template <typename U>
U read_le(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(U) > buf.size()) throw Error(ErrorCode::IoFailure, "checkpoint payload truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  }
  pos += sizeof(U);
  return v;
}

}  // namespace

void save_checkpoint(const Classifier& clf, const fs::path& path) {
  const auto& s = clf.model.shape;
  std::ostringstream head;
  head << kCheckpointTag << '\n'
       << "width=" << clf.spec.width << '\n'
       << "height=" << clf.spec.height << '\n'
       << "bins=" << clf.spec.bins << '\n'
       << "projection=" << to_string(clf.spec.projection) << '\n'
       << "kernel.kind=" << to_string(clf.spec.kernel.kind) << '\n'
       << "kernel.tau=" << format_double(clf.spec.kernel.tau) << '\n'
       << "classes=" << s.num_classes << '\n'
       << "param conv1.w " << s.conv1 << ' ' << s.in_channels << " 3 3\n"
       << "param conv1.b " << s.conv1 << '\n'
       << "param conv2.w " << s.conv2 << ' ' << s.conv1 << " 3 3\n"
       << "param conv2.b " << s.conv2 << '\n'
       << "param fc.w " << s.num_classes << ' ' << s.features() << '\n'
       << "param fc.b " << s.num_classes << '\n'
       << "kernel.weights " << clf.spec.kernel.mlp_weights.size() << '\n'
       << "end\n";
  std::string blob = head.str();
  for (float v : clf.model.data) append_le<std::uint32_t>(blob, v);
  for (double v : clf.spec.kernel.mlp_weights) append_le<std::uint64_t>(blob, v);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

Classifier load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto next_line = [&]() {
    const auto nl = buf.find('\n', pos);
    if (nl == std::string::npos) throw Error(ErrorCode::IoFailure, path.string() + ": header truncated");
    std::string line = buf.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  if (next_line() != kCheckpointTag) throw Error(ErrorCode::IoFailure, path.string() + " is not a checkpoint");
  std::map<std::string, std::string> kv;
  std::size_t kernel_weights = 0;
  for (;;) {
    const std::string line = next_line();
    if (line == "end") break;
    if (line.rfind("param ", 0) == 0) continue;  // shapes are re-derived and checked below
    if (line.rfind("kernel.weights ", 0) == 0) {
      kernel_weights = std::stoul(line.substr(15));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::IoFailure, "bad checkpoint header line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorCode::IoFailure, "checkpoint lacks '" + key + "'");
    return it->second;
  };
  Classifier clf;
  clf.spec.width = std::stoi(get("width"));
  clf.spec.height = std::stoi(get("height"));
  clf.spec.bins = std::stoi(get("bins"));
  clf.spec.projection = parse_projection(get("projection"));
  clf.spec.kernel.kind = parse_kernel_kind(get("kernel.kind"));
  clf.spec.kernel.tau = std::stod(get("kernel.tau"));
  const NetShape shape = net_shape_for(clf.spec, std::stoi(get("classes")));
  validate(shape);
  clf.model.shape = shape;
  clf.model.data.resize(layout_of(shape).total);
  for (auto& v : clf.model.data) v = std::bit_cast<float>(read_le<std::uint32_t>(buf, pos));
  clf.spec.kernel.mlp_weights.resize(kernel_weights);
  for (auto& v : clf.spec.kernel.mlp_weights) v = std::bit_cast<double>(read_le<std::uint64_t>(buf, pos));
  if (pos != buf.size()) throw Error(ErrorCode::IoFailure, path.string() + ": trailing bytes after parameters");
  validate(clf.spec);
  clf.model.touch();
  return clf;
}

}  // namespace evadv
