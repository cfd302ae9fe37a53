#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

#include "vnet/dqn.hpp"
#include "vnet/tabular.hpp"

namespace vnet {

namespace {

constexpr const char* kQTableMagic = "vnet-qtable";
constexpr const char* kCheckpointMagic = "vnet-fnn";
constexpr int kFormatVersion = 1;

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::uint64_t parse_hex(const std::string& s) { return std::stoull(s, nullptr, 16); }

[[noreturn]] void bad_file(const std::filesystem::path& path, const std::string& why) {
  throw std::runtime_error(path.string() + ": " + why);
}

}  // namespace

void save_qtable(const std::filesystem::path& path, const QTable& q, std::uint64_t config_hash) {
  std::ofstream os(path);
  if (!os) bad_file(path, "cannot open for writing");
  os << "# " << kQTableMagic << ' ' << kFormatVersion << " states=" << q.rows() << " actions=" << q.cols()
     << " config_hash=" << hex(config_hash) << '\n';
  os << std::setprecision(17);
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    for (Eigen::Index a = 0; a < q.cols(); ++a) os << (a ? "," : "") << q(s, a);
    os << '\n';
  }
  if (!os) bad_file(path, "write failed");
}

QTable load_qtable(const std::filesystem::path& path, std::uint64_t* config_hash) {
  std::ifstream is(path);
  if (!is) bad_file(path, "cannot open");
  std::string hash, magic, line;
  int version = 0;
  long states = 0, actions = 0;
  std::getline(is, line);
  {
    std::istringstream hs(line);
    std::string pound, st, ac, ch;
    hs >> pound >> magic >> version >> st >> ac >> ch;
    if (pound != "#" || magic != kQTableMagic) bad_file(path, "not a Q-table file");
    if (version != kFormatVersion) bad_file(path, "unsupported Q-table version");
    if (st.rfind("states=", 0) != 0 || ac.rfind("actions=", 0) != 0 || ch.rfind("config_hash=", 0) != 0)
      bad_file(path, "malformed Q-table header");
    states = std::stol(st.substr(7));
    actions = std::stol(ac.substr(8));
    hash = ch.substr(12);
  }
  QTable q(states, actions);
  for (long s = 0; s < states; ++s) {
    if (!std::getline(is, line)) bad_file(path, "truncated Q-table");
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    for (long a = 0; a < actions; ++a)
      if (!(row >> q(s, a))) bad_file(path, "malformed Q-table row " + std::to_string(s));
  }
  if (config_hash) *config_hash = parse_hex(hash);
  return q;
}

void save_checkpoint(const std::filesystem::path& path, const QNetwork& net, std::uint64_t config_hash) {
  std::ofstream os(path);
  if (!os) bad_file(path, "cannot open for writing");
  os << kCheckpointMagic << ' ' << kFormatVersion << '\n';
  os << "config_hash " << hex(config_hash) << '\n';
  os << "layers " << net.layers().size() << '\n';
  for (const auto& l : net.layers()) os << l.inputs() << ' ' << l.outputs() << ' ' << to_string(l.activation) << '\n';
  const auto theta = net.flatten();
  os << "params " << theta.size() << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < theta.size(); ++i) os << theta[i] << '\n';
  if (!os) bad_file(path, "write failed");
}

QNetwork load_checkpoint(const std::filesystem::path& path, std::uint64_t* config_hash) {
  std::ifstream is(path);
  if (!is) bad_file(path, "cannot open");
  std::string word, hash;
  int version = 0;
  is >> word >> version;
  if (word != kCheckpointMagic) bad_file(path, "not a network checkpoint");
  if (version != kFormatVersion) bad_file(path, "unsupported checkpoint version");
  is >> word >> hash;
  if (word != "config_hash") bad_file(path, "missing config_hash");
  std::size_t layers = 0;
  is >> word >> layers;
  if (word != "layers" || layers == 0) bad_file(path, "missing layer table");
  std::vector<int> sizes;
  std::vector<Activation> acts;
  for (std::size_t l = 0; l < layers; ++l) {
    int in = 0, out = 0;
    std::string act;
    if (!(is >> in >> out >> act)) bad_file(path, "malformed layer table");
    if (l == 0) sizes.push_back(in);
    if (sizes.back() != in) bad_file(path, "layer sizes do not chain");
    sizes.push_back(out);
    acts.push_back(activation_from_string(act));
  }
  QNetwork net(sizes, acts);
  Eigen::Index count = 0;
  is >> word >> count;
  if (word != "params" || count != net.parameter_count()) bad_file(path, "parameter count mismatch");
  Eigen::VectorXd theta(count);
  for (Eigen::Index i = 0; i < count; ++i)
    if (!(is >> theta[i])) bad_file(path, "truncated parameter array");
  net.unflatten(theta);
  if (config_hash) *config_hash = parse_hex(hash);
  return net;
}

void TargetScale::add(double target) {
  recent_.push_back(std::abs(target));
  if (recent_.size() > window_) recent_.pop_front();
}

double TargetScale::temperature() const {
  if (recent_.empty()) return 1.0;
  std::vector<double> v(recent_.begin(), recent_.end());
  const auto k = static_cast<std::size_t>(0.95 * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return std::max(1.0, v[k]);
}

}  // namespace vnet
