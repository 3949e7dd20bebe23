#include "gridpass/trajectory_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "gridpass/errors.hpp"

namespace gridpass {

namespace {

constexpr char kMagic[8] = {'G', 'P', 'T', 'R', 'A', 'J', '0', '1'};
static_assert(std::endian::native == std::endian::little, "binary trajectories assume a little-endian host");

std::string number(double v) {
  char buf[40];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

double to_double(const std::string& s, int line) {
  double v = 0;
  const char* b = s.data();
  const char* e = b + s.size();
  const auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e)
    fail(ErrorKind::Parse, "trajectory line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string single_line(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_string(std::ostream& os, const std::string& s) {
  put<uint32_t>(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) fail(ErrorKind::Parse, "truncated binary trajectory");
  return v;
}

std::string get_string(std::istream& is) {
  const auto n = get<uint32_t>(is);
  if (n > (1u << 24)) fail(ErrorKind::Parse, "corrupt string length in binary trajectory");
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) fail(ErrorKind::Parse, "truncated binary trajectory");
  return s;
}

void write_csv(std::ostream& os, const Trajectory& tr) {
  os << "# gridpass trajectory v1\n";
  os << "# ibrs:";
  for (size_t k = 0; k < tr.ibr_names.size(); ++k) os << (k ? "," : " ") << tr.ibr_names[k];
  os << "\n";
  if (tr.diverged) os << "# diverged: " << number(tr.divergence_time) << " " << single_line(tr.divergence_reason) << "\n";
  for (const auto& w : tr.warnings) os << "# warning: " << single_line(w) << "\n";
  os << "t";
  for (const auto& n : tr.names) os << "," << n;
  os << "\n";
  std::string row;
  for (size_t k = 0; k < tr.t.size(); ++k) {
    row = number(tr.t[k]);
    for (const auto& ch : tr.data) {
      row += ',';
      row += number(ch[k]);
    }
    row += '\n';
    os << row;
  }
}

void write_binary(std::ostream& os, const Trajectory& tr) {
  os.write(kMagic, sizeof kMagic);
  put<uint32_t>(os, static_cast<uint32_t>(tr.names.size()));
  put<uint64_t>(os, tr.t.size());
  put<uint32_t>(os, static_cast<uint32_t>(tr.ibr_names.size()));
  for (const auto& n : tr.ibr_names) put_string(os, n);
  put<uint8_t>(os, tr.diverged ? 1 : 0);
  put<double>(os, tr.divergence_time);
  put_string(os, tr.divergence_reason);
  put<uint32_t>(os, static_cast<uint32_t>(tr.warnings.size()));
  for (const auto& w : tr.warnings) put_string(os, w);
  for (const auto& n : tr.names) put_string(os, n);
  os.write(reinterpret_cast<const char*>(tr.t.data()), static_cast<std::streamsize>(tr.t.size() * sizeof(double)));
  for (const auto& ch : tr.data)
    os.write(reinterpret_cast<const char*>(ch.data()), static_cast<std::streamsize>(ch.size() * sizeof(double)));
}

Trajectory read_binary(std::istream& is) {
  Trajectory tr;
  const auto channels = get<uint32_t>(is);
  const auto samples = get<uint64_t>(is);
  const auto ibrs = get<uint32_t>(is);
  for (uint32_t k = 0; k < ibrs; ++k) tr.ibr_names.push_back(get_string(is));
  tr.diverged = get<uint8_t>(is) != 0;
  tr.divergence_time = get<double>(is);
  tr.divergence_reason = get_string(is);
  const auto warnings = get<uint32_t>(is);
  for (uint32_t k = 0; k < warnings; ++k) tr.warnings.push_back(get_string(is));
  for (uint32_t k = 0; k < channels; ++k) tr.add_channel(get_string(is));
  auto read_column = [&](std::vector<double>& v) {
    v.resize(samples);
    if (samples && !is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(samples * sizeof(double))))
      fail(ErrorKind::Parse, "truncated binary trajectory");
  };
  read_column(tr.t);
  for (auto& ch : tr.data) read_column(ch);
  return tr;
}

Trajectory read_csv(std::istream& is) {
  Trajectory tr;
  std::string line;
  int ln = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# ibrs:", 0) == 0) {
        const std::string list = line.size() > 8 ? line.substr(8) : "";
        if (!list.empty()) tr.ibr_names = split(list, ',');
      } else if (line.rfind("# diverged: ", 0) == 0) {
        const std::string rest = line.substr(12);
        const auto sp = rest.find(' ');
        tr.diverged = true;
        tr.divergence_time = to_double(rest.substr(0, sp), ln);
        tr.divergence_reason = sp == std::string::npos ? "" : rest.substr(sp + 1);
      } else if (line.rfind("# warning: ", 0) == 0) {
        tr.warnings.push_back(line.substr(11));
      }
      continue;
    }
    const auto cells = split(line, ',');
    if (!header) {
      if (cells.empty() || cells[0] != "t") fail(ErrorKind::Parse, "trajectory line " + std::to_string(ln) + ": header must start with 't'");
      for (size_t k = 1; k < cells.size(); ++k) tr.add_channel(cells[k]);
      header = true;
      continue;
    }
    if (cells.size() != tr.names.size() + 1)
      fail(ErrorKind::Parse, "trajectory line " + std::to_string(ln) + ": expected " +
                                 std::to_string(tr.names.size() + 1) + " columns, found " + std::to_string(cells.size()));
    tr.t.push_back(to_double(cells[0], ln));
    for (size_t k = 1; k < cells.size(); ++k) tr.data[k - 1].push_back(to_double(cells[k], ln));
  }
  if (!header) fail(ErrorKind::Parse, "trajectory has no header line");
  return tr;
}

}  // namespace

void write_trajectory(std::ostream& os, const Trajectory& traj, TrajectoryFormat format) {
  if (format == TrajectoryFormat::Csv) write_csv(os, traj);
  else write_binary(os, traj);
  if (!os) fail(ErrorKind::Io, "failed writing trajectory");
}

void write_trajectory(const std::string& path, const Trajectory& traj, TrajectoryFormat format) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
  write_trajectory(os, traj, format);
}

Trajectory read_trajectory(std::istream& is) {
  char head[sizeof kMagic] = {};
  is.read(head, sizeof head);
  if (is.gcount() == sizeof head && std::equal(head, head + sizeof head, kMagic)) return read_binary(is);
  is.clear();
  is.seekg(0);
  return read_csv(is);
}

Trajectory read_trajectory(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::Io, "cannot open '" + path + "'");
  return read_trajectory(is);
}

}  // namespace gridpass
