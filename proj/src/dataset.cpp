#include "sckpd/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

namespace sckpd {

Matrix Dataset::block(Index c, Index s) const {
  if (!blocked()) {
    if (c != 0 || s != 0) throw DimensionError("unblocked data has a single block");
    return obs;
  }
  std::vector<Index> rows;
  for (Index i = 0; i < n(); ++i) {
    if (cycle[static_cast<std::size_t>(i)] == c && season[static_cast<std::size_t>(i)] == s) {
      rows.push_back(i);
    }
  }
  Matrix out(static_cast<Index>(rows.size()), obs.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = obs.row(rows[r]);
  return out;
}

void Dataset::center() {
  if (n() == 0) return;
  if (!blocked()) {
    const Eigen::RowVectorXd mean = obs.colwise().mean();
    obs.rowwise() -= mean;
    return;
  }
  std::vector<std::pair<Index, Index>> keys;
  for (Index i = 0; i < n(); ++i) {
    const std::pair<Index, Index> key{cycle[static_cast<std::size_t>(i)],
                                      season[static_cast<std::size_t>(i)]};
    bool seen = false;
    for (const auto &k : keys) seen = seen || k == key;
    if (!seen) keys.push_back(key);
  }
  for (const auto &[c, s] : keys) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(obs.cols());
    Index count = 0;
    for (Index i = 0; i < n(); ++i) {
      if (cycle[static_cast<std::size_t>(i)] == c && season[static_cast<std::size_t>(i)] == s) {
        mean += obs.row(i);
        ++count;
      }
    }
    mean /= static_cast<double>(count);
    for (Index i = 0; i < n(); ++i) {
      if (cycle[static_cast<std::size_t>(i)] == c && season[static_cast<std::size_t>(i)] == s) {
        obs.row(i) -= mean;
      }
    }
  }
}

std::vector<std::string> observation_columns(Index d1, Index d2) {
  std::vector<std::string> out;
  for (Index i = 0; i < d1; ++i)
    for (Index j = 0; j < d2; ++j) out.push_back("y_" + std::to_string(i) + "_" + std::to_string(j));
  return out;
}

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string &line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::optional<double> parse_number(const std::string &s) {
  if (s.empty()) return std::nullopt;
  const char *begin = s.data();
  if (*begin == '+') ++begin;
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(x)) return std::nullopt;
  return x;
}

Index parse_index(const std::string &s, std::size_t line_no, const std::string &what) {
  const auto v = parse_number(s);
  if (!v || *v < 0.0 || *v != static_cast<double>(static_cast<Index>(*v))) {
    throw ParseError("line " + std::to_string(line_no) + ": " + what +
                         " must be a non-negative integer, got '" + s + "'",
                     line_no);
  }
  return static_cast<Index>(*v);
}

}  // namespace

Dataset parse_dataset_csv(const std::string &text, Index d1, Index d2) {
  if (d1 < 1 || d2 < 1) throw DimensionError("d1 and d2 must be positive");
  const Index width = d1 * d2;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> n_fields;
  Index cycle_col = -1, season_col = -1;
  bool blocked = false;
  std::vector<std::vector<double>> rows;
  std::vector<Index> cycles, seasons;
  std::vector<Index> value_cols;

  auto set_layout = [&](std::size_t fields, std::size_t at, bool header) {
    const Index f = static_cast<Index>(fields);
    if (!header && f == width + 2) {
      cycle_col = 0;
      season_col = 1;
    }
    blocked = cycle_col >= 0;
    if (f != width + (blocked ? 2 : 0)) {
      throw ParseError("line " + std::to_string(at) + ": expected d1*d2 = " +
                           std::to_string(width) + " observation fields" +
                           (blocked ? " plus cycle and season" : "") + ", got " +
                           std::to_string(fields - (blocked ? 2 : 0)),
                       at);
    }
    for (Index c = 0; c < f; ++c)
      if (c != cycle_col && c != season_col) value_cols.push_back(c);
    n_fields = fields;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split(line);
    if (!n_fields) {
      bool numeric = true;
      for (const auto &f : fields) numeric = numeric && parse_number(f).has_value();
      if (!numeric) {
        for (std::size_t c = 0; c < fields.size(); ++c) {
          if (fields[c] == "cycle") cycle_col = static_cast<Index>(c);
          if (fields[c] == "season") season_col = static_cast<Index>(c);
        }
        if ((cycle_col < 0) != (season_col < 0)) {
          throw ParseError("line " + std::to_string(line_no) +
                               ": header needs both cycle and season columns or neither",
                           line_no);
        }
        set_layout(fields.size(), line_no, true);
        continue;
      }
      set_layout(fields.size(), line_no, false);
    }
    if (fields.size() != *n_fields) {
      throw ParseError("line " + std::to_string(line_no) + ": ragged row, expected " +
                           std::to_string(*n_fields) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(width));
    for (Index c : value_cols) {
      const std::string &f = fields[static_cast<std::size_t>(c)];
      const auto v = parse_number(f);
      if (!v) {
        throw ParseError("line " + std::to_string(line_no) + ", field " + std::to_string(c + 1) +
                             ": non-numeric value '" + f + "'",
                         line_no);
      }
      values.push_back(*v);
    }
    if (blocked) {
      cycles.push_back(parse_index(fields[static_cast<std::size_t>(cycle_col)], line_no, "cycle"));
      seasons.push_back(
          parse_index(fields[static_cast<std::size_t>(season_col)], line_no, "season"));
    }
    rows.push_back(std::move(values));
  }

  Dataset d;
  d.d1 = d1;
  d.d2 = d2;
  d.obs.resize(static_cast<Index>(rows.size()), width);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (Index c = 0; c < width; ++c) d.obs(static_cast<Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
  d.cycle = std::move(cycles);
  d.season = std::move(seasons);
  return d;
}

Dataset read_dataset_csv(const std::string &path, Index d1, Index d2) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset_csv(buf.str(), d1, d2);
}

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

std::string format_dataset_csv(const Dataset &data) {
  std::string out;
  std::vector<std::string> header;
  if (data.blocked()) header = {"cycle", "season"};
  for (auto &c : observation_columns(data.d1, data.d2)) header.push_back(c);
  for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
  out += '\n';
  for (Index i = 0; i < data.n(); ++i) {
    if (data.blocked()) {
      out += std::to_string(data.cycle[static_cast<std::size_t>(i)]) + "," +
             std::to_string(data.season[static_cast<std::size_t>(i)]) + ",";
    }
    for (Index c = 0; c < data.obs.cols(); ++c) {
      if (c) out += ',';
      out += format_double(data.obs(i, c));
    }
    out += '\n';
  }
  return out;
}

void write_dataset_csv(const std::string &path, const Dataset &data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write '" + path + "'");
  out << format_dataset_csv(data);
  if (!out) throw Error("io_error", "failed writing '" + path + "'");
}

}  // namespace sckpd
