#include "dtmgp/model_io.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include "dtmgp/error.hpp"

namespace dtmgp {
namespace {

// Line reader that remembers the byte offset of the current line.
class Cursor {
 public:
  explicit Cursor(std::string_view text) : text_(text) {}

  bool at_end() const { return pos_ >= text_.size(); }
  std::size_t offset() const { return line_start_; }

  std::string_view next_line() {
    if (at_end()) throw FormatError("unexpected end of file", text_.size());
    line_start_ = pos_;
    const std::size_t nl = text_.find('\n', pos_);
    if (nl == std::string_view::npos) {
      throw FormatError("unterminated final line (truncated file?)", pos_);
    }
    std::string_view line = text_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return line;
  }

  void expect(std::string_view wanted) {
    const auto line = next_line();
    if (line != wanted) {
      throw FormatError("expected '" + std::string(wanted) + "', found '" + std::string(line) + "'", line_start_);
    }
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_start_ = 0;
};

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    const std::size_t j = i;
    while (i < line.size() && line[i] != ' ') ++i;
    if (i > j) out.push_back(line.substr(j, i - j));
  }
  return out;
}

double number_at(std::string_view token, std::size_t offset) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
    throw FormatError("malformed number '" + std::string(token) + "'", offset);
  }
  return v;
}

std::uint64_t count_at(std::string_view token, std::size_t offset) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
    throw FormatError("malformed count '" + std::string(token) + "'", offset);
  }
  return v;
}

std::vector<double> tagged_row(Cursor& c, std::string_view tag, std::size_t n) {
  const auto line = c.next_line();
  const auto tokens = split_ws(line);
  if (tokens.empty() || tokens[0] != tag || tokens.size() != n + 1) {
    throw FormatError("expected '" + std::string(tag) + "' with " + std::to_string(n) + " values", c.offset());
  }
  std::vector<double> v;
  for (std::size_t i = 1; i < tokens.size(); ++i) v.push_back(number_at(tokens[i], c.offset()));
  return v;
}

void write_row(std::ostream& out, std::string_view tag, const std::vector<double>& v) {
  out << tag;
  for (double x : v) out << ' ' << format_double(x);
  out << '\n';
}

}  // namespace

void write_model(std::ostream& out, const ModelFile& f) {
  out << "dtmgp-model " << kModelFormatVersion << '\n';
  out << "[config]\n" << format_config(f.config);
  out << "[normalization]\n";
  write_row(out, "x_scale", f.x_map.scale);
  write_row(out, "x_shift", f.x_map.shift);
  write_row(out, "y_scale", f.y_map.scale);
  write_row(out, "y_shift", f.y_map.shift);
  out << "[params] " << f.params.size() << '\n';
  for (double v : f.params) out << format_double(v) << '\n';
  out << "[optimizer] " << f.optimizer.step << ' ' << f.optimizer.m.size() << '\n';
  for (std::size_t i = 0; i < f.optimizer.m.size(); ++i) {
    out << format_double(f.optimizer.m[i]) << ' ' << format_double(f.optimizer.v[i]) << '\n';
  }
  out << "[end]\n";
}

ModelFile parse_model(std::string_view text) {
  Cursor c(text);
  ModelFile f;
  {
    const auto tokens = split_ws(c.next_line());
    if (tokens.size() != 2 || tokens[0] != "dtmgp-model") throw FormatError("not a dtmgp model file", 0);
    const auto version = count_at(tokens[1], 0);
    if (version != static_cast<std::uint64_t>(kModelFormatVersion)) {
      throw FormatError("unsupported model format version " + std::to_string(version) + " (expected " +
                        std::to_string(kModelFormatVersion) + ")",
                        0);
    }
  }
  c.expect("[config]");
  const std::size_t config_start = c.offset() + std::string_view("[config]\n").size();
  std::size_t config_end = config_start;
  while (true) {
    const auto line = c.next_line();
    if (line == "[normalization]") {
      config_end = c.offset();
      break;
    }
  }
  try {
    f.config = parse_config(text.substr(config_start, config_end - config_start));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("embedded config: ") + e.what(), config_start);
  }
  const std::size_t d_in = f.config.input_dim;
  const std::size_t d_out = f.config.layers.back().out_width;
  f.x_map.scale = tagged_row(c, "x_scale", d_in);
  f.x_map.shift = tagged_row(c, "x_shift", d_in);
  f.y_map.scale = tagged_row(c, "y_scale", d_out);
  f.y_map.shift = tagged_row(c, "y_shift", d_out);
  {
    const auto tokens = split_ws(c.next_line());
    if (tokens.size() != 2 || tokens[0] != "[params]") throw FormatError("expected '[params] <count>'", c.offset());
    const auto n = count_at(tokens[1], c.offset());
    f.params.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto line = c.next_line();
      f.params.push_back(number_at(line, c.offset()));
    }
  }
  {
    const auto tokens = split_ws(c.next_line());
    if (tokens.size() != 3 || tokens[0] != "[optimizer]") {
      throw FormatError("expected '[optimizer] <step> <count>'", c.offset());
    }
    f.optimizer.step = count_at(tokens[1], c.offset());
    const auto n = count_at(tokens[2], c.offset());
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto pair = split_ws(c.next_line());
      if (pair.size() != 2) throw FormatError("expected 'm v' optimizer moments", c.offset());
      f.optimizer.m.push_back(number_at(pair[0], c.offset()));
      f.optimizer.v.push_back(number_at(pair[1], c.offset()));
    }
  }
  c.expect("[end]");
  if (!c.at_end()) throw FormatError("trailing content after [end]", c.offset() + 6);
  std::size_t expected = 1;
  for (const auto& s : f.config.layers) {
    expected += s.out_width * (2 * static_cast<std::size_t>(sparse_grid_size(s.level, static_cast<int>(s.in_width))) + 1);
  }
  if (f.params.size() != expected) {
    throw FormatError("parameter count " + std::to_string(f.params.size()) + " does not match the architecture (" +
                      std::to_string(expected) + ")",
                      0);
  }
  if (!f.optimizer.m.empty() && f.optimizer.m.size() != expected) {
    throw FormatError("optimizer state does not match the parameter count", 0);
  }
  return f;
}

void save_model(const std::string& path, const ModelFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_model(out, file);
  if (!out) throw IoError("failed writing '" + path + "'");
}

ModelFile load_model(const std::string& path) { return parse_model(read_text_file(path)); }

ModelFile make_model_file(const RunConfig& config, const Model& model, AffineMap x_map, AffineMap y_map,
                          AdamState optimizer) {
  return {config, std::move(x_map), std::move(y_map), model.params(), std::move(optimizer)};
}

Model model_from_file(const ModelFile& file) {
  Model model(file.config.layers, file.config.interlayer);
  if (file.params.size() != model.num_params()) {
    throw FormatError("parameter count " + std::to_string(file.params.size()) + " does not match the architecture (" +
                      std::to_string(model.num_params()) + ")");
  }
  if (!file.optimizer.m.empty() && file.optimizer.m.size() != model.num_params()) {
    throw FormatError("optimizer state does not match the parameter count");
  }
  model.params() = file.params;
  return model;
}

void write_triplets(std::ostream& out, const TripletFile& file) {
  const auto& m = file.matrix;
  out << m.order() << ' ' << m.nnz() << ' ' << file.dim << ' ' << file.level << ' ' << file.kernel << '\n';
  for (const auto& t : m.triplets()) out << t.row << ' ' << t.col << ' ' << format_double(t.value) << '\n';
}

TripletFile parse_triplets(std::string_view text) {
  Cursor c(text);
  const auto head = split_ws(c.next_line());
  if (head.size() != 5) throw FormatError("expected '<order> <nnz> <dim> <level> <kernel>' header", 0);
  TripletFile f;
  const auto order = count_at(head[0], 0);
  const auto nnz = count_at(head[1], 0);
  f.dim = count_at(head[2], 0);
  f.level = static_cast<int>(count_at(head[3], 0));
  f.kernel = std::string(head[4]);
  std::vector<Triplet> triplets;
  for (std::uint64_t k = 0; k < nnz; ++k) {
    const auto t = split_ws(c.next_line());
    if (t.size() != 3) throw FormatError("expected 'row col value'", c.offset());
    triplets.push_back({count_at(t[0], c.offset()), count_at(t[1], c.offset()), number_at(t[2], c.offset())});
  }
  if (!c.at_end()) throw FormatError("trailing content after the triplets", c.offset());
  try {
    f.matrix = SparseUpperTriangular::from_triplets(order, std::move(triplets));
  } catch (const StructuralError& e) {
    throw FormatError(e.what());
  }
  return f;
}

NumericTable parse_table(std::string_view text) {
  NumericTable t;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t start = pos;
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    std::vector<double> row;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == ',' || line[i] == '\r')) ++i;
      const std::size_t j = i;
      while (i < line.size() && !(line[i] == ' ' || line[i] == '\t' || line[i] == ',' || line[i] == '\r')) ++i;
      if (i > j) row.push_back(number_at(line.substr(j, i - j), start + j));
    }
    if (row.empty()) continue;
    if (t.cols == 0) t.cols = row.size();
    if (row.size() != t.cols) {
      throw FormatError("row has " + std::to_string(row.size()) + " columns, expected " + std::to_string(t.cols), start);
    }
    t.values.insert(t.values.end(), row.begin(), row.end());
  }
  return t;
}

NumericTable load_table(const std::string& path) { return parse_table(read_text_file(path)); }

}  // namespace dtmgp
