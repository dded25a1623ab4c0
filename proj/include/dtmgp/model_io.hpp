#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dtmgp/config.hpp"
#include "dtmgp/hier_chol.hpp"
#include "dtmgp/model.hpp"
#include "dtmgp/normalize.hpp"
#include "dtmgp/vi_train.hpp"

namespace dtmgp {

inline constexpr int kModelFormatVersion = 1;

// Everything a trained model needs to be reloaded and resumed.
struct ModelFile {
  RunConfig config;
  AffineMap x_map;
  AffineMap y_map;
  std::vector<double> params;
  AdamState optimizer;
};

// Text layout:
//   dtmgp-model <version>
//   [config]      key = value lines, as format_config
//   [normalization]
//   x_scale ... / x_shift ... / y_scale ... / y_shift ...
//   [params] <count>, one value per line
//   [optimizer] <step> <count>, one "m v" pair per line
//   [end]
// Numbers use 17 significant digits, so a round trip is bit-exact.
void write_model(std::ostream& out, const ModelFile& file);
ModelFile parse_model(std::string_view text);

void save_model(const std::string& path, const ModelFile& file);
ModelFile load_model(const std::string& path);

ModelFile make_model_file(const RunConfig& config, const Model& model, AffineMap x_map, AffineMap y_map,
                          AdamState optimizer);
// Model with the file's architecture and parameters.
Model model_from_file(const ModelFile& file);

// Factor file: header "order nnz dim level kernel", then one "row col value"
// line per stored entry.
struct TripletFile {
  SparseUpperTriangular matrix;
  std::size_t dim = 0;
  int level = 0;
  std::string kernel;
};
void write_triplets(std::ostream& out, const TripletFile& file);
TripletFile parse_triplets(std::string_view text);

// Whitespace- or comma-separated numeric table; blank lines and '#' comments
// are skipped. Every row must have the same number of columns.
struct NumericTable {
  std::size_t cols = 0;
  std::vector<double> values;

  std::size_t rows() const { return cols == 0 ? 0 : values.size() / cols; }
};
NumericTable parse_table(std::string_view text);
NumericTable load_table(const std::string& path);

}  // namespace dtmgp
