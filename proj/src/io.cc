#include "dln/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>
#include <vector>

#include "dln/error.hpp"

namespace dln {

using nlohmann::json;

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

json stack_to_json(const WeightStack& s) {
  json layers = json::array();
  for (const Matrix& m : s.layers()) {
    layers.push_back(json(std::vector<double>(m.entries().begin(), m.entries().end())));
  }
  return json{{"dims", s.dims().values()}, {"layers", std::move(layers)}};
}

WeightStack stack_from_json(const json& j) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kConfig, what); };
  if (!j.is_object()) fail("stack: expected an object");
  if (!j.contains("dims") || !j["dims"].is_array()) fail("stack.dims: expected an array");
  if (!j.contains("layers") || !j["layers"].is_array()) fail("stack.layers: expected an array");

  std::vector<std::size_t> dims;
  for (const json& d : j["dims"]) {
    if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) fail("stack.dims: expected positive integers");
    dims.push_back(d.get<std::size_t>());
  }
  if (dims.size() < 2) fail("stack.dims: need at least two widths");
  const json& lj = j["layers"];
  if (lj.size() != dims.size() - 1) {
    fail("stack.layers: expected " + std::to_string(dims.size() - 1) + " layers");
  }

  std::vector<Matrix> layers;
  for (std::size_t k = 0; k < lj.size(); ++k) {
    const std::string key = "stack.layers[" + std::to_string(k) + "]";
    if (!lj[k].is_array()) fail(key + ": expected an array of numbers");
    std::vector<double> v;
    for (const json& x : lj[k]) {
      if (!x.is_number()) fail(key + ": expected numbers");
      v.push_back(x.get<double>());
    }
    if (v.size() != dims[k + 1] * dims[k]) {
      fail(key + ": expected " + std::to_string(dims[k + 1] * dims[k]) + " entries");
    }
    try {
      layers.emplace_back(dims[k + 1], dims[k], std::move(v));
    } catch (const Error& e) {
      fail(key + ": " + e.what());
    }
  }
  return WeightStack(DimChain(std::move(dims)), std::move(layers));
}

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  std::size_t b = s.find_first_not_of(" \t");
  std::size_t e = s.find_last_not_of(" \t");
  if (b == std::string::npos) throw Error(ErrorCode::kIo, where + ": empty field");
  double v = 0.0;
  const char* first = s.data() + b;
  const char* last = s.data() + e + 1;
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw Error(ErrorCode::kIo, where + ": not a number: '" + s + "'");
  }
  return v;
}

}  // namespace

WeightStack read_stack_file(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kConfig, path.string() + ": invalid JSON");
  if (j.contains("stack")) j = j["stack"];
  return stack_from_json(j);
}

Dataset read_dataset_csv(const std::filesystem::path& path, std::size_t d_in, std::size_t d_out) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kIo, path.string() + ": empty file");
  const auto header = split(line, ',');
  if (header.size() != d_in + d_out) {
    throw Error(ErrorCode::kDimensionMismatch,
                path.string() + ": header has " + std::to_string(header.size()) +
                    " columns, expected d_0 + d_L = " + std::to_string(d_in + d_out));
  }

  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split(line, ',');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  where + ": " + std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    }
    std::vector<double> r;
    for (const auto& f : fields) r.push_back(parse_double(f, where));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw Error(ErrorCode::kIo, path.string() + ": no samples");

  const std::size_t n = rows.size();
  std::vector<double> x(d_in * n), y(d_out * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d_in; ++j) x[j * n + i] = rows[i][j];
    for (std::size_t j = 0; j < d_out; ++j) y[j * n + i] = rows[i][d_in + j];
  }
  try {
    return Dataset(Matrix(d_in, n, std::move(x)), Matrix(d_out, n, std::move(y)));
  } catch (const Error& e) {
    throw Error(ErrorCode::kIo, path.string() + ": " + e.what());
  }
}

std::string dataset_to_csv(const Dataset& d) {
  std::string out;
  for (std::size_t j = 0; j < d.input_dim(); ++j) out += (j ? ",x_" : "x_") + std::to_string(j + 1);
  for (std::size_t j = 0; j < d.output_dim(); ++j) out += ",y_" + std::to_string(j + 1);
  out += '\n';
  for (std::size_t i = 0; i < d.samples(); ++i) {
    for (std::size_t j = 0; j < d.input_dim(); ++j) {
      if (j) out += ',';
      out += format_double(d.x()(j, i));
    }
    for (std::size_t j = 0; j < d.output_dim(); ++j) out += ',' + format_double(d.y()(j, i));
    out += '\n';
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error(ErrorCode::kIo, "write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::kIo, "cannot rename into " + path.string());
  }
}

}  // namespace dln
