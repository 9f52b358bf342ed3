#include "latent_score/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace latent_score {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string dataset_to_csv(const Dataset& data) {
  std::string out;
  const std::size_t n = data.num_observed();
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) out += ',';
    out += 'x' + std::to_string(i + 1);
  }
  if (data.has_hidden()) out += ",hidden";
  out += '\n';
  for (std::size_t t = 0; t < data.num_samples(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) out += ',';
      out += std::to_string(data.value(t, i));
    }
    if (data.has_hidden()) {
      out += ',';
      out += std::to_string(data.hidden()[t]);
    }
    out += '\n';
  }
  return out;
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
  write_text_file(path, dataset_to_csv(data));
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    fields.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return fields;
}

int parse_state(const std::string& field, std::size_t line_no) {
  int value = 0;
  const auto* begin = field.data();
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ParseError("'" + field + "' is not a decimal integer", line_no);
  }
  if (value < 0) throw ParseError("negative state index " + field, line_no);
  return value;
}

}  // namespace

Dataset parse_dataset_csv(const std::string& text, const std::optional<std::vector<int>>& observed_arities,
                          std::optional<int> hidden_arity) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty file", 0);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  bool with_hidden = !header.empty() && header.back() == "hidden";
  const std::size_t n = header.size() - (with_hidden ? 1 : 0);
  if (n == 0) throw ParseError("header names no observed variables", line_no);
  for (std::size_t i = 0; i < n; ++i) {
    if (header[i] != "x" + std::to_string(i + 1)) {
      throw ParseError("expected column x" + std::to_string(i + 1) + ", found '" + header[i] + "'", line_no);
    }
  }
  if (observed_arities && observed_arities->size() != n) {
    throw ParseError("header has " + std::to_string(n) + " variables, model expects " +
                         std::to_string(observed_arities->size()),
                     line_no);
  }

  std::vector<int> rows;
  std::vector<int> hidden;
  std::vector<int> max_state(n, 0);
  int max_hidden = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw ParseError("blank record", line_no);
    }
    const auto fields = split_commas(line);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()),
                       line_no);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const int v = parse_state(fields[i], line_no);
      if (observed_arities && v >= (*observed_arities)[i]) {
        throw ParseError("state " + std::to_string(v) + " out of range for x" + std::to_string(i + 1), line_no);
      }
      max_state[i] = std::max(max_state[i], v);
      rows.push_back(v);
    }
    if (with_hidden) {
      const int h = parse_state(fields[n], line_no);
      if (hidden_arity && h >= *hidden_arity) {
        throw ParseError("hidden state " + std::to_string(h) + " out of range", line_no);
      }
      max_hidden = std::max(max_hidden, h);
      hidden.push_back(h);
    }
  }
  if (rows.empty()) throw ParseError("no records (N must be at least 1)", line_no);

  std::vector<int> arities;
  if (observed_arities) {
    arities = *observed_arities;
  } else {
    for (int m : max_state) arities.push_back(std::max(2, m + 1));
  }
  if (with_hidden) {
    return Dataset(std::move(arities), std::move(rows), std::move(hidden), hidden_arity.value_or(max_hidden + 1));
  }
  return Dataset(std::move(arities), std::move(rows));
}

Dataset read_dataset(const std::filesystem::path& path, const std::optional<std::vector<int>>& observed_arities,
                     std::optional<int> hidden_arity) {
  return parse_dataset_csv(read_text_file(path), observed_arities, hidden_arity);
}

std::string model_to_json(const ParamSet& params, const std::optional<FitMetadata>& metadata) {
  const auto& spec = params.spec();
  const auto c = static_cast<std::size_t>(spec.hidden_arity);
  json doc;
  doc["spec"] = {{"hidden_arity", spec.hidden_arity}, {"observed_arities", spec.observed_arities}};
  const auto root = params.row(0);
  doc["root"] = std::vector<double>(root.begin(), root.end());
  json leaves = json::array();
  for (std::size_t var = 0; var < spec.num_observed(); ++var) {
    json table = json::array();
    for (std::size_t h = 0; h < c; ++h) {
      const auto row = params.row(params.leaf_row(var, h));
      table.push_back(std::vector<double>(row.begin(), row.end()));
    }
    leaves.push_back(std::move(table));
  }
  doc["leaves"] = std::move(leaves);
  if (metadata) {
    doc["metadata"] = {{"final_g", metadata->final_g},
                       {"converged", metadata->converged},
                       {"iterations_used", metadata->iterations_used}};
  }
  return doc.dump(2) + "\n";
}

void write_model(const ParamSet& params, const std::filesystem::path& path, const std::optional<FitMetadata>& metadata) {
  write_text_file(path, model_to_json(params, metadata));
}

LoadedModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model JSON: ") + e.what(), 0);
  }
  try {
    ModelSpec spec{doc.at("spec").at("observed_arities").get<std::vector<int>>(),
                   doc.at("spec").at("hidden_arity").get<int>()};
    spec.validate();
    ParamSet params(spec);
    const auto root = doc.at("root").get<std::vector<double>>();
    if (root.size() != static_cast<std::size_t>(spec.hidden_arity)) throw ParseError("root length mismatch", 0);
    std::copy(root.begin(), root.end(), params.row(0).begin());
    const auto& leaves = doc.at("leaves");
    if (leaves.size() != spec.num_observed()) throw ParseError("leaf table count mismatch", 0);
    for (std::size_t var = 0; var < spec.num_observed(); ++var) {
      const auto& table = leaves.at(var);
      if (table.size() != static_cast<std::size_t>(spec.hidden_arity)) {
        throw ParseError("leaf table " + std::to_string(var) + " has wrong row count", 0);
      }
      for (std::size_t h = 0; h < table.size(); ++h) {
        const auto row = table.at(h).get<std::vector<double>>();
        auto dst = params.row(params.leaf_row(var, h));
        if (row.size() != dst.size()) throw ParseError("leaf row length mismatch", 0);
        std::copy(row.begin(), row.end(), dst.begin());
      }
    }
    validate_params(params);
    std::optional<FitMetadata> metadata;
    if (doc.contains("metadata")) {
      const auto& m = doc.at("metadata");
      metadata = FitMetadata{m.at("final_g").get<double>(), m.at("converged").get<bool>(),
                             m.at("iterations_used").get<std::size_t>()};
    }
    return {std::move(params), metadata};
  } catch (const json::exception& e) {
    throw ParseError(std::string("model JSON: ") + e.what(), 0);
  } catch (const ContractError& e) {
    throw ParseError(std::string("model JSON: ") + e.what(), 0);
  }
}

LoadedModel read_model(const std::filesystem::path& path) { return model_from_json(read_text_file(path)); }

}  // namespace latent_score
